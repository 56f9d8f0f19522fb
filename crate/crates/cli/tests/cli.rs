use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memoplan::config::{MarginalsReport, PlanReport, ProblemConfig};
use serde::Deserialize;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn memoplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memoplan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = memoplan(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn assert_diagnostic(out: &Output, code: &str) -> String {
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with(&format!("error[{code}]: ")), "{stderr}");
    stderr
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut ProblemConfig)) -> PathBuf {
    let mut cfg = ProblemConfig::load(&config("example1.json")).unwrap();
    edit(&mut cfg);
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

/// Simulation report schema; `generator` is an optional extra.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct SimulationSchema {
    samples: u64,
    seed: u64,
    mean_cost: f64,
    stderr: f64,
    predicted_cost: f64,
    hit_rates: Vec<f64>,
    predicted_hit_rates: Vec<f64>,
    #[serde(default)]
    generator: Option<String>,
}

#[test]
fn plan_running_example() {
    let text = stdout_of(&[
        "plan",
        "--config",
        config("example1.json").to_str().unwrap(),
    ]);
    let report: PlanReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.allocation, vec![3, 1]);
    assert!((report.expected_cost - 8.706).abs() < 1e-12);
    assert!((report.objective - 12.294).abs() < 1e-12);
    assert_eq!((report.sizes.monolithic, report.sizes.decomposed), (64, 16));
    assert_eq!(report.tables.len(), 2);
    assert_eq!(report.tables[0].subfunction, 1);
    assert_eq!(report.tables[0].entries.len(), 3);
    assert_eq!(report.tables[1].entries[0].key, vec![0, 0, 0]);
    assert!((report.tables[1].entries[0].prob - 0.729).abs() < 1e-12);
    assert_eq!(report.omega[0].len(), 5);
    assert_eq!(report.plain_cost, 21.0);
}

#[test]
fn plan_with_zero_budget() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |c| c.budget = 0);
    let out = dir.path().join("plan.json");
    stdout_of(&[
        "plan",
        "--config",
        path.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    let report: PlanReport = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.allocation, vec![0, 0]);
    assert_eq!(report.expected_cost, 21.0);
    assert!(report.tables.iter().all(|t| t.entries.is_empty()));
}

#[test]
fn plan_modk_config() {
    let text = stdout_of(&[
        "plan",
        "--config",
        config("ring_mod3.json").to_str().unwrap(),
    ]);
    let report: PlanReport = serde_json::from_str(&text).unwrap();
    assert!(report.allocation.iter().sum::<usize>() <= 10);
    // the third sub-function is cheaper to compute than to look up
    assert_eq!(report.allocation[2], 0);
    for table in &report.tables {
        for e in &table.entries {
            assert!(e.value < 3.0 && e.value.fract() == 0.0);
        }
    }
}

#[test]
fn row_sum_error_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), |c| c.marginals[2] = vec![0.6, 0.6]);
    let out = memoplan(&["plan", "--config", path.to_str().unwrap()]);
    let msg = assert_diagnostic(&out, "E_ROW_SUM");
    assert!(msg.contains("row 3"), "{msg}");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_diagnostic(
        &memoplan(&["plan", "--config", missing.to_str().unwrap()]),
        "E_IO",
    );

    let garbled = dir.path().join("garbled.json");
    std::fs::write(&garbled, "{\"alphabet_size\": 2, \"num_vars\": 1.5.2}").unwrap();
    assert_diagnostic(
        &memoplan(&["plan", "--config", garbled.to_str().unwrap()]),
        "E_PARSE",
    );

    let path = write_config(dir.path(), |c| c.subfunctions[0].expr = "x1 +* x2".into());
    assert_diagnostic(
        &memoplan(&["plan", "--config", path.to_str().unwrap()]),
        "E_EXPR_SYNTAX",
    );

    let path = write_config(dir.path(), |c| c.lookup_cost = 0.0);
    assert_diagnostic(
        &memoplan(&["plan", "--config", path.to_str().unwrap()]),
        "E_COST",
    );

    let path = write_config(dir.path(), |c| c.marginals[0] = vec![1.5, -0.5]);
    assert_diagnostic(
        &memoplan(&[
            "simulate",
            "--config",
            path.to_str().unwrap(),
            "--samples",
            "5",
        ]),
        "E_NEGATIVE_PROB",
    );

    let ok = config("example1.json");
    assert_diagnostic(
        &memoplan(&[
            "simulate",
            "--config",
            ok.to_str().unwrap(),
            "--samples",
            "0",
        ]),
        "E_CONFIG",
    );
}

#[test]
fn simulate_running_example() {
    let text = stdout_of(&[
        "simulate",
        "--config",
        config("example1.json").to_str().unwrap(),
        "--samples",
        "100000",
        "--seed",
        "42",
    ]);
    let report: SimulationSchema = serde_json::from_str(&text).unwrap();
    assert_eq!((report.samples, report.seed), (100_000, 42));
    assert_eq!(
        report.generator.as_deref(),
        Some(memoplan::planner::GENERATOR_NAME)
    );
    assert!((report.mean_cost - 8.706).abs() <= 3.0 * report.stderr);
    assert!((report.predicted_cost - 8.706).abs() < 1e-12);
}

#[test]
fn simulate_single_sample() {
    let text = stdout_of(&[
        "simulate",
        "--config",
        config("example1.json").to_str().unwrap(),
        "--samples",
        "1",
    ]);
    let s: SimulationSchema = serde_json::from_str(&text).unwrap();
    assert_eq!(s.samples, 1);
    // every possible single-sample cost: 1 + {1, 10} + {1, 10}
    assert!([3.0, 12.0, 21.0].contains(&s.mean_cost));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = config("example1.json");
    let cfg = cfg.to_str().unwrap();
    let plan = ["plan", "--config", cfg];
    assert_eq!(memoplan(&plan).stdout, memoplan(&plan).stdout);
    let sim = [
        "simulate",
        "--config",
        cfg,
        "--samples",
        "30000",
        "--seed",
        "7",
    ];
    let a = memoplan(&sim);
    assert!(a.status.success());
    assert_eq!(a.stdout, memoplan(&sim).stdout);
}

#[test]
fn estimate_counts_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.txt");
    std::fs::write(&samples, "0\n0\n1\n0\n").unwrap();
    let text = stdout_of(&[
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--k",
        "2",
    ]);
    let report: MarginalsReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.marginals, vec![vec![0.75, 0.25]]);
    assert_eq!((report.alphabet_size, report.num_vars), (2, 1));

    // the estimate splices straight into a config
    let mut cfg = ProblemConfig::load(&config("example1.json")).unwrap();
    std::fs::write(
        &samples,
        "0 1 0 0 0 1\n1 1 0 0 0 0\n0 0 0 1 0 0\n0 1 1 0 0 0\n",
    )
    .unwrap();
    let text = stdout_of(&[
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--k",
        "2",
    ]);
    let report: MarginalsReport = serde_json::from_str(&text).unwrap();
    cfg.marginals = report.marginals;
    assert!(cfg.build().is_ok());
}

#[test]
fn estimate_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.txt");

    std::fs::write(&samples, "").unwrap();
    let args = [
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--k",
        "2",
    ];
    assert_diagnostic(&memoplan(&args), "E_EMPTY_SAMPLES");

    std::fs::write(&samples, "0 1\n1 1\n0 2\n").unwrap();
    let msg = assert_diagnostic(&memoplan(&args), "E_MALFORMED_SAMPLE");
    assert!(msg.contains("sample 3"), "{msg}");

    std::fs::write(&samples, "0 1\n1\n").unwrap();
    assert_diagnostic(&memoplan(&args), "E_MALFORMED_SAMPLE");

    std::fs::write(&samples, "0 1\n").unwrap();
    let bad_k = [
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--k",
        "1",
    ];
    assert_diagnostic(&memoplan(&bad_k), "E_ALPHABET");
}

#[test]
fn documented_configs_round_trip() {
    for name in ["example1.json", "ring_mod3.json"] {
        let cfg = ProblemConfig::load(&config(name)).unwrap();
        let again = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again, "{name}");
        assert!(cfg.build().is_ok());
    }
}

#[test]
fn unknown_subcommand_fails() {
    let out = memoplan(&["optimize"]);
    assert!(!out.status.success());
}
