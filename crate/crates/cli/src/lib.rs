//! Command implementations behind the `memoplan` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use memoplan::config::{
    parse_samples, read_file, to_json_pretty, MarginalsReport, PlanReport, ProblemConfig,
};
use memoplan::{build_plan, estimate_marginals, simulate, Alphabet, Error, MemoPlan, Result};

#[derive(Debug, Parser)]
#[command(
    name = "memoplan",
    version,
    about = "Plan lookup tables for decomposed functions with random inputs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a memoization plan and write the plan report.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Output file, or `-` for standard output.
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Build the plan and check its predicted cost by seeded simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        output: String,
    },
    /// Estimate marginals from a file of observed input vectors.
    Estimate {
        /// Whitespace-separated alphabet indices, one input vector per line.
        #[arg(long)]
        samples: PathBuf,
        /// Alphabet size.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "-")]
        output: String,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan { config, output } => cmd_plan(&config, &output),
        Command::Simulate {
            config,
            samples,
            seed,
            output,
        } => cmd_simulate(&config, samples, seed, &output),
        Command::Estimate { samples, k, output } => cmd_estimate(&samples, k, &output),
    }
}

fn load_plan(config_path: &Path) -> Result<(MemoPlan, memoplan::config::Problem)> {
    let problem = ProblemConfig::load(config_path)?.build()?;
    let plan = build_plan(
        &problem.decomposition,
        &problem.marginals,
        &problem.cost_model,
        problem.budget,
    )?;
    Ok((plan, problem))
}

pub fn plan_report(config_path: &Path) -> Result<String> {
    let (plan, _) = load_plan(config_path)?;
    Ok(to_json_pretty(&PlanReport::from_plan(&plan)?))
}

pub fn simulation_report(config_path: &Path, samples: u64, seed: u64) -> Result<String> {
    if samples == 0 {
        return Err(Error::Config("--samples must be at least 1".into()));
    }
    let (plan, problem) = load_plan(config_path)?;
    let report = simulate(&plan, &problem.marginals, samples, seed)?;
    Ok(to_json_pretty(&report))
}

pub fn estimate_report(samples_path: &Path, k: usize) -> Result<String> {
    let alphabet = Alphabet::new(k)?;
    let samples = parse_samples(&read_file(samples_path)?, k)?;
    let table = estimate_marginals(&samples, &alphabet)?;
    Ok(to_json_pretty(&MarginalsReport::from_table(&table)))
}

pub fn cmd_plan(config_path: &Path, output: &str) -> Result<()> {
    write_output(output, &plan_report(config_path)?)
}

pub fn cmd_simulate(config_path: &Path, samples: u64, seed: u64, output: &str) -> Result<()> {
    write_output(output, &simulation_report(config_path, samples, seed)?)
}

pub fn cmd_estimate(samples_path: &Path, k: usize, output: &str) -> Result<()> {
    write_output(output, &estimate_report(samples_path, k)?)
}

fn write_output(output: &str, text: &str) -> Result<()> {
    if output == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::Io(format!("stdout: {e}")))
    } else {
        std::fs::write(output, text).map_err(|e| Error::Io(format!("{output}: {e}")))
    }
}

/// One-line diagnostic: `error[CODE]: message`.
pub fn diagnostic(err: &Error) -> String {
    let msg = err.to_string().replace('\n', " ");
    format!("error[{}]: {msg}", err.code())
}
