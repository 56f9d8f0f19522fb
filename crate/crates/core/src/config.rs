//! JSON problem configuration and report documents.
//!
//! Variable numbers in config files are 1-based (`"vars": [1, 2, 3]`); they
//! are shifted to the 0-based indices used everywhere else when a config is
//! turned into a [`Problem`]. Report documents use 1-based sub-function
//! numbers and raw alphabet indices as table keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::CostModel;
use crate::distributions::{Alphabet, InputVector, MarginalTable};
use crate::error::{Error, Result};
use crate::expressions::{table_size, Decomposition, Expression, Mode, SubFunction};
use crate::planner::MemoPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithmeticMode {
    Real,
    Modk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubFunctionConfig {
    /// 1-based global variable numbers.
    pub vars: Vec<usize>,
    pub expr: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub alphabet_size: usize,
    pub num_vars: usize,
    pub marginals: Vec<Vec<f64>>,
    pub subfunctions: Vec<SubFunctionConfig>,
    pub combine_expr: String,
    pub combine_cost: f64,
    pub lookup_cost: f64,
    pub budget: usize,
    #[serde(default = "default_mode")]
    pub mode: ArithmeticMode,
}

fn default_mode() -> ArithmeticMode {
    ArithmeticMode::Real
}

/// A validated, ready-to-plan problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub alphabet: Alphabet,
    pub marginals: MarginalTable,
    pub decomposition: Decomposition,
    pub cost_model: CostModel,
    pub budget: usize,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?)
    }

    pub fn to_json(&self) -> String {
        to_json_pretty(self)
    }

    pub fn build(&self) -> Result<Problem> {
        let alphabet = Alphabet::new(self.alphabet_size)?;
        if self.marginals.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                what: "number of marginal rows".into(),
                expected: self.num_vars,
                found: self.marginals.len(),
            });
        }
        let marginals = MarginalTable::new(self.marginals.clone(), &alphabet)?;
        let sub_functions = self
            .subfunctions
            .iter()
            .enumerate()
            .map(|(j, sf)| {
                let vars = sf
                    .vars
                    .iter()
                    .map(|&v| {
                        v.checked_sub(1).ok_or_else(|| {
                            Error::InvalidDecomposition(format!(
                                "sub-function {}: variables are numbered from 1",
                                j + 1
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SubFunction::new(
                    vars,
                    Expression::parse(&sf.expr)?,
                    sf.cost,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mode = match self.mode {
            ArithmeticMode::Real => Mode::Real,
            ArithmeticMode::Modk => Mode::ModK(self.alphabet_size as u64),
        };
        let decomposition = Decomposition::new(
            self.num_vars,
            self.alphabet_size,
            sub_functions,
            Expression::parse(&self.combine_expr)?,
            self.combine_cost,
            mode,
        )?;
        Ok(Problem {
            alphabet,
            marginals,
            decomposition,
            cost_model: CostModel::new(self.lookup_cost)?,
            budget: self.budget,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub key: Vec<usize>,
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    /// 1-based.
    pub subfunction: usize,
    pub entries: Vec<EntryReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub monolithic: u64,
    pub decomposed: u64,
}

/// The `plan` command's output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub allocation: Vec<usize>,
    pub objective: f64,
    pub expected_cost: f64,
    pub tables: Vec<TableReport>,
    pub sizes: SizeReport,
    pub budget: usize,
    pub plain_cost: f64,
    pub hit_probabilities: Vec<f64>,
    /// `omega[j][m]` for `m = 0..=min(M, K^{l_j})`.
    pub omega: Vec<Vec<f64>>,
}

impl PlanReport {
    pub fn from_plan(plan: &MemoPlan) -> Result<Self> {
        let (monolithic, decomposed) = table_size(plan.decomposition())?;
        Ok(Self {
            allocation: plan.allocation().m.clone(),
            objective: plan.allocation().objective,
            expected_cost: plan.expected_cost(),
            tables: plan
                .tables()
                .iter()
                .enumerate()
                .map(|(j, t)| TableReport {
                    subfunction: j + 1,
                    entries: t
                        .iter()
                        .map(|(k, e)| EntryReport {
                            key: k.0.clone(),
                            value: e.value,
                            prob: e.probability,
                        })
                        .collect(),
                })
                .collect(),
            sizes: SizeReport {
                monolithic,
                decomposed,
            },
            budget: plan.budget(),
            plain_cost: plan.decomposition().plain_cost(),
            hit_probabilities: plan.hit_probabilities().to_vec(),
            omega: plan.omega().gains().to_vec(),
        })
    }
}

/// The `estimate` command's output: the marginal fields of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsReport {
    pub alphabet_size: usize,
    pub num_vars: usize,
    pub marginals: Vec<Vec<f64>>,
}

impl MarginalsReport {
    pub fn from_table(table: &MarginalTable) -> Self {
        Self {
            alphabet_size: table.alphabet_size(),
            num_vars: table.num_vars(),
            marginals: table.rows().to_vec(),
        }
    }
}

/// Parses whitespace-separated alphabet indices, one vector per line.
/// Blank lines are skipped; line numbers in errors are 1-based file lines.
pub fn parse_samples(text: &str, alphabet_size: usize) -> Result<Vec<InputVector>> {
    let mut samples = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| {
                let v: usize = tok.parse().map_err(|_| Error::MalformedSample {
                    line: line_no,
                    reason: format!("{tok:?} is not a non-negative integer"),
                })?;
                if v >= alphabet_size {
                    return Err(Error::MalformedSample {
                        line: line_no,
                        reason: format!("value {v} is outside the alphabet 0..{alphabet_size}"),
                    });
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::MalformedSample {
                    line: line_no,
                    reason: format!("expected {w} values, found {}", values.len()),
                })
            }
            _ => {}
        }
        samples.push(InputVector(values));
    }
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    Ok(samples)
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that round-trips, at most 17 significant digits.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}
