//! Input alphabet and independent per-variable categorical marginals.
//!
//! Variables and alphabet symbols are 0-based here. The configuration layer
//! translates the 1-based variable numbering used in config files.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on each marginal row's total mass.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A finite input alphabet `{0, .., K-1}` with optional display labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::AlphabetTooSmall(size));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let mut alphabet = Self::new(labels.len())?;
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::BadLabels(format!("duplicate label {label:?}")));
            }
        }
        alphabet.labels = Some(labels);
        Ok(alphabet)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self, symbol: usize) -> Option<&str> {
        self.labels.as_ref()?.get(symbol).map(String::as_str)
    }
}

/// An assignment of alphabet symbols to an ordered list of variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputVector(pub Vec<usize>);

impl InputVector {
    pub fn new(values: Vec<usize>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    /// Projects a full input onto the given variables.
    pub fn project(&self, var_indices: &[usize]) -> Result<InputVector> {
        var_indices
            .iter()
            .map(|&v| {
                self.0.get(v).copied().ok_or(Error::IndexOutOfRange {
                    index: v,
                    limit: self.0.len(),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(InputVector)
    }
}

impl Deref for InputVector {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl std::borrow::Borrow<[usize]> for InputVector {
    fn borrow(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for InputVector {
    fn from(values: Vec<usize>) -> Self {
        Self(values)
    }
}

/// Independent categorical distributions, one row per variable.
///
/// Row `i`, column `j` holds `P(x_i = j)`. Instances are always validated.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    alphabet_size: usize,
    rows: Vec<Vec<f64>>,
}

impl MarginalTable {
    /// Builds a table and runs [`validate_marginals`] on it.
    pub fn new(rows: Vec<Vec<f64>>, alphabet: &Alphabet) -> Result<Self> {
        validate_marginals(
            MarginalTable {
                alphabet_size: alphabet.size(),
                rows,
            },
            alphabet,
        )
    }

    /// `num_vars` identical copies of `row`.
    pub fn repeated(row: &[f64], num_vars: usize, alphabet: &Alphabet) -> Result<Self> {
        Self::new(vec![row.to_vec(); num_vars], alphabet)
    }

    pub fn uniform(num_vars: usize, alphabet: &Alphabet) -> Result<Self> {
        let k = alphabet.size();
        Self::repeated(&vec![1.0 / k as f64; k], num_vars, alphabet)
    }

    pub fn num_vars(&self) -> usize {
        self.rows.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, var: usize) -> Result<&[f64]> {
        self.rows
            .get(var)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index: var,
                limit: self.rows.len(),
            })
    }

    /// `P(x_var = symbol)`.
    pub fn prob(&self, var: usize, symbol: usize) -> Result<f64> {
        let row = self.row(var)?;
        row.get(symbol).copied().ok_or(Error::IndexOutOfRange {
            index: symbol,
            limit: self.alphabet_size,
        })
    }

    /// Checks that every variable index is inside the table.
    pub fn check_vars(&self, var_indices: &[usize]) -> Result<()> {
        match var_indices.iter().find(|&&v| v >= self.rows.len()) {
            Some(&v) => Err(Error::IndexOutOfRange {
                index: v,
                limit: self.rows.len(),
            }),
            None => Ok(()),
        }
    }
}

/// Returns the table iff every row has width K, non-negative entries and
/// unit mass within [`ROW_SUM_TOLERANCE`].
pub fn validate_marginals(table: MarginalTable, alphabet: &Alphabet) -> Result<MarginalTable> {
    let k = alphabet.size();
    if table.alphabet_size != k {
        return Err(Error::DimensionMismatch {
            what: "alphabet size".into(),
            expected: k,
            found: table.alphabet_size,
        });
    }
    if table.rows.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "number of marginal rows".into(),
            expected: 1,
            found: 0,
        });
    }
    for (row, probs) in table.rows.iter().enumerate() {
        if probs.len() != k {
            return Err(Error::DimensionMismatch {
                what: format!("width of marginals row {row}"),
                expected: k,
                found: probs.len(),
            });
        }
        if let Some((col, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::NegativeProbability { row, col, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::RowSumError { row, sum });
        }
    }
    Ok(table)
}

/// Product of the marginals of `vector[t]` at variable `var_indices[t]`,
/// multiplied left to right.
pub fn vector_probability(
    table: &MarginalTable,
    var_indices: &[usize],
    vector: &[usize],
) -> Result<f64> {
    if var_indices.len() != vector.len() {
        return Err(Error::DimensionMismatch {
            what: "vector length".into(),
            expected: var_indices.len(),
            found: vector.len(),
        });
    }
    var_indices
        .iter()
        .zip(vector)
        .try_fold(1.0, |acc, (&var, &symbol)| {
            Ok(acc * table.prob(var, symbol)?)
        })
}

/// Empirical symbol frequencies per variable.
pub fn estimate_marginals(samples: &[InputVector], alphabet: &Alphabet) -> Result<MarginalTable> {
    let first = samples.first().ok_or(Error::EmptySampleSet)?;
    let num_vars = first.len();
    if num_vars == 0 {
        return Err(Error::MalformedSample {
            line: 1,
            reason: "sample has no components".into(),
        });
    }
    let k = alphabet.size();
    let mut counts = vec![vec![0u64; k]; num_vars];
    for (line, sample) in samples.iter().enumerate() {
        if sample.len() != num_vars {
            return Err(Error::MalformedSample {
                line: line + 1,
                reason: format!("expected {num_vars} values, found {}", sample.len()),
            });
        }
        for (var, &symbol) in sample.iter().enumerate() {
            if symbol >= k {
                return Err(Error::MalformedSample {
                    line: line + 1,
                    reason: format!("value {symbol} is outside the alphabet 0..{k}"),
                });
            }
            counts[var][symbol] += 1;
        }
    }
    let n = samples.len() as f64;
    let rows = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / n).collect())
        .collect();
    MarginalTable::new(rows, alphabet)
}
