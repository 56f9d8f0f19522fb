//! Decomposition data model and the arithmetic expressions that make the
//! sub-functions and the combine function executable.
//!
//! Expression grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term ('+' term)*
//! term   := factor ('*' factor)*
//! factor := INTEGER | 'x' INTEGER | '(' expr ')'
//! ```
//!
//! `x<i>` is 1-based: inside a sub-function body it names the i-th variable
//! of that sub-function's own variable list; inside the combine expression
//! it names the output of the i-th sub-function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::InputVector;
use crate::error::{Error, Result};

/// How `+` and `*` are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Ordinary real arithmetic.
    Real,
    /// Arithmetic in the ring of integers modulo the given modulus.
    ModK(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Constant(f64),
    /// 0-based binding position.
    Var(usize),
    Add(Vec<Expression>),
    Mul(Vec<Expression>),
}

impl Expression {
    pub fn var(position: usize) -> Self {
        Expression::Var(position)
    }

    pub fn parse(input: &str) -> Result<Self> {
        Parser::new(input).parse()
    }

    /// Largest 0-based variable position referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expression::Constant(_) => None,
            Expression::Var(i) => Some(*i),
            Expression::Add(children) | Expression::Mul(children) => {
                children.iter().filter_map(Expression::max_var).max()
            }
        }
    }

    pub fn eval(&self, bindings: &[f64], mode: Mode) -> Result<f64> {
        match mode {
            Mode::Real => self.eval_real(bindings),
            Mode::ModK(k) => {
                if k == 0 {
                    return Err(Error::InvalidDecomposition(
                        "modulus must be positive".into(),
                    ));
                }
                self.eval_mod(bindings, k).map(|v| v as f64)
            }
        }
    }

    fn eval_real(&self, bindings: &[f64]) -> Result<f64> {
        Ok(match self {
            Expression::Constant(c) => *c,
            Expression::Var(i) => *bindings.get(*i).ok_or(Error::UnboundVariable(i + 1))?,
            Expression::Add(children) => children
                .iter()
                .try_fold(0.0, |acc, c| Ok::<_, Error>(acc + c.eval_real(bindings)?))?,
            Expression::Mul(children) => children
                .iter()
                .try_fold(1.0, |acc, c| Ok::<_, Error>(acc * c.eval_real(bindings)?))?,
        })
    }

    fn eval_mod(&self, bindings: &[f64], k: u64) -> Result<u64> {
        let k128 = k as u128;
        Ok(match self {
            Expression::Constant(c) => to_residue(*c, k)?,
            Expression::Var(i) => {
                to_residue(*bindings.get(*i).ok_or(Error::UnboundVariable(i + 1))?, k)?
            }
            Expression::Add(children) => children.iter().try_fold(0u64, |acc, c| {
                Ok::<_, Error>(((acc as u128 + c.eval_mod(bindings, k)? as u128) % k128) as u64)
            })?,
            Expression::Mul(children) => children.iter().try_fold(1 % k, |acc, c| {
                Ok::<_, Error>(((acc as u128 * c.eval_mod(bindings, k)? as u128) % k128) as u64)
            })?,
        })
    }
}

fn to_residue(value: f64, k: u64) -> Result<u64> {
    if !value.is_finite() || value.fract() != 0.0 || value < 0.0 || value >= 2f64.powi(64) {
        return Err(Error::NonIntegerOperand(value));
    }
    Ok(value as u64 % k)
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expression::parse(s)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_joined(
            f: &mut fmt::Formatter<'_>,
            children: &[Expression],
            sep: &str,
            wrap_sums: bool,
        ) -> fmt::Result {
            for (i, c) in children.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                if wrap_sums && matches!(c, Expression::Add(_)) {
                    write!(f, "({c})")?;
                } else {
                    write!(f, "{c}")?;
                }
            }
            Ok(())
        }
        match self {
            Expression::Constant(c) => write!(f, "{c}"),
            Expression::Var(i) => write!(f, "x{}", i + 1),
            Expression::Add(children) => write_joined(f, children, " + ", false),
            Expression::Mul(children) => write_joined(f, children, "*", true),
        }
    }
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Self {
            input,
            bytes: input.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, reason: impl Into<String>) -> Error {
        Error::ExpressionSyntax {
            input: self.input.to_string(),
            pos: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Expression> {
        let expr = self.expr()?;
        match self.peek() {
            None => Ok(expr),
            Some(c) => Err(self.error(format!("unexpected {:?}", c as char))),
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some(b'+') {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expression::Add(terms)
        })
    }

    fn term(&mut self) -> Result<Expression> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expression::Mul(factors)
        })
    }

    fn factor(&mut self) -> Result<Expression> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'x') => {
                self.pos += 1;
                let index = self.integer()?;
                if index == 0 {
                    return Err(self.error("variables are numbered from x1"));
                }
                Ok(Expression::Var(index as usize - 1))
            }
            Some(c) if c.is_ascii_digit() => Ok(Expression::Constant(self.integer()? as f64)),
            Some(c) => Err(self.error(format!("unexpected {:?}", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        self.input[start..self.pos]
            .parse()
            .map_err(|_| self.error("integer too large"))
    }
}

/// One component `f_j` of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SubFunction {
    /// 0-based global variable indices, in argument order.
    pub var_indices: Vec<usize>,
    /// Body over local positions `0..var_indices.len()`.
    pub body: Expression,
    /// Cost of computing this sub-function from scratch, in abstract units.
    pub compute_cost: f64,
}

impl SubFunction {
    pub fn new(var_indices: Vec<usize>, body: Expression, compute_cost: f64) -> Self {
        Self {
            var_indices,
            body,
            compute_cost,
        }
    }

    pub fn arity(&self) -> usize {
        self.var_indices.len()
    }

    /// Evaluates the body on a sub-vector already projected to this
    /// sub-function's variables.
    pub fn eval_local(&self, local: &[usize], mode: Mode) -> Result<f64> {
        let bindings: Vec<f64> = local.iter().map(|&s| s as f64).collect();
        self.body.eval(&bindings, mode)
    }
}

/// `f(x) = F(f_1(x_1), .., f_D(x_D))` with per-component costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    num_vars: usize,
    alphabet_size: usize,
    sub_functions: Vec<SubFunction>,
    combine: Expression,
    combine_cost: f64,
    mode: Mode,
}

impl Decomposition {
    /// Validates and assembles a decomposition. Sub-functions may share
    /// variables with each other but not repeat one within themselves.
    pub fn new(
        num_vars: usize,
        alphabet_size: usize,
        sub_functions: Vec<SubFunction>,
        combine: Expression,
        combine_cost: f64,
        mode: Mode,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidDecomposition(msg));
        if alphabet_size < 2 {
            return Err(Error::AlphabetTooSmall(alphabet_size));
        }
        if num_vars == 0 {
            return invalid("at least one input variable is required".into());
        }
        if sub_functions.is_empty() {
            return invalid("at least one sub-function is required".into());
        }
        for (j, sf) in sub_functions.iter().enumerate() {
            if sf.var_indices.is_empty() {
                return invalid(format!("sub-function {} has no variables", j + 1));
            }
            for (t, &v) in sf.var_indices.iter().enumerate() {
                if v >= num_vars {
                    return invalid(format!(
                        "sub-function {} uses variable {} but there are only {num_vars}",
                        j + 1,
                        v + 1
                    ));
                }
                if sf.var_indices[..t].contains(&v) {
                    return invalid(format!(
                        "sub-function {} lists variable {} twice",
                        j + 1,
                        v + 1
                    ));
                }
            }
            if !(sf.compute_cost.is_finite() && sf.compute_cost > 0.0) {
                return Err(Error::InvalidCost(format!(
                    "sub-function {} compute cost must be positive, got {}",
                    j + 1,
                    sf.compute_cost
                )));
            }
            if let Some(p) = sf.body.max_var().filter(|&p| p >= sf.arity()) {
                return invalid(format!(
                    "sub-function {} body references x{} but takes {} arguments",
                    j + 1,
                    p + 1,
                    sf.arity()
                ));
            }
        }
        if let Some(p) = combine.max_var().filter(|&p| p >= sub_functions.len()) {
            return invalid(format!(
                "combine expression references x{} but there are {} sub-functions",
                p + 1,
                sub_functions.len()
            ));
        }
        if !(combine_cost.is_finite() && combine_cost >= 0.0) {
            return Err(Error::InvalidCost(format!(
                "combine cost must be non-negative, got {combine_cost}"
            )));
        }
        Ok(Self {
            num_vars,
            alphabet_size,
            sub_functions,
            combine,
            combine_cost,
            mode,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn sub_functions(&self) -> &[SubFunction] {
        &self.sub_functions
    }

    pub fn combine(&self) -> &Expression {
        &self.combine
    }

    pub fn combine_cost(&self) -> f64 {
        self.combine_cost
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Cost of evaluating every component from scratch plus the combine step.
    pub fn plain_cost(&self) -> f64 {
        self.combine_cost
            + self
                .sub_functions
                .iter()
                .map(|sf| sf.compute_cost)
                .sum::<f64>()
    }

    pub fn check_input(&self, input: &[usize]) -> Result<()> {
        if input.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                what: "input length".into(),
                expected: self.num_vars,
                found: input.len(),
            });
        }
        match input.iter().find(|&&s| s >= self.alphabet_size) {
            Some(&s) => Err(Error::IndexOutOfRange {
                index: s,
                limit: self.alphabet_size,
            }),
            None => Ok(()),
        }
    }

    /// Applies the combine expression to sub-function outputs.
    pub fn combine_outputs(&self, outputs: &[f64]) -> Result<f64> {
        self.combine.eval(outputs, self.mode)
    }
}

/// Computes `F(f_1(x_1), .., f_D(x_D))` with no memoization; the cost is
/// always [`Decomposition::plain_cost`].
pub fn evaluate_plain(decomp: &Decomposition, input: &InputVector) -> Result<(f64, f64)> {
    decomp.check_input(input)?;
    let outputs = decomp
        .sub_functions
        .iter()
        .map(|sf| sf.eval_local(&input.project(&sf.var_indices)?, decomp.mode))
        .collect::<Result<Vec<_>>>()?;
    Ok((decomp.combine_outputs(&outputs)?, decomp.plain_cost()))
}

/// Number of entries a full table needs for `f` (K^N) and for all
/// components together (sum of K^{l_j}).
pub fn table_size(decomp: &Decomposition) -> Result<(u64, u64)> {
    let k = decomp.alphabet_size as u64;
    let monolithic = checked_pow(k, decomp.num_vars)?;
    let decomposed = decomp.sub_functions.iter().try_fold(0u64, |acc, sf| {
        acc.checked_add(checked_pow(k, sf.arity())?)
            .ok_or(Error::Overflow)
    })?;
    Ok((monolithic, decomposed))
}

pub(crate) fn checked_pow(base: u64, exp: usize) -> Result<u64> {
    u32::try_from(exp)
        .ok()
        .and_then(|e| base.checked_pow(e))
        .ok_or(Error::Overflow)
}
