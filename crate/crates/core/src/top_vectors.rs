//! Most probable input vectors of a sub-function.
//!
//! A sub-function over variables `(y_1, .., y_n)` is viewed as a trellis with
//! one layer per variable and one node per alphabet symbol; a path through
//! it spells an input vector whose weight is the product of the marginals
//! along the way. [`top_l_vectors`] runs a list-Viterbi recursion that keeps,
//! for every layer and symbol, the `L` best partial paths ending there
//! together with back-pointers to the predecessor symbol and its rank.
//!
//! Ordering is total and deterministic: higher probability first, and among
//! exactly equal probabilities the lexicographically smaller vector first.
//! "Exactly equal" is decided on the exact product of the `f64` marginals
//! (see [`crate::exact`]), so permuted factor sets always tie. Vectors of
//! probability zero never enter the trellis; when fewer than `L` positive
//! vectors exist they are appended afterwards in lexicographic order.
//!
//! Reported probabilities are the correctly rounded exact products, so
//! tied vectors carry bit-identical values and every list is nonincreasing.

use std::cell::OnceCell;
use std::cmp::Ordering;

use serde::Serialize;

use crate::distributions::{InputVector, MarginalTable};
use crate::error::{Error, Result};
use crate::exact::{coarse_cmp, ExactProduct};

/// Default limit on `K^n` for [`brute_force_top_l`].
pub const DEFAULT_VECTOR_ORACLE_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub vector: InputVector,
    pub probability: f64,
}

/// Vectors in rank order with their running probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedVectorList {
    entries: Vec<RankedEntry>,
    /// `cumulative[m]` is the mass of the first `m` entries; `cumulative[0] == 0`.
    cumulative: Vec<f64>,
}

impl RankedVectorList {
    pub fn new(entries: Vec<RankedEntry>) -> Self {
        let mut cumulative = Vec::with_capacity(entries.len() + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for e in &entries {
            acc += e.probability;
            cumulative.push(acc);
        }
        Self {
            entries,
            cumulative,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Prefix masses, `len() + 1` values starting at 0.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self::new(self.entries[..len.min(self.entries.len())].to_vec())
    }
}

/// Hit probability of a table holding the first `m` vectors of `ranked`.
pub fn cumulative_hit_probability(ranked: &RankedVectorList, m: usize) -> Result<f64> {
    ranked
        .cumulative
        .get(m)
        .copied()
        .ok_or(Error::RankOutOfRange {
            rank: m,
            len: ranked.len(),
        })
}

#[derive(Debug, Clone)]
struct Node {
    prob: f64,
    back_symbol: usize,
    back_rank: usize,
    /// Filled on demand when a comparison is too close for `prob`.
    exact: OnceCell<ExactProduct>,
}

impl Node {
    fn new(prob: f64, back_symbol: usize, back_rank: usize) -> Self {
        Node {
            prob,
            back_symbol,
            back_rank,
            exact: OnceCell::new(),
        }
    }
}

/// List-Viterbi state for one sub-function.
///
/// `steps[t][i]` holds up to `L` partial paths of length `t + 1` ending in
/// symbol `i`, best first. A missing rank is the null sentinel.
#[derive(Debug, Clone)]
pub struct Trellis<'a> {
    table: &'a MarginalTable,
    var_indices: &'a [usize],
    list_len: usize,
    steps: Vec<Vec<Vec<Node>>>,
}

impl<'a> Trellis<'a> {
    pub fn build(
        table: &'a MarginalTable,
        var_indices: &'a [usize],
        list_len: usize,
    ) -> Result<Self> {
        if var_indices.is_empty() {
            return Err(Error::EmptyVariableList);
        }
        table.check_vars(var_indices)?;
        let k = table.alphabet_size();
        let mut trellis = Trellis {
            table,
            var_indices,
            list_len,
            steps: Vec::with_capacity(var_indices.len()),
        };

        let first = table.row(var_indices[0])?;
        trellis.steps.push(
            (0..k)
                .map(|i| {
                    if first[i] > 0.0 && list_len > 0 {
                        vec![Node::new(first[i], 0, 0)]
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
        );

        for (t, &var) in var_indices.iter().enumerate().skip(1) {
            let row = table.row(var)?;
            // every symbol extends the same predecessors by a common positive
            // factor, so the ranking of candidates does not depend on it
            let predecessors = trellis.merge_best(t - 1, list_len);
            let layer = (0..k)
                .map(|i| {
                    if row[i] > 0.0 {
                        predecessors
                            .iter()
                            .map(|&(j, r)| {
                                Node::new(trellis.steps[t - 1][j][r].prob * row[i], j, r)
                            })
                            .collect()
                    } else {
                        Vec::new()
                    }
                })
                .collect();
            trellis.steps.push(layer);
        }
        Ok(trellis)
    }

    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn list_len(&self) -> usize {
        self.list_len
    }

    /// Probability of the `rank`-th best path of length `t + 1` ending in
    /// `symbol`, or `None` for the null sentinel.
    pub fn psi(&self, t: usize, symbol: usize, rank: usize) -> Option<f64> {
        self.node(t, symbol, rank).map(|n| n.prob)
    }

    /// `(predecessor symbol, predecessor rank)` of the same path; `None` at
    /// the first layer or for the null sentinel.
    pub fn back_pointer(&self, t: usize, symbol: usize, rank: usize) -> Option<(usize, usize)> {
        if t == 0 {
            return None;
        }
        self.node(t, symbol, rank)
            .map(|n| (n.back_symbol, n.back_rank))
    }

    fn node(&self, t: usize, symbol: usize, rank: usize) -> Option<&Node> {
        self.steps.get(t)?.get(symbol)?.get(rank)
    }

    /// Follows back-pointers from `(t, symbol, rank)` to the first layer.
    pub fn path(&self, t: usize, symbol: usize, rank: usize) -> Vec<usize> {
        let mut path = vec![0; t + 1];
        let (mut sym, mut r) = (symbol, rank);
        for step in (0..=t).rev() {
            path[step] = sym;
            if step > 0 {
                let n = &self.steps[step][sym][r];
                sym = n.back_symbol;
                r = n.back_rank;
            }
        }
        path
    }

    /// `Less` means `a` ranks ahead of `b`.
    fn cmp_nodes(&self, t: usize, a: (usize, usize), b: (usize, usize)) -> Ordering {
        if a.0 == b.0 {
            // same list, already in rank order
            return a.1.cmp(&b.1);
        }
        let pa = self.steps[t][a.0][a.1].prob;
        let pb = self.steps[t][b.0][b.1].prob;
        if let Some(ord) = coarse_cmp(pa, pb, t + 1) {
            return ord.reverse();
        }
        self.exact(t, b.0, b.1)
            .cmp(self.exact(t, a.0, a.1))
            .then_with(|| self.cmp_paths(t, a, b))
    }

    /// Lexicographic order of two paths of length `t + 1`, walked backwards;
    /// the last difference seen is the first one in reading order.
    fn cmp_paths(&self, t: usize, a: (usize, usize), b: (usize, usize)) -> Ordering {
        let (mut a, mut b) = (a, b);
        let mut ord = Ordering::Equal;
        for step in (0..=t).rev() {
            if a == b {
                break;
            }
            if a.0 != b.0 {
                ord = a.0.cmp(&b.0);
            }
            if step > 0 {
                let na = &self.steps[step][a.0][a.1];
                let nb = &self.steps[step][b.0][b.1];
                a = (na.back_symbol, na.back_rank);
                b = (nb.back_symbol, nb.back_rank);
            }
        }
        ord
    }

    fn exact(&self, t: usize, symbol: usize, rank: usize) -> &ExactProduct {
        let node = &self.steps[t][symbol][rank];
        node.exact.get_or_init(|| {
            let factor = self.table.rows()[self.var_indices[t]][symbol];
            if t == 0 {
                ExactProduct::one().times(factor)
            } else {
                self.exact(t - 1, node.back_symbol, node.back_rank)
                    .clone()
                    .times(factor)
            }
        })
    }

    /// Selects the `count` best nodes of layer `t` across all symbols by
    /// merging the per-symbol lists, which are each sorted already.
    fn merge_best(&self, t: usize, count: usize) -> Vec<(usize, usize)> {
        let layer = &self.steps[t];
        let mut heads = vec![0usize; layer.len()];
        let mut out = Vec::with_capacity(count.min(layer.iter().map(Vec::len).sum()));
        while out.len() < count {
            let mut best: Option<(usize, usize)> = None;
            for (j, list) in layer.iter().enumerate() {
                if heads[j] >= list.len() {
                    continue;
                }
                let cand = (j, heads[j]);
                best = match best {
                    Some(b) if self.cmp_nodes(t, b, cand) != Ordering::Greater => Some(b),
                    _ => Some(cand),
                };
            }
            match best {
                Some((j, r)) => {
                    heads[j] += 1;
                    out.push((j, r));
                }
                None => break,
            }
        }
        out
    }

    /// The best `count` complete paths with positive probability.
    fn best_complete(&self, count: usize) -> Vec<RankedEntry> {
        let last = self.depth() - 1;
        self.merge_best(last, count)
            .into_iter()
            .map(|(sym, rank)| {
                let path = self.path(last, sym, rank);
                RankedEntry {
                    probability: self.exact(last, sym, rank).to_f64(),
                    vector: path.into(),
                }
            })
            .collect()
    }
}

/// Number of vectors over `arity` variables, saturating at `usize::MAX`.
pub fn vector_count(alphabet_size: usize, arity: usize) -> usize {
    u32::try_from(arity)
        .ok()
        .and_then(|a| alphabet_size.checked_pow(a))
        .unwrap_or(usize::MAX)
}

/// The single most probable vector and its probability.
pub fn best_vector(table: &MarginalTable, var_indices: &[usize]) -> Result<(InputVector, f64)> {
    let trellis = Trellis::build(table, var_indices, 1)?;
    let best = trellis
        .best_complete(1)
        .pop()
        .expect("every marginal row has a positive entry");
    Ok((best.vector, best.probability))
}

/// The `list_len` most probable distinct vectors, best first. `list_len` is
/// clamped to `K^n`.
pub fn top_l_vectors(
    table: &MarginalTable,
    var_indices: &[usize],
    list_len: usize,
) -> Result<RankedVectorList> {
    if var_indices.is_empty() {
        return Err(Error::EmptyVariableList);
    }
    let list_len = list_len.min(vector_count(table.alphabet_size(), var_indices.len()));
    let trellis = Trellis::build(table, var_indices, list_len)?;
    let mut entries = trellis.best_complete(list_len);
    if entries.len() < list_len {
        append_zero_mass(table, var_indices, list_len, &mut entries);
    }
    Ok(RankedVectorList::new(entries))
}

/// Fills `entries` up to `list_len` with zero-probability vectors in
/// lexicographic order.
fn append_zero_mass(
    table: &MarginalTable,
    var_indices: &[usize],
    list_len: usize,
    entries: &mut Vec<RankedEntry>,
) {
    let k = table.alphabet_size();
    let rows = table.rows();
    let mut v = vec![0usize; var_indices.len()];
    loop {
        if entries.len() >= list_len {
            return;
        }
        if v.iter()
            .zip(var_indices)
            .any(|(&s, &var)| rows[var][s] == 0.0)
        {
            entries.push(RankedEntry {
                vector: v.clone().into(),
                probability: 0.0,
            });
        }
        if !odometer_step(&mut v, k) {
            return;
        }
    }
}

/// Advances `v` to the next vector in lexicographic order; false after the last.
fn odometer_step(v: &mut [usize], k: usize) -> bool {
    for slot in v.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Reference enumeration: scores all `K^n` vectors and sorts them.
pub fn brute_force_top_l(
    table: &MarginalTable,
    var_indices: &[usize],
    list_len: usize,
) -> Result<RankedVectorList> {
    brute_force_top_l_capped(table, var_indices, list_len, DEFAULT_VECTOR_ORACLE_CAP)
}

pub fn brute_force_top_l_capped(
    table: &MarginalTable,
    var_indices: &[usize],
    list_len: usize,
    cap: u128,
) -> Result<RankedVectorList> {
    if var_indices.is_empty() {
        return Err(Error::EmptyVariableList);
    }
    table.check_vars(var_indices)?;
    let k = table.alphabet_size();
    let size = (k as u128)
        .checked_pow(var_indices.len() as u32)
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::OracleCapExceeded { size, cap });
    }
    let rows = table.rows();
    // enumeration order is lexicographic, so an index breaks ties
    let n = var_indices.len();
    let mut exact = Vec::with_capacity(size as usize);
    let mut v = vec![0usize; n];
    loop {
        exact.push(ExactProduct::of(
            v.iter().zip(var_indices).map(|(&s, &var)| rows[var][s]),
        ));
        if !odometer_step(&mut v, k) {
            break;
        }
    }
    // align every product to one exponent so sorting compares plain integers
    let base = exact
        .iter()
        .filter(|e| !e.is_zero())
        .map(ExactProduct::exponent)
        .min()
        .unwrap_or(0);
    let keys: Vec<_> = exact.iter().map(|e| e.scaled_to(base)).collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].cmp(&keys[a]).then(a.cmp(&b)));
    order.truncate(list_len);
    Ok(RankedVectorList::new(
        order
            .into_iter()
            .map(|idx| {
                let mut vector = vec![0usize; n];
                let mut rest = idx;
                for slot in vector.iter_mut().rev() {
                    *slot = rest % k;
                    rest /= k;
                }
                RankedEntry {
                    vector: vector.into(),
                    probability: exact[idx].to_f64(),
                }
            })
            .collect(),
    ))
}
