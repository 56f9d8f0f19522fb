//! Splitting a budget of `M` table entries across the sub-functions.
//!
//! Giving sub-function `j` a table of its `m` most probable vectors saves
//! `omega_j(m) = P(hit | m) * (compute_cost_j - lookup_cost)` per call on
//! average. [`allocate_dp`] maximizes `sum_j omega_j(m_j)` subject to
//! `0 <= m_j <= cap_j` and `sum_j m_j <= M` with a staged knapsack:
//! `A[i][j]` is the best objective of the first `j + 1` sub-functions when
//! they use exactly `i` entries, and `B[i][j]` records how many of those
//! entries went to the first `j` sub-functions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expressions::Decomposition;
use crate::top_vectors::{cumulative_hit_probability, vector_count, RankedVectorList};

/// Default limit on the number of candidate splits for
/// [`allocate_brute_force`].
pub const DEFAULT_ALLOCATION_ORACLE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostModel {
    lookup_cost: f64,
}

impl CostModel {
    pub fn new(lookup_cost: f64) -> Result<Self> {
        if !(lookup_cost.is_finite() && lookup_cost > 0.0) {
            return Err(Error::InvalidCost(format!(
                "lookup cost must be positive, got {lookup_cost}"
            )));
        }
        Ok(Self { lookup_cost })
    }

    pub fn lookup_cost(&self) -> f64 {
        self.lookup_cost
    }
}

/// `gains[j][m]` is `omega_j(m)` for `m = 0..=cap_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct OmegaTable {
    gains: Vec<Vec<f64>>,
}

impl OmegaTable {
    /// Wraps raw gain rows. Each row needs `omega(0) == 0`.
    pub fn from_gains(gains: Vec<Vec<f64>>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::CapacityMismatch("no sub-functions".into()));
        }
        for (j, row) in gains.iter().enumerate() {
            if row.first() != Some(&0.0) {
                return Err(Error::CapacityMismatch(format!(
                    "gain row {} must start with omega(0) = 0",
                    j + 1
                )));
            }
            if row.iter().any(|g| !g.is_finite()) {
                return Err(Error::CapacityMismatch(format!(
                    "gain row {} has a non-finite value",
                    j + 1
                )));
            }
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[Vec<f64>] {
        &self.gains
    }

    pub fn num_subfunctions(&self) -> usize {
        self.gains.len()
    }

    /// Largest table size each row covers.
    pub fn caps(&self) -> Vec<usize> {
        self.gains.iter().map(|g| g.len() - 1).collect()
    }

    /// `sum_j omega_j(m_j)`, summed in sub-function order.
    pub fn objective(&self, m: &[usize]) -> f64 {
        let mut terms = self.gains.iter().zip(m).map(|(g, &mj)| g[mj]);
        let first = terms.next().unwrap_or(0.0);
        terms.fold(first, |acc, g| acc + g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub m: Vec<usize>,
    pub objective: f64,
}

impl Allocation {
    pub fn total(&self) -> usize {
        self.m.iter().sum()
    }
}

/// Dynamic-programming tables, indexed `[budget][sub-function]`.
/// Unreachable budgets hold `-inf` in `a` and `None` in `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTables {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<Option<usize>>>,
}

/// Table capacity of every sub-function: `min(M, K^{l_j})`.
pub fn capacities(decomp: &Decomposition, budget: usize) -> Vec<usize> {
    decomp
        .sub_functions()
        .iter()
        .map(|sf| budget.min(vector_count(decomp.alphabet_size(), sf.arity())))
        .collect()
}

pub fn build_omega_table(
    decomp: &Decomposition,
    cost_model: &CostModel,
    ranked: &[RankedVectorList],
    budget: usize,
) -> Result<OmegaTable> {
    let caps = capacities(decomp, budget);
    if ranked.len() != caps.len() {
        return Err(Error::CapacityMismatch(format!(
            "{} ranked lists for {} sub-functions",
            ranked.len(),
            caps.len()
        )));
    }
    let gains = decomp
        .sub_functions()
        .iter()
        .zip(ranked)
        .zip(&caps)
        .enumerate()
        .map(|(j, ((sf, list), &cap))| {
            if list.len() < cap {
                return Err(Error::InsufficientRankedEntries {
                    subfunction: j + 1,
                    have: list.len(),
                    need: cap,
                });
            }
            let saving = sf.compute_cost - cost_model.lookup_cost();
            Ok(std::iter::once(0.0)
                .chain(list.cumulative()[1..=cap].iter().map(|p| p * saving))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    OmegaTable::from_gains(gains)
}

fn check_caps(omega: &OmegaTable, caps: &[usize]) -> Result<()> {
    if caps.len() != omega.num_subfunctions() {
        return Err(Error::CapacityMismatch(format!(
            "{} capacities for {} gain rows",
            caps.len(),
            omega.num_subfunctions()
        )));
    }
    for (j, (&cap, row)) in caps.iter().zip(omega.gains()).enumerate() {
        if cap >= row.len() {
            return Err(Error::CapacityMismatch(format!(
                "sub-function {} has capacity {cap} but only {} gain values",
                j + 1,
                row.len()
            )));
        }
    }
    Ok(())
}

/// Optimal split of `budget` entries; `O(M * sum_j cap_j)` time.
///
/// Among optimal splits the one with the smallest total is returned, and
/// within that the later sub-functions receive as much as possible.
pub fn allocate_dp(
    omega: &OmegaTable,
    budget: usize,
    caps: &[usize],
) -> Result<(Allocation, DpTables)> {
    check_caps(omega, caps)?;
    let d = caps.len();
    let caps: Vec<usize> = caps.iter().map(|&c| c.min(budget)).collect();
    let gains = omega.gains();
    let mut a = vec![vec![f64::NEG_INFINITY; d]; budget + 1];
    let mut b = vec![vec![None; d]; budget + 1];

    for i in 0..=caps[0] {
        a[i][0] = gains[0][i];
        b[i][0] = Some(0);
    }
    let mut reachable = caps[0];
    for j in 1..d {
        reachable = (reachable + caps[j]).min(budget);
        for i in 0..=reachable {
            let mut best = f64::NEG_INFINITY;
            let mut arg = None;
            for prev in i.saturating_sub(caps[j])..=i {
                let base = a[prev][j - 1];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let v = base + gains[j][i - prev];
                if arg.is_none() || v > best {
                    best = v;
                    arg = Some(prev);
                }
            }
            a[i][j] = best;
            b[i][j] = arg;
        }
    }

    let mut total = 0;
    for i in 1..=reachable {
        if a[i][d - 1] > a[total][d - 1] {
            total = i;
        }
    }
    let objective = a[total][d - 1];
    let mut m = vec![0; d];
    let mut i = total;
    for j in (1..d).rev() {
        let prev = b[i][j].expect("reachable budget has a predecessor");
        m[j] = i - prev;
        i = prev;
    }
    m[0] = i;
    Ok((Allocation { m, objective }, DpTables { a, b }))
}

/// Exhaustive search over every feasible split, with the same tie-break as
/// [`allocate_dp`].
pub fn allocate_brute_force(
    omega: &OmegaTable,
    budget: usize,
    caps: &[usize],
) -> Result<Allocation> {
    allocate_brute_force_capped(omega, budget, caps, DEFAULT_ALLOCATION_ORACLE_CAP)
}

pub fn allocate_brute_force_capped(
    omega: &OmegaTable,
    budget: usize,
    caps: &[usize],
    oracle_cap: u128,
) -> Result<Allocation> {
    check_caps(omega, caps)?;
    let caps: Vec<usize> = caps.iter().map(|&c| c.min(budget)).collect();
    let size = caps
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128 + 1))
        .unwrap_or(u128::MAX);
    if size > oracle_cap {
        return Err(Error::OracleCapExceeded {
            size,
            cap: oracle_cap,
        });
    }

    // true when `cand` beats `best`
    let better = |cand: &Allocation, best: &Allocation| {
        if cand.objective != best.objective {
            return cand.objective > best.objective;
        }
        if cand.total() != best.total() {
            return cand.total() < best.total();
        }
        cand.m.iter().rev().cmp(best.m.iter().rev()) == std::cmp::Ordering::Greater
    };

    let d = caps.len();
    let mut m = vec![0usize; d];
    let mut best = Allocation {
        objective: omega.objective(&m),
        m: m.clone(),
    };
    loop {
        // odometer over the box, skipping splits over budget
        let mut pos = 0;
        loop {
            if pos == d {
                return Ok(best);
            }
            m[pos] += 1;
            if m[pos] <= caps[pos] {
                break;
            }
            m[pos] = 0;
            pos += 1;
        }
        if m.iter().sum::<usize>() > budget {
            continue;
        }
        let cand = Allocation {
            objective: omega.objective(&m),
            m: m.clone(),
        };
        if better(&cand, &best) {
            best = cand;
        }
    }
}

/// Average evaluation cost when sub-function `j` memoizes its `m_j` most
/// probable vectors: the plain cost minus the expected savings.
pub fn expected_time(
    decomp: &Decomposition,
    cost_model: &CostModel,
    allocation: &Allocation,
    ranked: &[RankedVectorList],
) -> Result<f64> {
    let d = decomp.sub_functions().len();
    if allocation.m.len() != d || ranked.len() != d {
        return Err(Error::InfeasibleAllocation(format!(
            "expected {d} entries, allocation has {} and {} ranked lists were given",
            allocation.m.len(),
            ranked.len()
        )));
    }
    let mut saving = 0.0;
    for ((sf, list), &mj) in decomp.sub_functions().iter().zip(ranked).zip(&allocation.m) {
        let hit = cumulative_hit_probability(list, mj)?;
        saving += hit * (sf.compute_cost - cost_model.lookup_cost());
    }
    Ok(decomp.plain_cost() - saving)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Alphabet, MarginalTable};
    use crate::expressions::{Expression, Mode, SubFunction};
    use crate::top_vectors::top_l_vectors;
    use proptest::prelude::*;

    fn gains_from_cumulative(cum: &[f64], factor: f64) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(cum.iter().map(|p| p * factor))
            .collect()
    }

    fn running_example_omega() -> OmegaTable {
        OmegaTable::from_gains(vec![
            gains_from_cumulative(&[0.343, 0.49, 0.637, 0.784], 9.0),
            gains_from_cumulative(&[0.729, 0.81, 0.891, 0.972], 9.0),
        ])
        .unwrap()
    }

    fn example_decomposition(costs: [f64; 3]) -> Decomposition {
        let body = Expression::parse("x1*x2*x3").unwrap();
        Decomposition::new(
            6,
            2,
            vec![
                SubFunction::new(vec![0, 1, 2], body.clone(), costs[1]),
                SubFunction::new(vec![3, 4, 5], body, costs[2]),
            ],
            Expression::parse("x1 + x2").unwrap(),
            costs[0],
            Mode::Real,
        )
        .unwrap()
    }

    fn example_ranked(budget: usize) -> Vec<RankedVectorList> {
        let a = Alphabet::new(2).unwrap();
        let mut rows = vec![vec![0.7, 0.3]; 3];
        rows.extend(vec![vec![0.9, 0.1]; 3]);
        let t = MarginalTable::new(rows, &a).unwrap();
        vec![
            top_l_vectors(&t, &[0, 1, 2], budget.max(1)).unwrap(),
            top_l_vectors(&t, &[3, 4, 5], budget.max(1)).unwrap(),
        ]
    }

    #[test]
    fn cost_model_must_be_positive() {
        assert!(CostModel::new(0.0).is_err());
        assert!(CostModel::new(f64::NAN).is_err());
        assert_eq!(CostModel::new(1.5).unwrap().lookup_cost(), 1.5);
    }

    #[test]
    fn omega_examples() {
        let d = example_decomposition([1.0, 10.0, 10.0]);
        let cm = CostModel::new(1.0).unwrap();
        let omega = build_omega_table(&d, &cm, &example_ranked(4), 4).unwrap();
        assert!((omega.gains()[0][1] - 3.087).abs() < 1e-12);
        assert_eq!(omega.gains()[0][0], 0.0);
        assert_eq!(omega.caps(), vec![4, 4]);

        let d = example_decomposition([1.0, 1.0, 1.0]);
        let omega = build_omega_table(&d, &cm, &example_ranked(4), 4).unwrap();
        for row in omega.gains() {
            assert!(row.iter().all(|&g| g == 0.0));
        }

        // negative savings keep omega(0) a clean zero
        let cm = CostModel::new(20.0).unwrap();
        let d = example_decomposition([1.0, 10.0, 10.0]);
        let omega = build_omega_table(&d, &cm, &example_ranked(4), 4).unwrap();
        assert!(omega.gains()[0][0].is_sign_positive());
        assert!(omega.gains()[0][1..].iter().all(|&g| g < 0.0));
    }

    #[test]
    fn omega_needs_enough_entries() {
        let d = example_decomposition([1.0, 10.0, 10.0]);
        let cm = CostModel::new(1.0).unwrap();
        let short = example_ranked(2);
        assert!(matches!(
            build_omega_table(&d, &cm, &short, 4),
            Err(Error::InsufficientRankedEntries {
                subfunction: 1,
                have: 2,
                need: 4
            })
        ));
    }

    #[test]
    fn dp_running_example() {
        let omega = running_example_omega();
        let (alloc, tables) = allocate_dp(&omega, 4, &[4, 4]).unwrap();
        assert_eq!(alloc.m, vec![3, 1]);
        assert!((alloc.objective - 12.294).abs() < 1e-12);
        // more budget never hurts with nondecreasing gains
        for j in 0..2 {
            let col: Vec<f64> = tables.a.iter().map(|r| r[j]).collect();
            assert!(col.windows(2).all(|w| w[0] <= w[1]), "{col:?}");
        }
        let brute = allocate_brute_force(&omega, 4, &[4, 4]).unwrap();
        assert_eq!(brute, alloc);
    }

    #[test]
    fn dp_edge_cases() {
        let omega = running_example_omega();
        let (alloc, _) = allocate_dp(&omega, 0, &[4, 4]).unwrap();
        assert_eq!((alloc.m, alloc.objective), (vec![0, 0], 0.0));

        let single = OmegaTable::from_gains(vec![gains_from_cumulative(
            &[0.343, 0.49, 0.637, 0.784, 0.821, 0.868, 0.937, 1.0],
            9.0,
        )])
        .unwrap();
        let (alloc, _) = allocate_dp(&single, 20, &[8]).unwrap();
        assert_eq!(alloc.m, vec![8]);
        assert_eq!(alloc.objective, 9.0);
        assert_eq!(allocate_brute_force(&single, 20, &[8]).unwrap(), alloc);
        let (alloc, _) = allocate_dp(&single, 3, &[8]).unwrap();
        assert_eq!(alloc.m, vec![3]);

        let flat = OmegaTable::from_gains(vec![vec![0.0; 5], vec![0.0; 3]]).unwrap();
        let (alloc, _) = allocate_dp(&flat, 6, &[4, 2]).unwrap();
        assert_eq!((alloc.m.clone(), alloc.objective), (vec![0, 0], 0.0));
        assert_eq!(allocate_brute_force(&flat, 6, &[4, 2]).unwrap(), alloc);
    }

    #[test]
    fn negative_gains_get_nothing() {
        let omega =
            OmegaTable::from_gains(vec![vec![0.0, -1.0, -2.0], vec![0.0, 3.0, 4.0]]).unwrap();
        let (alloc, _) = allocate_dp(&omega, 4, &[2, 2]).unwrap();
        assert_eq!(alloc.m, vec![0, 2]);
        assert_eq!(alloc.objective, 4.0);
    }

    #[test]
    fn capacity_mismatch() {
        let omega = running_example_omega();
        assert!(matches!(
            allocate_dp(&omega, 4, &[4]),
            Err(Error::CapacityMismatch(_))
        ));
        assert!(matches!(
            allocate_dp(&omega, 4, &[5, 4]),
            Err(Error::CapacityMismatch(_))
        ));
        assert!(OmegaTable::from_gains(vec![vec![1.0]]).is_err());
        assert!(OmegaTable::from_gains(vec![]).is_err());
    }

    #[test]
    fn brute_force_cap() {
        let omega = OmegaTable::from_gains(vec![vec![0.0; 101]; 4]).unwrap();
        assert!(matches!(
            allocate_brute_force(&omega, 400, &[100; 4]),
            Err(Error::OracleCapExceeded { .. })
        ));
    }

    #[test]
    fn expected_time_examples() {
        let d = example_decomposition([1.0, 10.0, 10.0]);
        let cm = CostModel::new(1.0).unwrap();
        let ranked = example_ranked(8);
        let at = |m: Vec<usize>| {
            expected_time(&d, &cm, &Allocation { m, objective: 0.0 }, &ranked).unwrap()
        };
        assert!((at(vec![3, 1]) - 8.706).abs() < 1e-12);
        assert_eq!(at(vec![0, 0]), 21.0);
        assert!((at(vec![8, 8]) - 3.0).abs() < 1e-12);
        assert!(expected_time(
            &d,
            &cm,
            &Allocation {
                m: vec![9, 0],
                objective: 0.0
            },
            &ranked
        )
        .is_err());
    }

    #[test]
    fn single_table_reduces_to_plain_memoization() {
        // T_c(f) - P(X_M) (T_c(f) - T_M) with no combine step
        let body = Expression::parse("x1 + x2").unwrap();
        let d = Decomposition::new(
            2,
            3,
            vec![SubFunction::new(vec![0, 1], body.clone(), 7.0)],
            Expression::parse("x1").unwrap(),
            0.0,
            Mode::Real,
        )
        .unwrap();
        let a = Alphabet::new(3).unwrap();
        let t = MarginalTable::new(vec![vec![0.5, 0.3, 0.2], vec![0.6, 0.1, 0.3]], &a).unwrap();
        let ranked = vec![top_l_vectors(&t, &[0, 1], 9).unwrap()];
        let cm = CostModel::new(0.5).unwrap();
        for m in 0..=9 {
            let p = ranked[0].cumulative()[m];
            let e = expected_time(
                &d,
                &cm,
                &Allocation {
                    m: vec![m],
                    objective: 0.0,
                },
                &ranked,
            )
            .unwrap();
            assert!((e - (7.0 - p * (7.0 - 0.5))).abs() < 1e-12);
        }
    }

    fn omega_strategy() -> impl Strategy<Value = (OmegaTable, Vec<usize>, usize)> {
        (
            prop::collection::vec(0usize..=9, 1..=4),
            0usize..=12,
            any::<bool>(),
        )
            .prop_flat_map(|(caps, budget, monotone)| {
                let rows: Vec<_> = caps
                    .iter()
                    .map(|&c| prop::collection::vec(-3i32..8, c))
                    .collect();
                (rows, Just(caps), Just(budget), Just(monotone))
            })
            .prop_map(|(rows, caps, budget, monotone)| {
                let gains = rows
                    .into_iter()
                    .map(|steps| {
                        let mut acc = 0.0;
                        std::iter::once(0.0)
                            .chain(steps.into_iter().map(|s| {
                                // quarter steps make exact ties between splits common
                                let s = if monotone { s.max(0) } else { s } as f64 * 0.25;
                                acc += s;
                                acc
                            }))
                            .collect()
                    })
                    .collect();
                (OmegaTable::from_gains(gains).unwrap(), caps, budget)
            })
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force((omega, caps, budget) in omega_strategy()) {
            let (dp, _) = allocate_dp(&omega, budget, &caps).unwrap();
            let brute = allocate_brute_force(&omega, budget, &caps).unwrap();
            prop_assert_eq!(&dp.m, &brute.m);
            prop_assert!((dp.objective - brute.objective).abs() <= 1e-12);
            prop_assert!(dp.total() <= budget);
            prop_assert!(dp.m.iter().zip(&caps).all(|(m, c)| m <= c));
            prop_assert_eq!(omega.objective(&dp.m), dp.objective);
        }

        #[test]
        fn objective_grows_with_budget((omega, caps, budget) in omega_strategy()) {
            let (small, _) = allocate_dp(&omega, budget, &caps).unwrap();
            let (large, _) = allocate_dp(&omega, budget + 1, &caps).unwrap();
            prop_assert!(large.objective >= small.objective);
        }
    }
}
