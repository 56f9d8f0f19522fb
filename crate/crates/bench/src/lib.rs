//! Instance generators for the benchmarks.

use memoplan::{Alphabet, Decomposition, Expression, MarginalTable, Mode, OmegaTable, SubFunction};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Six binary variables, two product sub-functions of cost 10 and an
/// additive combine of cost 1.
pub fn running_example() -> (Decomposition, MarginalTable) {
    let product = Expression::parse("x1*x2*x3").unwrap();
    let decomp = Decomposition::new(
        6,
        2,
        vec![
            SubFunction::new(vec![0, 1, 2], product.clone(), 10.0),
            SubFunction::new(vec![3, 4, 5], product, 10.0),
        ],
        Expression::parse("x1 + x2").unwrap(),
        1.0,
        Mode::Real,
    )
    .unwrap();
    let mut rows = vec![vec![0.7, 0.3]; 3];
    rows.extend(vec![vec![0.9, 0.1]; 3]);
    let marginals = MarginalTable::new(rows, &Alphabet::new(2).unwrap()).unwrap();
    (decomp, marginals)
}

/// Random positive marginals over `k` symbols for `n` variables.
pub fn random_marginals(k: usize, n: usize, seed: u64) -> MarginalTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..k)
                .map(|_| memoplan::planner::uniform(&mut rng) + 1e-3)
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    MarginalTable::new(rows, &Alphabet::new(k).unwrap()).unwrap()
}

/// `d` sub-functions over consecutive blocks of `arity` variables, each
/// summing its arguments, combined by a sum.
pub fn block_decomposition(k: usize, d: usize, arity: usize) -> Decomposition {
    let body = (1..=arity)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(" + ");
    let body = Expression::parse(&body).unwrap();
    let subs = (0..d)
        .map(|j| SubFunction::new((j * arity..(j + 1) * arity).collect(), body.clone(), 8.0))
        .collect();
    let combine = (1..=d)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(" + ");
    Decomposition::new(
        d * arity,
        k,
        subs,
        Expression::parse(&combine).unwrap(),
        1.0,
        Mode::Real,
    )
    .unwrap()
}

/// Nondecreasing gain rows of length `cap + 1` for `d` sub-functions.
pub fn random_gains(d: usize, cap: usize, seed: u64) -> OmegaTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gains = (0..d)
        .map(|_| {
            let mut acc = 0.0;
            let mut row = vec![0.0];
            for _ in 0..cap {
                acc += (rng.next_u64() % 1000) as f64 / 1000.0;
                row.push(acc);
            }
            row
        })
        .collect();
    OmegaTable::from_gains(gains).unwrap()
}
