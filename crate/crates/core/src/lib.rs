//! Memoization planning for decomposed functions with stochastic discrete
//! inputs.
//!
//! Given a function written as `F(f_1(x_1), .., f_D(x_D))` over inputs whose
//! components are independent categorical variables, and a budget of `M`
//! precomputed table entries, this crate finds each sub-function's most
//! probable input vectors ([`top_vectors`]), splits the budget between the
//! sub-functions to minimize the expected evaluation cost ([`allocator`]),
//! materializes the lookup tables and checks the prediction by simulation
//! ([`planner`]).
//!
//! ```
//! use memoplan::{
//!     build_plan, Alphabet, CostModel, Decomposition, Expression, MarginalTable, Mode,
//!     SubFunction,
//! };
//!
//! let product = Expression::parse("x1*x2*x3").unwrap();
//! let decomp = Decomposition::new(
//!     6,
//!     2,
//!     vec![
//!         SubFunction::new(vec![0, 1, 2], product.clone(), 10.0),
//!         SubFunction::new(vec![3, 4, 5], product, 10.0),
//!     ],
//!     Expression::parse("x1 + x2").unwrap(),
//!     1.0,
//!     Mode::Real,
//! )
//! .unwrap();
//! let mut rows = vec![vec![0.7, 0.3]; 3];
//! rows.extend(vec![vec![0.9, 0.1]; 3]);
//! let marginals = MarginalTable::new(rows, &Alphabet::new(2).unwrap()).unwrap();
//!
//! let plan = build_plan(&decomp, &marginals, &CostModel::new(1.0).unwrap(), 4).unwrap();
//! assert_eq!(plan.allocation().m, vec![3, 1]);
//! assert!((plan.expected_cost() - 8.706).abs() < 1e-12);
//! ```

pub mod allocator;
pub mod config;
pub mod distributions;
pub mod error;
pub mod exact;
pub mod expressions;
pub mod planner;
pub mod top_vectors;

pub use allocator::{
    allocate_brute_force, allocate_dp, build_omega_table, capacities, expected_time, Allocation,
    CostModel, DpTables, OmegaTable,
};
pub use distributions::{
    estimate_marginals, validate_marginals, vector_probability, Alphabet, InputVector,
    MarginalTable,
};
pub use error::{Error, Result};
pub use expressions::{evaluate_plain, table_size, Decomposition, Expression, Mode, SubFunction};
pub use planner::{
    build_plan, evaluate, simulate, Evaluation, InputSampler, LookupTable, MemoPlan,
    SimulationReport,
};
pub use top_vectors::{
    best_vector, brute_force_top_l, cumulative_hit_probability, top_l_vectors, RankedEntry,
    RankedVectorList, Trellis,
};
