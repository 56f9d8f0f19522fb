//! End-to-end memoization plans: build the tables, evaluate with cost
//! accounting, and check the predicted cost by simulation.

use indexmap::IndexMap;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocator::{
    allocate_dp, build_omega_table, capacities, expected_time, Allocation, CostModel, OmegaTable,
};
use crate::distributions::{InputVector, MarginalTable};
use crate::error::{Error, Result};
use crate::expressions::Decomposition;
use crate::top_vectors::{top_l_vectors, RankedVectorList};

/// Name recorded in simulation reports for the sample stream.
pub const GENERATOR_NAME: &str = "chacha8-splitmix64-shards-8192";

/// Samples per simulation shard. Fixed so results never depend on how many
/// workers run the shards.
pub const SHARD_SIZE: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableEntry {
    pub value: f64,
    pub probability: f64,
}

/// Precomputed outputs of one sub-function, in rank order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LookupTable {
    entries: IndexMap<InputVector, TableEntry>,
}

impl LookupTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &[usize]) -> Option<&TableEntry> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InputVector, &TableEntry)> {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoPlan {
    decomposition: Decomposition,
    cost_model: CostModel,
    budget: usize,
    allocation: Allocation,
    omega: OmegaTable,
    ranked: Vec<RankedVectorList>,
    tables: Vec<LookupTable>,
    hit_probabilities: Vec<f64>,
    expected_cost: f64,
}

impl MemoPlan {
    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost_model
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn omega(&self) -> &OmegaTable {
        &self.omega
    }

    /// Candidate vectors per sub-function, `min(M, K^{l_j})` of them.
    pub fn ranked(&self) -> &[RankedVectorList] {
        &self.ranked
    }

    pub fn tables(&self) -> &[LookupTable] {
        &self.tables
    }

    /// Predicted `P(hit)` per sub-function.
    pub fn hit_probabilities(&self) -> &[f64] {
        &self.hit_probabilities
    }

    pub fn expected_cost(&self) -> f64 {
        self.expected_cost
    }
}

pub fn build_plan(
    decomp: &Decomposition,
    marginals: &MarginalTable,
    cost_model: &CostModel,
    budget: usize,
) -> Result<MemoPlan> {
    if marginals.num_vars() != decomp.num_vars() {
        return Err(Error::DimensionMismatch {
            what: "marginal rows".into(),
            expected: decomp.num_vars(),
            found: marginals.num_vars(),
        });
    }
    if marginals.alphabet_size() != decomp.alphabet_size() {
        return Err(Error::DimensionMismatch {
            what: "marginal alphabet size".into(),
            expected: decomp.alphabet_size(),
            found: marginals.alphabet_size(),
        });
    }
    let caps = capacities(decomp, budget);
    let ranked = decomp
        .sub_functions()
        .iter()
        .zip(&caps)
        .map(|(sf, &cap)| {
            if cap == 0 {
                Ok(RankedVectorList::empty())
            } else {
                top_l_vectors(marginals, &sf.var_indices, cap)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let omega = build_omega_table(decomp, cost_model, &ranked, budget)?;
    let (allocation, _) = allocate_dp(&omega, budget, &caps)?;

    let tables = decomp
        .sub_functions()
        .iter()
        .zip(&ranked)
        .zip(&allocation.m)
        .map(|((sf, list), &m)| {
            let entries = list.entries()[..m]
                .iter()
                .map(|e| {
                    let value = sf.eval_local(&e.vector, decomp.mode())?;
                    Ok((
                        e.vector.clone(),
                        TableEntry {
                            value,
                            probability: e.probability,
                        },
                    ))
                })
                .collect::<Result<IndexMap<_, _>>>()?;
            Ok(LookupTable { entries })
        })
        .collect::<Result<Vec<_>>>()?;
    let hit_probabilities = ranked
        .iter()
        .zip(&allocation.m)
        .map(|(list, &m)| list.cumulative()[m])
        .collect();
    let expected_cost = expected_time(decomp, cost_model, &allocation, &ranked)?;

    Ok(MemoPlan {
        decomposition: decomp.clone(),
        cost_model: *cost_model,
        budget,
        allocation,
        omega,
        ranked,
        tables,
        hit_probabilities,
        expected_cost,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub cost: f64,
    /// Whether each sub-function was served from its table.
    pub hits: Vec<bool>,
}

/// Evaluates through the plan's tables. A hit costs the lookup cost, a miss
/// the sub-function's compute cost; the combine step is always paid.
pub fn evaluate(plan: &MemoPlan, input: &InputVector) -> Result<Evaluation> {
    let decomp = &plan.decomposition;
    decomp.check_input(input)?;
    let d = decomp.sub_functions().len();
    let mut outputs = Vec::with_capacity(d);
    let mut hits = Vec::with_capacity(d);
    let mut cost = decomp.combine_cost();
    let mut key = Vec::new();
    for (sf, table) in decomp.sub_functions().iter().zip(&plan.tables) {
        key.clear();
        key.extend(sf.var_indices.iter().map(|&v| input[v]));
        match table.get(&key) {
            Some(entry) => {
                outputs.push(entry.value);
                cost += plan.cost_model.lookup_cost();
                hits.push(true);
            }
            None => {
                outputs.push(sf.eval_local(&key, decomp.mode())?);
                cost += sf.compute_cost;
                hits.push(false);
            }
        }
    }
    Ok(Evaluation {
        value: decomp.combine_outputs(&outputs)?,
        cost,
        hits,
    })
}

/// Inverse-CDF sampler over independent marginals.
#[derive(Debug, Clone)]
pub struct InputSampler {
    cdfs: Vec<Vec<f64>>,
    fallback: Vec<usize>,
}

impl InputSampler {
    pub fn new(marginals: &MarginalTable) -> Self {
        let cdfs = marginals
            .rows()
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        // last positive symbol absorbs uniforms lost to rounding at the top
        let fallback = marginals
            .rows()
            .iter()
            .map(|row| row.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            .collect();
        Self { cdfs, fallback }
    }

    /// Draws one input, consuming one uniform per variable in variable order.
    pub fn sample_into<R: RngCore>(&self, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        for (cdf, &fallback) in self.cdfs.iter().zip(&self.fallback) {
            let u = uniform(rng);
            out.push(cdf.iter().position(|&c| u < c).unwrap_or(fallback));
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> InputVector {
        let mut out = Vec::with_capacity(self.cdfs.len());
        self.sample_into(rng, &mut out);
        InputVector(out)
    }
}

/// Uniform on `[0, 1)` from the top 53 bits of one 64-bit output.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of shard `shard` within a run seeded by `seed`.
pub fn shard_seed(seed: u64, shard: u64) -> u64 {
    splitmix64(seed ^ splitmix64(shard))
}

/// Generator for one shard of a simulation run.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(shard_seed(seed, shard))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub samples: u64,
    pub seed: u64,
    pub generator: String,
    pub mean_cost: f64,
    pub stderr: f64,
    pub predicted_cost: f64,
    pub hit_rates: Vec<f64>,
    pub predicted_hit_rates: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    hits: Vec<u64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            hits: vec![0; d],
        }
    }

    fn push(&mut self, cost: f64, hits: &[bool]) {
        self.count += 1;
        let delta = cost - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (cost - self.mean);
        for (h, &hit) in self.hits.iter_mut().zip(hits) {
            *h += hit as u64;
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        if other.count == 0 {
            return self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
        for (h, o) in self.hits.iter_mut().zip(&other.hits) {
            *h += o;
        }
        self
    }
}

/// Monte Carlo estimate of the plan's average cost and hit rates.
///
/// Samples are split into shards of [`SHARD_SIZE`]; shard `s` draws from
/// [`shard_rng`]`(seed, s)`, and shard statistics are merged in shard order,
/// so the report is bit-identical for any thread count.
pub fn simulate(
    plan: &MemoPlan,
    marginals: &MarginalTable,
    num_samples: u64,
    seed: u64,
) -> Result<SimulationReport> {
    if num_samples == 0 {
        return Err(Error::Config("simulation needs at least one sample".into()));
    }
    if marginals.num_vars() != plan.decomposition.num_vars() {
        return Err(Error::DimensionMismatch {
            what: "marginal rows".into(),
            expected: plan.decomposition.num_vars(),
            found: marginals.num_vars(),
        });
    }
    let sampler = InputSampler::new(marginals);
    let d = plan.decomposition.sub_functions().len();
    let shards = num_samples.div_ceil(SHARD_SIZE);
    let partials = (0..shards)
        .into_par_iter()
        .map(|s| {
            let n = SHARD_SIZE.min(num_samples - s * SHARD_SIZE);
            let mut rng = shard_rng(seed, s);
            let mut moments = Moments::new(d);
            let mut buf = Vec::with_capacity(marginals.num_vars());
            for _ in 0..n {
                sampler.sample_into(&mut rng, &mut buf);
                let input = InputVector(std::mem::take(&mut buf));
                let eval = evaluate(plan, &input)?;
                buf = input.0;
                moments.push(eval.cost, &eval.hits);
            }
            Ok(moments)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = partials.iter().fold(Moments::new(d), |acc, m| acc.merge(m));

    let n = total.count as f64;
    let stderr = if total.count > 1 {
        (total.m2 / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(SimulationReport {
        samples: total.count,
        seed,
        generator: GENERATOR_NAME.to_string(),
        mean_cost: total.mean,
        stderr,
        predicted_cost: plan.expected_cost,
        hit_rates: total.hits.iter().map(|&h| h as f64 / n).collect(),
        predicted_hit_rates: plan.hit_probabilities.clone(),
    })
}
