//! Error measurement: Monte Carlo mean squared error, SVD lower bounds and
//! experiment runs.

mod experiment;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PolicyGraph;
use crate::linalg::{singular_values, DenseVector, SparseMatrix};
use crate::mechanism::noise::derive_seed;
use crate::mechanism::{prepare, MechanismSpec, NoiseSource, PreparedMechanism};
use crate::transform::TransformPair;
use crate::workload::{HistogramDB, Workload};

pub use experiment::{
    run_experiment, BaselinePolicy, DatasetSpec, ExperimentConfig, ExperimentReport, ResultRecord, WorkloadSpec,
};

/// Runs per parallel work item; fixed so the reduction order never depends
/// on the thread count.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub per_query_mse: DenseVector,
    pub total_mse: f64,
    pub mean_per_query: f64,
    pub runs: usize,
    pub seed: u64,
}

impl ErrorStats {
    fn from_sums(sums: Vec<f64>, runs: usize, seed: u64) -> Result<Self> {
        let per: Vec<f64> = sums.into_iter().map(|s| s / runs as f64).collect();
        let total: f64 = per.iter().sum();
        let q = per.len().max(1);
        Ok(ErrorStats {
            total_mse: total,
            mean_per_query: total / q as f64,
            per_query_mse: DenseVector::new(per)?,
            runs,
            seed,
        })
    }
}

/// Squared error of each query, averaged over `runs` independent runs. Run
/// `r` draws its noise from `derive_seed(seed, r)`; a noiseless source gives
/// one deterministic run per `r`.
pub fn monte_carlo(m: &dyn PreparedMechanism, runs: usize, noise: NoiseSource) -> Result<ErrorStats> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    let truth = m.truth();
    let chunks: Vec<Vec<f64>> = (0..runs.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; truth.len()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(runs) {
                let source = if noise.enabled() {
                    NoiseSource::seeded(derive_seed(noise.seed(), r as u64))
                } else {
                    NoiseSource::noiseless()
                };
                for ((a, t), v) in acc.iter_mut().zip(truth).zip(m.answer(&source)?) {
                    *a += (v - t) * (v - t);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; truth.len()];
    for chunk in chunks {
        for (s, c) in sums.iter_mut().zip(chunk) {
            *s += c;
        }
    }
    ErrorStats::from_sums(sums, runs, noise.seed())
}

/// Prepares the mechanism and measures its error over `runs` seeded runs.
pub fn monte_carlo_error(
    spec: &MechanismSpec,
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    runs: usize,
    seed: u64,
) -> Result<ErrorStats> {
    let m = prepare(spec, w, x, epsilon)?;
    monte_carlo(m.as_ref(), runs, NoiseSource::seeded(seed))
}

/// `P(ε,δ) = 2 ln(2/δ) / ε²`.
pub fn privacy_factor(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie strictly between 0 and 1, got {delta}")));
    }
    Ok(2.0 * (2.0 / delta).ln() / (epsilon * epsilon))
}

/// Lower bound on the total squared error of any `(ε, δ)` matrix mechanism
/// answering `w_g`: `P(ε,δ) · (Σ σ_i)² / n_G`, with `n_G` the column count.
pub fn svd_lower_bound(w_g: &Workload, epsilon: f64, delta: f64) -> Result<f64> {
    matrix_lower_bound(&w_g.matrix(), epsilon, delta)
}

/// [`svd_lower_bound`] for a bare matrix.
pub fn matrix_lower_bound(m: &SparseMatrix, epsilon: f64, delta: f64) -> Result<f64> {
    let p = privacy_factor(epsilon, delta)?;
    let s: f64 = singular_values(m)?.iter().sum();
    Ok(p * s * s / m.cols() as f64)
}

/// [`svd_lower_bound`] of the workload transformed under `g`.
pub fn policy_lower_bound(w: &Workload, g: &PolicyGraph, epsilon: f64, delta: f64) -> Result<f64> {
    let t = TransformPair::for_policy(g)?;
    matrix_lower_bound(&t.transform_matrix(w)?, epsilon, delta)
}
