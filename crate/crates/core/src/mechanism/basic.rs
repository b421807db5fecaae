//! The Laplace mechanism and the matrix mechanism over the cells of the
//! domain, with sensitivities taken under a named policy.

use super::noise::{laplace, NoiseSource};
use super::strategy::{Strategy, StrategyKind};
use super::{MechanismId, NoisyAnswer, PreparedMechanism};
use crate::error::{Error, Result};
use crate::graph::{PolicyFamily, PolicySpec};
use crate::linalg::SparseMatrix;
use crate::transform::policy_sensitivity;
use crate::workload::{HistogramDB, Workload};

/// Reconstruction tolerance for `‖W A⁺ A − W‖`.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-6;
/// Above this many column-pair operations, bounded sensitivity falls back to
/// twice the unbounded one.
const PAIRWISE_WORK_LIMIT: usize = 50_000_000;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

fn check_domains(w: &Workload, x: &HistogramDB) -> Result<()> {
    if w.domain() != x.domain() {
        return Err(Error::invalid(format!(
            "workload domain {:?} does not match database domain {:?}",
            w.domain().dims(),
            x.domain().dims()
        )));
    }
    Ok(())
}

/// Largest `‖W e_u − W e_v‖₁` over pairs of cells. Exact while the pairwise
/// work is small, otherwise the upper bound `2 · max_u ‖W e_u‖₁`.
pub fn bounded_sensitivity(m: &SparseMatrix) -> f64 {
    let cols = m.transpose();
    let k = cols.rows();
    let star = m.max_column_l1();
    if k < 2 {
        return 0.0;
    }
    let work = k * (k - 1) / 2 * (2 * m.nnz() / k + 1);
    if work > PAIRWISE_WORK_LIMIT {
        return 2.0 * star;
    }
    let mut best: f64 = 0.0;
    for u in 0..k {
        let (ur, uv) = cols.row(u);
        for v in u + 1..k {
            let (vr, vv) = cols.row(v);
            let (mut i, mut j, mut s) = (0, 0, 0.0);
            while i < ur.len() || j < vr.len() {
                match (ur.get(i), vr.get(j)) {
                    (Some(a), Some(b)) if a == b => {
                        s += (uv[i] - vv[j]).abs();
                        i += 1;
                        j += 1;
                    }
                    (Some(a), Some(b)) if a < b => {
                        s += uv[i].abs();
                        i += 1;
                    }
                    (Some(_), None) => {
                        s += uv[i].abs();
                        i += 1;
                    }
                    _ => {
                        s += vv[j].abs();
                        j += 1;
                    }
                }
            }
            best = best.max(s);
        }
    }
    best
}

/// Sensitivity of a workload under a named policy.
pub fn sensitivity_under(w: &Workload, policy: &PolicySpec) -> Result<f64> {
    match policy.family {
        PolicyFamily::Star => Ok(w.column_abs_sums().into_iter().fold(0.0, f64::max)),
        PolicyFamily::Complete => Ok(bounded_sensitivity(&w.cell_matrix())),
        _ => policy_sensitivity(w, &policy.build(w.domain())?),
    }
}

/// Sensitivity of a strategy's queries restricted to the real cells of
/// `domain` (padding cells never hold data).
pub fn strategy_sensitivity(a: &Strategy, policy: &PolicySpec, domain: &crate::graph::Domain) -> Result<f64> {
    if a.shape() != domain.dims() {
        return Err(Error::invalid(format!(
            "strategy shape {:?} does not match domain {:?}",
            a.shape(),
            domain.dims()
        )));
    }
    if policy.family == PolicyFamily::Star {
        return Ok(a.sensitivity());
    }
    let real = a.matrix().select_columns(&a.real_columns())?;
    sensitivity_under(&Workload::custom(domain.clone(), real)?, policy)
}

/// `W x + Lap(Δ/ε)^q`.
#[derive(Debug)]
pub struct LaplaceMechanism {
    epsilon: f64,
    scale: f64,
    truth: Vec<f64>,
}

impl LaplaceMechanism {
    pub fn new(w: &Workload, x: &HistogramDB, epsilon: f64, sensitivity: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_domains(w, x)?;
        if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
            return Err(Error::invalid(format!("sensitivity must be finite and nonnegative, got {sensitivity}")));
        }
        Ok(LaplaceMechanism { epsilon, scale: sensitivity / epsilon, truth: w.answer(x.counts())? })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl PreparedMechanism for LaplaceMechanism {
    fn id(&self) -> MechanismId {
        MechanismId::Laplace
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn truth(&self) -> &[f64] {
        &self.truth
    }

    fn answer(&self, noise: &NoiseSource) -> Result<Vec<f64>> {
        Ok(match noise.rng(0) {
            None => self.truth.clone(),
            Some(mut rng) => self.truth.iter().map(|v| v + laplace(&mut rng, self.scale)).collect(),
        })
    }
}

/// `W A⁺ (A x + Lap(Δ_A/ε)^p)`.
#[derive(Debug)]
pub struct MatrixMechanism {
    epsilon: f64,
    scale: f64,
    workload: Workload,
    strategy: Strategy,
    x: Vec<f64>,
    truth: Vec<f64>,
}

impl MatrixMechanism {
    /// Checks that `W A⁺ A = W` before anything else. Structured strategies
    /// have full column rank, so the check only runs for custom ones.
    pub fn new(w: &Workload, a: Strategy, x: &HistogramDB, epsilon: f64, sensitivity: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_domains(w, x)?;
        if a.shape() != w.domain().dims() && a.shape() != [w.domain().total()] {
            return Err(Error::invalid(format!(
                "strategy shape {:?} does not match domain {:?}",
                a.shape(),
                w.domain().dims()
            )));
        }
        if a.kind() == StrategyKind::Custom {
            let err = a.reconstruction_error(&w.cell_matrix())?;
            if err > RECONSTRUCTION_TOLERANCE {
                return Err(Error::Reconstruction(err));
            }
        }
        Ok(MatrixMechanism {
            epsilon,
            scale: sensitivity / epsilon,
            workload: w.clone(),
            x: x.counts().to_vec(),
            truth: w.answer(x.counts())?,
            strategy: a,
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl PreparedMechanism for MatrixMechanism {
    fn id(&self) -> MechanismId {
        match self.strategy.kind() {
            StrategyKind::Wavelet => MechanismId::MmWavelet,
            _ => MechanismId::MmHier,
        }
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn truth(&self) -> &[f64] {
        &self.truth
    }

    fn answer(&self, noise: &NoiseSource) -> Result<Vec<f64>> {
        let Some(mut rng) = noise.rng(0) else { return Ok(self.truth.clone()) };
        let x_hat = self.strategy.estimate(&self.x, self.scale, Some(&mut rng))?;
        self.workload.answer(&x_hat)
    }
}

/// Answers `w` with Laplace noise of scale `sensitivity / epsilon`.
pub fn laplace_mechanism(
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    sensitivity: f64,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    LaplaceMechanism::new(w, x, epsilon, sensitivity)?.run(&noise.into())
}

/// Matrix mechanism with strategy `a` under unbounded differential privacy
/// (noise scale `a.sensitivity() / epsilon`).
pub fn matrix_mechanism(
    w: &Workload,
    a: &Strategy,
    x: &HistogramDB,
    epsilon: f64,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    MatrixMechanism::new(w, a.clone(), x, epsilon, a.sensitivity())?.run(&noise.into())
}
