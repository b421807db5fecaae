//! Noise-adding mechanisms: Laplace, the matrix mechanism, and the
//! edge-space range mechanisms, all selectable by string id.

mod basic;
mod blowfish;
mod decompose;
mod edge_space;
mod estimator;
mod isotonic;
pub mod noise;
mod strategy;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PolicySpec;
use crate::linalg::DenseVector;
use crate::workload::{HistogramDB, Workload};

pub use basic::{
    bounded_sensitivity, laplace_mechanism, matrix_mechanism, sensitivity_under, strategy_sensitivity,
    LaplaceMechanism, MatrixMechanism, RECONSTRUCTION_TOLERANCE,
};
pub use blowfish::{
    blowfish_1d_range_line, blowfish_1d_range_theta, blowfish_multid_range_grid, blowfish_multid_range_theta,
};
pub use decompose::{decompose_transformed_query, grid_faces, EdgeRun, GridFace};
pub use edge_space::EdgeSpaceMechanism;
pub use estimator::{PrivateEstimator, StrategyEstimator};
pub use isotonic::isotonic_postprocess;
pub use noise::{LaplaceSampler, NoiseSource};
pub use strategy::{hierarchical_strategy, wavelet_strategy, Strategy, StrategyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MechanismId {
    Laplace,
    MmHier,
    MmWavelet,
    BfLine,
    /// `bf-line` with the noisy prefix sums projected onto nondecreasing
    /// vectors before answering.
    BfLineIso,
    BfGrid,
    BfTheta1d,
    BfThetamd,
}

impl MechanismId {
    pub const ALL: [MechanismId; 8] = [
        MechanismId::Laplace,
        MechanismId::MmHier,
        MechanismId::MmWavelet,
        MechanismId::BfLine,
        MechanismId::BfLineIso,
        MechanismId::BfGrid,
        MechanismId::BfTheta1d,
        MechanismId::BfThetamd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismId::Laplace => "laplace",
            MechanismId::MmHier => "mm-hier",
            MechanismId::MmWavelet => "mm-wavelet",
            MechanismId::BfLine => "bf-line",
            MechanismId::BfLineIso => "bf-line-iso",
            MechanismId::BfGrid => "bf-grid",
            MechanismId::BfTheta1d => "bf-theta1d",
            MechanismId::BfThetamd => "bf-thetamd",
        }
    }

    /// Whether the mechanism works in the edge space of a policy graph.
    pub fn is_blowfish(self) -> bool {
        !matches!(self, MechanismId::Laplace | MechanismId::MmHier | MechanismId::MmWavelet)
    }

    pub fn needs_theta(self) -> bool {
        matches!(self, MechanismId::BfTheta1d | MechanismId::BfThetamd)
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismId::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| Error::UnknownMechanism(s.to_string()))
    }
}

impl TryFrom<String> for MechanismId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MechanismId> for String {
    fn from(m: MechanismId) -> String {
        m.as_str().to_string()
    }
}

/// Output of one mechanism run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyAnswer {
    pub values: DenseVector,
    pub epsilon: f64,
    pub mechanism_id: MechanismId,
    pub seed: u64,
    pub stretch_factor: usize,
    #[serde(default)]
    pub noiseless: bool,
}

/// A mechanism with all data-dependent setup done, ready to be sampled many
/// times. Answers depend only on the noise source.
pub trait PreparedMechanism: Send + Sync {
    fn id(&self) -> MechanismId;

    fn epsilon(&self) -> f64;

    /// Spanner stretch `ℓ` the budget was divided by.
    fn stretch(&self) -> usize {
        1
    }

    /// Exact workload answers.
    fn truth(&self) -> &[f64];

    fn answer(&self, noise: &NoiseSource) -> Result<Vec<f64>>;

    fn run(&self, noise: &NoiseSource) -> Result<NoisyAnswer> {
        Ok(NoisyAnswer {
            values: DenseVector::new(self.answer(noise)?)?,
            epsilon: self.epsilon(),
            mechanism_id: self.id(),
            seed: noise.seed(),
            stretch_factor: self.stretch(),
            noiseless: !noise.enabled(),
        })
    }
}

fn default_branching() -> usize {
    2
}

/// Mechanism id plus its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub id: MechanismId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<usize>,
    /// Fan-out of hierarchical strategies.
    #[serde(default = "default_branching")]
    pub branching: usize,
    /// Neighbour notion for `laplace` and `mm-*` (ignored by edge-space
    /// mechanisms, whose policy is fixed by the id).
    #[serde(default = "PolicySpec::star")]
    pub policy: PolicySpec,
}

impl MechanismSpec {
    pub fn new(id: MechanismId) -> Self {
        MechanismSpec { id, theta: None, branching: 2, policy: PolicySpec::star() }
    }

    pub fn with_theta(mut self, theta: usize) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_policy(mut self, policy: PolicySpec) -> Self {
        self.policy = policy;
        self
    }

    fn theta(&self) -> Result<usize> {
        self.theta.ok_or_else(|| Error::invalid(format!("{} needs a theta value", self.id)))
    }
}

impl From<MechanismId> for MechanismSpec {
    fn from(id: MechanismId) -> Self {
        MechanismSpec::new(id)
    }
}

/// Does the data-dependent setup for `spec` on `(w, x)` at budget `epsilon`.
pub fn prepare(
    spec: &MechanismSpec,
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
) -> Result<Box<dyn PreparedMechanism>> {
    let dims = w.domain().dims();
    Ok(match spec.id {
        MechanismId::Laplace => {
            let delta = sensitivity_under(w, &spec.policy)?;
            Box::new(LaplaceMechanism::new(w, x, epsilon, delta)?)
        }
        MechanismId::MmHier | MechanismId::MmWavelet => {
            let a = if spec.id == MechanismId::MmHier {
                Strategy::hierarchical(dims, spec.branching)?
            } else {
                Strategy::wavelet(dims)?
            };
            let delta = strategy_sensitivity(&a, &spec.policy, w.domain())?;
            Box::new(MatrixMechanism::new(w, a, x, epsilon, delta)?)
        }
        _ => Box::new(prepare_edge_space(spec, w, x, epsilon, None)?),
    })
}

/// Like [`prepare`] for the edge-space mechanisms, optionally replacing the
/// per-partition strategy with another private estimator.
pub fn prepare_edge_space(
    spec: &MechanismSpec,
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    estimator: Option<Arc<dyn PrivateEstimator>>,
) -> Result<EdgeSpaceMechanism> {
    match spec.id {
        MechanismId::BfLine => blowfish::prepare_line(w, x, epsilon, false, estimator),
        MechanismId::BfLineIso => blowfish::prepare_line(w, x, epsilon, true, estimator),
        MechanismId::BfGrid => blowfish::prepare_grid(w, x, epsilon, estimator),
        MechanismId::BfTheta1d => blowfish::prepare_theta_1d(w, x, spec.theta()?, spec.branching, epsilon, estimator),
        MechanismId::BfThetamd => blowfish::prepare_theta_multid(w, x, spec.theta()?, epsilon, estimator),
        other => Err(Error::invalid(format!("{other} does not work in edge space"))),
    }
}

/// Prepares and runs a mechanism once.
pub fn run_mechanism(
    spec: &MechanismSpec,
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    prepare(spec, w, x, epsilon)?.run(&noise.into())
}
