use std::fmt::Debug;

use super::noise::NoiseRng;
use super::strategy::{Strategy, StrategyKind};
use crate::error::Result;

/// An ε-differentially private routine that estimates a data vector laid out
/// row-major with `shape`. Range sums are read off the returned estimate.
///
/// The edge-space mechanisms call one of these per disjoint partition. Any
/// routine that is ε-DP with respect to a unit change of one entry can be
/// plugged in (data-dependent ones such as DAWA included).
pub trait PrivateEstimator: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn estimate(&self, data: &[f64], shape: &[usize], epsilon: f64, rng: &mut NoiseRng) -> Result<Vec<f64>>;
}

/// Matrix mechanism with a structured strategy built for each shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrategyEstimator {
    pub kind: StrategyKind,
    pub branching: usize,
}

impl StrategyEstimator {
    pub fn identity() -> Self {
        StrategyEstimator { kind: StrategyKind::Identity, branching: 2 }
    }

    pub fn hierarchical(branching: usize) -> Self {
        StrategyEstimator { kind: StrategyKind::Hierarchical, branching }
    }

    pub fn wavelet() -> Self {
        StrategyEstimator { kind: StrategyKind::Wavelet, branching: 2 }
    }

    pub fn strategy(&self, shape: &[usize]) -> Result<Strategy> {
        match self.kind {
            StrategyKind::Identity | StrategyKind::Custom => Strategy::identity(shape),
            StrategyKind::Hierarchical => Strategy::hierarchical(shape, self.branching),
            StrategyKind::Wavelet => Strategy::wavelet(shape),
        }
    }
}

impl PrivateEstimator for StrategyEstimator {
    fn name(&self) -> &str {
        match self.kind {
            StrategyKind::Identity | StrategyKind::Custom => "identity",
            StrategyKind::Hierarchical => "hierarchical",
            StrategyKind::Wavelet => "wavelet",
        }
    }

    fn estimate(&self, data: &[f64], shape: &[usize], epsilon: f64, rng: &mut NoiseRng) -> Result<Vec<f64>> {
        let s = self.strategy(shape)?;
        s.estimate(data, s.sensitivity() / epsilon, Some(rng))
    }
}
