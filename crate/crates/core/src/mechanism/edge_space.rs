//! Answering a transformed workload over the edges of a policy graph. The
//! edges are grouped into families; within a family they are split into
//! disjoint partitions, each estimated independently by a private
//! estimator. A family's answers are its query matrix times its estimate,
//! and the final answers are the sum over families plus a constant offset.

use std::sync::Arc;

use rayon::prelude::*;

use super::estimator::PrivateEstimator;
use super::isotonic::isotonic_postprocess;
use super::noise::NoiseSource;
use super::{MechanismId, PreparedMechanism};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Placeholder slot that holds no edge (estimated, then discarded).
pub(crate) const EMPTY_SLOT: usize = usize::MAX;
const PAR_PARTITIONS: usize = 16;
const BUDGET_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
pub(crate) struct Partition {
    /// Edge index per position of the row-major `shape` layout.
    pub slots: Vec<usize>,
    pub shape: Vec<usize>,
    pub epsilon: f64,
    pub estimator: Arc<dyn PrivateEstimator>,
}

#[derive(Clone, Debug)]
pub(crate) struct Family {
    pub partitions: Vec<Partition>,
    /// Queries × edges.
    pub queries: SparseMatrix,
}

/// A prepared edge-space mechanism; see the module docs.
#[derive(Debug)]
pub struct EdgeSpaceMechanism {
    pub(crate) id: MechanismId,
    pub(crate) epsilon: f64,
    pub(crate) stretch: usize,
    pub(crate) families: Vec<Family>,
    pub(crate) x_g: Vec<f64>,
    pub(crate) offset: Vec<f64>,
    pub(crate) truth: Vec<f64>,
    /// Project each family's estimate onto nondecreasing vectors.
    pub(crate) isotonic: bool,
}

impl EdgeSpaceMechanism {
    /// Checks the plan before any noise is drawn: partitions within a family
    /// are disjoint, every edge a family's queries read is estimated by that
    /// family, and no edge is charged more than `limit` in total.
    pub fn verify(&self, limit: f64) -> Result<()> {
        let edges = self.x_g.len();
        let mut spent = vec![0.0; edges];
        for fam in &self.families {
            if fam.queries.cols() != edges || fam.queries.rows() != self.truth.len() {
                return Err(Error::DimensionMismatch {
                    op: "edge-space plan",
                    left: fam.queries.shape(),
                    right: (self.truth.len(), edges),
                });
            }
            let mut owned = vec![false; edges];
            for p in &fam.partitions {
                if p.slots.len() != p.shape.iter().product::<usize>() {
                    return Err(Error::invalid("partition slots do not match its shape"));
                }
                if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
                    return Err(Error::invalid(format!("partition budget {} is not positive", p.epsilon)));
                }
                for &e in p.slots.iter().filter(|&&e| e != EMPTY_SLOT) {
                    if e >= edges {
                        return Err(Error::invalid(format!("partition names edge {e} of {edges}")));
                    }
                    if owned[e] {
                        return Err(Error::Budget { edge: e, spent: spent[e] + p.epsilon, limit });
                    }
                    owned[e] = true;
                    spent[e] += p.epsilon;
                }
            }
            for (_, c, _) in fam.queries.triplets() {
                if !owned[c] {
                    return Err(Error::invalid(format!("queries read edge {c}, which no partition estimates")));
                }
            }
        }
        if let Some((e, &s)) = spent.iter().enumerate().find(|(_, &s)| s > limit * (1.0 + BUDGET_SLACK)) {
            return Err(Error::Budget { edge: e, spent: s, limit });
        }
        Ok(())
    }

    pub fn families(&self) -> usize {
        self.families.len()
    }

    /// Total number of disjoint partitions across families.
    pub fn partitions(&self) -> usize {
        self.families.iter().map(|f| f.partitions.len()).sum()
    }

    /// The transformed database the plan estimates.
    pub fn edge_counts(&self) -> &[f64] {
        &self.x_g
    }

    fn estimate(&self, p: &Partition, noise: &NoiseSource, stream: u64) -> Result<Vec<f64>> {
        let data: Vec<f64> = p.slots.iter().map(|&e| if e == EMPTY_SLOT { 0.0 } else { self.x_g[e] }).collect();
        match noise.rng(stream) {
            None => Ok(data),
            Some(mut rng) => p.estimator.estimate(&data, &p.shape, p.epsilon, &mut rng),
        }
    }

    fn answer_with(&self, noise: &NoiseSource) -> Result<Vec<f64>> {
        let mut out = self.offset.clone();
        let mut stream = 0u64;
        for fam in &self.families {
            let base = stream;
            let run = |(i, p): (usize, &Partition)| self.estimate(p, noise, base + i as u64);
            let est: Vec<Vec<f64>> = if fam.partitions.len() >= PAR_PARTITIONS {
                fam.partitions.par_iter().enumerate().map(run).collect::<Result<_>>()?
            } else {
                fam.partitions.iter().enumerate().map(run).collect::<Result<_>>()?
            };
            stream += fam.partitions.len() as u64;
            let mut x_hat = vec![0.0; self.x_g.len()];
            for (p, e) in fam.partitions.iter().zip(est) {
                for (&slot, v) in p.slots.iter().zip(e) {
                    if slot != EMPTY_SLOT {
                        x_hat[slot] = v;
                    }
                }
            }
            if self.isotonic && noise.enabled() {
                x_hat = isotonic_postprocess(&x_hat).into_inner();
            }
            for (o, v) in out.iter_mut().zip(fam.queries.mul_vec(&x_hat)?) {
                *o += v;
            }
        }
        Ok(out)
    }
}

impl PreparedMechanism for EdgeSpaceMechanism {
    fn id(&self) -> MechanismId {
        self.id
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn stretch(&self) -> usize {
        self.stretch
    }

    fn truth(&self) -> &[f64] {
        &self.truth
    }

    fn answer(&self, noise: &NoiseSource) -> Result<Vec<f64>> {
        self.answer_with(noise)
    }
}
