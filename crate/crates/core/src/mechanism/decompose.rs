use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Domain, PolicyGraph};
use crate::linalg::SparseMatrix;
use crate::transform::TransformPair;
use crate::workload::{RangeQuery, Workload};

/// Consecutive edges `first..=last` (canonical order) sharing one
/// coefficient in a transformed query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRun {
    pub first: usize,
    pub last: usize,
    pub coeff: f64,
}

/// Support of `q·P_G` as maximal runs of consecutive edges with equal
/// coefficients. `q` is a 0/1 row over the cells of `g`'s domain.
pub fn decompose_transformed_query(q: &[f64], g: &PolicyGraph) -> Result<Vec<EdgeRun>> {
    let k = g.domain().total();
    if q.len() != k {
        return Err(Error::DimensionMismatch { op: "decompose query", left: (1, q.len()), right: (k, 1) });
    }
    if let Some(v) = q.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("decomposition needs a 0/1 counting query, found coefficient {v}")));
    }
    let row = SparseMatrix::from_rows(k, [q.iter().copied().enumerate().filter(|(_, v)| *v != 0.0)])?;
    let w = Workload::custom(g.domain().clone(), row)?;
    let t = TransformPair::for_policy(g)?;
    let m = t.transform_matrix(&w)?;
    let (cols, vals) = m.row(0);
    let mut runs: Vec<EdgeRun> = Vec::new();
    for (&c, &v) in cols.iter().zip(vals) {
        match runs.last_mut() {
            Some(r) if r.last + 1 == c && r.coeff == v => r.last = c,
            _ => runs.push(EdgeRun { first: c, last: c, coeff: v }),
        }
    }
    Ok(runs)
}

/// One face of a box query on the grid policy: the edges along `dim` that
/// cross from coordinate `layer` to `layer + 1`, restricted to the box
/// `lo..=hi` over the remaining dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFace {
    pub dim: usize,
    pub layer: usize,
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub coeff: f64,
}

/// The faces of a box whose crossing edges carry the transformed query on
/// the grid policy: up to two per dimension, fewer when the box touches the
/// domain boundary. The `Bot` edge of the last cell is not a face; it
/// contributes `+1` when the box contains that cell.
pub fn grid_faces(q: &RangeQuery, domain: &Domain) -> Result<Vec<GridFace>> {
    q.check(domain)?;
    let mut faces = Vec::new();
    for i in 0..domain.d() {
        let others = |v: &[usize]| v.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &c)| c).collect::<Vec<_>>();
        let (lo, hi) = (others(&q.lo), others(&q.hi));
        if q.lo[i] > 0 {
            faces.push(GridFace { dim: i, layer: q.lo[i] - 1, lo: lo.clone(), hi: hi.clone(), coeff: -1.0 });
        }
        if q.hi[i] + 1 < domain.dims()[i] {
            faces.push(GridFace { dim: i, layer: q.hi[i], lo, hi, coeff: 1.0 });
        }
    }
    Ok(faces)
}
