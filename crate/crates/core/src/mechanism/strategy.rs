//! Strategy matrices for the matrix mechanism. Structured strategies
//! (identity, hierarchical, Haar) apply `A` and `A⁺` in near-linear time and
//! only build the sparse matrix when asked; multi-dimensional strategies are
//! Kronecker products of one-dimensional factors, one per axis.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::noise::{laplace, NoiseRng};
use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, MAX_DENSE_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Identity,
    Hierarchical,
    Wavelet,
    Custom,
}

/// One-dimensional factor over `k` cells zero-padded to `padded()`.
#[derive(Clone, Debug)]
enum Axis {
    Identity {
        k: usize,
    },
    /// Complete `b`-ary tree of the given height; level 0 is the root.
    Hierarchical {
        k: usize,
        b: usize,
        height: u32,
    },
    /// Haar rows in heap order: row 0 is the total, row `n ≥ 1` is node `n`
    /// (+1 on its left half, −1 on its right half).
    Wavelet {
        height: u32,
    },
}

fn ceil_log(k: usize, b: usize) -> u32 {
    let mut h = 0;
    let mut cap = 1usize;
    while cap < k {
        cap *= b;
        h += 1;
    }
    h
}

impl Axis {
    fn padded(&self) -> usize {
        match *self {
            Axis::Identity { k } => k,
            Axis::Hierarchical { b, height, .. } => b.pow(height),
            Axis::Wavelet { height, .. } => 1 << height,
        }
    }

    fn rows(&self) -> usize {
        match *self {
            Axis::Identity { k } => k,
            Axis::Hierarchical { b, height, .. } => level_offset(b, height + 1),
            Axis::Wavelet { height, .. } => 1 << height,
        }
    }

    fn sensitivity(&self) -> f64 {
        match *self {
            Axis::Identity { .. } => 1.0,
            Axis::Hierarchical { height, .. } | Axis::Wavelet { height, .. } => f64::from(height) + 1.0,
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match *self {
            Axis::Identity { .. } => y.copy_from_slice(x),
            Axis::Hierarchical { b, height, .. } => {
                let leaves = level_offset(b, height);
                y[leaves..].copy_from_slice(x);
                for level in (0..height).rev() {
                    let (off, child) = (level_offset(b, level), level_offset(b, level + 1));
                    for j in 0..b.pow(level) {
                        y[off + j] = y[child + j * b..child + (j + 1) * b].iter().sum();
                    }
                }
            }
            Axis::Wavelet { height, .. } => {
                let m = 1usize << height;
                let mut sums = vec![0.0; 2 * m];
                sums[m..].copy_from_slice(x);
                for n in (1..m).rev() {
                    sums[n] = sums[2 * n] + sums[2 * n + 1];
                }
                y[0] = sums[1];
                for n in 1..m {
                    y[n] = sums[2 * n] - sums[2 * n + 1];
                }
            }
        }
    }

    /// Least-squares inverse `A⁺ y`.
    fn pinv(&self, y: &[f64], x: &mut [f64]) {
        match *self {
            Axis::Identity { .. } => x.copy_from_slice(y),
            Axis::Hierarchical { b, height, .. } => {
                // Bottom-up weighted averages, then top-down redistribution of
                // each parent's surplus among its children.
                let bf = b as f64;
                let mut z = y.to_vec();
                for level in (0..height).rev() {
                    let l = (height - level + 1) as i32;
                    let (bl, bl1) = (bf.powi(l), bf.powi(l - 1));
                    let (off, child) = (level_offset(b, level), level_offset(b, level + 1));
                    for j in 0..b.pow(level) {
                        let kids: f64 = z[child + j * b..child + (j + 1) * b].iter().sum();
                        z[off + j] = (bl - bl1) / (bl - 1.0) * y[off + j] + (bl1 - 1.0) / (bl - 1.0) * kids;
                    }
                }
                let mut h = z.clone();
                for level in 0..height {
                    let (off, child) = (level_offset(b, level), level_offset(b, level + 1));
                    for j in 0..b.pow(level) {
                        let kids = child + j * b..child + (j + 1) * b;
                        let surplus = (h[off + j] - z[kids.clone()].iter().sum::<f64>()) / bf;
                        for c in kids {
                            h[c] = z[c] + surplus;
                        }
                    }
                }
                x.copy_from_slice(&h[level_offset(b, height)..]);
            }
            Axis::Wavelet { height, .. } => {
                // Rows are orthogonal, so A⁺ = Aᵀ diag(1 / row length).
                let m = 1usize << height;
                let mut val = vec![0.0; 2 * m];
                val[1] = y[0] / m as f64;
                for n in 1..m {
                    let width = (m >> n.ilog2()) as f64;
                    let c = y[n] / width;
                    val[2 * n] = val[n] + c;
                    val[2 * n + 1] = val[n] - c;
                }
                x.copy_from_slice(&val[m..]);
            }
        }
    }

    fn matrix(&self) -> SparseMatrix {
        let n = self.padded();
        let rows: Vec<Vec<(usize, f64)>> = match *self {
            Axis::Identity { k } => (0..k).map(|i| vec![(i, 1.0)]).collect(),
            Axis::Hierarchical { b, height, .. } => (0..=height)
                .flat_map(|level| {
                    let width = b.pow(height - level);
                    (0..b.pow(level)).map(move |j| (j * width..(j + 1) * width).map(|c| (c, 1.0)).collect())
                })
                .collect(),
            Axis::Wavelet { height, .. } => {
                let m = 1usize << height;
                let mut rows = vec![(0..m).map(|c| (c, 1.0)).collect::<Vec<_>>()];
                for node in 1..m {
                    let width = m >> node.ilog2();
                    let start = (node - (1 << node.ilog2())) * width;
                    rows.push(
                        (start..start + width).map(|c| (c, if c < start + width / 2 { 1.0 } else { -1.0 })).collect(),
                    );
                }
                rows
            }
        };
        SparseMatrix::from_rows(n, rows).expect("strategy rows in range")
    }
}

/// Number of nodes above `level` in a complete `b`-ary tree.
fn level_offset(b: usize, level: u32) -> usize {
    (b.pow(level) - 1) / (b - 1)
}

#[derive(Clone, Debug)]
enum Form {
    Axes(Vec<Axis>),
    Custom { matrix: SparseMatrix, pinv: DMatrix<f64> },
}

/// A strategy `A` (rows × padded cells) with its L1 sensitivity.
#[derive(Clone, Debug)]
pub struct Strategy {
    kind: StrategyKind,
    shape: Vec<usize>,
    form: Form,
    sensitivity: f64,
    matrix: OnceLock<SparseMatrix>,
}

impl Strategy {
    fn from_axes(kind: StrategyKind, shape: &[usize], make: impl Fn(usize) -> Axis) -> Result<Strategy> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::invalid(format!("strategy shape {shape:?} must be nonempty with positive sides")));
        }
        let axes: Vec<Axis> = shape.iter().map(|&k| make(k)).collect();
        let sensitivity = axes.iter().map(Axis::sensitivity).product();
        Ok(Strategy { kind, shape: shape.to_vec(), form: Form::Axes(axes), sensitivity, matrix: OnceLock::new() })
    }

    pub fn identity(shape: &[usize]) -> Result<Strategy> {
        Strategy::from_axes(StrategyKind::Identity, shape, |k| Axis::Identity { k })
    }

    /// `b`-ary hierarchical strategy on each axis.
    pub fn hierarchical(shape: &[usize], branching: usize) -> Result<Strategy> {
        if branching < 2 {
            return Err(Error::invalid(format!("branching factor must be at least 2, got {branching}")));
        }
        Strategy::from_axes(StrategyKind::Hierarchical, shape, |k| Axis::Hierarchical {
            k,
            b: branching,
            height: ceil_log(k, branching),
        })
    }

    /// Unweighted Haar strategy on each axis.
    pub fn wavelet(shape: &[usize]) -> Result<Strategy> {
        Strategy::from_axes(StrategyKind::Wavelet, shape, |k| Axis::Wavelet { height: ceil_log(k, 2) })
    }

    /// Arbitrary strategy over a 1-D domain of `matrix.cols()` cells; `A⁺` is
    /// the dense Moore-Penrose pseudo-inverse.
    pub fn custom(matrix: SparseMatrix) -> Result<Strategy> {
        let (p, n) = matrix.shape();
        if p == 0 || n == 0 {
            return Err(Error::invalid("custom strategy matrix is empty"));
        }
        if p.max(n) > MAX_DENSE_DIM {
            return Err(Error::TooLarge {
                what: "custom strategy",
                size: p.max(n),
                limit: MAX_DENSE_DIM,
                hint: "use a hierarchical or wavelet strategy",
            });
        }
        let pinv = matrix.to_dense().pseudo_inverse(1e-12).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Strategy {
            kind: StrategyKind::Custom,
            shape: vec![n],
            sensitivity: matrix.max_column_l1(),
            form: Form::Custom { matrix: matrix.clone(), pinv },
            matrix: OnceLock::from(matrix),
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Shape of the data the strategy is applied to (before padding).
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn padded_shape(&self) -> Vec<usize> {
        match &self.form {
            Form::Axes(a) => a.iter().map(Axis::padded).collect(),
            Form::Custom { .. } => self.shape.clone(),
        }
    }

    fn row_shape(&self) -> Vec<usize> {
        match &self.form {
            Form::Axes(a) => a.iter().map(Axis::rows).collect(),
            Form::Custom { matrix, .. } => vec![matrix.rows()],
        }
    }

    /// Number of strategy queries `p`.
    pub fn rows(&self) -> usize {
        self.row_shape().iter().product()
    }

    /// Number of (padded) cells the strategy covers.
    pub fn cols(&self) -> usize {
        self.padded_shape().iter().product()
    }

    /// Largest column L1 norm of `A`.
    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    /// The sparse matrix `A`, built on first use.
    pub fn matrix(&self) -> &SparseMatrix {
        self.matrix.get_or_init(|| match &self.form {
            Form::Axes(axes) => {
                let mut it = axes.iter().map(Axis::matrix);
                let first = it.next().expect("at least one axis");
                it.fold(first, |acc, m| acc.kron(&m))
            }
            Form::Custom { matrix, .. } => matrix.clone(),
        })
    }

    /// `A x` for a padded data vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("strategy apply", x.len(), self.cols())?;
        Ok(match &self.form {
            Form::Axes(axes) => {
                let mut shape = self.padded_shape();
                let mut data = x.to_vec();
                for (i, axis) in axes.iter().enumerate() {
                    data = map_axis(&data, &shape, i, axis.rows(), |a, b| axis.apply(a, b));
                    shape[i] = axis.rows();
                }
                data
            }
            Form::Custom { matrix, .. } => matrix.mul_vec(x)?,
        })
    }

    /// `A⁺ y`.
    pub fn pinv_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len("strategy inverse", y.len(), self.rows())?;
        Ok(match &self.form {
            Form::Axes(axes) => {
                let mut shape = self.row_shape();
                let mut data = y.to_vec();
                for (i, axis) in axes.iter().enumerate() {
                    data = map_axis(&data, &shape, i, axis.padded(), |a, b| axis.pinv(a, b));
                    shape[i] = axis.padded();
                }
                data
            }
            Form::Custom { pinv, .. } => (pinv * nalgebra::DVector::from_column_slice(y)).as_slice().to_vec(),
        })
    }

    fn check_len(&self, op: &'static str, got: usize, want: usize) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { op, left: (self.rows(), self.cols()), right: (got, 1) })
        }
    }

    /// Zero-extends data of shape `shape()` to the padded shape.
    pub fn pad(&self, x: &[f64]) -> Vec<f64> {
        let padded = self.padded_shape();
        if padded == self.shape {
            return x.to_vec();
        }
        let mut out = vec![0.0; padded.iter().product()];
        for (i, &v) in x.iter().enumerate() {
            out[reindex(i, &self.shape, &padded)] = v;
        }
        out
    }

    /// Column of `A` for each real cell, in row-major order.
    pub fn real_columns(&self) -> Vec<usize> {
        let padded = self.padded_shape();
        (0..self.shape.iter().product()).map(|i| reindex(i, &self.shape, &padded)).collect()
    }

    /// Inverse of [`Strategy::pad`]: drops the padding cells.
    pub fn unpad(&self, x: &[f64]) -> Vec<f64> {
        let padded = self.padded_shape();
        if padded == self.shape {
            return x.to_vec();
        }
        let n: usize = self.shape.iter().product();
        (0..n).map(|i| x[reindex(i, &self.shape, &padded)]).collect()
    }

    /// `x̂ = A⁺(A x + Lap(scale)ᵖ)` restricted to the real cells; `x` itself
    /// when `rng` is `None`.
    pub fn estimate(&self, x: &[f64], scale: f64, rng: Option<&mut NoiseRng>) -> Result<Vec<f64>> {
        let n: usize = self.shape.iter().product();
        self.check_len("strategy estimate", x.len(), n)?;
        let Some(rng) = rng else { return Ok(x.to_vec()) };
        if matches!(&self.form, Form::Axes(a) if a.iter().all(|a| matches!(a, Axis::Identity { .. }))) {
            return Ok(x.iter().map(|v| v + laplace(rng, scale)).collect());
        }
        let mut y = self.apply(&self.pad(x))?;
        for v in &mut y {
            *v += laplace(rng, scale);
        }
        Ok(self.unpad(&self.pinv_apply(&y)?))
    }

    /// Pads a workload matrix over the real cells to the strategy's columns.
    fn pad_workload(&self, w: &SparseMatrix) -> Result<SparseMatrix> {
        let n: usize = self.shape.iter().product();
        if w.cols() != n {
            return Err(Error::DimensionMismatch { op: "strategy decoder", left: w.shape(), right: (n, 1) });
        }
        let padded = self.padded_shape();
        let rows = (0..w.rows()).map(|r| {
            let (c, v) = w.row(r);
            c.iter().zip(v).map(|(&c, &v)| (reindex(c, &self.shape, &padded), v)).collect::<Vec<_>>()
        });
        SparseMatrix::from_rows(self.cols(), rows.collect::<Vec<_>>())
    }

    /// The reconstruction factor `W A⁺` (rows of `W` × strategy rows).
    pub fn decoder(&self, w: &SparseMatrix) -> Result<SparseMatrix> {
        let p = self.rows();
        if p > MAX_DENSE_DIM * 4 {
            return Err(Error::TooLarge {
                what: "strategy decoder",
                size: p,
                limit: MAX_DENSE_DIM * 4,
                hint: "answer through Strategy::estimate instead",
            });
        }
        let wp = self.pad_workload(w)?;
        // Column j of A⁺ is A⁺ e_j; gather them as rows of (A⁺)ᵀ.
        let mut e = vec![0.0; p];
        let mut cols = Vec::with_capacity(p);
        for j in 0..p {
            e[j] = 1.0;
            let col = self.pinv_apply(&e)?;
            e[j] = 0.0;
            cols.push(col.into_iter().enumerate().collect::<Vec<_>>());
        }
        let pinv_t = SparseMatrix::from_rows(self.cols(), cols)?;
        wp.matmul(&pinv_t.transpose())
    }

    /// `max |W A⁺ A − W|` over entries. Each row of `W A⁺ A` is the
    /// projection `A⁺ A wᵀ` of the corresponding row of `W`.
    pub fn reconstruction_error(&self, w: &SparseMatrix) -> Result<f64> {
        let wp = self.pad_workload(w)?;
        let n = self.cols();
        let mut row = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for r in 0..wp.rows() {
            let (c, v) = wp.row(r);
            row.iter_mut().for_each(|x| *x = 0.0);
            for (&c, &v) in c.iter().zip(v) {
                row[c] = v;
            }
            let proj = self.pinv_apply(&self.apply(&row)?)?;
            worst = proj.iter().zip(&row).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
        Ok(worst)
    }

    /// Rows of a 1-D hierarchical strategy whose disjoint union is the
    /// interval `[l, r]`: the greedy dyadic cover.
    pub fn interval_cover(&self, l: usize, r: usize) -> Result<Vec<usize>> {
        let Form::Axes(axes) = &self.form else {
            return Err(Error::invalid("interval cover needs a hierarchical strategy"));
        };
        let [Axis::Hierarchical { k, b, height }] = axes.as_slice() else {
            return Err(Error::invalid("interval cover needs a one-dimensional hierarchical strategy"));
        };
        if l > r || r >= *k {
            return Err(Error::invalid(format!("interval [{l}, {r}] outside 0..{k}")));
        }
        let mut out = Vec::new();
        cover(*b, *height, 0, 0, l, r + 1, &mut out);
        Ok(out)
    }
}

fn cover(b: usize, height: u32, level: u32, j: usize, l: usize, r: usize, out: &mut Vec<usize>) {
    let width = b.pow(height - level);
    let (s, e) = (j * width, (j + 1) * width);
    if e <= l || s >= r {
        return;
    }
    if l <= s && e <= r {
        out.push(level_offset(b, level) + j);
        return;
    }
    for c in 0..b {
        cover(b, height, level + 1, j * b + c, l, r, out);
    }
}

/// Flat index of cell `i` of `shape` inside the larger `padded` layout.
fn reindex(mut i: usize, shape: &[usize], padded: &[usize]) -> usize {
    let mut out = 0;
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        out += (i % shape[a]) * stride;
        i /= shape[a];
        stride *= padded[a];
    }
    out
}

/// Applies `f` to every fibre of `data` (row-major, `shape`) along `axis`,
/// replacing that axis' length by `out_len`.
fn map_axis(data: &[f64], shape: &[usize], axis: usize, out_len: usize, f: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * out_len * inner];
    let mut line = vec![0.0; n];
    let mut res = vec![0.0; out_len];
    for o in 0..outer {
        for t in 0..inner {
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[(o * n + j) * inner + t];
            }
            f(&line, &mut res);
            for (j, &v) in res.iter().enumerate() {
                out[(o * out_len + j) * inner + t] = v;
            }
        }
    }
    out
}

/// `b`-ary hierarchical strategy over `k` cells padded to the next power of `b`.
pub fn hierarchical_strategy(k: usize, branching: usize) -> Result<Strategy> {
    Strategy::hierarchical(&[k], branching)
}

/// Haar wavelet strategy over `k` cells padded to the next power of two.
pub fn wavelet_strategy(k: usize) -> Result<Strategy> {
    Strategy::wavelet(&[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Domain;
    use crate::workload::{make_workload, WorkloadKind};

    fn dense_pinv(a: &SparseMatrix) -> DMatrix<f64> {
        a.to_dense().pseudo_inverse(1e-12).unwrap()
    }

    #[test]
    fn hierarchical_shapes() {
        let s = hierarchical_strategy(4, 2).unwrap();
        assert_eq!((s.rows(), s.cols(), s.sensitivity()), (7, 4, 3.0));
        assert_eq!(s.matrix().max_column_l1(), 3.0);
        let s = hierarchical_strategy(1, 2).unwrap();
        assert_eq!((s.rows(), s.sensitivity()), (1, 1.0));
        assert_eq!(*s.matrix(), SparseMatrix::identity(1));
        let s = hierarchical_strategy(10, 3).unwrap();
        assert_eq!((s.cols(), s.rows(), s.sensitivity()), (27, 40, 4.0));
        assert!(hierarchical_strategy(4, 1).is_err());
    }

    #[test]
    fn wavelet_shapes() {
        let s = wavelet_strategy(2).unwrap();
        assert_eq!(s.matrix().to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]));
        let s = wavelet_strategy(5).unwrap();
        assert_eq!((s.rows(), s.cols(), s.sensitivity()), (8, 8, 4.0));
        assert_eq!(s.matrix().max_column_l1(), 4.0);
    }

    #[test]
    fn fast_paths_match_dense_algebra() {
        let strategies = [
            hierarchical_strategy(9, 2).unwrap(),
            hierarchical_strategy(7, 3).unwrap(),
            wavelet_strategy(8).unwrap(),
            wavelet_strategy(6).unwrap(),
            Strategy::hierarchical(&[3, 4], 2).unwrap(),
            Strategy::wavelet(&[2, 3, 2]).unwrap(),
        ];
        for s in &strategies {
            let a = s.matrix();
            assert_eq!(a.shape(), (s.rows(), s.cols()));
            assert_eq!(a.max_column_l1(), s.sensitivity());
            let x: Vec<f64> = (0..s.cols()).map(|i| (i * 7 % 5) as f64 - 1.5).collect();
            let y = s.apply(&x).unwrap();
            let want = a.mul_vec(&x).unwrap();
            assert!(y.iter().zip(&want).all(|(p, q)| (p - q).abs() < 1e-9));

            let z: Vec<f64> = (0..s.rows()).map(|i| ((i * 13) % 11) as f64 * 0.3 - 1.0).collect();
            let got = s.pinv_apply(&z).unwrap();
            let want = dense_pinv(a) * nalgebra::DVector::from_column_slice(&z);
            for (p, q) in got.iter().zip(want.iter()) {
                assert!((p - q).abs() < 1e-9, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn reconstruction_of_all_ranges() {
        for k in [4, 5, 16] {
            let w = make_workload(WorkloadKind::AllRanges, &Domain::line(k).unwrap()).unwrap();
            for s in [
                hierarchical_strategy(k, 2).unwrap(),
                wavelet_strategy(k).unwrap(),
                hierarchical_strategy(k, 4).unwrap(),
            ] {
                assert!(s.reconstruction_error(&w.matrix()).unwrap() < 1e-8);
                let dec = s.decoder(&w.matrix()).unwrap();
                let back = dec.matmul(s.matrix()).unwrap();
                let wp = s.pad_workload(&w.matrix()).unwrap();
                assert!(back.max_abs_diff(&wp).unwrap() < 1e-8);
            }
        }
    }

    #[test]
    fn interval_cover_greedy() {
        let s = hierarchical_strategy(4, 2).unwrap();
        // Rows: 0 root, 1-2 halves, 3-6 leaves.
        assert_eq!(s.interval_cover(1, 2).unwrap(), vec![4, 5]);
        assert_eq!(s.interval_cover(0, 1).unwrap(), vec![1]);
        assert_eq!(s.interval_cover(0, 3).unwrap(), vec![0]);
        let s = hierarchical_strategy(64, 2).unwrap();
        for l in 0..64 {
            for r in l..64 {
                let c = s.interval_cover(l, r).unwrap();
                assert!(c.len() <= 2 * 2 * 6);
                let rows = s.matrix();
                let mut sum = vec![0.0; 64];
                for &i in &c {
                    let (cols, _) = rows.row(i);
                    cols.iter().for_each(|&j| sum[j] += 1.0);
                }
                assert!(sum.iter().enumerate().all(|(j, &v)| v == if (l..=r).contains(&j) { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn custom_strategy_uses_pseudo_inverse() {
        let a = hierarchical_strategy(4, 2).unwrap().matrix().clone();
        let s = Strategy::custom(a).unwrap();
        assert_eq!(s.sensitivity(), 3.0);
        let y = [1.0, 2.0, 0.0, 1.0, 0.5, -1.0, 2.0];
        let fast = hierarchical_strategy(4, 2).unwrap().pinv_apply(&y).unwrap();
        let slow = s.pinv_apply(&y).unwrap();
        assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn noiseless_estimate_is_identity() {
        let s = Strategy::wavelet(&[3, 5]).unwrap();
        let x: Vec<f64> = (0..15).map(f64::from).collect();
        assert_eq!(s.estimate(&x, 1.0, None).unwrap(), x);
        let mut rng = super::super::noise::stream_rng(1, 0);
        let e = s.estimate(&x, 0.0, Some(&mut rng)).unwrap();
        assert!(e.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9));
    }
}
