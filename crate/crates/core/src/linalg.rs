//! Sparse matrices in compressed-row form, plus the few dense routines the
//! transforms need (right inverses and singular values).

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with magnitude below this are dropped from sparse storage.
pub const DROP_TOLERANCE: f64 = 1e-12;
/// Pivots smaller than this make a Gram solve fail.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Largest Gram matrix (rows of the input) the dense path will factor.
pub const MAX_DENSE_DIM: usize = 4096;

/// A vector of finite reals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry at index {i}")));
        }
        Ok(DenseVector(values))
    }

    pub fn zeros(n: usize) -> Self {
        DenseVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DenseVector::new(v)
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Vec<f64> {
        v.0
    }
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and every stored value has magnitude at least
/// [`DROP_TOLERANCE`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { rows: n, cols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Builds a matrix from (row, col, value) triplets. Duplicate positions
    /// and out-of-range indices are errors.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &t {
            if r >= rows || c >= cols {
                return Err(Error::invalid(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({r}, {c})")));
            }
        }
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = t.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::invalid(format!("duplicate entry at ({}, {})", w[0].0, w[0].1)));
        }
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if v.abs() >= DROP_TOLERANCE {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { rows, cols, row_ptr, col_idx, values })
    }

    /// Builds a matrix row by row. Entries within a row may come in any order;
    /// repeated columns are summed.
    pub fn from_rows<I, R>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut buf: Vec<(usize, f64)> = Vec::new();
        for row in rows {
            buf.clear();
            buf.extend(row);
            if let Some(&(c, _)) = buf.iter().find(|&&(c, _)| c >= cols) {
                return Err(Error::invalid(format!("column {c} outside width {cols}")));
            }
            buf.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < buf.len() {
                let c = buf[i].0;
                let mut v = 0.0;
                while i < buf.len() && buf[i].0 == c {
                    v += buf[i].1;
                    i += 1;
                }
                if v.abs() >= DROP_TOLERANCE {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { rows: row_ptr.len() - 1, cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(move |c| (c, m[(r, c)])).filter(|&(_, v)| v.abs() >= DROP_TOLERANCE));
        SparseMatrix::from_rows(m.ncols(), rows).expect("dense columns are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|i| vals[i]).unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.triplets() {
            let slot = next[c];
            col_idx[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix { rows: self.cols, cols: self.rows, row_ptr, col_idx, values }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { op: "matvec", left: self.shape(), right: (x.len(), 1) });
        }
        Ok((0..self.rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { op: "matmul", left: self.shape(), right: other.shape() });
        }
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let rows = (0..self.rows).map(|r| {
            let (acols, avals) = self.row(r);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&c, &b) in bcols.iter().zip(bvals) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            let out: Vec<(usize, f64)> = pattern.iter().map(|&c| (c, acc[c])).collect();
            for &c in &pattern {
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
            out
        });
        let rows: Vec<Vec<(usize, f64)>> = rows.collect();
        SparseMatrix::from_rows(other.cols, rows)
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Result<SparseMatrix> {
        let mut map = vec![usize::MAX; self.cols];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.cols {
                return Err(Error::invalid(format!("column {old} outside width {}", self.cols)));
            }
            map[old] = new;
        }
        let rows = (0..self.rows).map(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).filter(|(&c, _)| map[c] != usize::MAX).map(|(&c, &v)| (map[c], v)).collect::<Vec<_>>()
        });
        SparseMatrix::from_rows(keep.len(), rows.collect::<Vec<_>>())
    }

    /// Sum of absolute values in each column.
    pub fn column_abs_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            s[c] += v.abs();
        }
        s
    }

    /// Largest column L1 norm: the sensitivity of the matrix under unit
    /// changes of a single coordinate.
    pub fn max_column_l1(&self) -> f64 {
        self.column_abs_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn scale(&self, c: f64) -> SparseMatrix {
        let rows = (0..self.rows).map(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(|(&i, &v)| (i, v * c)).collect::<Vec<_>>()
        });
        SparseMatrix::from_rows(self.cols, rows.collect::<Vec<_>>()).expect("same shape")
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseMatrix) -> SparseMatrix {
        let rows = (0..self.rows).flat_map(|ra| {
            (0..other.rows).map(move |rb| {
                let (ac, av) = self.row(ra);
                let (bc, bv) = other.row(rb);
                let mut out = Vec::with_capacity(ac.len() * bc.len());
                for (&i, &x) in ac.iter().zip(av) {
                    out.extend(bc.iter().zip(bv).map(|(&j, &y)| (i * other.cols + j, x * y)));
                }
                out
            })
        });
        SparseMatrix::from_rows(self.cols * other.cols, rows.collect::<Vec<_>>()).expect("indices in range")
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch { op: "compare", left: self.shape(), right: other.shape() });
        }
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                let d = match (ac.get(i), bc.get(j)) {
                    (Some(&a), Some(&b)) if a == b => {
                        i += 1;
                        j += 1;
                        av[i - 1] - bv[j - 1]
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        i += 1;
                        av[i - 1]
                    }
                    (Some(_), None) => {
                        i += 1;
                        av[i - 1]
                    }
                    _ => {
                        j += 1;
                        -bv[j - 1]
                    }
                };
                worst = worst.max(d.abs());
            }
        }
        Ok(worst)
    }
}

/// Sparse-sparse product.
pub fn matmul(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    a.matmul(b)
}

/// Sparse matrix times dense vector.
pub fn matvec(a: &SparseMatrix, x: &[f64]) -> Result<DenseVector> {
    DenseVector::new(a.mul_vec(x)?)
}

/// Right inverse `Mᵀ(MMᵀ)⁻¹` of a full-row-rank matrix, through a dense LU
/// factorisation of the Gram matrix.
pub fn right_inverse(m: &SparseMatrix) -> Result<SparseMatrix> {
    if m.rows() > MAX_DENSE_DIM {
        return Err(Error::TooLarge {
            what: "dense Gram solve",
            size: m.rows(),
            limit: MAX_DENSE_DIM,
            hint: "use a tree policy or the spanning-tree preimage",
        });
    }
    let mt = m.transpose();
    let gram = m.matmul(&mt)?.to_dense();
    let n = gram.nrows();
    let lu = gram.lu();
    let u = lu.u();
    let pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if n > 0 && pivot < PIVOT_TOLERANCE {
        return Err(Error::RankDeficient { pivot });
    }
    let inv = lu.solve(&DMatrix::identity(n, n)).ok_or(Error::RankDeficient { pivot })?;
    let r = mt.to_dense() * inv;
    Ok(SparseMatrix::from_dense(&r))
}

/// Singular values in nonincreasing order; `min(rows, cols)` of them.
pub fn singular_values(m: &SparseMatrix) -> Result<DenseVector> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid("singular values of an empty matrix"));
    }
    // Decompose whichever orientation is narrower.
    let d = if m.rows() >= m.cols() { m.to_dense() } else { m.transpose().to_dense() };
    let mut s: Vec<f64> = d.singular_values().iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    DenseVector::new(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SparseMatrix {
        let cols = rows[0].len();
        SparseMatrix::from_rows(
            cols,
            rows.iter().map(|r| r.iter().enumerate().map(|(c, &v)| (c, v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn cumulative(k: usize) -> SparseMatrix {
        SparseMatrix::from_rows(k, (0..k).map(|r| (0..=r).map(|c| (c, 1.0)).collect::<Vec<_>>())).unwrap()
    }

    #[test]
    fn identity_times_vector() {
        assert_eq!(SparseMatrix::identity(3).mul_vec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn cumulative_gives_prefix_sums() {
        assert_eq!(cumulative(3).mul_vec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0, 6.0]);
    }

    #[test]
    fn line_incidence_times_inverse() {
        let p = m(&[&[1.0, 0.0], &[-1.0, 1.0]]);
        let c = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        assert_eq!(p.matmul(&c).unwrap(), SparseMatrix::identity(2));
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let e = SparseMatrix::identity(2).matmul(&SparseMatrix::identity(3)).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("(2, 2)") && msg.contains("(3, 3)"), "{msg}");
    }

    #[test]
    fn duplicates_rejected_and_tiny_dropped() {
        assert!(SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1e-13), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn right_inverse_of_line_incidence() {
        let p = m(&[&[1.0, 0.0], &[-1.0, 1.0]]);
        let r = right_inverse(&p).unwrap();
        let want = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        assert!(r.max_abs_diff(&want).unwrap() < 1e-12);
        assert_eq!(right_inverse(&SparseMatrix::identity(4)).unwrap(), SparseMatrix::identity(4));
    }

    #[test]
    fn right_inverse_of_wide_matrix() {
        let a = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, -1.0]]);
        let r = right_inverse(&a).unwrap();
        assert!(a.matmul(&r).unwrap().max_abs_diff(&SparseMatrix::identity(2)).unwrap() < 1e-9);
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = m(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert!(matches!(right_inverse(&a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn singular_values_of_simple_matrices() {
        assert_eq!(singular_values(&SparseMatrix::identity(4)).unwrap().as_slice(), &[1.0; 4]);
        let d = m(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let s = singular_values(&d).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_round_trip() {
        let a = m(&[&[1.0, 0.0, 2.0], &[0.0, -3.0, 0.0]]);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(2, 0), 2.0);
        assert_eq!(SparseMatrix::from_dense(&a.to_dense()), a);
    }

    #[test]
    fn kron_matches_dense() {
        let a = m(&[&[1.0, 2.0], &[0.0, -1.0]]);
        let b = m(&[&[1.0, 0.0, 3.0]]);
        let k = a.kron(&b);
        assert_eq!(k.shape(), (2, 6));
        assert_eq!(k.to_dense(), a.to_dense().kronecker(&b.to_dense()));
    }

    #[test]
    fn dense_vector_rejects_nan() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<DenseVector>("[1.0, 2.0]").is_ok());
    }
}
