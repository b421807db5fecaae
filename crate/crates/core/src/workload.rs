//! Workloads (linear counting queries) and histogram databases.

use std::borrow::Cow;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Domain;
use crate::linalg::{DenseVector, SparseMatrix};

/// Row-count guard for [`make_workload`] with `AllRanges`.
pub const MAX_ALL_RANGES_ROWS: usize = 1_000_000;

/// Inclusive axis-aligned box of cells, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangeQuery {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl RangeQuery {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>, domain: &Domain) -> Result<Self> {
        let q = RangeQuery { lo, hi };
        q.check(domain)?;
        Ok(q)
    }

    /// One-dimensional `[l, r]`.
    pub fn interval(l: usize, r: usize) -> Self {
        RangeQuery { lo: vec![l], hi: vec![r] }
    }

    pub fn check(&self, domain: &Domain) -> Result<()> {
        let ok = self.lo.len() == domain.d()
            && self.hi.len() == domain.d()
            && self.lo.iter().zip(&self.hi).all(|(l, h)| l <= h)
            && domain.contains(&self.hi);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("range {:?}..={:?} is not a box inside {:?}", self.lo, self.hi, domain.dims())))
        }
    }

    pub fn contains(&self, coords: &[usize]) -> bool {
        coords.iter().zip(self.lo.iter().zip(&self.hi)).all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn volume(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l + 1).product()
    }

    /// Linear indices of the covered cells, ascending.
    pub fn cells(&self, domain: &Domain) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.volume());
        let d = domain.d();
        let mut c = self.lo.clone();
        loop {
            out.push(domain.index(&c));
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if c[i] < self.hi[i] {
                    c[i] += 1;
                    break;
                }
                c[i] = self.lo[i];
            }
        }
    }
}

/// Summed-area table: any box sum in `2^d` lookups.
#[derive(Clone, Debug)]
pub struct PrefixTable {
    shape: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<f64>,
}

impl PrefixTable {
    pub fn new(domain: &Domain, x: &[f64]) -> Self {
        let shape: Vec<usize> = domain.dims().iter().map(|k| k + 1).collect();
        let d = shape.len();
        let mut strides = vec![1; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        let mut table = vec![0.0; shape.iter().product()];
        for (cell, &v) in x.iter().enumerate() {
            let c = domain.coords(cell);
            let pos: usize = c.iter().zip(&strides).map(|(&ci, &s)| (ci + 1) * s).sum();
            table[pos] = v;
        }
        for axis in 0..d {
            let s = strides[axis];
            for pos in 0..table.len() {
                if !(pos / s).is_multiple_of(shape[axis]) {
                    table[pos] += table[pos - s];
                }
            }
        }
        PrefixTable { shape, strides, table }
    }

    pub fn sum(&self, q: &RangeQuery) -> f64 {
        let d = self.shape.len();
        let mut total = 0.0;
        for mask in 0..(1usize << d) {
            let mut pos = 0;
            let mut sign = 1.0;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    pos += q.lo[i] * self.strides[i];
                    sign = -sign;
                } else {
                    pos += (q.hi[i] + 1) * self.strides[i];
                }
            }
            total += sign * self.table[pos];
        }
        total
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadKind {
    Identity,
    Cumulative,
    AllRanges,
    SampledRanges,
    Custom,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 5] = [
        WorkloadKind::Identity,
        WorkloadKind::Cumulative,
        WorkloadKind::AllRanges,
        WorkloadKind::SampledRanges,
        WorkloadKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadKind::Identity => "identity",
            WorkloadKind::Cumulative => "cumulative",
            WorkloadKind::AllRanges => "all-ranges",
            WorkloadKind::SampledRanges => "sampled-ranges",
            WorkloadKind::Custom => "custom",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WorkloadKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown workload `{s}` (expected identity, cumulative, all-ranges, sampled-ranges or custom)"
            ))
        })
    }
}

#[derive(Clone, Debug)]
enum Body {
    Ranges(Vec<RangeQuery>),
    Matrix(SparseMatrix),
}

/// A set of linear queries over a domain. Range workloads are stored as
/// boxes and only materialised as a matrix on request.
#[derive(Clone, Debug)]
pub struct Workload {
    kind: WorkloadKind,
    domain: Domain,
    body: Body,
}

impl Workload {
    pub fn from_ranges(kind: WorkloadKind, domain: Domain, ranges: Vec<RangeQuery>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("a workload needs at least one query"));
        }
        for q in &ranges {
            q.check(&domain)?;
        }
        Ok(Workload { kind, domain, body: Body::Ranges(ranges) })
    }

    /// An arbitrary query matrix. It may carry one extra all-zero column for
    /// `Bot`.
    pub fn custom(domain: Domain, matrix: SparseMatrix) -> Result<Self> {
        let k = domain.total();
        if matrix.rows() == 0 {
            return Err(Error::invalid("a workload needs at least one query"));
        }
        let padded = matrix.cols() == k + 1 && matrix.transpose().row(k).0.is_empty();
        if matrix.cols() != k && !padded {
            return Err(Error::DimensionMismatch { op: "workload", left: matrix.shape(), right: (k, 1) });
        }
        Ok(Workload { kind: WorkloadKind::Custom, domain, body: Body::Matrix(matrix) })
    }

    pub fn kind(&self) -> WorkloadKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn rows(&self) -> usize {
        match &self.body {
            Body::Ranges(r) => r.len(),
            Body::Matrix(m) => m.rows(),
        }
    }

    /// Column count of the matrix form (domain size, plus one if padded for `Bot`).
    pub fn cols(&self) -> usize {
        match &self.body {
            Body::Ranges(_) => self.domain.total(),
            Body::Matrix(m) => m.cols(),
        }
    }

    /// The boxes, when the workload was built from them.
    pub fn ranges(&self) -> Option<&[RangeQuery]> {
        match &self.body {
            Body::Ranges(r) => Some(r),
            Body::Matrix(_) => None,
        }
    }

    pub fn matrix(&self) -> Cow<'_, SparseMatrix> {
        match &self.body {
            Body::Matrix(m) => Cow::Borrowed(m),
            Body::Ranges(r) => Cow::Owned(
                SparseMatrix::from_rows(
                    self.domain.total(),
                    r.iter().map(|q| q.cells(&self.domain).into_iter().map(|c| (c, 1.0)).collect::<Vec<_>>()),
                )
                .expect("range cells lie in the domain"),
            ),
        }
    }

    /// Matrix form without the `Bot` padding column.
    pub fn cell_matrix(&self) -> Cow<'_, SparseMatrix> {
        let m = self.matrix();
        if m.cols() == self.domain.total() {
            m
        } else {
            let keep: Vec<usize> = (0..self.domain.total()).collect();
            Cow::Owned(m.select_columns(&keep).expect("columns in range"))
        }
    }

    /// Same queries with a zero column appended for `Bot`.
    pub fn with_bot_column(&self) -> Workload {
        let m = self.cell_matrix();
        let padded = SparseMatrix::from_rows(
            m.cols() + 1,
            (0..m.rows()).map(|r| {
                let (c, v) = m.row(r);
                c.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>()
            }),
        )
        .expect("wider matrix");
        Workload { kind: self.kind, domain: self.domain.clone(), body: Body::Matrix(padded) }
    }

    /// The queries as boxes: directly for range workloads, otherwise by
    /// checking that every row is the indicator of a box.
    pub fn to_ranges(&self) -> Result<Cow<'_, [RangeQuery]>> {
        if let Body::Ranges(r) = &self.body {
            return Ok(Cow::Borrowed(r));
        }
        let m = self.cell_matrix();
        let d = self.domain.d();
        let mut out = Vec::with_capacity(m.rows());
        for r in 0..m.rows() {
            let (cols, vals) = m.row(r);
            if cols.is_empty() || vals.iter().any(|&v| v != 1.0) {
                return Err(Error::NotRangeWorkload(format!("row {r} is not a 0/1 indicator")));
            }
            let mut lo = vec![usize::MAX; d];
            let mut hi = vec![0; d];
            for &c in cols {
                for (i, x) in self.domain.coords(c).into_iter().enumerate() {
                    lo[i] = lo[i].min(x);
                    hi[i] = hi[i].max(x);
                }
            }
            let q = RangeQuery { lo, hi };
            if q.volume() != cols.len() {
                return Err(Error::NotRangeWorkload(format!("row {r} is not a box")));
            }
            out.push(q);
        }
        Ok(Cow::Owned(out))
    }

    /// Exact answers `W x`.
    pub fn answer(&self, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.domain.total();
        if x.len() != k {
            return Err(Error::DimensionMismatch {
                op: "evaluate",
                left: (self.rows(), self.cols()),
                right: (x.len(), 1),
            });
        }
        match &self.body {
            Body::Ranges(r) => {
                let t = PrefixTable::new(&self.domain, x);
                Ok(r.iter().map(|q| t.sum(q)).collect())
            }
            Body::Matrix(m) if m.cols() == k => m.mul_vec(x),
            Body::Matrix(m) => {
                let mut padded = x.to_vec();
                padded.push(0.0);
                m.mul_vec(&padded)
            }
        }
    }

    /// Per-cell sum of absolute query coefficients (column L1 norms).
    pub fn column_abs_sums(&self) -> Vec<f64> {
        match &self.body {
            Body::Matrix(_) => {
                let mut s = self.cell_matrix().column_abs_sums();
                s.truncate(self.domain.total());
                s
            }
            Body::Ranges(r) => {
                // Difference array over an extended grid, then prefix-summed.
                let ext = Domain::new(self.domain.dims().iter().map(|k| k + 1).collect()).expect("nonzero");
                let d = self.domain.d();
                let mut diff = vec![0.0; ext.total()];
                for q in r.iter() {
                    for mask in 0..(1usize << d) {
                        let c: Vec<usize> =
                            (0..d).map(|i| if mask >> i & 1 == 1 { q.hi[i] + 1 } else { q.lo[i] }).collect();
                        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        diff[ext.index(&c)] += sign;
                    }
                }
                let strides = ext.strides();
                for (&s, &len) in strides.iter().zip(ext.dims()) {
                    for pos in 0..diff.len() {
                        if !(pos / s).is_multiple_of(len) {
                            diff[pos] += diff[pos - s];
                        }
                    }
                }
                (0..self.domain.total()).map(|cell| diff[ext.index(&self.domain.coords(cell))]).collect()
            }
        }
    }

    /// Sparse triples `row,col,value`, one per line, with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,value\n");
        for (r, c, v) in self.matrix().triplets() {
            let _ = writeln!(s, "{r},{c},{v}");
        }
        s
    }
}

/// Builds `I`, `C` (prefix boxes from the origin), or all boxes.
pub fn make_workload(kind: WorkloadKind, domain: &Domain) -> Result<Workload> {
    let cells = || (0..domain.total()).map(|c| domain.coords(c));
    let ranges: Vec<RangeQuery> = match kind {
        WorkloadKind::Identity => cells().map(|c| RangeQuery { lo: c.clone(), hi: c }).collect(),
        WorkloadKind::Cumulative => cells().map(|c| RangeQuery { lo: vec![0; c.len()], hi: c }).collect(),
        WorkloadKind::AllRanges => {
            let rows =
                domain.dims().iter().try_fold(1usize, |acc, &k| acc.checked_mul(k * (k + 1) / 2)).unwrap_or(usize::MAX);
            if rows > MAX_ALL_RANGES_ROWS {
                return Err(Error::TooLarge {
                    what: "all-ranges workload",
                    size: rows,
                    limit: MAX_ALL_RANGES_ROWS,
                    hint: "use sampled ranges instead",
                });
            }
            let mut out = Vec::with_capacity(rows);
            for lo in cells() {
                for hi in cells() {
                    if lo.iter().zip(&hi).all(|(l, h)| l <= h) {
                        out.push(RangeQuery { lo: lo.clone(), hi });
                    }
                }
            }
            out
        }
        WorkloadKind::SampledRanges | WorkloadKind::Custom => {
            return Err(Error::invalid("use sample_range_workload or Workload::custom"))
        }
    };
    Workload::from_ranges(kind, domain.clone(), ranges)
}

/// `count` random boxes: per dimension two uniform corners, ordered.
pub fn sample_range_workload(domain: &Domain, count: usize, seed: u64) -> Result<(Workload, Vec<RangeQuery>)> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ranges: Vec<RangeQuery> = (0..count)
        .map(|_| {
            let (lo, hi) = domain
                .dims()
                .iter()
                .map(|&k| {
                    let (a, b) = (rng.gen_range(0..k), rng.gen_range(0..k));
                    (a.min(b), a.max(b))
                })
                .unzip();
            RangeQuery { lo, hi }
        })
        .collect();
    let w = Workload::from_ranges(WorkloadKind::SampledRanges, domain.clone(), ranges.clone())?;
    Ok((w, ranges))
}

/// Nonnegative counts over a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramDB {
    domain: Domain,
    counts: DenseVector,
    n: f64,
}

impl HistogramDB {
    pub fn new(domain: Domain, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != domain.total() {
            return Err(Error::DimensionMismatch {
                op: "histogram",
                left: (counts.len(), 1),
                right: (domain.total(), 1),
            });
        }
        if let Some(i) = counts.iter().position(|&c| c < 0.0) {
            return Err(Error::invalid(format!("negative count at cell {i}")));
        }
        let counts = DenseVector::new(counts)?;
        let n = counts.iter().sum();
        Ok(HistogramDB { domain, counts, n })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n(&self) -> f64 {
        self.n
    }
}

/// Exact answers `W x`.
pub fn evaluate(w: &Workload, x: &HistogramDB) -> Result<DenseVector> {
    if w.domain() != x.domain() {
        return Err(Error::invalid("workload and database are over different domains"));
    }
    DenseVector::new(w.answer(x.counts())?)
}

/// Synthetic sparse histogram with integer counts summing to `round(scale)`.
/// About `zero_fraction` of cells stay empty; every other cell gets one
/// count and the rest is spread with exponential weights.
pub fn synth_histogram(domain: &Domain, scale: f64, zero_fraction: f64, seed: u64) -> Result<HistogramDB> {
    if !(0.0..=1.0).contains(&zero_fraction) || !scale.is_finite() || scale < 0.0 {
        return Err(Error::invalid("need scale >= 0 and zero_fraction in [0, 1]"));
    }
    let k = domain.total();
    let total = scale.round() as u64;
    let mut counts = vec![0.0; k];
    if total == 0 {
        return HistogramDB::new(domain.clone(), counts);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let wanted = ((1.0 - zero_fraction) * k as f64).round() as usize;
    let m = wanted.clamp(1, k).min(total as usize);
    let mut cells: Vec<usize> = (0..k).collect();
    cells.shuffle(&mut rng);
    cells.truncate(m);
    let rest = total - m as u64;
    let weights: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let wsum: f64 = weights.iter().sum();
    let mut given = 0u64;
    for (&c, w) in cells.iter().zip(&weights) {
        let share = (rest as f64 * w / wsum).floor() as u64;
        counts[c] = (1 + share) as f64;
        given += share;
    }
    for _ in given..rest {
        counts[cells[rng.gen_range(0..m)]] += 1.0;
    }
    HistogramDB::new(domain.clone(), counts)
}

/// Reads a histogram file. A file whose data lines hold one number is a 1-D
/// histogram in cell order; lines `i1,…,id,count` set single cells. An
/// optional first line `# dims: a,b,…` fixes the shape; `dims` overrides it.
pub fn load_histogram(path: &Path, dims: Option<&Domain>) -> Result<HistogramDB> {
    let text = std::fs::read_to_string(path)?;
    parse_histogram(&text, &path.display().to_string(), dims)
}

pub fn parse_histogram(text: &str, source: &str, dims: Option<&Domain>) -> Result<HistogramDB> {
    let err = |line: usize, msg: String| Error::Parse { source_name: source.to_string(), line, msg };
    let mut header: Option<Domain> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(spec) = rest.trim().strip_prefix("dims:") {
                let d: std::result::Result<Vec<usize>, _> = spec.split(',').map(|s| s.trim().parse()).collect();
                let d = d.map_err(|e| err(i + 1, format!("bad dims header: {e}")))?;
                header = Some(Domain::new(d).map_err(|e| err(i + 1, e.to_string()))?);
            }
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let fields = fields.map_err(|e| err(i + 1, format!("cannot parse {line:?}: {e}")))?;
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(err(i + 1, "non-finite value".into()));
        }
        if let Some(&c) = fields.last() {
            if c < 0.0 {
                return Err(err(i + 1, format!("negative count {c}")));
            }
        }
        if let Some((first, _)) = rows.first() {
            if rows[0].1.len() != fields.len() {
                return Err(err(i + 1, format!("expected {} fields as on line {first}", rows[0].1.len())));
            }
        }
        rows.push((i + 1, fields));
    }
    let Some(width) = rows.first().map(|r| r.1.len()) else {
        return Err(err(0, "no data lines".into()));
    };
    let domain = dims.cloned().or(header);
    if width == 1 {
        let domain = match domain {
            Some(d) => d,
            None => Domain::line(rows.len())?,
        };
        if rows.len() != domain.total() {
            return Err(err(
                rows.last().map_or(0, |r| r.0),
                format!("{} counts for a domain of {} cells", rows.len(), domain.total()),
            ));
        }
        return HistogramDB::new(domain, rows.into_iter().map(|r| r.1[0]).collect());
    }
    let d = width - 1;
    let mut parsed: Vec<(usize, Vec<usize>, f64)> = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let idx: Option<Vec<usize>> =
            f[..d].iter().map(|&v| (v >= 0.0 && v.fract() == 0.0).then_some(v as usize)).collect();
        let idx = idx.ok_or_else(|| err(line, "indices must be nonnegative integers".into()))?;
        parsed.push((line, idx, f[d]));
    }
    let domain = match domain {
        Some(dm) => dm,
        None => Domain::new((0..d).map(|i| parsed.iter().map(|p| p.1[i] + 1).max().unwrap_or(1)).collect())?,
    };
    if domain.d() != d {
        return Err(err(parsed[0].0, format!("{d} index columns for a {}-dimensional domain", domain.d())));
    }
    let mut counts = vec![0.0; domain.total()];
    for (line, idx, c) in parsed {
        if !domain.contains(&idx) {
            return Err(err(line, format!("cell {idx:?} outside {:?}", domain.dims())));
        }
        counts[domain.index(&idx)] += c;
    }
    HistogramDB::new(domain, counts)
}

/// Parses boxes given as `lo_1,…,lo_d,hi_1,…,hi_d` per line with 1-based
/// inclusive endpoints.
pub fn parse_range_queries(text: &str, source: &str, domain: &Domain) -> Result<Vec<RangeQuery>> {
    let d = domain.d();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { source_name: source.to_string(), line: i + 1, msg };
        let f: std::result::Result<Vec<usize>, _> = line.split(',').map(|s| s.trim().parse::<usize>()).collect();
        let f = f.map_err(|e| err(format!("cannot parse {line:?}: {e}")))?;
        if f.len() != 2 * d {
            return Err(err(format!("expected {} endpoints, found {}", 2 * d, f.len())));
        }
        if f.contains(&0) {
            return Err(err("endpoints are 1-based".into()));
        }
        let q = RangeQuery { lo: f[..d].iter().map(|v| v - 1).collect(), hi: f[d..].iter().map(|v| v - 1).collect() };
        q.check(domain).map_err(|e| err(e.to_string()))?;
        out.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(k: usize) -> Domain {
        Domain::line(k).unwrap()
    }

    #[test]
    fn generators_match_textbook_matrices() {
        let c = make_workload(WorkloadKind::Cumulative, &line(4)).unwrap();
        let want = SparseMatrix::from_rows(4, (0..4).map(|r| (0..=r).map(|c| (c, 1.0)).collect::<Vec<_>>())).unwrap();
        assert_eq!(*c.matrix(), want);
        let i = make_workload(WorkloadKind::Identity, &line(3)).unwrap();
        assert_eq!(*i.matrix(), SparseMatrix::identity(3));
        let r = make_workload(WorkloadKind::AllRanges, &line(3)).unwrap();
        let got: Vec<(usize, usize)> = r.ranges().unwrap().iter().map(|q| (q.lo[0], q.hi[0])).collect();
        assert_eq!(got, vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]);
        let r = make_workload(WorkloadKind::AllRanges, &Domain::new(vec![3, 4]).unwrap()).unwrap();
        assert_eq!(r.rows(), 6 * 10);
        assert!(make_workload(WorkloadKind::AllRanges, &line(2000)).is_err());
    }

    #[test]
    fn evaluate_paths_agree() {
        let d = Domain::new(vec![3, 4]).unwrap();
        let x: Vec<f64> = (0..12).map(|v| (v * 7 % 5) as f64).collect();
        let w = make_workload(WorkloadKind::AllRanges, &d).unwrap();
        let fast = w.answer(&x).unwrap();
        let slow = w.matrix().mul_vec(&x).unwrap();
        assert_eq!(fast, slow);
        let db = HistogramDB::new(line(3), vec![1.0, 2.0, 3.0]).unwrap();
        let c = make_workload(WorkloadKind::Cumulative, &line(3)).unwrap();
        assert_eq!(evaluate(&c, &db).unwrap().as_slice(), &[1.0, 3.0, 6.0]);
    }

    #[test]
    fn column_sums_match_matrix() {
        let d = Domain::new(vec![4, 3]).unwrap();
        let (w, _) = sample_range_workload(&d, 30, 5).unwrap();
        assert_eq!(w.column_abs_sums(), w.matrix().column_abs_sums());
    }

    #[test]
    fn sampling_is_deterministic_and_boxed() {
        let d = Domain::new(vec![10, 10]).unwrap();
        let (_, a) = sample_range_workload(&d, 5, 9).unwrap();
        let (w, b) = sample_range_workload(&d, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(w.to_ranges().unwrap().len(), 5);
        let custom = Workload::custom(d.clone(), w.matrix().into_owned()).unwrap();
        assert_eq!(custom.to_ranges().unwrap().as_ref(), a.as_slice());
    }

    #[test]
    fn non_box_rows_detected() {
        let m = SparseMatrix::from_rows(3, vec![vec![(0, 1.0), (2, 1.0)]]).unwrap();
        let w = Workload::custom(line(3), m).unwrap();
        assert!(matches!(w.to_ranges(), Err(Error::NotRangeWorkload(_))));
    }

    #[test]
    fn bot_padding() {
        let w = make_workload(WorkloadKind::Cumulative, &line(3)).unwrap();
        let p = w.with_bot_column();
        assert_eq!(p.cols(), 4);
        assert_eq!(p.answer(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0, 6.0]);
        assert_eq!(*p.cell_matrix(), *w.matrix());
    }

    #[test]
    fn synthetic_histograms() {
        let d = line(4096);
        let h = synth_histogram(&d, 2.6e4, 0.966, 3).unwrap();
        assert_eq!(h.n(), 26000.0);
        let zeros = h.counts().iter().filter(|&&c| c == 0.0).count() as f64 / 4096.0;
        assert!((zeros - 0.966).abs() < 0.002, "{zeros}");
        assert_eq!(h, synth_histogram(&d, 2.6e4, 0.966, 3).unwrap());
        let all = synth_histogram(&line(10), 7.0, 1.0, 1).unwrap();
        assert_eq!(all.counts().iter().filter(|&&c| c > 0.0).count(), 1);
        let flat = synth_histogram(&line(10), 10.0, 0.0, 1).unwrap();
        assert!(flat.counts().iter().all(|&c| c == 1.0));
    }

    #[test]
    fn histogram_parsing() {
        let h = parse_histogram("1\n2\n3\n", "t", Some(&line(3))).unwrap();
        assert_eq!(h.counts(), &[1.0, 2.0, 3.0]);
        let d = Domain::new(vec![2, 2]).unwrap();
        let h = parse_histogram("0,0,5\n", "t", Some(&d)).unwrap();
        assert_eq!(h.counts(), &[5.0, 0.0, 0.0, 0.0]);
        let h = parse_histogram("# dims: 2,3\n1,2,4\n", "t", None).unwrap();
        assert_eq!(h.domain().dims(), &[2, 3]);
        assert_eq!(h.counts()[5], 4.0);
        let e = parse_histogram("1\nabc\n3\n", "f.txt", None).unwrap_err().to_string();
        assert!(e.contains("f.txt:2"), "{e}");
        let e = parse_histogram("1\n-2\n", "f.txt", None).unwrap_err().to_string();
        assert!(e.contains(":2") && e.contains("negative"), "{e}");
    }

    #[test]
    fn query_file_is_one_based() {
        let d = Domain::new(vec![5, 5]).unwrap();
        let q = parse_range_queries("1,2,3,5\n", "q", &d).unwrap();
        assert_eq!(q[0], RangeQuery { lo: vec![0, 1], hi: vec![2, 4] });
        assert!(parse_range_queries("0,1,1,1\n", "q", &d).is_err());
        assert!(parse_range_queries("1,1,6,1\n", "q", &d).is_err());
    }

    #[test]
    fn csv_export() {
        let w = make_workload(WorkloadKind::Identity, &line(2)).unwrap();
        assert_eq!(w.to_csv(), "row,col,value\n0,0,1\n1,1,1\n");
    }
}
