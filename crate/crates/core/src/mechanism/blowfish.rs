//! The range-query mechanisms that answer a workload in the edge space of a
//! tree-like policy graph. Every graph here gets one extra edge from the last
//! cell to `Bot`, which makes it connected with `Bot` and lets the database
//! total be estimated like any other edge count.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::edge_space::{EdgeSpaceMechanism, Family, Partition, EMPTY_SLOT};
use super::estimator::{PrivateEstimator, StrategyEstimator};
use super::noise::NoiseSource;
use super::{MechanismId, NoisyAnswer, PreparedMechanism};
use crate::error::{Error, Result};
use crate::graph::{
    build_distance_threshold_graph, build_theta_spanner_1d, build_theta_spanner_grid, grid_graph, line_graph,
    spanner_stretch, Domain, PolicyGraph, RedLattice, Vertex,
};
use crate::linalg::SparseMatrix;
use crate::transform::build_transform;
use crate::workload::{HistogramDB, RangeQuery, Workload};

struct EdgeInstance {
    graph: PolicyGraph,
    w_g: SparseMatrix,
    x_g: Vec<f64>,
    truth: Vec<f64>,
    ranges: Vec<RangeQuery>,
}

fn edge_instance(h: PolicyGraph, w: &Workload, x: &HistogramDB) -> Result<EdgeInstance> {
    if w.domain() != x.domain() {
        return Err(Error::invalid(format!(
            "workload domain {:?} does not match database domain {:?}",
            w.domain().dims(),
            x.domain().dims()
        )));
    }
    let ranges = w.to_ranges()?.into_owned();
    let t = build_transform(&h)?;
    let w_g = t.transform_ranges(&ranges)?;
    let x_g = t.preimage(&t.reduce_database(x.counts())?);
    let truth = w.answer(x.counts())?;
    Ok(EdgeInstance { graph: h, w_g, x_g, truth, ranges })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

fn singleton(edge: usize, epsilon: f64) -> Partition {
    Partition { slots: vec![edge], shape: vec![1], epsilon, estimator: Arc::new(StrategyEstimator::identity()) }
}

fn bot_edge(g: &PolicyGraph) -> usize {
    g.edges().len() - 1
}

#[allow(clippy::too_many_arguments)]
fn finish(
    id: MechanismId,
    epsilon: f64,
    stretch: usize,
    inst: EdgeInstance,
    families: Vec<Family>,
    isotonic: bool,
    limit: f64,
) -> Result<EdgeSpaceMechanism> {
    let m = EdgeSpaceMechanism {
        id,
        epsilon,
        stretch,
        families,
        offset: vec![0.0; inst.truth.len()],
        x_g: inst.x_g,
        truth: inst.truth,
        isotonic,
    };
    m.verify(limit)?;
    Ok(m)
}

fn require_1d(domain: &Domain, id: MechanismId) -> Result<usize> {
    match domain.dims() {
        [k] => Ok(*k),
        dims => Err(Error::invalid(format!("{id} needs a 1-D domain, got {dims:?}; use bf-grid or bf-thetamd"))),
    }
}

fn require_multi(domain: &Domain, id: MechanismId) -> Result<()> {
    if domain.d() < 2 {
        return Err(Error::invalid(format!("{id} needs a domain of dimension at least 2; use bf-line or bf-theta1d")));
    }
    Ok(())
}

/// Prefix sums over the line with the total on the `Bot` edge, all
/// estimated with one Laplace draw each at the full budget.
pub(crate) fn prepare_line(
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    isotonic: bool,
    estimator: Option<Arc<dyn PrivateEstimator>>,
) -> Result<EdgeSpaceMechanism> {
    check_epsilon(epsilon)?;
    let id = if isotonic { MechanismId::BfLineIso } else { MechanismId::BfLine };
    let k = require_1d(w.domain(), id)?;
    let inst = edge_instance(line_graph(k)?.with_bot_edges(&[k - 1])?, w, x)?;
    let estimator = estimator.unwrap_or_else(|| Arc::new(StrategyEstimator::identity()));
    let part = Partition { slots: (0..k).collect(), shape: vec![k], epsilon, estimator };
    let fam = Family { partitions: vec![part], queries: inst.w_g.clone() };
    finish(id, epsilon, 1, inst, vec![fam], isotonic, epsilon)
}

/// Edges of the θ-spanner grouped by their upper endpoint (a red vertex),
/// each group answered by its own strategy at budget `ε/ℓ`.
pub(crate) fn prepare_theta_1d(
    w: &Workload,
    x: &HistogramDB,
    theta: usize,
    branching: usize,
    epsilon: f64,
    estimator: Option<Arc<dyn PrivateEstimator>>,
) -> Result<EdgeSpaceMechanism> {
    check_epsilon(epsilon)?;
    let k = require_1d(w.domain(), MechanismId::BfTheta1d)?;
    let spanner = build_theta_spanner_1d(k, theta)?;
    let g = build_distance_threshold_graph(w.domain(), theta, false)?;
    let stretch = spanner_stretch(&g, &spanner)?;
    let inst = edge_instance(spanner.with_bot_edges(&[k - 1])?, w, x)?;
    let budget = epsilon / stretch as f64;
    let estimator = estimator.unwrap_or_else(|| Arc::new(StrategyEstimator::hierarchical(branching)));
    let mut groups: BTreeMap<Vertex, Vec<usize>> = BTreeMap::new();
    for (e, &(_, b)) in inst.graph.edges().iter().enumerate() {
        groups.entry(b).or_default().push(e);
    }
    let partitions = groups
        .into_values()
        .map(|slots| Partition { shape: vec![slots.len()], slots, epsilon: budget, estimator: estimator.clone() })
        .collect();
    let fam = Family { partitions, queries: inst.w_g.clone() };
    finish(MechanismId::BfTheta1d, epsilon, stretch, inst, vec![fam], false, budget)
}

/// Groups the cell-to-cell edges of a grid-shaped edge set into axis
/// layers: the edges along dimension `i` leaving coordinate `j`. Returns
/// the layers keyed by `(i, j)`, each in canonical (row-major) order.
fn grid_layers(
    domain: &Domain,
    edges: &[(Vertex, Vertex)],
    level: impl Fn(usize, usize) -> usize,
) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut layers: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (e, &(a, b)) in edges.iter().enumerate() {
        if let (Vertex::Cell(a), Vertex::Cell(b)) = (a, b) {
            let (ca, cb) = (domain.coords(a), domain.coords(b));
            let i = (0..ca.len()).find(|&i| ca[i] != cb[i]).expect("distinct endpoints");
            layers.entry((i, level(i, ca[i]))).or_default().push(e);
        }
    }
    layers
}

fn drop_axis(shape: &[usize], i: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s.remove(i);
    if s.is_empty() {
        s.push(1);
    }
    s
}

/// Grid edges split into `d` families of axis layers (one partition per
/// layer), every layer answered at the full budget.
pub(crate) fn prepare_grid(
    w: &Workload,
    x: &HistogramDB,
    epsilon: f64,
    estimator: Option<Arc<dyn PrivateEstimator>>,
) -> Result<EdgeSpaceMechanism> {
    check_epsilon(epsilon)?;
    let domain = w.domain().clone();
    require_multi(&domain, MechanismId::BfGrid)?;
    let inst = edge_instance(grid_graph(&domain)?.with_bot_edges(&[domain.total() - 1])?, w, x)?;
    let estimator = estimator.unwrap_or_else(|| Arc::new(StrategyEstimator::wavelet()));
    let mut partitions: Vec<Partition> = grid_layers(&domain, inst.graph.edges(), |_, c| c)
        .into_iter()
        .map(|((i, _), slots)| Partition {
            slots,
            shape: drop_axis(domain.dims(), i),
            epsilon,
            estimator: estimator.clone(),
        })
        .collect();
    partitions.push(singleton(bot_edge(&inst.graph), epsilon));
    let fam = Family { partitions, queries: inst.w_g.clone() };
    finish(MechanismId::BfGrid, epsilon, 1, inst, vec![fam], false, epsilon)
}

/// Interval of cells along one axis whose block corner lies in `[l, r]`.
fn corner_preimage(lat: &RedLattice, dim: usize, l: usize, r: usize) -> Option<(usize, usize)> {
    let s = lat.block();
    let k = lat.domain().dims()[dim];
    let first = l / s;
    let last = if lat.corner(dim, r) == r { r / s } else { (r / s).checked_sub(1)? };
    (first <= last).then(|| (first * s, ((last + 1) * s).min(k) - 1))
}

/// `a \ b` for intervals, as at most two intervals.
fn interval_minus(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> Vec<(usize, usize)> {
    let Some((al, ar)) = a else { return Vec::new() };
    let Some((bl, br)) = b else { return vec![(al, ar)] };
    let mut out = Vec::new();
    if al < bl {
        out.push((al, ar.min(bl - 1)));
    }
    if ar > br {
        out.push((al.max(br + 1), ar));
    }
    out
}

/// Per-dimension query matrices over the internal edges. Writing the box as
/// `ΠA_j` and `B_j` for the cells whose corner coordinate falls in `A_j`,
/// the internal-edge coefficients `1[c ∈ ΠA] − 1[ρ(c) ∈ ΠA]` telescope into
/// `Σ_i ΠB_{j<i} · (1[A_i] − 1[B_i]) · ΠA_{j>i}`; term `i` is a union of
/// boxes each confined to one block along dimension `i`.
fn internal_queries(
    lat: &RedLattice,
    ranges: &[RangeQuery],
    internal_edge: &[usize],
    edges: usize,
) -> Result<Vec<SparseMatrix>> {
    let domain = lat.domain();
    let d = domain.d();
    let mut rows: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::with_capacity(ranges.len()); d];
    for q in ranges {
        let a: Vec<(usize, usize)> = (0..d).map(|j| (q.lo[j], q.hi[j])).collect();
        let b: Vec<Option<(usize, usize)>> = (0..d).map(|j| corner_preimage(lat, j, a[j].0, a[j].1)).collect();
        for i in 0..d {
            let mut row = Vec::new();
            if b[..i].iter().all(Option::is_some) {
                let pieces = interval_minus(Some(a[i]), b[i])
                    .into_iter()
                    .map(|p| (p, 1.0))
                    .chain(interval_minus(b[i], Some(a[i])).into_iter().map(|p| (p, -1.0)));
                for ((pl, pr), sign) in pieces {
                    let mut lo = Vec::with_capacity(d);
                    let mut hi = Vec::with_capacity(d);
                    for j in 0..d {
                        let (l, r) = match j.cmp(&i) {
                            std::cmp::Ordering::Less => b[j].expect("checked above"),
                            std::cmp::Ordering::Equal => (pl, pr),
                            std::cmp::Ordering::Greater => a[j],
                        };
                        lo.push(l);
                        hi.push(r);
                    }
                    let boxed = RangeQuery { lo, hi };
                    for c in boxed.cells(domain) {
                        if internal_edge[c] != EMPTY_SLOT {
                            row.push((internal_edge[c], sign));
                        }
                    }
                }
            }
            rows[i].push(row);
        }
    }
    rows.into_iter().map(|r| SparseMatrix::from_rows(edges, r)).collect()
}

/// θ-spanner edges: external (red lattice) edges as grid layers at `ε'/2`,
/// internal (cell-to-corner) edges once per dimension as slabs one block
/// thick at `ε'/(2d)`, with `ε' = ε/ℓ`.
pub(crate) fn prepare_theta_multid(
    w: &Workload,
    x: &HistogramDB,
    theta: usize,
    epsilon: f64,
    estimator: Option<Arc<dyn PrivateEstimator>>,
) -> Result<EdgeSpaceMechanism> {
    check_epsilon(epsilon)?;
    let domain = w.domain().clone();
    require_multi(&domain, MechanismId::BfThetamd)?;
    let d = domain.d();
    let lat = RedLattice::new(&domain, theta)?;
    let spanner = build_theta_spanner_grid(&domain, theta)?;
    let g = build_distance_threshold_graph(&domain, theta, false)?;
    let stretch = spanner_stretch(&g, &spanner)?;
    let inst = edge_instance(spanner.with_bot_edges(&[domain.total() - 1])?, w, x)?;
    let inner = epsilon / stretch as f64;
    let estimator = estimator.unwrap_or_else(|| Arc::new(StrategyEstimator::wavelet()));
    let n_edges = inst.graph.edges().len();

    let mut internal_edge = vec![EMPTY_SLOT; domain.total()];
    let mut is_internal = vec![false; n_edges];
    for (e, &(a, b)) in inst.graph.edges().iter().enumerate() {
        if let (Vertex::Cell(a), Vertex::Cell(b)) = (a, b) {
            if !lat.is_red(a) && lat.corner_of(a) == b {
                internal_edge[a] = e;
                is_internal[e] = true;
            }
        }
    }

    // External family over the red lattice.
    let ext_edges: Vec<(Vertex, Vertex)> = inst
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &edge)| if is_internal[e] { (Vertex::Bot, Vertex::Bot) } else { edge })
        .collect();
    let red_shape: Vec<usize> = (0..d).map(|i| lat.red_coords(i).len()).collect();
    let red_index = |i: usize, c: usize| lat.red_coords(i).binary_search(&c).expect("external endpoints are red");
    let mut ext_parts: Vec<Partition> = grid_layers(&domain, &ext_edges, red_index)
        .into_iter()
        .map(|((i, _), slots)| Partition {
            slots,
            shape: drop_axis(&red_shape, i),
            epsilon: inner / 2.0,
            estimator: estimator.clone(),
        })
        .collect();
    ext_parts.push(singleton(bot_edge(&inst.graph), inner / 2.0));
    let ext_queries = {
        let rows = (0..inst.w_g.rows()).map(|r| {
            let (c, v) = inst.w_g.row(r);
            c.iter().zip(v).filter(|(&c, _)| !is_internal[c]).map(|(&c, &v)| (c, v)).collect::<Vec<_>>()
        });
        SparseMatrix::from_rows(n_edges, rows.collect::<Vec<_>>())?
    };
    let mut families = vec![Family { partitions: ext_parts, queries: ext_queries }];

    if is_internal.iter().any(|&b| b) {
        let s = lat.block();
        let queries = internal_queries(&lat, &inst.ranges, &internal_edge, n_edges)?;
        for (i, q) in queries.into_iter().enumerate() {
            let k_i = domain.dims()[i];
            let mut partitions = Vec::new();
            for start in (0..k_i).step_by(s) {
                let mut lo = vec![0; d];
                let mut hi: Vec<usize> = domain.dims().iter().map(|k| k - 1).collect();
                lo[i] = start;
                hi[i] = (start + s).min(k_i) - 1;
                let slab = RangeQuery { lo, hi };
                let slots: Vec<usize> = slab.cells(&domain).into_iter().map(|c| internal_edge[c]).collect();
                if slots.iter().all(|&e| e == EMPTY_SLOT) {
                    continue;
                }
                let shape = (0..d).map(|j| slab.hi[j] - slab.lo[j] + 1).collect();
                partitions.push(Partition {
                    slots,
                    shape,
                    epsilon: inner / (2 * d) as f64,
                    estimator: estimator.clone(),
                });
            }
            families.push(Family { partitions, queries: q });
        }
    }
    finish(MechanismId::BfThetamd, epsilon, stretch, inst, families, false, inner)
}

fn run(m: EdgeSpaceMechanism, noise: NoiseSource) -> Result<NoisyAnswer> {
    m.run(&noise)
}

/// Range queries over a 1-D domain under the line policy: noisy prefix sums,
/// each answer the difference of at most two of them.
pub fn blowfish_1d_range_line(
    x: &HistogramDB,
    epsilon: f64,
    queries: &Workload,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    run(prepare_line(queries, x, epsilon, false, None)?, noise.into())
}

/// Range queries over a d-dimensional domain under the grid policy.
pub fn blowfish_multid_range_grid(
    x: &HistogramDB,
    epsilon: f64,
    queries: &Workload,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    run(prepare_grid(queries, x, epsilon, None)?, noise.into())
}

/// Range queries over a 1-D domain under the distance-threshold policy `G^θ`.
pub fn blowfish_1d_range_theta(
    x: &HistogramDB,
    theta: usize,
    epsilon: f64,
    queries: &Workload,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    run(prepare_theta_1d(queries, x, theta, 2, epsilon, None)?, noise.into())
}

/// Range queries over a d-dimensional domain under `G^θ`.
pub fn blowfish_multid_range_theta(
    x: &HistogramDB,
    theta: usize,
    epsilon: f64,
    queries: &Workload,
    noise: impl Into<NoiseSource>,
) -> Result<NoisyAnswer> {
    run(prepare_theta_multid(queries, x, theta, epsilon, None)?, noise.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{make_workload, WorkloadKind};

    fn db(dims: Vec<usize>) -> HistogramDB {
        let d = Domain::new(dims).unwrap();
        let counts = (0..d.total()).map(|i| ((i * 37 + 11) % 7) as f64).collect();
        HistogramDB::new(d, counts).unwrap()
    }

    #[test]
    fn line_example() {
        let x = HistogramDB::new(Domain::line(4).unwrap(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w =
            Workload::from_ranges(WorkloadKind::SampledRanges, x.domain().clone(), vec![RangeQuery::interval(1, 2)])
                .unwrap();
        let a = blowfish_1d_range_line(&x, 1.0, &w, NoiseSource::noiseless()).unwrap();
        assert_eq!(a.values.as_slice(), &[5.0]);
        assert_eq!(a.stretch_factor, 1);
    }

    #[test]
    fn noiseless_answers_are_exact() {
        let cases: Vec<(Vec<usize>, MechanismId, usize)> = vec![
            (vec![16], MechanismId::BfLine, 1),
            (vec![10], MechanismId::BfTheta1d, 3),
            (vec![1], MechanismId::BfTheta1d, 2),
            (vec![5, 5], MechanismId::BfGrid, 1),
            (vec![3, 2, 2], MechanismId::BfGrid, 1),
            (vec![4, 4], MechanismId::BfThetamd, 4),
            (vec![7, 5], MechanismId::BfThetamd, 6),
            (vec![4, 3, 5], MechanismId::BfThetamd, 6),
            (vec![4, 4], MechanismId::BfThetamd, 2),
        ];
        for (dims, id, theta) in cases {
            let x = db(dims);
            let w = make_workload(WorkloadKind::AllRanges, x.domain()).unwrap();
            let m: EdgeSpaceMechanism = match id {
                MechanismId::BfLine => prepare_line(&w, &x, 1.0, false, None),
                MechanismId::BfTheta1d => prepare_theta_1d(&w, &x, theta, 2, 1.0, None),
                MechanismId::BfGrid => prepare_grid(&w, &x, 1.0, None),
                _ => prepare_theta_multid(&w, &x, theta, 1.0, None),
            }
            .unwrap();
            let got = m.answer(&NoiseSource::noiseless()).unwrap();
            assert_eq!(got, w.answer(x.counts()).unwrap(), "{id} on {:?}", x.domain().dims());
        }
    }

    #[test]
    fn internal_split_sums_to_transformed_queries() {
        let x = db(vec![7, 5]);
        let w = make_workload(WorkloadKind::AllRanges, x.domain()).unwrap();
        let m = prepare_theta_multid(&w, &x, 6, 1.0, None).unwrap();
        assert_eq!(m.families(), 3);
        let mut total = m.families[0].queries.clone();
        for f in &m.families[1..] {
            let rows = (0..total.rows()).map(|r| {
                let (a, av) = total.row(r);
                let (b, bv) = f.queries.row(r);
                a.iter()
                    .copied()
                    .zip(av.iter().copied())
                    .chain(b.iter().copied().zip(bv.iter().copied()))
                    .collect::<Vec<_>>()
            });
            total = SparseMatrix::from_rows(total.cols(), rows.collect::<Vec<_>>()).unwrap();
        }
        let h = build_theta_spanner_grid(x.domain(), 6).unwrap().with_bot_edges(&[34]).unwrap();
        let want = build_transform(&h).unwrap().transform_ranges(w.ranges().unwrap()).unwrap();
        assert_eq!(total.max_abs_diff(&want).unwrap(), 0.0);
    }

    #[test]
    fn grid_layers_partition_edges() {
        let x = db(vec![5, 5]);
        let w = make_workload(WorkloadKind::AllRanges, x.domain()).unwrap();
        let m = prepare_grid(&w, &x, 1.0, None).unwrap();
        // 2(k−1) layers plus the bot edge.
        assert_eq!(m.partitions(), 2 * 4 + 1);
        let mut seen: Vec<usize> = m.families[0].partitions.iter().flat_map(|p| p.slots.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..m.edge_counts().len()).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_and_theta_errors() {
        let x2 = db(vec![3, 3]);
        let w2 = make_workload(WorkloadKind::Identity, x2.domain()).unwrap();
        assert!(prepare_line(&w2, &x2, 1.0, false, None).is_err());
        assert!(prepare_theta_multid(&w2, &x2, 1, 1.0, None).is_err());
        let x1 = db(vec![6]);
        let w1 = make_workload(WorkloadKind::Identity, x1.domain()).unwrap();
        assert!(prepare_grid(&w1, &x1, 1.0, None).is_err());
        assert!(prepare_line(&w1, &x1, 0.0, false, None).is_err());
        let custom = Workload::custom(
            x1.domain().clone(),
            SparseMatrix::from_dense(&nalgebra::DMatrix::from_element(1, 6, 2.0)),
        )
        .unwrap();
        assert!(matches!(prepare_line(&custom, &x1, 1.0, false, None), Err(Error::NotRangeWorkload(_))));
    }

    #[test]
    fn theta_1d_groups_and_stretch() {
        let x = db(vec![10]);
        let w = make_workload(WorkloadKind::AllRanges, x.domain()).unwrap();
        let m = prepare_theta_1d(&w, &x, 3, 2, 0.9, None).unwrap();
        assert_eq!(m.stretch, 3);
        let sizes: Vec<usize> = m.families[0].partitions.iter().map(|p| p.slots.len()).collect();
        assert_eq!(sizes, vec![2, 3, 3, 1, 1]);
        assert!(m.families[0].partitions.iter().all(|p| (p.epsilon - 0.3).abs() < 1e-12));
        let m = prepare_theta_1d(&w, &x, 1, 2, 1.0, None).unwrap();
        assert_eq!(m.stretch, 1);
    }
}
