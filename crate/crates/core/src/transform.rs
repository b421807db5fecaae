//! The incidence-matrix transform: a workload `W` and database `x` under a
//! policy graph become `W·P_G` and `P_G⁻¹·x`, an equivalent instance where
//! policy neighbours differ in (about) one coordinate.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::graph::{connected_components, Domain, Edge, PolicyGraph, Vertex};
use crate::linalg::{right_inverse, DenseVector, SparseMatrix};
use crate::workload::{HistogramDB, RangeQuery, Workload};

const NONE: usize = usize::MAX;
/// Domain size guard for [`brute_force_sensitivity`].
pub const BRUTE_FORCE_MAX_CELLS: usize = 64;

/// Record of replacing one cell of a `Bot`-free component by `Bot`, using
/// `x_v = n_C − Σ_{j∈C, j≠v} x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseIIReduction {
    pub removed_vertex: usize,
    /// Cells of the component, including the removed one.
    pub component: Vec<usize>,
    /// `k × (k−1)`: column for cell `j ≠ v` is `e_j − e_v` when `j` shares
    /// the component, `e_j` otherwise.
    pub d_matrix: SparseMatrix,
}

impl CaseIIReduction {
    fn new(k: usize, removed_vertex: usize, component: Vec<usize>) -> Self {
        let mut in_comp = vec![false; k];
        for &c in &component {
            in_comp[c] = true;
        }
        let mut triplets = Vec::new();
        for (col, j) in (0..k).filter(|&j| j != removed_vertex).enumerate() {
            triplets.push((j, col, 1.0));
            if in_comp[j] {
                triplets.push((removed_vertex, col, -1.0));
            }
        }
        let d_matrix = SparseMatrix::from_triplets(k, k.saturating_sub(1), triplets).expect("distinct entries");
        CaseIIReduction { removed_vertex, component, d_matrix }
    }

    /// Column `v` of `W`: each query's coefficient on the removed cell.
    pub fn correction_coeffs(&self, w: &Workload) -> DenseVector {
        let m = w.cell_matrix();
        DenseVector::new((0..m.rows()).map(|r| m.get(r, self.removed_vertex)).collect()).expect("finite")
    }

    /// `c(W, n)`: component total times each query's coefficient on `v`.
    pub fn offset(&self, w: &Workload, x: &[f64]) -> Vec<f64> {
        let n: f64 = self.component.iter().map(|&c| x[c]).sum();
        self.correction_coeffs(w).iter().map(|&a| n * a).collect()
    }
}

/// BFS spanning tree rooted at `Bot`, used to push a database onto edges.
#[derive(Clone, Debug)]
struct SpanningTree {
    /// Cells in BFS order from the root.
    order: Vec<usize>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    /// +1 when the cell is the edge's first (smaller) endpoint.
    sign: Vec<f64>,
}

/// `P_G` for a connected graph containing `Bot`, its right inverse, and the
/// reductions that produced the graph (if any).
#[derive(Debug)]
pub struct TransformPair {
    graph: PolicyGraph,
    cells: Vec<usize>,
    row_of: Vec<usize>,
    p_g: SparseMatrix,
    reductions: Vec<CaseIIReduction>,
    /// For cells of reduced components: the removed vertex; else `NONE`.
    removed_of: Vec<usize>,
    /// For each reduction: indices of the `Bot` edges rewired from it.
    rewired: Vec<Vec<usize>>,
    tree: SpanningTree,
    is_tree: bool,
    inverse: OnceLock<SparseMatrix>,
}

/// Builds `P_G` for a connected graph with `Bot` (one row per cell vertex,
/// one column per edge in canonical order).
pub fn build_transform(g: &PolicyGraph) -> Result<TransformPair> {
    if !g.has_bot() {
        return Err(Error::invalid(
            "build_transform needs a graph with bot; apply reduce_without_bot or use TransformPair::for_policy",
        ));
    }
    let comps = connected_components(g).len();
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    TransformPair::assemble(g.clone(), Vec::new(), vec![NONE; g.domain().total()])
}

/// Replaces cell `v` of a connected, `Bot`-free graph by `Bot`. Returns the
/// new graph, `W' = W·D` (columns are the remaining cells in order) and the
/// reduction record.
pub fn reduce_without_bot(g: &PolicyGraph, w: &Workload, v: usize) -> Result<(PolicyGraph, Workload, CaseIIReduction)> {
    if g.has_bot() {
        return Err(Error::invalid("reduce_without_bot expects a graph without bot"));
    }
    if !g.is_vertex(Vertex::Cell(v)) {
        return Err(Error::invalid(format!("removed vertex {v} is not a cell of the graph")));
    }
    let comps = connected_components(g);
    if comps.len() > 1 {
        return Err(Error::Disconnected { components: comps.len() });
    }
    let component: Vec<usize> = g.cells().collect();
    let (reduced, _) = rewire(g, &[(v, component.clone())])?;
    let k = g.domain().total();
    let red = CaseIIReduction::new(k, v, component);
    let m = w.cell_matrix();
    if m.cols() != k {
        return Err(Error::DimensionMismatch { op: "reduce_without_bot", left: m.shape(), right: (k, 1) });
    }
    let keep: Vec<usize> = reduced.cells().collect();
    let wd = m.matmul(&red.d_matrix)?;
    // The remaining cells are exactly the columns of D unless other cells were excluded already.
    let cols: Vec<usize> =
        (0..k).filter(|&j| j != v).enumerate().filter(|(_, j)| keep.contains(j)).map(|(c, _)| c).collect();
    let wd = wd.select_columns(&cols)?;
    let w_reduced = Workload::custom(Domain::line(keep.len().max(1))?, wd)?;
    Ok((reduced, w_reduced, red))
}

/// Replaces each `(v, component)` removal by `Bot`, rewiring `v`'s edges.
/// Returns the graph and, per cell, the removed vertex of its component.
fn rewire(g: &PolicyGraph, removals: &[(usize, Vec<usize>)]) -> Result<(PolicyGraph, Vec<usize>)> {
    let k = g.domain().total();
    let mut removed_of = vec![NONE; k];
    let mut is_removed = vec![false; k];
    for (v, comp) in removals {
        is_removed[*v] = true;
        for &c in comp {
            removed_of[c] = *v;
        }
    }
    let edges = g.edges().iter().map(|&(a, b)| {
        let fix = |x: Vertex| match x {
            Vertex::Cell(i) if is_removed[i] => Vertex::Bot,
            other => other,
        };
        (fix(a), fix(b))
    });
    let mut excluded: Vec<usize> = g.excluded().to_vec();
    excluded.extend(removals.iter().map(|r| r.0));
    let reduced = PolicyGraph::with_excluded(g.domain().clone(), true, edges.collect::<Vec<Edge>>(), excluded)?;
    Ok((reduced, removed_of))
}

impl TransformPair {
    /// Transform for any policy graph. Every component without `Bot` has its
    /// highest-indexed cell replaced by `Bot`; the component totals then
    /// enter the answers through [`TransformPair::offset`].
    pub fn for_policy(g: &PolicyGraph) -> Result<TransformPair> {
        let comps = connected_components(g);
        let removals: Vec<(usize, Vec<usize>)> = comps
            .iter()
            .filter(|c| !c.contains(&Vertex::Bot))
            .map(|c| {
                let cells: Vec<usize> = c
                    .iter()
                    .filter_map(|v| match v {
                        Vertex::Cell(i) => Some(*i),
                        Vertex::Bot => None,
                    })
                    .collect();
                (*cells.iter().max().expect("component is nonempty"), cells)
            })
            .collect();
        if removals.is_empty() && g.has_bot() {
            return build_transform(g);
        }
        let (reduced, removed_of) = rewire(g, &removals)?;
        let k = g.domain().total();
        let reductions = removals.into_iter().map(|(v, comp)| CaseIIReduction::new(k, v, comp)).collect();
        TransformPair::assemble(reduced, reductions, removed_of)
    }

    fn assemble(graph: PolicyGraph, reductions: Vec<CaseIIReduction>, removed_of: Vec<usize>) -> Result<TransformPair> {
        let k = graph.domain().total();
        let cells: Vec<usize> = graph.cells().collect();
        let mut row_of = vec![NONE; k];
        for (r, &c) in cells.iter().enumerate() {
            row_of[c] = r;
        }
        let mut triplets = Vec::with_capacity(2 * graph.edges().len());
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            if let Vertex::Cell(i) = a {
                triplets.push((row_of[i], e, 1.0));
            }
            if let Vertex::Cell(j) = b {
                triplets.push((row_of[j], e, -1.0));
            }
        }
        let p_g = SparseMatrix::from_triplets(cells.len(), graph.edges().len(), triplets)?;

        let mut rewired = vec![Vec::new(); reductions.len()];
        let slot: std::collections::HashMap<usize, usize> =
            reductions.iter().enumerate().map(|(i, r)| (r.removed_vertex, i)).collect();
        for (e, &(a, b)) in graph.edges().iter().enumerate() {
            if let (Vertex::Cell(i), Vertex::Bot) = (a, b) {
                if removed_of[i] != NONE {
                    rewired[slot[&removed_of[i]]].push(e);
                }
            }
        }

        let tree = spanning_tree(&graph);
        if tree.order.len() != cells.len() {
            return Err(Error::Disconnected { components: connected_components(&graph).len() });
        }
        let is_tree = graph.edges().len() == cells.len();
        Ok(TransformPair {
            graph,
            cells,
            row_of,
            p_g,
            reductions,
            removed_of,
            rewired,
            tree,
            is_tree,
            inverse: OnceLock::new(),
        })
    }

    /// The graph `P_G` was built from (after any reductions).
    pub fn graph(&self) -> &PolicyGraph {
        &self.graph
    }

    pub fn p_g(&self) -> &SparseMatrix {
        &self.p_g
    }

    pub fn edge_order(&self) -> &[Edge] {
        self.graph.edges()
    }

    /// Cells that own a row of `P_G`, in row order.
    pub fn row_cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn reductions(&self) -> &[CaseIIReduction] {
        &self.reductions
    }

    /// First reduction, if any.
    pub fn reduction(&self) -> Option<&CaseIIReduction> {
        self.reductions.first()
    }

    pub fn is_tree(&self) -> bool {
        self.is_tree
    }

    /// Right inverse of `P_G`, computed on first use. Trees get the exact
    /// path-indicator inverse; other graphs `P_Gᵀ(P_G P_Gᵀ)⁻¹`.
    pub fn p_g_inv(&self) -> Result<&SparseMatrix> {
        if let Some(m) = self.inverse.get() {
            return Ok(m);
        }
        let m = if self.is_tree { self.tree_inverse() } else { right_inverse(&self.p_g)? };
        Ok(self.inverse.get_or_init(|| m))
    }

    fn tree_inverse(&self) -> SparseMatrix {
        let t = &self.tree;
        let mut triplets = Vec::new();
        for (col, &c) in self.cells.iter().enumerate() {
            // One unit of flow from c up to the root.
            let mut u = c;
            while u != NONE {
                triplets.push((t.parent_edge[u], col, t.sign[u]));
                u = t.parent[u];
            }
        }
        SparseMatrix::from_triplets(self.p_g.cols(), self.cells.len(), triplets).expect("each path visits an edge once")
    }

    /// Restricts a full-domain database to the rows of `P_G`.
    pub fn reduce_database(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.graph.domain().total() {
            return Err(Error::DimensionMismatch {
                op: "transform_database",
                left: self.p_g.shape(),
                right: (x.len(), 1),
            });
        }
        Ok(self.cells.iter().map(|&c| x[c]).collect())
    }

    /// A preimage of `x` (restricted to rows) under `P_G` supported on the
    /// BFS spanning tree: the flow that carries each cell's count to `Bot`.
    /// For tree graphs this is `P_G⁻¹ x`.
    pub fn preimage(&self, x_rows: &[f64]) -> Vec<f64> {
        let t = &self.tree;
        let mut carried = vec![0.0; self.graph.domain().total()];
        for (&c, &v) in self.cells.iter().zip(x_rows) {
            carried[c] = v;
        }
        let mut y = vec![0.0; self.p_g.cols()];
        for &u in t.order.iter().rev() {
            y[t.parent_edge[u]] = t.sign[u] * carried[u];
            if t.parent[u] != NONE {
                carried[t.parent[u]] += carried[u];
            }
        }
        y
    }

    /// `x_G = P_G⁻¹ x` for a full-domain database.
    pub fn transform_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xr = self.reduce_database(x)?;
        if self.is_tree {
            Ok(self.preimage(&xr))
        } else {
            self.p_g_inv()?.mul_vec(&xr)
        }
    }

    /// `W' = W·D` with one column per row of `P_G`.
    pub fn reduce_workload(&self, w: &Workload) -> Result<SparseMatrix> {
        let m = w.cell_matrix();
        let k = self.graph.domain().total();
        if m.cols() != k {
            return Err(Error::DimensionMismatch { op: "transform_workload", left: m.shape(), right: (k, 1) });
        }
        let comp_rows: Vec<Vec<usize>> = self
            .reductions
            .iter()
            .map(|r| r.component.iter().filter(|&&c| c != r.removed_vertex).map(|&c| self.row_of[c]).collect())
            .collect();
        let slot: std::collections::HashMap<usize, usize> =
            self.reductions.iter().enumerate().map(|(i, r)| (r.removed_vertex, i)).collect();
        let rows = (0..m.rows()).map(|r| {
            let (cols, vals) = m.row(r);
            let mut out = Vec::with_capacity(cols.len());
            for (&c, &v) in cols.iter().zip(vals) {
                if self.row_of[c] != NONE {
                    out.push((self.row_of[c], v));
                } else if let Some(&s) = slot.get(&c) {
                    out.extend(comp_rows[s].iter().map(|&j| (j, -v)));
                }
                // Any other cell was never a vertex and carries no data.
            }
            out
        });
        SparseMatrix::from_rows(self.cells.len(), rows.collect::<Vec<_>>())
    }

    /// `W_G = W·D·P_G`. Range workloads take a direct route through the
    /// boundary edges of each box; other workloads are multiplied out.
    pub fn transform_matrix(&self, w: &Workload) -> Result<SparseMatrix> {
        match w.ranges() {
            Some(r) if w.domain() == self.graph.domain() => self.transform_ranges(r),
            _ => self.reduce_workload(w)?.matmul(&self.p_g),
        }
    }

    /// Rows of `W_G` for box queries: an edge gets a nonzero exactly when one
    /// endpoint is inside the box.
    pub fn transform_ranges(&self, ranges: &[RangeQuery]) -> Result<SparseMatrix> {
        let domain = self.graph.domain();
        let adj = self.graph.adjacency();
        let bot = domain.total();
        let mut inside = vec![false; bot + 1];
        let rows = ranges.iter().map(|q| {
            let cells = q.cells(domain);
            for &c in &cells {
                inside[c] = true;
            }
            let mut out = Vec::new();
            for &u in &cells {
                if self.row_of[u] == NONE {
                    continue;
                }
                for &(v, e) in &adj[u] {
                    let lower = self.graph.edges()[e].0 == Vertex::Cell(u);
                    let coeff = if lower { 1.0 } else { -1.0 };
                    if v == bot {
                        // A rewired edge stands for (u, removed vertex).
                        let r = self.removed_of[u];
                        if r == NONE || !inside[r] {
                            out.push((e, coeff));
                        }
                    } else if !inside[v] {
                        out.push((e, coeff));
                    }
                }
            }
            for (s, red) in self.reductions.iter().enumerate() {
                if inside[red.removed_vertex] {
                    for &e in &self.rewired[s] {
                        if let Vertex::Cell(a) = self.graph.edges()[e].0 {
                            if !inside[a] {
                                out.push((e, -1.0));
                            }
                        }
                    }
                }
            }
            for &c in &cells {
                inside[c] = false;
            }
            out
        });
        SparseMatrix::from_rows(self.p_g.cols(), rows.collect::<Vec<_>>())
    }

    /// `c(W, n)`: the constant the reductions add back to each answer.
    pub fn offset(&self, w: &Workload, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.rows()];
        for red in &self.reductions {
            for (o, c) in out.iter_mut().zip(red.offset(w, x)) {
                *o += c;
            }
        }
        out
    }

    /// Answers reassembled from the transformed instance: `W_G x_G + c`.
    pub fn answers(&self, w_g: &SparseMatrix, x_g: &[f64], offset: &[f64]) -> Result<Vec<f64>> {
        let mut a = w_g.mul_vec(x_g)?;
        for (v, c) in a.iter_mut().zip(offset) {
            *v += c;
        }
        Ok(a)
    }
}

fn spanning_tree(g: &PolicyGraph) -> SpanningTree {
    let k = g.domain().total();
    let adj = g.adjacency();
    let mut parent = vec![NONE; k];
    let mut parent_edge = vec![NONE; k];
    let mut sign = vec![0.0; k];
    let mut seen = vec![false; k + 1];
    let mut order = Vec::with_capacity(k);
    let mut queue = std::collections::VecDeque::new();
    if g.has_bot() {
        seen[k] = true;
        queue.push_back(k);
    }
    while let Some(u) = queue.pop_front() {
        for &(v, e) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = if u == k { NONE } else { u };
                parent_edge[v] = e;
                sign[v] = if g.edges()[e].0 == Vertex::Cell(v) { 1.0 } else { -1.0 };
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    SpanningTree { order, parent, parent_edge, sign }
}

/// `W_G = W·P_G` (after any reduction) as a workload over the edge domain.
pub fn transform_workload(w: &Workload, t: &TransformPair) -> Result<Workload> {
    let m = t.transform_matrix(w)?;
    Workload::custom(Domain::line(m.cols().max(1))?, m)
}

/// `x_G = P_G⁻¹ x`.
pub fn transform_database(x: &HistogramDB, t: &TransformPair) -> Result<DenseVector> {
    DenseVector::new(t.transform_vector(x.counts())?)
}

/// Policy-specific sensitivity: the largest column L1 norm of `W_G`.
pub fn policy_sensitivity(w: &Workload, g: &PolicyGraph) -> Result<f64> {
    let t = TransformPair::for_policy(g)?;
    Ok(t.transform_matrix(w)?.max_column_l1())
}

/// Sensitivity by enumerating neighbour differences: `e_u − e_v` for each
/// cell edge, `e_u` for each edge to `Bot`.
pub fn brute_force_sensitivity(w: &Workload, g: &PolicyGraph) -> Result<f64> {
    let k = g.domain().total();
    if k > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::TooLarge {
            what: "brute-force sensitivity domain",
            size: k,
            limit: BRUTE_FORCE_MAX_CELLS,
            hint: "use policy_sensitivity",
        });
    }
    if g.edges().is_empty() {
        return Err(Error::invalid("policy graph has no edges"));
    }
    let cols = w.cell_matrix().transpose();
    let column = |c: usize| {
        let (r, v) = cols.row(c);
        r.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>()
    };
    let mut best: f64 = 0.0;
    for &(a, b) in g.edges() {
        let mut diff = vec![0.0; w.rows()];
        if let Vertex::Cell(u) = a {
            for (r, v) in column(u) {
                diff[r] += v;
            }
        }
        if let Vertex::Cell(u) = b {
            for (r, v) in column(u) {
                diff[r] -= v;
            }
        }
        best = best.max(diff.iter().map(|d| d.abs()).sum());
    }
    Ok(best)
}
