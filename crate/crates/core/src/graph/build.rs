use super::{Domain, Edge, PolicyGraph, Vertex};
use crate::error::{Error, Result};

const MAX_COMPLETE_CELLS: usize = 2048;

/// `G^θ`: cells at L1 distance at most `theta` are neighbours. With
/// `include_bot`, every cell is also joined to `Bot`.
pub fn build_distance_threshold_graph(domain: &Domain, theta: usize, include_bot: bool) -> Result<PolicyGraph> {
    if theta == 0 {
        return Err(Error::invalid("theta must be at least 1"));
    }
    let dims = domain.dims();
    let offsets = positive_offsets(dims, theta);
    let strides = domain.strides();
    let mut edges = Vec::new();
    for u in 0..domain.total() {
        let cu = domain.coords(u);
        'offset: for off in &offsets {
            let mut v = u as isize;
            for i in 0..dims.len() {
                let c = cu[i] as isize + off[i];
                if c < 0 || c >= dims[i] as isize {
                    continue 'offset;
                }
                v += off[i] * strides[i] as isize;
            }
            edges.push((Vertex::Cell(u), Vertex::Cell(v as usize)));
        }
        if include_bot {
            edges.push((Vertex::Cell(u), Vertex::Bot));
        }
    }
    PolicyGraph::new(domain.clone(), include_bot, edges)
}

/// Offset vectors with L1 norm in `1..=theta` whose first nonzero entry is
/// positive, so each unordered pair is produced once.
fn positive_offsets(dims: &[usize], theta: usize) -> Vec<Vec<isize>> {
    fn rec(dims: &[usize], budget: isize, positive: bool, cur: &mut Vec<isize>, out: &mut Vec<Vec<isize>>) {
        if cur.len() == dims.len() {
            if positive {
                out.push(cur.clone());
            }
            return;
        }
        let reach = budget.min(dims[cur.len()] as isize - 1);
        let lo = if positive { -reach } else { 0 };
        for o in lo..=reach {
            cur.push(o);
            rec(dims, budget - o.abs(), positive || o > 0, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dims, theta as isize, false, &mut Vec::new(), &mut out);
    out
}

/// The line graph `G^1_k`.
pub fn line_graph(k: usize) -> Result<PolicyGraph> {
    build_distance_threshold_graph(&Domain::line(k)?, 1, false)
}

/// The grid graph `G^1_{k^d}`.
pub fn grid_graph(domain: &Domain) -> Result<PolicyGraph> {
    build_distance_threshold_graph(domain, 1, false)
}

/// Every cell joined only to `Bot`: unbounded differential privacy.
pub fn star_graph(domain: &Domain) -> PolicyGraph {
    let edges = (0..domain.total()).map(|u| (Vertex::Cell(u), Vertex::Bot));
    PolicyGraph::new(domain.clone(), true, edges).expect("star edges are valid")
}

/// All pairs of cells: bounded differential privacy.
pub fn complete_graph(domain: &Domain) -> Result<PolicyGraph> {
    let n = domain.total();
    if n > MAX_COMPLETE_CELLS {
        return Err(Error::TooLarge {
            what: "complete graph",
            size: n,
            limit: MAX_COMPLETE_CELLS,
            hint: "compute bounded sensitivities with pairwise column distances instead",
        });
    }
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (Vertex::Cell(u), Vertex::Cell(v))));
    PolicyGraph::new(domain.clone(), false, edges)
}

/// Red-vertex layout shared by the θ-spanners. Along each dimension the
/// domain is cut into half-open blocks of side `⌊θ/d⌋`; a block's red
/// coordinate is its last one, clamped to the domain.
#[derive(Clone, Debug)]
pub struct RedLattice {
    domain: Domain,
    block: usize,
    reds: Vec<Vec<usize>>,
}

impl RedLattice {
    pub fn new(domain: &Domain, theta: usize) -> Result<Self> {
        let d = domain.d();
        if theta < d {
            return Err(Error::invalid(format!(
                "theta = {theta} is below the dimension {d}; use theta = {d} for the plain grid"
            )));
        }
        let block = theta / d;
        let reds = domain
            .dims()
            .iter()
            .map(|&k| {
                let mut r: Vec<usize> = (1..=k / block).map(|m| m * block - 1).collect();
                if k % block != 0 {
                    r.push(k - 1);
                }
                r
            })
            .collect();
        Ok(RedLattice { domain: domain.clone(), block, reds })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Block side `⌊θ/d⌋`.
    pub fn block(&self) -> usize {
        self.block
    }

    /// Red coordinates along `dim`, ascending.
    pub fn red_coords(&self, dim: usize) -> &[usize] {
        &self.reds[dim]
    }

    /// Red coordinate of the block containing coordinate `c` along `dim`.
    pub fn corner(&self, dim: usize, c: usize) -> usize {
        ((c / self.block) * self.block + self.block - 1).min(self.domain.dims()[dim] - 1)
    }

    /// Position of `c`'s block in the red coordinate list of `dim`.
    pub fn block_of(&self, c: usize) -> usize {
        c / self.block
    }

    pub fn corner_of(&self, cell: usize) -> usize {
        let c: Vec<usize> = self.domain.coords(cell).iter().enumerate().map(|(i, &x)| self.corner(i, x)).collect();
        self.domain.index(&c)
    }

    pub fn is_red(&self, cell: usize) -> bool {
        self.corner_of(cell) == cell
    }

    /// Non-red cell to its block corner, one per non-red cell.
    pub fn internal_edges(&self) -> Vec<Edge> {
        (0..self.domain.total())
            .filter_map(|c| {
                let r = self.corner_of(c);
                (r != c).then_some((Vertex::Cell(c), Vertex::Cell(r)))
            })
            .collect()
    }

    /// Grid edges between consecutive red vertices.
    pub fn external_edges(&self) -> Vec<Edge> {
        let d = self.domain.d();
        let shape: Vec<usize> = self.reds.iter().map(Vec::len).collect();
        let count: usize = shape.iter().product();
        let mut edges = Vec::new();
        let mut idx = vec![0usize; d];
        for flat in 0..count {
            let mut rem = flat;
            for i in (0..d).rev() {
                idx[i] = rem % shape[i];
                rem /= shape[i];
            }
            let here: Vec<usize> = (0..d).map(|i| self.reds[i][idx[i]]).collect();
            for i in 0..d {
                if idx[i] + 1 < shape[i] {
                    let mut there = here.clone();
                    there[i] = self.reds[i][idx[i] + 1];
                    edges.push((Vertex::Cell(self.domain.index(&here)), Vertex::Cell(self.domain.index(&there))));
                }
            }
        }
        edges
    }
}

/// `H^θ_k`: red vertices every θ cells (plus the last cell when θ does not
/// divide k), reds joined in a path, every other cell joined to the next red
/// vertex to its right. Always a spanning tree.
pub fn build_theta_spanner_1d(k: usize, theta: usize) -> Result<PolicyGraph> {
    if theta == 0 {
        return Err(Error::invalid("theta must be at least 1"));
    }
    build_theta_spanner_grid(&Domain::line(k)?, theta)
}

/// `H^θ_{k^d}`: internal edges from each non-red cell to its block corner,
/// external grid edges among the red vertices.
pub fn build_theta_spanner_grid(domain: &Domain, theta: usize) -> Result<PolicyGraph> {
    let lattice = RedLattice::new(domain, theta)?;
    let mut edges = lattice.internal_edges();
    edges.extend(lattice.external_edges());
    PolicyGraph::new(domain.clone(), false, edges)
}
