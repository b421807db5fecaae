use std::collections::VecDeque;

use super::{PolicyGraph, Vertex};
use crate::error::{Error, Result};

/// Reusable breadth-first search over adjacency lists; a stamp array avoids
/// clearing distances between sources.
struct Bfs<'a> {
    adj: &'a [Vec<(usize, usize)>],
    stamp: Vec<u32>,
    dist: Vec<usize>,
    round: u32,
    queue: VecDeque<usize>,
}

impl<'a> Bfs<'a> {
    fn new(adj: &'a [Vec<(usize, usize)>]) -> Self {
        Bfs { adj, stamp: vec![0; adj.len()], dist: vec![0; adj.len()], round: 0, queue: VecDeque::new() }
    }

    /// Distances from `src` to each of `targets`, stopping once all are
    /// found. Unreached targets come back as `None`.
    fn run(&mut self, src: usize, targets: &[usize]) -> Vec<Option<usize>> {
        self.round += 1;
        let r = self.round;
        self.queue.clear();
        self.stamp[src] = r;
        self.dist[src] = 0;
        self.queue.push_back(src);
        let seen = |s: &Self, t: usize| s.stamp[t] == r;
        let mut remaining = targets.iter().filter(|&&t| !seen(self, t)).count();
        while remaining > 0 {
            let Some(u) = self.queue.pop_front() else { break };
            for &(v, _) in &self.adj[u] {
                if self.stamp[v] != r {
                    self.stamp[v] = r;
                    self.dist[v] = self.dist[u] + 1;
                    self.queue.push_back(v);
                    if targets.contains(&v) {
                        remaining -= 1;
                    }
                }
            }
        }
        targets.iter().map(|&t| (self.stamp[t] == r).then_some(self.dist[t])).collect()
    }
}

/// Number of edges on a shortest path between `u` and `v`.
pub fn graph_distance(g: &PolicyGraph, u: Vertex, v: Vertex) -> Result<usize> {
    for x in [u, v] {
        if !g.is_vertex(x) {
            return Err(Error::invalid(format!("{x} is not a vertex of the graph")));
        }
    }
    let adj = g.adjacency();
    let mut bfs = Bfs::new(&adj);
    bfs.run(g.vertex_id(u), &[g.vertex_id(v)])[0].ok_or_else(|| Error::Unreachable(u.to_string(), v.to_string()))
}

/// Stretch of `h` relative to `g`: the largest distance in `h` between the
/// endpoints of an edge of `g`.
pub fn spanner_stretch(g: &PolicyGraph, h: &PolicyGraph) -> Result<usize> {
    if !g.same_vertices(h) {
        return Err(Error::invalid("spanner_stretch needs graphs over the same vertex set"));
    }
    let gadj = g.adjacency();
    let hadj = h.adjacency();
    let mut bfs = Bfs::new(&hadj);
    let mut worst = 0;
    let mut targets = Vec::new();
    for (u, nbrs) in gadj.iter().enumerate() {
        targets.clear();
        targets.extend(nbrs.iter().map(|&(v, _)| v).filter(|&v| v > u));
        if targets.is_empty() {
            continue;
        }
        for (t, d) in targets.iter().zip(bfs.run(u, &targets)) {
            match d {
                Some(d) => worst = worst.max(d),
                None => return Err(Error::Unreachable(g.vertex_of_id(u).to_string(), g.vertex_of_id(*t).to_string())),
            }
        }
    }
    Ok(worst.max(1))
}

/// Vertex sets of the connected components, each sorted, ordered by their
/// smallest vertex.
pub fn connected_components(g: &PolicyGraph) -> Vec<Vec<Vertex>> {
    let n = g.domain().total() + 1;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in g.edges() {
        let (ra, rb) = (find(&mut parent, g.vertex_id(a)), find(&mut parent, g.vertex_id(b)));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<Vertex>> = Vec::new();
    for v in g.vertices() {
        let root = find(&mut parent, g.vertex_id(v));
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(Vec::new());
        }
        out[slot[root]].push(v);
    }
    out
}
