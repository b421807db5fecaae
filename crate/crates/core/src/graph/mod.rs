//! Policy graphs over gridded domains.
//!
//! Vertices are domain cells plus an optional `Bot` vertex standing for "no
//! tuple". An edge says its two endpoints must stay indistinguishable.

mod analysis;
mod build;
mod family;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use analysis::{connected_components, graph_distance, spanner_stretch};
pub use build::{
    build_distance_threshold_graph, build_theta_spanner_1d, build_theta_spanner_grid, complete_graph, grid_graph,
    line_graph, star_graph, RedLattice,
};
pub use family::{PolicyFamily, PolicySpec};

/// A d-dimensional grid of cells, linearised row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Domain {
    dims: Vec<usize>,
}

impl Domain {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::invalid(format!("domain sizes must be nonempty and positive, got {dims:?}")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or_else(|| Error::invalid("domain size overflows"))?;
        Ok(Domain { dims })
    }

    pub fn line(k: usize) -> Result<Self> {
        Domain::new(vec![k])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of dimensions.
    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.dims.len());
        coords.iter().zip(&self.dims).fold(0, |acc, (&c, &k)| acc * k + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims.len()];
        for i in (0..self.dims.len()).rev() {
            c[i] = index % self.dims[i];
            index /= self.dims[i];
        }
        c
    }

    pub fn contains(&self, coords: &[usize]) -> bool {
        coords.len() == self.dims.len() && coords.iter().zip(&self.dims).all(|(&c, &k)| c < k)
    }
}

impl TryFrom<Vec<usize>> for Domain {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Domain::new(dims)
    }
}

impl From<Domain> for Vec<usize> {
    fn from(d: Domain) -> Vec<usize> {
        d.dims
    }
}

/// A policy-graph vertex. `Bot` orders after every cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Cell(usize),
    Bot,
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Cell(i) => write!(f, "{i}"),
            Vertex::Bot => f.write_str("bot"),
        }
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Vertex::Cell(i) => s.serialize_u64(*i as u64),
            Vertex::Bot => s.serialize_str("bot"),
        }
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Vertex::Cell(i as usize)),
            Raw::Name(s) if s == "bot" => Ok(Vertex::Bot),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("vertex must be a cell index or \"bot\", got {s:?}"))),
        }
    }
}

/// An undirected edge stored as (smaller, larger).
pub type Edge = (Vertex, Vertex);

/// A Blowfish policy graph. Edges are kept sorted in the canonical order:
/// lexicographic by (smaller endpoint, larger endpoint), `Bot` last.
///
/// Cells listed in `excluded` are not vertices; this is how a cell that was
/// replaced by `Bot` is represented.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct PolicyGraph {
    domain: Domain,
    has_bot: bool,
    edges: Vec<Edge>,
    excluded: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    dims: Vec<usize>,
    has_bot: bool,
    edges: Vec<[Vertex; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    excluded: Vec<usize>,
}

impl TryFrom<GraphFile> for PolicyGraph {
    type Error = Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        PolicyGraph::with_excluded(
            Domain::new(f.dims)?,
            f.has_bot,
            f.edges.into_iter().map(|[a, b]| (a, b)),
            f.excluded,
        )
    }
}

impl From<PolicyGraph> for GraphFile {
    fn from(g: PolicyGraph) -> GraphFile {
        GraphFile {
            dims: g.domain.dims,
            has_bot: g.has_bot,
            edges: g.edges.into_iter().map(|(a, b)| [a, b]).collect(),
            excluded: g.excluded,
        }
    }
}

impl PolicyGraph {
    pub fn new(domain: Domain, has_bot: bool, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        PolicyGraph::with_excluded(domain, has_bot, edges, Vec::new())
    }

    pub fn with_excluded(
        domain: Domain,
        has_bot: bool,
        edges: impl IntoIterator<Item = Edge>,
        mut excluded: Vec<usize>,
    ) -> Result<Self> {
        excluded.sort_unstable();
        excluded.dedup();
        let total = domain.total();
        if let Some(&c) = excluded.iter().find(|&&c| c >= total) {
            return Err(Error::invalid(format!("excluded cell {c} outside domain of {total}")));
        }
        let mut out: Vec<Edge> = Vec::new();
        for (a, b) in edges {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            if a == b {
                return Err(Error::invalid(format!("self-loop at {a}")));
            }
            for v in [a, b] {
                match v {
                    Vertex::Bot if !has_bot => return Err(Error::invalid("edge touches bot but has_bot is false")),
                    Vertex::Cell(i) if i >= total => {
                        return Err(Error::invalid(format!("cell {i} outside domain of {total}")))
                    }
                    Vertex::Cell(i) if excluded.binary_search(&i).is_ok() => {
                        return Err(Error::invalid(format!("edge touches excluded cell {i}")))
                    }
                    _ => {}
                }
            }
            out.push((a, b));
        }
        out.sort_unstable();
        if let Some(w) = out.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(PolicyGraph { domain, has_bot, edges: out, excluded })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn has_bot(&self) -> bool {
        self.has_bot
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn is_vertex(&self, v: Vertex) -> bool {
        match v {
            Vertex::Bot => self.has_bot,
            Vertex::Cell(i) => i < self.domain.total() && self.excluded.binary_search(&i).is_err(),
        }
    }

    /// Cells that are vertices, ascending.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        let mut skip = self.excluded.iter().peekable();
        (0..self.domain.total()).filter(move |&i| {
            if skip.peek() == Some(&&i) {
                skip.next();
                false
            } else {
                true
            }
        })
    }

    /// All vertices: cells ascending, then `Bot` if present.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut v: Vec<Vertex> = self.cells().map(Vertex::Cell).collect();
        if self.has_bot {
            v.push(Vertex::Bot);
        }
        v
    }

    pub fn vertex_count(&self) -> usize {
        self.domain.total() - self.excluded.len() + usize::from(self.has_bot)
    }

    /// Dense id used by adjacency lists: cells keep their index, `Bot` is
    /// `domain.total()`.
    pub fn vertex_id(&self, v: Vertex) -> usize {
        match v {
            Vertex::Cell(i) => i,
            Vertex::Bot => self.domain.total(),
        }
    }

    pub fn vertex_of_id(&self, id: usize) -> Vertex {
        if id == self.domain.total() {
            Vertex::Bot
        } else {
            Vertex::Cell(id)
        }
    }

    /// Neighbour lists indexed by vertex id, each entry `(neighbour id, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.domain.total() + 1];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (ia, ib) = (self.vertex_id(a), self.vertex_id(b));
            adj[ia].push((ib, e));
            adj[ib].push((ia, e));
        }
        adj
    }

    pub fn edge_index(&self, a: Vertex, b: Vertex) -> Option<usize> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).ok()
    }

    pub fn is_connected(&self) -> bool {
        connected_components(self).len() <= 1
    }

    /// Connected with exactly one fewer edge than vertices.
    pub fn is_tree(&self) -> bool {
        self.edges.len() + 1 == self.vertex_count() && self.is_connected()
    }

    /// Returns a copy with `Bot` added (if missing) and joined to each listed cell.
    pub fn with_bot_edges(&self, cells: &[usize]) -> Result<PolicyGraph> {
        let mut edges = self.edges.clone();
        for &c in cells {
            let e = (Vertex::Cell(c), Vertex::Bot);
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        PolicyGraph::with_excluded(self.domain.clone(), true, edges, self.excluded.clone())
    }

    pub fn same_vertices(&self, other: &PolicyGraph) -> bool {
        self.domain == other.domain && self.has_bot == other.has_bot && self.excluded == other.excluded
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_linearisation() {
        let d = Domain::new(vec![2, 3, 4]).unwrap();
        assert_eq!(d.total(), 24);
        assert_eq!(d.strides(), vec![12, 4, 1]);
        for i in 0..24 {
            assert_eq!(d.index(&d.coords(i)), i);
        }
        assert_eq!(d.index(&[1, 2, 3]), 12 + 8 + 3);
        assert!(Domain::new(vec![3, 0]).is_err());
    }

    #[test]
    fn edges_are_canonicalised() {
        let d = Domain::line(3).unwrap();
        let g = PolicyGraph::new(
            d,
            true,
            [(Vertex::Bot, Vertex::Cell(0)), (Vertex::Cell(2), Vertex::Cell(1)), (Vertex::Cell(0), Vertex::Cell(1))],
        )
        .unwrap();
        assert_eq!(
            g.edges(),
            &[(Vertex::Cell(0), Vertex::Cell(1)), (Vertex::Cell(0), Vertex::Bot), (Vertex::Cell(1), Vertex::Cell(2))]
        );
    }

    #[test]
    fn invalid_edges_rejected() {
        let d = Domain::line(3).unwrap();
        let c = Vertex::Cell;
        assert!(PolicyGraph::new(d.clone(), false, [(c(0), Vertex::Bot)]).is_err());
        assert!(PolicyGraph::new(d.clone(), false, [(c(1), c(1))]).is_err());
        assert!(PolicyGraph::new(d.clone(), false, [(c(0), c(1)), (c(1), c(0))]).is_err());
        assert!(PolicyGraph::new(d, false, [(c(0), c(3))]).is_err());
    }

    #[test]
    fn json_round_trip_uses_bot_string() {
        let g = star_graph(&Domain::new(vec![2, 2]).unwrap());
        let s = g.to_json().unwrap();
        assert!(s.contains("\"bot\""));
        assert!(s.contains("\"dims\":[2,2]"));
        assert_eq!(PolicyGraph::from_json(&s).unwrap(), g);
        assert!(PolicyGraph::from_json(r#"{"dims":[2],"has_bot":false,"edges":[[0,"top"]]}"#).is_err());
    }
}
