//! Skeleton graph: vertices are instances, directed edges are candidate
//! mother → daughter relations carrying their touching points.

mod analysis;
mod orient;
mod rag;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analysis::{
    ancestors, budding_stats, components, descendants, generations, indegree_violations, shortest_cycle, BuddingStats,
    Cycle, Generations,
};
pub use orient::{orient_edge, orient_edges, prune_sibling_edges, Fits};
pub use rag::{boundary_voxels, build_rag, closest_voxel_pair, touching_pair, Contact};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProofState {
    #[default]
    Unseen,
    Good,
}

impl ProofState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProofState::Unseen => "unseen",
            ProofState::Good => "good",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: u32,
    pub state: ProofState,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlags {
    /// Equal heights at both touching points; direction is a tie-break.
    pub low_confidence: bool,
    /// One of the endpoints had no parabola fit.
    pub unoriented: bool,
    /// Re-attached after a cut where both halves scored equally.
    pub reattach_tie: bool,
}

impl EdgeFlags {
    pub fn any(&self) -> bool {
        self.low_confidence || self.unoriented || self.reattach_tie
    }

    pub fn describe(&self) -> Option<String> {
        let names: Vec<&str> = [
            (self.low_confidence, "low_confidence"),
            (self.unoriented, "unoriented"),
            (self.reattach_tie, "reattach_tie"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        (!names.is_empty()).then(|| names.join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    /// Linear voxel index of the touching voxel in the source / target.
    pub voxel_source: usize,
    pub voxel_target: usize,
    /// Voxel-center positions of the touching voxels, mm.
    pub x_source: [f64; 3],
    pub x_target: [f64; 3],
    pub face_count: usize,
    pub contact_area: f64,
    pub h_source: Option<f64>,
    pub h_target: Option<f64>,
    /// `h_source − h_target`.
    pub confidence: Option<f64>,
    pub state: ProofState,
    pub manual: bool,
    pub flags: EdgeFlags,
}

impl Edge {
    pub fn key(&self) -> (u32, u32) {
        pair_key(self.source, self.target)
    }

    pub fn length(&self) -> f64 {
        let d: f64 = (0..3).map(|k| (self.x_source[k] - self.x_target[k]).powi(2)).sum();
        d.sqrt()
    }

    /// Reverses the direction; touching points and heights follow their
    /// instances.
    pub fn flipped(&self) -> Edge {
        let mut e = self.clone();
        std::mem::swap(&mut e.source, &mut e.target);
        std::mem::swap(&mut e.voxel_source, &mut e.voxel_target);
        std::mem::swap(&mut e.x_source, &mut e.x_target);
        std::mem::swap(&mut e.h_source, &mut e.h_target);
        e.confidence = e.confidence.map(|c| -c);
        e
    }

    /// Endpoint other than `v`.
    pub fn other(&self, v: u32) -> u32 {
        if self.source == v {
            self.target
        } else {
            self.source
        }
    }
}

#[inline]
pub fn pair_key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// At most one edge per unordered pair, no self-loops.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphRecord", try_from = "GraphRecord")]
pub struct SkeletonGraph {
    vertices: BTreeMap<u32, Vertex>,
    edges: BTreeMap<(u32, u32), Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

impl From<SkeletonGraph> for GraphRecord {
    fn from(g: SkeletonGraph) -> Self {
        GraphRecord {
            vertices: g.vertices.into_values().collect(),
            edges: g.edges.into_values().collect(),
        }
    }
}

impl TryFrom<GraphRecord> for SkeletonGraph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        let mut g = SkeletonGraph::new();
        for v in r.vertices {
            g.vertices.insert(v.id, v);
        }
        for e in r.edges {
            g.insert_edge(e)?;
        }
        Ok(g)
    }
}

impl SkeletonGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vertices(ids: impl IntoIterator<Item = u32>) -> Self {
        let mut g = Self::new();
        for id in ids {
            g.add_vertex(id);
        }
        g
    }

    pub fn add_vertex(&mut self, id: u32) {
        self.vertices.entry(id).or_insert(Vertex {
            id,
            state: ProofState::Unseen,
        });
    }

    /// Removes the vertex and returns its incident edges.
    pub fn remove_vertex(&mut self, id: u32) -> Vec<Edge> {
        let keys: Vec<_> = self.incident_keys(id);
        let removed = keys.iter().filter_map(|k| self.edges.remove(k)).collect();
        self.vertices.remove(&id);
        removed
    }

    pub fn contains_vertex(&self, id: u32) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn vertex(&self, id: u32) -> Option<&Vertex> {
        self.vertices.get(&id)
    }

    pub fn vertex_mut(&mut self, id: u32) -> Option<&mut Vertex> {
        self.vertices.get_mut(&id)
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.vertices.keys().copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.values()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending unordered-pair order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edges_mut(&mut self) -> impl Iterator<Item = &mut Edge> {
        self.edges.values_mut()
    }

    /// The edge between `a` and `b` in either direction.
    pub fn edge(&self, a: u32, b: u32) -> Option<&Edge> {
        self.edges.get(&pair_key(a, b))
    }

    pub fn edge_mut(&mut self, a: u32, b: u32) -> Option<&mut Edge> {
        self.edges.get_mut(&pair_key(a, b))
    }

    pub fn has_directed_edge(&self, source: u32, target: u32) -> bool {
        self.edge(source, target)
            .is_some_and(|e| e.source == source && e.target == target)
    }

    /// Inserts an edge between existing vertices.
    pub fn insert_edge(&mut self, edge: Edge) -> Result<()> {
        if edge.source == edge.target {
            return Err(Error::InvalidCommand(format!("self-loop on {}", edge.source)));
        }
        for v in [edge.source, edge.target] {
            if !self.contains_vertex(v) {
                return Err(Error::UnknownLabel(v));
            }
        }
        let key = edge.key();
        if self.edges.contains_key(&key) {
            return Err(Error::EdgeExists(edge.source, edge.target));
        }
        self.edges.insert(key, edge);
        Ok(())
    }

    /// Inserts or overwrites the edge for its pair.
    pub fn replace_edge(&mut self, edge: Edge) {
        self.edges.insert(edge.key(), edge);
    }

    pub fn remove_edge(&mut self, a: u32, b: u32) -> Option<Edge> {
        self.edges.remove(&pair_key(a, b))
    }

    fn incident_keys(&self, v: u32) -> Vec<(u32, u32)> {
        self.edges
            .keys()
            .filter(|(a, b)| *a == v || *b == v)
            .copied()
            .collect()
    }

    pub fn incident_edges(&self, v: u32) -> impl Iterator<Item = &Edge> {
        self.edges.values().filter(move |e| e.source == v || e.target == v)
    }

    /// Undirected neighbors in ascending order.
    pub fn neighbors(&self, v: u32) -> BTreeSet<u32> {
        self.incident_edges(v).map(|e| e.other(v)).collect()
    }

    /// Undirected adjacency lists, ascending.
    pub fn adjacency(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut adj: BTreeMap<u32, Vec<u32>> = self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for &(a, b) in self.edges.keys() {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }
        adj
    }

    /// Directed successor lists, ascending.
    pub fn successors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> = self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for e in self.edges.values() {
            out.entry(e.source).or_default().push(e.target);
        }
        for list in out.values_mut() {
            list.sort_unstable();
        }
        out
    }

    /// Directed predecessor lists, ascending.
    pub fn predecessors(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut out: BTreeMap<u32, Vec<u32>> = self.vertices.keys().map(|&v| (v, Vec::new())).collect();
        for e in self.edges.values() {
            out.entry(e.target).or_default().push(e.source);
        }
        for list in out.values_mut() {
            list.sort_unstable();
        }
        out
    }

    pub fn in_degree(&self, v: u32) -> usize {
        self.edges.values().filter(|e| e.target == v).count()
    }

    pub fn out_degree(&self, v: u32) -> usize {
        self.edges.values().filter(|e| e.source == v).count()
    }

    /// `(source, target)` of every edge in ascending pair order.
    pub fn directed_pairs(&self) -> Vec<(u32, u32)> {
        self.edges.values().map(|e| (e.source, e.target)).collect()
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// Bare edge with placeholder geometry.
    pub fn edge(source: u32, target: u32) -> Edge {
        Edge {
            source,
            target,
            voxel_source: 0,
            voxel_target: 0,
            x_source: [0.0; 3],
            x_target: [0.0; 3],
            face_count: 1,
            contact_area: 1.0,
            h_source: None,
            h_target: None,
            confidence: None,
            state: ProofState::Unseen,
            manual: false,
            flags: EdgeFlags::default(),
        }
    }

    pub fn graph(n: u32, edges: &[(u32, u32)]) -> SkeletonGraph {
        let mut g = SkeletonGraph::with_vertices(1..=n);
        for &(a, b) in edges {
            g.insert_edge(edge(a, b)).unwrap();
        }
        g
    }
}
