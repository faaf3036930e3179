//! Read-only analytics used during proofreading.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::SkeletonGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    /// Closed walk `v0, v1, …, v_{k−1}` (back to `v0`), starting at its
    /// smallest vertex.
    pub vertices: Vec<u32>,
    /// The graph edges along the cycle as stored `(source, target)`.
    pub edges: Vec<(u32, u32)>,
}

fn bfs_distances(adj: &BTreeMap<u32, Vec<u32>>, root: u32, allowed: impl Fn(u32) -> bool) -> BTreeMap<u32, usize> {
    let mut dist = BTreeMap::from([(root, 0usize)]);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        for &w in &adj[&u] {
            if allowed(w) && !dist.contains_key(&w) {
                dist.insert(w, du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Length of the shortest undirected cycle, if any.
fn girth(adj: &BTreeMap<u32, Vec<u32>>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &root in adj.keys() {
        let mut dist = BTreeMap::from([(root, 0usize)]);
        let mut parent = BTreeMap::from([(root, u32::MAX)]);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            if best.is_some_and(|b| 2 * du + 1 >= b) {
                break;
            }
            for &w in &adj[&u] {
                match dist.get(&w) {
                    None => {
                        dist.insert(w, du + 1);
                        parent.insert(w, u);
                        queue.push_back(w);
                    }
                    Some(&dw) if parent[&u] != w => {
                        let len = du + dw + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                    _ => {}
                }
            }
        }
    }
    best
}

/// The shortest cycle of the underlying undirected graph; among cycles of
/// that length the lexicographically smallest vertex sequence.
pub fn shortest_cycle(g: &SkeletonGraph) -> Option<Cycle> {
    let adj = g.adjacency();
    let len = girth(&adj)?;
    for &s in adj.keys() {
        // remaining-steps pruning by distance back to s through vertices ≥ s
        let dist = bfs_distances(&adj, s, |w| w >= s);
        let mut path = vec![s];
        let mut on_path = BTreeSet::from([s]);
        if extend(&adj, &dist, len, &mut path, &mut on_path) {
            let edges = (0..len)
                .map(|i| {
                    let (a, b) = (path[i], path[(i + 1) % len]);
                    let e = g.edge(a, b).expect("cycle edge present");
                    (e.source, e.target)
                })
                .collect();
            return Some(Cycle { vertices: path, edges });
        }
    }
    None
}

fn extend(
    adj: &BTreeMap<u32, Vec<u32>>,
    dist: &BTreeMap<u32, usize>,
    len: usize,
    path: &mut Vec<u32>,
    on_path: &mut BTreeSet<u32>,
) -> bool {
    let s = path[0];
    let u = *path.last().expect("non-empty path");
    if path.len() == len {
        return len >= 3 && adj[&u].binary_search(&s).is_ok();
    }
    for &w in &adj[&u] {
        if w <= s || on_path.contains(&w) {
            continue;
        }
        // after stepping to w, len − path.len() steps remain to return to s
        let remaining = len - path.len();
        if dist.get(&w).is_none_or(|&d| d > remaining) {
            continue;
        }
        path.push(w);
        on_path.insert(w);
        if extend(adj, dist, len, path, on_path) {
            return true;
        }
        on_path.remove(&w);
        path.pop();
    }
    false
}

/// Vertices with in-degree ≥ 2, ascending.
pub fn indegree_violations(g: &SkeletonGraph) -> Vec<u32> {
    let mut indeg: BTreeMap<u32, usize> = BTreeMap::new();
    for e in g.edges() {
        *indeg.entry(e.target).or_default() += 1;
    }
    indeg.into_iter().filter(|&(_, d)| d >= 2).map(|(v, _)| v).collect()
}

/// Connected components of the underlying undirected graph, numbered from 0
/// in order of their smallest vertex.
pub fn components(g: &SkeletonGraph) -> BTreeMap<u32, usize> {
    let adj = g.adjacency();
    let mut comp = BTreeMap::new();
    let mut next = 0;
    for &v in adj.keys() {
        if comp.contains_key(&v) {
            continue;
        }
        for w in bfs_distances(&adj, v, |_| true).into_keys() {
            comp.insert(w, next);
        }
        next += 1;
    }
    comp
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generations {
    /// Longest-path depth from an in-degree-0 vertex; absent for vertices of
    /// components containing a directed cycle.
    pub generation: BTreeMap<u32, usize>,
    pub component: BTreeMap<u32, usize>,
    /// Components containing a directed cycle.
    pub cyclic_components: BTreeSet<usize>,
}

pub fn generations(g: &SkeletonGraph) -> Generations {
    let component = components(g);
    let succ = g.successors();
    let mut indeg: BTreeMap<u32, usize> = g.vertex_ids().map(|v| (v, 0)).collect();
    for e in g.edges() {
        *indeg.get_mut(&e.target).expect("edge endpoint is a vertex") += 1;
    }
    // Kahn's order; vertices never released sit on or behind a directed cycle
    let mut depth: BTreeMap<u32, usize> = BTreeMap::new();
    let mut queue: VecDeque<u32> = indeg.iter().filter(|&(_, &d)| d == 0).map(|(&v, _)| v).collect();
    for &v in &queue {
        depth.insert(v, 0);
    }
    let mut remaining = indeg.clone();
    while let Some(u) = queue.pop_front() {
        let du = depth[&u];
        for &w in &succ[&u] {
            let d = depth.entry(w).or_insert(0);
            *d = (*d).max(du + 1);
            let r = remaining.get_mut(&w).expect("vertex");
            *r -= 1;
            if *r == 0 {
                queue.push_back(w);
            }
        }
    }
    let cyclic_components: BTreeSet<usize> = remaining
        .iter()
        .filter(|&(_, &r)| r > 0)
        .map(|(v, _)| component[v])
        .collect();
    let generation = depth
        .into_iter()
        .filter(|(v, _)| !cyclic_components.contains(&component[v]))
        .collect();
    Generations {
        generation,
        component,
        cyclic_components,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuddingStats {
    pub median: f64,
    pub q75: f64,
    pub max: usize,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[usize], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * frac
}

/// Median, 75% quantile and maximum of the out-degree over all vertices.
pub fn budding_stats(g: &SkeletonGraph) -> BuddingStats {
    let mut out: BTreeMap<u32, usize> = g.vertex_ids().map(|v| (v, 0)).collect();
    for e in g.edges() {
        *out.get_mut(&e.source).expect("vertex") += 1;
    }
    let mut degrees: Vec<usize> = out.into_values().collect();
    if degrees.is_empty() {
        return BuddingStats::default();
    }
    degrees.sort_unstable();
    BuddingStats {
        median: quantile(&degrees, 0.5),
        q75: quantile(&degrees, 0.75),
        max: *degrees.last().expect("non-empty"),
    }
}

fn reach(lists: &BTreeMap<u32, Vec<u32>>, v: u32) -> BTreeSet<u32> {
    if !lists.contains_key(&v) {
        return BTreeSet::new();
    }
    bfs_distances(lists, v, |_| true).into_keys().collect()
}

/// `v` and every vertex reachable from it along edge directions.
pub fn descendants(g: &SkeletonGraph, v: u32) -> BTreeSet<u32> {
    reach(&g.successors(), v)
}

/// `v` and every vertex from which it is reachable.
pub fn ancestors(g: &SkeletonGraph, v: u32) -> BTreeSet<u32> {
    reach(&g.predecessors(), v)
}
