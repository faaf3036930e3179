//! Proofreading order: hop to the nearest vertex still marked unseen.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EditState;
use crate::features::GeometryMap;
use crate::graph::{ProofState, SkeletonGraph};

/// Camera suggestion for inspecting one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofreadView {
    pub vertex: u32,
    pub centroid: [f64; 3],
    /// Parabola axis, curvature direction and plane normal, if fitted.
    pub axes: Option<[[f64; 3]; 3]>,
    /// 1.5 × the instance's bounding-sphere radius, mm.
    pub crop_radius: f64,
}

fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Unseen vertex nearest to `from` (the lowest unseen id without a
/// position); ties go to the lower id.
pub fn nearest_unseen(
    graph: &SkeletonGraph,
    geometry: &GeometryMap,
    from: Option<[f64; 3]>,
    exclude: &BTreeSet<u32>,
) -> Option<u32> {
    let pending = graph
        .vertices()
        .filter(|v| v.state == ProofState::Unseen && !exclude.contains(&v.id))
        .map(|v| v.id);
    match from {
        None => pending.min(),
        Some(p) => pending
            .map(|v| {
                let d = geometry.get(&v).map_or(f64::INFINITY, |g| squared_distance(g.centroid, p));
                (d, v)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, v)| v),
    }
}

pub fn proofread_view(state: &EditState, vertex: u32) -> Option<ProofreadView> {
    let g = state.geometry.get(&vertex)?;
    let axes = state.fits.get(&vertex).map(|p| [0, 1, 2].map(|j| p.rotation.column(j).0));
    Some(ProofreadView {
        vertex,
        centroid: g.centroid,
        axes,
        crop_radius: 1.5 * g.radius,
    })
}

/// One proofreading pass: each unseen vertex is offered at most once.
#[derive(Debug, Clone, Default)]
pub struct ProofreadQueue {
    cursor: Option<[f64; 3]>,
    visited: BTreeSet<u32>,
}

impl ProofreadQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(position: [f64; 3]) -> Self {
        Self {
            cursor: Some(position),
            visited: BTreeSet::new(),
        }
    }

    /// Unseen vertices not yet offered in this pass.
    pub fn pending(&self, state: &EditState) -> Vec<u32> {
        state
            .graph
            .vertices()
            .filter(|v| v.state == ProofState::Unseen && !self.visited.contains(&v.id))
            .map(|v| v.id)
            .collect()
    }

    pub fn next(&mut self, state: &EditState) -> Option<ProofreadView> {
        let v = nearest_unseen(&state.graph, &state.geometry, self.cursor, &self.visited)?;
        let view = proofread_view(state, v)?;
        self.visited.insert(v);
        self.cursor = Some(view.centroid);
        Some(view)
    }
}
