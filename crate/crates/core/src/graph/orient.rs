//! Edge orientation from instance heights and sibling-edge pruning.

use std::collections::BTreeMap;

use super::{Edge, SkeletonGraph};
use crate::linalg::Vec3;
use crate::parabola::Parabola;

/// Parabola fit per instance label.
pub type Fits = BTreeMap<u32, Parabola<f64>>;

/// Directs an edge so that the source height at its touching point is at
/// least the target height at its touching point. Equal heights direct from
/// the lower id with confidence 0 and the low-confidence flag; a missing fit
/// leaves the lower-id direction with the unoriented flag.
pub fn orient_edge(edge: &Edge, fits: &Fits) -> Edge {
    let mut e = if edge.source < edge.target {
        edge.clone()
    } else {
        edge.flipped()
    };
    e.flags.low_confidence = false;
    e.flags.unoriented = false;
    let (Some(fa), Some(fb)) = (fits.get(&e.source), fits.get(&e.target)) else {
        e.h_source = None;
        e.h_target = None;
        e.confidence = None;
        e.flags.unoriented = true;
        return e;
    };
    let ha = fa.height(&Vec3(e.x_source));
    let hb = fb.height(&Vec3(e.x_target));
    e.h_source = Some(ha);
    e.h_target = Some(hb);
    if hb > ha {
        e = e.flipped();
    } else if ha == hb {
        e.flags.low_confidence = true;
    }
    e.confidence = Some(e.h_source.unwrap_or(0.0) - e.h_target.unwrap_or(0.0));
    e
}

/// Orients every edge in place.
pub fn orient_edges(g: &mut SkeletonGraph, fits: &Fits) {
    for e in g.edges_mut() {
        *e = orient_edge(e, fits);
    }
}

/// Removes every edge between two daughters of a common mother, visiting
/// mothers, then daughter pairs, in ascending id order against the current
/// graph. Returns the removed edges in removal order.
pub fn prune_sibling_edges(g: &mut SkeletonGraph) -> Vec<Edge> {
    let mut removed = Vec::new();
    let mothers: Vec<u32> = g.vertex_ids().collect();
    for a in mothers {
        let mut daughters: Vec<u32> = g.incident_edges(a).filter(|e| e.source == a).map(|e| e.target).collect();
        daughters.sort_unstable();
        for (i, &b1) in daughters.iter().enumerate() {
            for &b2 in &daughters[i + 1..] {
                if let Some(e) = g.remove_edge(b1, b2) {
                    removed.push(e);
                }
            }
        }
    }
    removed
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use crate::linalg::Mat3;
    use crate::parabola::FitFlags;

    /// Straight vertical "parabola" along z from t=0 to t=10 through `x, y`.
    fn column(x: f64, y: f64) -> Parabola<f64> {
        Parabola {
            rotation: Mat3::from_columns(
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ),
            anchor: Vec3::new(x, y, 0.0),
            alpha: 0.0,
            t_min: 0.0,
            t_max: 10.0,
            params: vec![],
            residuals: vec![],
            flags: FitFlags::default(),
            iterations: 0,
        }
    }

    fn touching(a: u32, b: u32, za: f64, zb: f64) -> Edge {
        let mut e = edge(a, b);
        e.x_source = [0.0, 0.0, za];
        e.x_target = [1.0, 0.0, zb];
        e
    }

    #[test]
    fn high_source_low_target() {
        let fits: Fits = [(1, column(0.0, 0.0)), (2, column(1.0, 0.0))].into();
        let e = orient_edge(&touching(1, 2, 9.0, 1.0), &fits);
        assert_eq!((e.source, e.target), (1, 2));
        assert!((e.confidence.unwrap() - 0.8).abs() < 1e-12);
        let e = orient_edge(&touching(1, 2, 1.0, 9.0), &fits);
        assert_eq!((e.source, e.target), (2, 1));
        assert!((e.h_source.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lower_id_with_flag() {
        let fits: Fits = [(3, column(0.0, 0.0)), (5, column(1.0, 0.0))].into();
        let e = orient_edge(&touching(5, 3, 4.0, 4.0), &fits);
        assert_eq!((e.source, e.target), (3, 5));
        assert_eq!(e.confidence, Some(0.0));
        assert!(e.flags.low_confidence);
    }

    #[test]
    fn missing_fit_is_flagged() {
        let fits: Fits = [(1, column(0.0, 0.0))].into();
        let e = orient_edge(&touching(2, 1, 4.0, 4.0), &fits);
        assert!(e.flags.unoriented);
        assert_eq!(e.confidence, None);
    }

    #[test]
    fn orientation_is_idempotent() {
        let fits: Fits = [(1, column(0.0, 0.0)), (2, column(1.0, 0.0))].into();
        let once = orient_edge(&touching(1, 2, 2.0, 7.0), &fits);
        assert_eq!(orient_edge(&once, &fits), once);
        assert_eq!(orient_edge(&once.flipped(), &fits), once);
    }

    #[test]
    fn sibling_edge_removed() {
        let mut g = graph(3, &[(1, 2), (1, 3), (2, 3)]);
        let removed = prune_sibling_edges(&mut g);
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].key(), (2, 3));
        assert_eq!(g.directed_pairs(), vec![(1, 2), (1, 3)]);
        assert!(prune_sibling_edges(&mut g).is_empty());
    }

    #[test]
    fn reversed_sibling_edge_removed() {
        let mut g = graph(3, &[(1, 2), (1, 3), (3, 2)]);
        prune_sibling_edges(&mut g);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn chain_unchanged() {
        let mut g = graph(3, &[(1, 2), (2, 3)]);
        assert!(prune_sibling_edges(&mut g).is_empty());
        assert_eq!(g.edge_count(), 2);
    }
}
