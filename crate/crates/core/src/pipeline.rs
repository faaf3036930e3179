//! Automatic tree estimation: region adjacency, per-instance parabola fits,
//! orientation and sibling pruning.

use rayon::prelude::*;

use crate::graph::{build_rag, orient_edges, prune_sibling_edges, Edge, Fits, SkeletonGraph};
use crate::linalg::Vec3;
use crate::parabola::{fit_parabola, Parabola};
use crate::volume::{voxels_by_label, LabelVolume, Mask};

/// Points an instance's parabola is fitted to: its voxels inside the calyx
/// mask, or all of its voxels when there is no mask or the intersection is
/// empty.
pub fn fit_points(volume: &LabelVolume, calyx: Option<&Mask>, voxels: &[usize]) -> Vec<Vec3<f64>> {
    let inside: Vec<usize> = match calyx {
        Some(mask) => voxels.iter().copied().filter(|&v| mask.is_foreground(v)).collect(),
        None => Vec::new(),
    };
    let chosen = if inside.is_empty() { voxels } else { &inside };
    chosen.iter().map(|&v| Vec3(volume.position(v))).collect()
}

pub fn fit_instance(volume: &LabelVolume, calyx: Option<&Mask>, voxels: &[usize]) -> Parabola<f64> {
    fit_parabola(&fit_points(volume, calyx, voxels))
}

/// Parabola of every label, fitted in parallel.
pub fn fit_instances(volume: &LabelVolume, calyx: Option<&Mask>) -> Fits {
    let by_label: Vec<(u32, Vec<usize>)> = voxels_by_label(volume).into_iter().collect();
    by_label
        .par_iter()
        .map(|(label, voxels)| (*label, fit_instance(volume, calyx, voxels)))
        .collect()
}

/// Sets instances smaller than `min_volume_mm3` to background; returns the
/// removed labels.
pub fn remove_small_instances(volume: &mut LabelVolume, min_volume_mm3: f64) -> Vec<u32> {
    let voxel_volume = volume.voxel_volume();
    let small: Vec<(u32, Vec<usize>)> = voxels_by_label(volume)
        .into_iter()
        .filter(|(_, v)| (v.len() as f64 * voxel_volume) < min_volume_mm3)
        .collect();
    let data = volume.data_mut();
    for (_, voxels) in &small {
        for &v in voxels {
            data[v] = 0;
        }
    }
    small.into_iter().map(|(l, _)| l).collect()
}

#[derive(Debug, Clone)]
pub struct TreeResult {
    pub graph: SkeletonGraph,
    pub fits: Fits,
    /// Edge count of the region adjacency graph before pruning.
    pub rag_edge_count: usize,
    pub pruned: Vec<Edge>,
}

/// Region adjacency graph of the corallite labels, oriented by the
/// instance parabolas and pruned of sibling edges.
pub fn build_tree(corallites: &LabelVolume, calyx: Option<&Mask>) -> TreeResult {
    let mut graph = build_rag(corallites);
    let rag_edge_count = graph.edge_count();
    let fits = fit_instances(corallites, calyx);
    orient_edges(&mut graph, &fits);
    let pruned = prune_sibling_edges(&mut graph);
    TreeResult {
        graph,
        fits,
        rag_edge_count,
        pruned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calyx_mask_restricts_fit_points() {
        let v = LabelVolume::from_vec([4, 1, 1], [1.0; 3], vec![1, 1, 1, 2]).unwrap();
        let mask = Mask::from_vec([4, 1, 1], [1.0; 3], vec![0, 1, 1, 0]).unwrap();
        let by = voxels_by_label(&v);
        assert_eq!(fit_points(&v, Some(&mask), &by[&1]).len(), 2);
        // no calyx voxel in label 2: all voxels are used
        assert_eq!(fit_points(&v, Some(&mask), &by[&2]).len(), 1);
        assert_eq!(fit_points(&v, None, &by[&1]).len(), 3);
    }

    #[test]
    fn small_instances_removed() {
        let mut v = LabelVolume::from_vec([4, 1, 1], [0.5, 1.0, 1.0], vec![1, 1, 2, 0]).unwrap();
        assert_eq!(remove_small_instances(&mut v, 0.75), vec![2]);
        assert_eq!(v.data(), &[1, 1, 0, 0]);
    }
}
