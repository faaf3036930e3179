use super::edt::nearest_label_transform;
use super::grid::{LabelVolume, Mask, VoxelGrid};
use crate::error::Result;

/// Result of projecting instance labels onto a mask.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub labels: LabelVolume,
    /// Mask voxels left at 0 because the source volume has no labels at all.
    pub unreached: usize,
}

/// Assigns every mask voxel the label of the nearest labeled voxel of
/// `seeds` (Euclidean, physical spacing, ties to the lowest label). Seed
/// voxels keep their own labels; voxels outside both stay background.
pub fn propagate_labels(seeds: &LabelVolume, mask: &Mask) -> Result<Propagation> {
    seeds.check_same_geometry(mask)?;
    let nearest = nearest_label_transform::<f64>(seeds, seeds.spacing());
    let mut unreached = 0;
    let data = seeds
        .data()
        .iter()
        .zip(mask.data())
        .zip(&nearest)
        .map(|((&seed, &m), &(_, near))| {
            if seed != 0 {
                seed
            } else if m != 0 {
                if near == 0 {
                    unreached += 1;
                }
                near
            } else {
                0
            }
        })
        .collect();
    Ok(Propagation {
        labels: VoxelGrid::from_vec(seeds.dims(), seeds.spacing(), data)?,
        unreached,
    })
}
