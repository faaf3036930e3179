//! Voxel grids, distance transforms, watershed instance segmentation and
//! label propagation.

pub mod edt;
mod grid;
pub mod io;
mod propagate;
pub mod watershed;

pub use edt::{euclidean_distance_transform, squared_edt, UNREACHABLE};
pub use grid::{voxels_by_label, InstanceInfo, InstanceSet, LabelVolume, Mask, ScalarField, VoxelGrid};
pub use io::{read_header, read_volume, write_volume, VolumeHeader, VoxelType};
pub use propagate::{propagate_labels, Propagation};
pub use watershed::persistence_watershed;

/// Distance transform followed by the persistence watershed: the initial
/// instance segmentation of a binary mask.
pub fn segment_instances(mask: &Mask, persistence: f64) -> crate::Result<LabelVolume> {
    let field = euclidean_distance_transform(mask)?;
    persistence_watershed(&field, mask, persistence)
}
