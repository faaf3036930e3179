use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 3D grid, x-fastest row-major, with physical voxel spacing in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<V> {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<V>,
}

/// Binary mask, 0 = background, anything else = foreground.
pub type Mask = VoxelGrid<u8>;
/// Instance labels, 0 = background.
pub type LabelVolume = VoxelGrid<u32>;
/// Scalar field such as a distance map.
pub type ScalarField = VoxelGrid<f32>;

fn validate(dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidGrid(format!("dims must be positive, got {dims:?}")));
    }
    if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidGrid(format!(
            "spacing must be positive and finite, got {spacing:?}"
        )));
    }
    Ok(())
}

impl<V: Copy + Default> VoxelGrid<V> {
    pub fn filled(dims: [usize; 3], spacing: [f64; 3], value: V) -> Result<Self> {
        validate(dims, spacing)?;
        Ok(Self {
            dims,
            spacing,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        Self::filled(dims, spacing, V::default())
    }

    pub fn from_vec(dims: [usize; 3], spacing: [f64; 3], data: Vec<V>) -> Result<Self> {
        validate(dims, spacing)?;
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::InvalidGrid(format!(
                "payload has {} voxels, dims {dims:?} need {n}",
                data.len()
            )));
        }
        Ok(Self { dims, spacing, data })
    }

    /// A grid of a different payload type sharing this grid's geometry.
    pub fn map<W: Copy + Default>(&self, f: impl Fn(V) -> W) -> VoxelGrid<W> {
        VoxelGrid {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<V> VoxelGrid<V> {
    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[V] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<V> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let yz = idx / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> &V {
        &self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: V) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Physical position of a voxel center in mm (the origin voxel sits at 0).
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            c[0] as f64 * self.spacing[0],
            c[1] as f64 * self.spacing[1],
            c[2] as f64 * self.spacing[2],
        ]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Errors unless `other` has the same dims and spacing.
    pub fn check_same_geometry<W>(&self, other: &VoxelGrid<W>) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(self.dims, other.dims));
        }
        if self.spacing != other.spacing {
            return Err(Error::InvalidGrid(format!(
                "spacing mismatch: {:?} vs {:?}",
                self.spacing, other.spacing
            )));
        }
        Ok(())
    }

    /// Linear indices of the 6-connected neighbors of `idx`.
    pub fn face_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let [x, y, z] = self.coords(idx);
        let [nx, ny, nz] = self.dims;
        let sx = 1;
        let sy = nx;
        let sz = nx * ny;
        [
            (x > 0).then(|| idx - sx),
            (x + 1 < nx).then(|| idx + sx),
            (y > 0).then(|| idx - sy),
            (y + 1 < ny).then(|| idx + sy),
            (z > 0).then(|| idx - sz),
            (z + 1 < nz).then(|| idx + sz),
        ]
        .into_iter()
        .flatten()
    }
}

impl Mask {
    #[inline]
    pub fn is_foreground(&self, idx: usize) -> bool {
        self.data[idx] != 0
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// Per-label statistics of a label volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub voxel_count: usize,
    /// Inclusive voxel-index bounding box.
    pub bbox_min: [usize; 3],
    pub bbox_max: [usize; 3],
}

/// The positive labels present in a label volume.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceSet {
    pub instances: BTreeMap<u32, InstanceInfo>,
}

impl InstanceSet {
    pub fn from_volume(volume: &LabelVolume) -> Self {
        let mut instances: BTreeMap<u32, InstanceInfo> = BTreeMap::new();
        for (idx, &label) in volume.data().iter().enumerate() {
            if label == 0 {
                continue;
            }
            let c = volume.coords(idx);
            instances
                .entry(label)
                .and_modify(|info| {
                    info.voxel_count += 1;
                    for k in 0..3 {
                        info.bbox_min[k] = info.bbox_min[k].min(c[k]);
                        info.bbox_max[k] = info.bbox_max[k].max(c[k]);
                    }
                })
                .or_insert(InstanceInfo {
                    voxel_count: 1,
                    bbox_min: c,
                    bbox_max: c,
                });
        }
        Self { instances }
    }

    pub fn labels(&self) -> impl Iterator<Item = u32> + '_ {
        self.instances.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn contains(&self, label: u32) -> bool {
        self.instances.contains_key(&label)
    }

    pub fn foreground_count(&self) -> usize {
        self.instances.values().map(|i| i.voxel_count).sum()
    }
}

/// Voxel indices of every label, in increasing index order.
pub fn voxels_by_label(volume: &LabelVolume) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (idx, &label) in volume.data().iter().enumerate() {
        if label != 0 {
            out.entry(label).or_default().push(idx);
        }
    }
    out
}
