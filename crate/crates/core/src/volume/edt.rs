//! Exact separable Euclidean distance transform with anisotropic spacing.
//!
//! Squared distances are accumulated one axis at a time as
//! `dz²·sz² + (dy²·sy² + dx²·sx²)`. Each 1D pass takes the exact minimum over
//! all candidates on the line (outward scan with early exit), so the result
//! equals a direct all-pairs minimum evaluated in the same order, bit for bit.

use rayon::prelude::*;

use super::grid::{LabelVolume, Mask, ScalarField, VoxelGrid};
use crate::error::Result;
use crate::scalar::Real;

/// Value written for voxels with no background voxel anywhere in the grid.
pub const UNREACHABLE: f32 = f32::MAX;

/// Squared physical length of an axis offset: `(d²)·(s²)`.
#[inline]
pub fn axis_term<T: Real>(d: usize, spacing: T) -> T {
    T::from_count(d * d) * (spacing * spacing)
}

/// Candidate value carried through the separable passes.
pub(crate) trait Candidate<T: Real>: Copy + PartialOrd + Send + Sync {
    fn distance(&self) -> T;
    fn shifted(&self, term: T) -> Self;
}

impl<T: Real> Candidate<T> for T {
    #[inline]
    fn distance(&self) -> T {
        *self
    }
    #[inline]
    fn shifted(&self, term: T) -> Self {
        term + *self
    }
}

/// `(squared distance, label)`, ordered lexicographically so equal distances
/// resolve to the lowest label.
impl<T: Real> Candidate<T> for (T, u32) {
    #[inline]
    fn distance(&self) -> T {
        self.0
    }
    #[inline]
    fn shifted(&self, term: T) -> Self {
        (term + self.0, self.1)
    }
}

fn min_along_line<T: Real, C: Candidate<T>>(line: &[C], terms: &[T], out: &mut [C]) {
    let n = line.len();
    for q in 0..n {
        let mut best = line[q];
        for d in 1..n {
            let w = terms[d];
            if w > best.distance() {
                break;
            }
            if d <= q {
                let c = line[q - d].shifted(w);
                if c < best {
                    best = c;
                }
            }
            if q + d < n {
                let c = line[q + d].shifted(w);
                if c < best {
                    best = c;
                }
            }
            if d > q && q + d >= n {
                break;
            }
        }
        out[q] = best;
    }
}

/// Runs the 1D minimum pass along `axis` over every grid line.
pub(crate) fn separable_pass<T: Real, C: Candidate<T>>(
    values: &mut [C],
    dims: [usize; 3],
    axis: usize,
    spacing: T,
) {
    let n = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let terms: Vec<T> = (0..n).map(|d| axis_term(d, spacing)).collect();
    // line starts: every voxel whose coordinate along `axis` is zero
    let starts: Vec<usize> = (0..dims[0] * dims[1] * dims[2])
        .filter(|&i| (i / stride) % n == 0)
        .collect();
    let results: Vec<Vec<C>> = starts
        .par_iter()
        .map(|&s| {
            let line: Vec<C> = (0..n).map(|k| values[s + k * stride]).collect();
            let mut out = line.clone();
            min_along_line(&line, &terms, &mut out);
            out
        })
        .collect();
    for (s, line) in starts.iter().zip(results) {
        for (k, v) in line.into_iter().enumerate() {
            values[s + k * stride] = v;
        }
    }
}

/// Squared distance (mm²) from each voxel center to the nearest background
/// voxel center. Background voxels hold 0; if the mask has no background at
/// all every voxel holds `+∞`. The grid border is not treated as background.
pub fn squared_edt<T: Real>(mask: &Mask, spacing: [T; 3]) -> Vec<T> {
    let mut values: Vec<T> = mask
        .data()
        .iter()
        .map(|&m| if m == 0 { T::zero() } else { T::infinity() })
        .collect();
    for axis in 0..3 {
        separable_pass(&mut values, mask.dims(), axis, spacing[axis]);
    }
    values
}

/// Euclidean distance transform in mm. Foreground voxels with no background
/// voxel in the grid get [`UNREACHABLE`].
pub fn euclidean_distance_transform(mask: &Mask) -> Result<ScalarField> {
    let sq = squared_edt::<f64>(mask, mask.spacing());
    let data = sq
        .into_iter()
        .map(|d| if d.is_finite() { d.sqrt() as f32 } else { UNREACHABLE })
        .collect();
    VoxelGrid::from_vec(mask.dims(), mask.spacing(), data)
}

/// Nearest positive label for every voxel as `(squared distance, label)`,
/// ties going to the lowest label. `(+∞, 0)` where no labeled voxel exists.
pub fn nearest_label_transform<T: Real>(labels: &LabelVolume, spacing: [T; 3]) -> Vec<(T, u32)> {
    let mut values: Vec<(T, u32)> = labels
        .data()
        .iter()
        .map(|&l| if l != 0 { (T::zero(), l) } else { (T::infinity(), 0) })
        .collect();
    for axis in 0..3 {
        separable_pass(&mut values, labels.dims(), axis, spacing[axis]);
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel_line() {
        let mask = Mask::from_vec([1, 1, 3], [1.0; 3], vec![0, 1, 0]).unwrap();
        let edt = euclidean_distance_transform(&mask).unwrap();
        assert_eq!(edt.data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn all_foreground_is_unreachable() {
        let mask = Mask::filled([3, 3, 3], [1.0; 3], 1).unwrap();
        let edt = euclidean_distance_transform(&mask).unwrap();
        assert!(edt.data().iter().all(|&v| v == UNREACHABLE));
    }

    #[test]
    fn all_background_is_zero() {
        let mask = Mask::new([4, 2, 3], [0.3, 1.0, 2.0]).unwrap();
        let edt = euclidean_distance_transform(&mask).unwrap();
        assert!(edt.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anisotropic_spacing_is_honored() {
        // background at both x ends and at both z ends; the center is 2 voxels
        // from either in x (spacing 1) and 1 voxel in z (spacing 3)
        let mut mask = Mask::filled([5, 1, 3], [1.0, 1.0, 3.0], 1).unwrap();
        for z in 0..3 {
            mask.set(0, 0, z, 0);
            mask.set(4, 0, z, 0);
        }
        let sq = squared_edt::<f64>(&mask, mask.spacing());
        assert_eq!(sq[mask.index(2, 0, 1)], 4.0);
        assert_eq!(sq[mask.index(1, 0, 1)], 1.0);
    }

    #[test]
    fn f32_instantiation_matches_f64_on_small_grid() {
        let mut mask = Mask::filled([6, 5, 4], [0.5, 0.25, 1.0], 1).unwrap();
        mask.set(0, 0, 0, 0);
        mask.set(5, 4, 3, 0);
        let a = squared_edt::<f32>(&mask, [0.5, 0.25, 1.0]);
        let b = squared_edt::<f64>(&mask, [0.5, 0.25, 1.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((*x as f64 - y).abs() < 1e-5);
        }
    }

    #[test]
    fn nearest_label_ties_go_to_lowest_id() {
        let labels = LabelVolume::from_vec([3, 1, 1], [1.0; 3], vec![7, 0, 2]).unwrap();
        let near = nearest_label_transform::<f64>(&labels, [1.0; 3]);
        assert_eq!(near[1], (1.0, 2));
    }
}
