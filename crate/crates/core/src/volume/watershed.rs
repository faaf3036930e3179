//! Persistence-simplified watershed on a scalar field.
//!
//! Foreground voxels are swept in decreasing field order (ties by increasing
//! linear index). A voxel with no already-swept 26-neighbor starts a new
//! basin; otherwise it joins the basin of its earliest-swept neighbor. When a
//! voxel touches several basins, every basin younger than the eldest one
//! (lower peak) dies there with persistence `peak − value`; it is merged into
//! the eldest if that persistence is below the threshold or exactly zero
//! (flat plateaus never split). Surviving basins are numbered `1..=K` in
//! decreasing order of their peak.

use super::grid::{LabelVolume, Mask, ScalarField, VoxelGrid};
use crate::error::Result;

/// Offsets of the 26-neighborhood.
pub(crate) fn neighbor_offsets_26() -> Vec<[isize; 3]> {
    let mut out = Vec::with_capacity(26);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Decides whether a basin dying at a saddle is merged away.
#[inline]
pub fn merges(persistence: f64, threshold: f64) -> bool {
    persistence < threshold || persistence <= 0.0
}

/// Sweep order: foreground voxel indices by decreasing value, then index.
pub(crate) fn sweep_order(field: &ScalarField, foreground: &Mask) -> Vec<usize> {
    let mut order: Vec<usize> = (0..field.len())
        .filter(|&i| foreground.is_foreground(i))
        .collect();
    let data = field.data();
    order.sort_unstable_by(|&a, &b| data[b].total_cmp(&data[a]).then(a.cmp(&b)));
    order
}

struct Basins {
    parent: Vec<u32>,
    /// sweep position of the basin's peak; smaller is elder
    peak_rank: Vec<u32>,
    peak_value: Vec<f32>,
}

impl Basins {
    fn find(&mut self, mut b: u32) -> u32 {
        while self.parent[b as usize] != b {
            let p = self.parent[b as usize];
            self.parent[b as usize] = self.parent[p as usize];
            b = p;
        }
        b
    }
}

pub fn persistence_watershed(
    field: &ScalarField,
    foreground: &Mask,
    persistence: f64,
) -> Result<LabelVolume> {
    field.check_same_geometry(foreground)?;
    let [nx, ny, nz] = field.dims();
    let order = sweep_order(field, foreground);
    let offsets = neighbor_offsets_26();

    const UNSWEPT: u32 = u32::MAX;
    let mut rank = vec![UNSWEPT; field.len()];
    let mut owner = vec![0u32; field.len()];
    let mut basins = Basins {
        parent: Vec::new(),
        peak_rank: Vec::new(),
        peak_value: Vec::new(),
    };
    let data = field.data();
    let mut roots: Vec<u32> = Vec::with_capacity(26);

    for (pos, &v) in order.iter().enumerate() {
        let [x, y, z] = field.coords(v);
        let mut steepest: Option<usize> = None;
        roots.clear();
        for off in &offsets {
            let (qx, qy, qz) = (x as isize + off[0], y as isize + off[1], z as isize + off[2]);
            if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize {
                continue;
            }
            let q = field.index(qx as usize, qy as usize, qz as usize);
            if rank[q] == UNSWEPT {
                continue;
            }
            if steepest.is_none_or(|s| rank[q] < rank[s]) {
                steepest = Some(q);
            }
            let r = basins.find(owner[q]);
            if !roots.contains(&r) {
                roots.push(r);
            }
        }
        rank[v] = pos as u32;
        match steepest {
            None => {
                let id = basins.parent.len() as u32;
                basins.parent.push(id);
                basins.peak_rank.push(pos as u32);
                basins.peak_value.push(data[v]);
                owner[v] = id;
            }
            Some(s) => {
                owner[v] = owner[s];
                if roots.len() > 1 {
                    roots.sort_unstable_by_key(|&r| basins.peak_rank[r as usize]);
                    let eldest = roots[0];
                    for &r in &roots[1..] {
                        let pers = basins.peak_value[r as usize] as f64 - data[v] as f64;
                        if merges(pers, persistence) {
                            basins.parent[r as usize] = eldest;
                        }
                    }
                }
            }
        }
    }

    // number surviving basins by peak order, which is creation order
    let mut label_of_root = vec![0u32; basins.parent.len()];
    let mut next = 1u32;
    for b in 0..basins.parent.len() as u32 {
        if basins.find(b) == b {
            label_of_root[b as usize] = next;
            next += 1;
        }
    }
    let mut out = vec![0u32; field.len()];
    for &v in &order {
        let r = basins.find(owner[v]);
        out[v] = label_of_root[r as usize];
    }
    VoxelGrid::from_vec(field.dims(), field.spacing(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(values: &[f32]) -> (ScalarField, Mask) {
        let n = values.len();
        let f = ScalarField::from_vec([n, 1, 1], [1.0; 3], values.to_vec()).unwrap();
        let m = Mask::filled([n, 1, 1], [1.0; 3], 1).unwrap();
        (f, m)
    }

    fn count(labels: &LabelVolume) -> u32 {
        labels.data().iter().copied().max().unwrap_or(0)
    }

    #[test]
    fn single_peak_gives_one_label() {
        let (f, m) = line_field(&[1.0, 2.0, 5.0, 3.0, 1.0]);
        let l = persistence_watershed(&f, &m, 0.0).unwrap();
        assert_eq!(l.data(), &[1, 1, 1, 1, 1]);
    }

    #[test]
    fn two_peaks_split_by_persistence() {
        // peaks 10 and 8, saddle 3: persistence of the lower peak is 5
        let (f, m) = line_field(&[4.0, 10.0, 6.0, 3.0, 5.0, 8.0, 2.0]);
        let l = persistence_watershed(&f, &m, 4.0).unwrap();
        assert_eq!(count(&l), 2);
        assert_eq!(l.data()[1], 1);
        assert_eq!(l.data()[5], 2);
        let l = persistence_watershed(&f, &m, 6.0).unwrap();
        assert_eq!(count(&l), 1);
    }

    #[test]
    fn plateau_is_one_seed() {
        let (f, m) = line_field(&[1.0, 3.0, 3.0, 3.0, 1.0]);
        let l = persistence_watershed(&f, &m, 0.0).unwrap();
        assert_eq!(count(&l), 1);
    }

    #[test]
    fn empty_foreground_is_empty_labels() {
        let f = ScalarField::new([3, 3, 3], [1.0; 3]).unwrap();
        let m = Mask::new([3, 3, 3], [1.0; 3]).unwrap();
        let l = persistence_watershed(&f, &m, 1.0).unwrap();
        assert!(l.data().iter().all(|&v| v == 0));
    }

    #[test]
    fn diagonal_contact_is_connected() {
        let mut f = ScalarField::new([2, 2, 1], [1.0; 3]).unwrap();
        let mut m = Mask::new([2, 2, 1], [1.0; 3]).unwrap();
        f.set(0, 0, 0, 5.0);
        f.set(1, 1, 0, 1.0);
        m.set(0, 0, 0, 1);
        m.set(1, 1, 0, 1);
        let l = persistence_watershed(&f, &m, f64::INFINITY).unwrap();
        assert_eq!(l.get(1, 1, 0), &1);
    }
}
