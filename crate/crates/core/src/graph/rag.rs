//! Region adjacency from 6-connected label contacts.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{pair_key, Edge, EdgeFlags, ProofState, SkeletonGraph};
use crate::volume::LabelVolume;

/// Contact between two instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Touching voxel of the first and second instance, in query order.
    pub voxels: [usize; 2],
    /// Number of shared voxel faces; 0 for instances that do not touch.
    pub face_count: usize,
    pub area: f64,
}

#[derive(Clone, Copy)]
struct Accum {
    // (center distance, voxel in lower label, voxel in higher label)
    best: (f64, usize, usize),
    faces: [usize; 3],
}

impl Accum {
    fn add(&mut self, axis: usize, cand: (f64, usize, usize)) {
        self.faces[axis] += 1;
        if lex_less(cand, self.best) {
            self.best = cand;
        }
    }

    fn merge(&mut self, other: &Accum) {
        for k in 0..3 {
            self.faces[k] += other.faces[k];
        }
        if lex_less(other.best, self.best) {
            self.best = other.best;
        }
    }
}

fn lex_less(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

fn face_areas(spacing: [f64; 3]) -> [f64; 3] {
    [spacing[1] * spacing[2], spacing[0] * spacing[2], spacing[0] * spacing[1]]
}

fn area_of(faces: [usize; 3], spacing: [f64; 3]) -> f64 {
    let a = face_areas(spacing);
    faces[0] as f64 * a[0] + faces[1] as f64 * a[1] + faces[2] as f64 * a[2]
}

fn scan_slice(volume: &LabelVolume, z: usize, filter: Option<(u32, u32)>) -> HashMap<(u32, u32), Accum> {
    let [nx, ny, nz] = volume.dims();
    let spacing = volume.spacing();
    let data = volume.data();
    let strides = [1, nx, nx * ny];
    let mut acc: HashMap<(u32, u32), Accum> = HashMap::new();
    for y in 0..ny {
        for x in 0..nx {
            let idx = volume.index(x, y, z);
            let a = data[idx];
            if a == 0 {
                continue;
            }
            let more = [x + 1 < nx, y + 1 < ny, z + 1 < nz];
            for axis in 0..3 {
                if !more[axis] {
                    continue;
                }
                let n = idx + strides[axis];
                let b = data[n];
                if b == 0 || b == a {
                    continue;
                }
                let key = pair_key(a, b);
                if filter.is_some_and(|f| f != key) {
                    continue;
                }
                let (lo, hi) = if a < b { (idx, n) } else { (n, idx) };
                let cand = (spacing[axis], lo, hi);
                acc.entry(key)
                    .or_insert(Accum {
                        best: cand,
                        faces: [0; 3],
                    })
                    .add(axis, cand);
            }
        }
    }
    acc
}

fn scan(volume: &LabelVolume, filter: Option<(u32, u32)>) -> BTreeMap<(u32, u32), Accum> {
    let nz = volume.dims()[2];
    let parts: Vec<HashMap<(u32, u32), Accum>> =
        (0..nz).into_par_iter().map(|z| scan_slice(volume, z, filter)).collect();
    let mut out: BTreeMap<(u32, u32), Accum> = BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            out.entry(k).and_modify(|a| a.merge(&v)).or_insert(v);
        }
    }
    out
}

/// One vertex per label and one undirected-stage edge per face-adjacent
/// label pair. Edges start out directed from the lower to the higher label
/// with no heights; touching points are the face-adjacent voxel pair of
/// minimum center distance, ties broken by linear index.
pub fn build_rag(corallites: &LabelVolume) -> SkeletonGraph {
    let mut labels: Vec<u32> = corallites.data().iter().copied().filter(|&l| l != 0).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut g = SkeletonGraph::with_vertices(labels);
    let spacing = corallites.spacing();
    for ((a, b), acc) in scan(corallites, None) {
        let (_, va, vb) = acc.best;
        g.replace_edge(Edge {
            source: a,
            target: b,
            voxel_source: va,
            voxel_target: vb,
            x_source: corallites.position(va),
            x_target: corallites.position(vb),
            face_count: acc.faces.iter().sum(),
            contact_area: area_of(acc.faces, spacing),
            h_source: None,
            h_target: None,
            confidence: None,
            state: ProofState::Unseen,
            manual: false,
            flags: EdgeFlags::default(),
        });
    }
    g
}

/// Voxels of an instance with at least one face neighbor carrying another
/// label (including background).
pub fn boundary_voxels(volume: &LabelVolume, voxels: &[usize]) -> Vec<usize> {
    let data = volume.data();
    voxels
        .iter()
        .copied()
        .filter(|&v| volume.face_neighbors(v).any(|n| data[n] != data[v]))
        .collect()
}

fn squared_distance(volume: &LabelVolume, a: usize, b: usize) -> f64 {
    let (ca, cb) = (volume.coords(a), volume.coords(b));
    let s = volume.spacing();
    let d = |k: usize| (ca[k] as f64 - cb[k] as f64) * s[k];
    let (dx, dy, dz) = (d(0), d(1), d(2));
    dz * dz + (dy * dy + dx * dx)
}

/// Closest voxel-center pair between two voxel sets, as `[in a, in b]`.
/// Only boundary voxels can realize the minimum, so callers may pass
/// boundary subsets. Ties go to the smallest `(a index, b index)`.
pub fn closest_voxel_pair(volume: &LabelVolume, a: &[usize], b: &[usize]) -> Option<[usize; 2]> {
    a.par_iter()
        .filter_map(|&va| {
            b.iter()
                .map(|&vb| (squared_distance(volume, va, vb), va, vb))
                .reduce(|x, y| if lex_less(y, x) { y } else { x })
        })
        .reduce_with(|x, y| if lex_less(y, x) { y } else { x })
        .map(|(_, va, vb)| [va, vb])
}

/// Touching data between instances `a` and `b`: the face-contact rule of
/// [`build_rag`] when they share faces, else the closest boundary voxel
/// pair with zero contact.
pub fn touching_pair(volume: &LabelVolume, a: u32, b: u32, voxels_a: &[usize], voxels_b: &[usize]) -> Option<Contact> {
    if voxels_a.is_empty() || voxels_b.is_empty() || a == b {
        return None;
    }
    let key = pair_key(a, b);
    let z_range = |vs: &[usize]| {
        let zs = vs.iter().map(|&v| volume.coords(v)[2]);
        let (lo, hi) = zs.fold((usize::MAX, 0), |(l, h), z| (l.min(z), h.max(z)));
        (lo, hi)
    };
    let (za, za1) = z_range(voxels_a);
    let (zb, zb1) = z_range(voxels_b);
    let z0 = za.max(zb).saturating_sub(1);
    let z1 = za1.min(zb1) + 1;
    let mut best: Option<Accum> = None;
    if z0 <= z1 {
        for z in z0..=z1.min(volume.dims()[2] - 1) {
            if let Some(acc) = scan_slice(volume, z, Some(key)).remove(&key) {
                match best.as_mut() {
                    Some(b) => b.merge(&acc),
                    None => best = Some(acc),
                }
            }
        }
    }
    let ordered = |lo: usize, hi: usize| if a < b { [lo, hi] } else { [hi, lo] };
    if let Some(acc) = best {
        let (_, lo, hi) = acc.best;
        return Some(Contact {
            voxels: ordered(lo, hi),
            face_count: acc.faces.iter().sum(),
            area: area_of(acc.faces, volume.spacing()),
        });
    }
    let (lo_vox, hi_vox) = if a < b { (voxels_a, voxels_b) } else { (voxels_b, voxels_a) };
    let pair = closest_voxel_pair(volume, &boundary_voxels(volume, lo_vox), &boundary_voxels(volume, hi_vox))?;
    Some(Contact {
        voxels: ordered(pair[0], pair[1]),
        face_count: 0,
        area: 0.0,
    })
}
