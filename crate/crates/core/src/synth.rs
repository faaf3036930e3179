//! Procedural dendroid colonies with known mother → daughter trees.
//!
//! Each corallite is a hollow truncated cone bent along a circular arc: a
//! calyx cavity surrounded by a skeleton wall, closed at the base and open
//! at the top. Daughters bud from the upper third of their mother with their
//! base inside the mother's wall. Apart from mothers with their daughters
//! and siblings with each other, corallites keep a clearance so they never
//! touch; optional skeleton bridges between such pairs model secondary
//! joints.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeFlags, ProofState, SkeletonGraph};
use crate::linalg::{axis_angle, Vec3};
use crate::volume::{LabelVolume, Mask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColonySpec {
    pub seed: u64,
    /// Number of generations including the founder.
    pub generations: usize,
    /// Relative weight of budding 0, 1, 2, … daughters.
    pub budding: Vec<f64>,
    /// Corallite length range, mm.
    pub length: (f64, f64),
    /// Outer radius range at the base, mm.
    pub radius_base: (f64, f64),
    /// Outer radius range at the top, mm.
    pub radius_top: (f64, f64),
    pub wall: f64,
    /// Angle between mother tangent and daughter direction, degrees.
    pub budding_angle: (f64, f64),
    /// Largest total bend of one corallite, degrees.
    pub max_bend: f64,
    /// Chance that a pair of unrelated, nearby corallites gets a joint.
    pub joint_probability: f64,
    pub spacing: [f64; 3],
}

impl Default for ColonySpec {
    fn default() -> Self {
        Self {
            seed: 0,
            generations: 4,
            budding: vec![0.15, 0.45, 0.4],
            length: (5.0, 7.5),
            radius_base: (0.7, 0.9),
            radius_top: (1.3, 1.7),
            wall: 0.5,
            budding_angle: (30.0, 50.0),
            max_bend: 35.0,
            joint_probability: 0.0,
            spacing: [0.25; 3],
        }
    }
}

impl ColonySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidCommand(format!("colony spec: {what}")));
        let range_ok = |r: (f64, f64)| r.0 > 0.0 && r.0 <= r.1 && r.1.is_finite();
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if self.budding.is_empty() || self.budding.iter().any(|w| !(*w >= 0.0)) || self.budding.iter().sum::<f64>() <= 0.0 {
            return bad("budding weights must be non-negative with a positive sum");
        }
        if !range_ok(self.length) || !range_ok(self.radius_base) || !range_ok(self.radius_top) || !range_ok(self.budding_angle)
        {
            return bad("ranges must be positive and ordered");
        }
        if !(self.wall > 0.0 && self.wall < self.radius_base.0) {
            return bad("wall must be positive and thinner than the base radius");
        }
        if !(0.0..=1.0).contains(&self.joint_probability) {
            return bad("joint probability must lie in [0, 1]");
        }
        if !(self.max_bend >= 0.0 && self.max_bend < 180.0) {
            return bad("max bend must lie in [0, 180)");
        }
        if self.spacing.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("spacing must be positive");
        }
        Ok(())
    }
}

/// Centerline and radius profile of one corallite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoralliteAxis {
    pub base: [f64; 3],
    /// Unit tangent at the base.
    pub direction: [f64; 3],
    /// Unit vector perpendicular to `direction` towards which the axis bends.
    pub bend_normal: [f64; 3],
    /// Arc curvature, 1/mm.
    pub curvature: f64,
    pub length: f64,
    pub radius_base: f64,
    pub radius_top: f64,
}

impl CoralliteAxis {
    pub fn point(&self, s: f64) -> Vec3<f64> {
        let (b, d, n) = (Vec3(self.base), Vec3(self.direction), Vec3(self.bend_normal));
        if self.curvature == 0.0 {
            return b + d.scale(s);
        }
        let k = self.curvature;
        b + d.scale((k * s).sin() / k) + n.scale((1.0 - (k * s).cos()) / k)
    }

    pub fn tangent(&self, s: f64) -> Vec3<f64> {
        let k = self.curvature;
        Vec3(self.direction).scale((k * s).cos()) + Vec3(self.bend_normal).scale((k * s).sin())
    }

    pub fn radius(&self, s: f64) -> f64 {
        self.radius_base + (self.radius_top - self.radius_base) * (s / self.length)
    }

    /// Arc parameter and distance of the closest centerline point, or `None`
    /// when `x` lies beyond either end cap.
    pub fn closest(&self, x: Vec3<f64>) -> Option<(f64, f64)> {
        let (b, d, n) = (Vec3(self.base), Vec3(self.direction), Vec3(self.bend_normal));
        let s = if self.curvature == 0.0 {
            (x - b).dot(&d)
        } else {
            let k = self.curvature;
            let v = x - (b + n.scale(1.0 / k));
            v.dot(&d).atan2(-v.dot(&n)) / k
        };
        if !(0.0..=self.length).contains(&s) {
            return None;
        }
        Some((s, (x - self.point(s)).norm()))
    }

    fn samples(&self, step: f64) -> Vec<(f64, Vec3<f64>)> {
        let n = (self.length / step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let s = self.length * i as f64 / n as f64;
                (s, self.point(s))
            })
            .collect()
    }
}

/// A generated colony. Labels are `1..=n` in generation order.
#[derive(Debug, Clone)]
pub struct Colony {
    /// Calyx cavities labeled by corallite.
    pub calyx: LabelVolume,
    /// Skeleton wall and joint voxels (calyx voxels excluded).
    pub skeleton: Mask,
    /// Mother → daughter.
    pub edges: Vec<(u32, u32)>,
    /// Secondary joints as ascending pairs.
    pub joints: Vec<(u32, u32)>,
    pub axes: BTreeMap<u32, CoralliteAxis>,
    pub generation: BTreeMap<u32, usize>,
}

impl Colony {
    /// Ground-truth tree with placeholder touching data.
    pub fn truth_graph(&self) -> SkeletonGraph {
        let mut g = SkeletonGraph::with_vertices(self.axes.keys().copied());
        for &(source, target) in &self.edges {
            g.insert_edge(crate::graph::Edge {
                source,
                target,
                voxel_source: 0,
                voxel_target: 0,
                x_source: [0.0; 3],
                x_target: [0.0; 3],
                face_count: 0,
                contact_area: 0.0,
                h_source: None,
                h_target: None,
                confidence: None,
                state: ProofState::Unseen,
                manual: false,
                flags: EdgeFlags::default(),
            })
            .expect("tree edges join distinct corallites");
        }
        g
    }

    /// Calyx voxels as a mask.
    pub fn calyx_mask(&self) -> Mask {
        self.calyx.map(|l| (l != 0) as u8)
    }

    /// Voxels belonging to the colony (calyx or skeleton).
    pub fn mask(&self) -> Mask {
        let mut m = self.skeleton.clone();
        for (dst, &l) in m.data_mut().iter_mut().zip(self.calyx.data()) {
            if l != 0 {
                *dst = 1;
            }
        }
        m
    }
}

struct Joint {
    pair: (u32, u32),
    from: Vec3<f64>,
    to: Vec3<f64>,
    radius: f64,
}

fn unit(v: Vec3<f64>) -> Vec3<f64> {
    v.normalized()
}

/// Some unit vector perpendicular to `d`.
fn perpendicular(d: Vec3<f64>, angle: f64) -> Vec3<f64> {
    let helper = if d.x().abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let e1 = unit(d.cross(&helper));
    let e2 = d.cross(&e1);
    e1.scale(angle.cos()) + e2.scale(angle.sin())
}

/// Smallest surface gap between two corallites, from centerline samples,
/// with the closest points on both outer surfaces.
fn surface_gap(a: &CoralliteAxis, b: &CoralliteAxis, step: f64) -> (f64, Vec3<f64>, Vec3<f64>) {
    let (sa, sb) = (a.samples(step), b.samples(step));
    let mut best = (f64::INFINITY, 0.0, 0.0, Vec3::zero(), Vec3::zero());
    for &(s, p) in &sa {
        for &(t, q) in &sb {
            let gap = (p - q).norm() - a.radius(s) - b.radius(t);
            if gap < best.0 {
                best = (gap, s, t, p, q);
            }
        }
    }
    let (gap, s, t, p, q) = best;
    let dir = unit(q - p);
    (gap, p + dir.scale(a.radius(s)), q - dir.scale(b.radius(t)))
}

fn random_axis(rng: &mut ChaCha8Rng, spec: &ColonySpec, base: Vec3<f64>, direction: Vec3<f64>) -> CoralliteAxis {
    let length = rng.random_range(spec.length.0..=spec.length.1);
    let bend = rng.random_range(0.0..=spec.max_bend.to_radians());
    let normal = perpendicular(direction, rng.random_range(0.0..std::f64::consts::TAU));
    CoralliteAxis {
        base: base.0,
        direction: direction.0,
        bend_normal: normal.0,
        curvature: bend / length,
        length,
        radius_base: rng.random_range(spec.radius_base.0..=spec.radius_base.1),
        radius_top: rng.random_range(spec.radius_top.0..=spec.radius_top.1),
    }
}

/// Deterministic colony for `spec`.
pub fn generate(spec: &ColonySpec) -> Result<Colony> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let budding = WeightedIndex::new(&spec.budding).map_err(|e| Error::InvalidCommand(e.to_string()))?;
    let h = spec.spacing.iter().copied().fold(0.0, f64::max);
    let clearance = 3.0 * h;
    let step = 0.5 * h;

    let founder_dir = unit(Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 1.0));
    let mut axes = vec![random_axis(&mut rng, spec, Vec3::zero(), founder_dir)];
    let mut mother_of: Vec<Option<usize>> = vec![None];
    let mut generation = vec![0usize];
    let mut next = 0;
    while next < axes.len() {
        let m = next;
        next += 1;
        if generation[m] + 1 >= spec.generations {
            continue;
        }
        let count = budding.sample(&mut rng);
        for _ in 0..count {
            'attempt: for _ in 0..40 {
                let mother = &axes[m];
                let s = rng.random_range((2.0 / 3.0) * mother.length..=0.9 * mother.length);
                let tangent = mother.tangent(s);
                let side = perpendicular(tangent, rng.random_range(0.0..std::f64::consts::TAU));
                let base = mother.point(s) + side.scale(mother.radius(s) - 0.5 * spec.wall);
                let angle = rng.random_range(spec.budding_angle.0..=spec.budding_angle.1).to_radians();
                let dir = axis_angle(tangent.cross(&side), angle).mul_vec(&tangent);
                if dir.z() < 0.3 {
                    continue;
                }
                let mut axis = random_axis(&mut rng, spec, base, unit(dir));
                // the base sits in the mother's wall, so it cannot be wider
                axis.radius_base = axis.radius_base.min(mother.radius(s));
                if axis.radius_top < axis.radius_base {
                    axis.radius_top = axis.radius_base;
                }
                let end = axis.point(axis.length);
                if end.z() <= base.z() {
                    continue;
                }
                for (other, existing) in axes.iter().enumerate() {
                    let related = other == m || mother_of[other] == Some(m);
                    if !related && surface_gap(&axis, existing, step).0 < clearance {
                        continue 'attempt;
                    }
                }
                axes.push(axis);
                mother_of.push(Some(m));
                generation.push(generation[m] + 1);
                break;
            }
        }
    }

    let n = axes.len();
    let label = |i: usize| i as u32 + 1;
    let edges: Vec<(u32, u32)> = (0..n)
        .filter_map(|i| mother_of[i].map(|m| (label(m), label(i))))
        .collect();

    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, m) in mother_of.iter().enumerate() {
        if let Some(m) = *m {
            neighbors[i].insert(m);
            neighbors[m].insert(i);
        }
    }
    let mut joints = Vec::new();
    if spec.joint_probability > 0.0 {
        let reach = 6.0;
        // two empty voxels keep a bridge from touching a third corallite
        let margin = 2.0 * h;
        for i in 0..n {
            for j in (i + 1)..n {
                if neighbors[i].contains(&j) || !neighbors[i].is_disjoint(&neighbors[j]) {
                    continue;
                }
                let (gap, p, q) = surface_gap(&axes[i], &axes[j], step);
                // the bridge reaches half a wall into both corallites
                let into = unit(q - p).scale(0.5 * spec.wall);
                let (p, q) = (p - into, q + into);
                if gap > reach {
                    continue;
                }
                let radius = 0.6 * axes[i].radius_base.min(axes[j].radius_base);
                let clear = (0..n).filter(|&k| k != i && k != j).all(|k| {
                    let len = (q - p).norm();
                    let m = (len / step).ceil().max(1.0) as usize;
                    (0..=m).all(|t| {
                        let x = p + (q - p).scale(t as f64 / m as f64);
                        axes[k]
                            .samples(step)
                            .iter()
                            .all(|&(s, c)| (x - c).norm() - axes[k].radius(s) - radius >= margin)
                    })
                });
                if clear && rng.random::<f64>() < spec.joint_probability {
                    joints.push(Joint {
                        pair: (label(i), label(j)),
                        from: p,
                        to: q,
                        radius,
                    });
                }
            }
        }
    }

    let (calyx, skeleton, axes) = rasterize(&axes, &joints, spec)?;
    Ok(Colony {
        calyx,
        skeleton,
        edges,
        joints: joints.iter().map(|j| j.pair).collect(),
        generation: (0..n).map(|i| (label(i), generation[i])).collect(),
        axes: axes.into_iter().enumerate().map(|(i, a)| (label(i), a)).collect(),
    })
}

type Raster = (LabelVolume, Mask, Vec<CoralliteAxis>);

/// Voxelizes corallites and joints. Returned axes are shifted into grid
/// coordinates (voxel `(0,0,0)` at the origin).
fn rasterize(axes: &[CoralliteAxis], joints: &[Joint], spec: &ColonySpec) -> Result<Raster> {
    let sp = spec.spacing;
    let margin = 3.0 * sp.iter().copied().fold(0.0, f64::max);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for a in axes {
        let r = a.radius_base.max(a.radius_top);
        for (_, p) in a.samples(0.5 * sp[0].min(sp[1]).min(sp[2])) {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k] - r);
                hi[k] = hi[k].max(p[k] + r);
            }
        }
    }
    let origin = Vec3::new(lo[0] - margin, lo[1] - margin, lo[2] - margin);
    let dims = [0, 1, 2].map(|k| ((hi[k] + margin - origin[k]) / sp[k]).ceil() as usize + 1);
    let shifted: Vec<CoralliteAxis> = axes
        .iter()
        .map(|a| CoralliteAxis {
            base: (Vec3(a.base) - origin).0,
            ..a.clone()
        })
        .collect();

    let mut calyx = LabelVolume::new(dims, sp)?;
    let mut skeleton = Mask::new(dims, sp)?;
    let mut cavity_dist = vec![f64::INFINITY; calyx.len()];
    let voxel_box = |lo: Vec3<f64>, hi: Vec3<f64>| {
        let a = [0, 1, 2].map(|k| ((lo[k] / sp[k]).floor().max(0.0) as usize).min(dims[k] - 1));
        let b = [0, 1, 2].map(|k| ((hi[k] / sp[k]).ceil().max(0.0) as usize).min(dims[k] - 1));
        (a, b)
    };

    for (i, a) in shifted.iter().enumerate() {
        let r = a.radius_base.max(a.radius_top);
        let pts = a.samples(0.5 * sp[0].min(sp[1]).min(sp[2]));
        let mut blo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut bhi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (_, p) in &pts {
            for k in 0..3 {
                blo.0[k] = blo.0[k].min(p[k] - r);
                bhi.0[k] = bhi.0[k].max(p[k] + r);
            }
        }
        let (va, vb) = voxel_box(blo, bhi);
        let cavity_start = 0.1 * a.length;
        for z in va[2]..=vb[2] {
            for y in va[1]..=vb[1] {
                for x in va[0]..=vb[0] {
                    let idx = calyx.index(x, y, z);
                    let pos = Vec3(calyx.position(idx));
                    let Some((s, d)) = a.closest(pos) else { continue };
                    let outer = a.radius(s);
                    if d >= outer {
                        continue;
                    }
                    if s >= cavity_start && d < outer - spec.wall {
                        // nearest axis wins among overlapping cavities; ties to the lower label
                        if d < cavity_dist[idx] {
                            cavity_dist[idx] = d;
                            calyx.data_mut()[idx] = i as u32 + 1;
                        }
                    } else {
                        skeleton.data_mut()[idx] = 1;
                    }
                }
            }
        }
    }
    for j in joints {
        let (p, q) = (j.from - origin, j.to - origin);
        let r = j.radius;
        let blo = Vec3::new(p.x().min(q.x()) - r, p.y().min(q.y()) - r, p.z().min(q.z()) - r);
        let bhi = Vec3::new(p.x().max(q.x()) + r, p.y().max(q.y()) + r, p.z().max(q.z()) + r);
        let (va, vb) = voxel_box(blo, bhi);
        let seg = q - p;
        let len2 = seg.norm_squared().max(f64::MIN_POSITIVE);
        for z in va[2]..=vb[2] {
            for y in va[1]..=vb[1] {
                for x in va[0]..=vb[0] {
                    let idx = calyx.index(x, y, z);
                    let pos = Vec3(calyx.position(idx));
                    let t = ((pos - p).dot(&seg) / len2).clamp(0.0, 1.0);
                    if (pos - (p + seg.scale(t))).norm() < r {
                        skeleton.data_mut()[idx] = 1;
                    }
                }
            }
        }
    }
    // calyx voxels are not skeleton
    for (s, &l) in skeleton.data_mut().iter_mut().zip(calyx.data()) {
        if l != 0 {
            *s = 0;
        }
    }
    Ok((calyx, skeleton, shifted))
}
