//! Per-vertex and per-edge feature tables.

mod table;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use table::{Column, ColumnKind, FeatureTable, TableKind};

use crate::graph::{generations, Fits, SkeletonGraph};
use crate::linalg::Vec3;
use crate::parabola::Parabola;
use crate::volume::{voxels_by_label, LabelVolume};

/// Instances below this volume are treated as segmentation debris.
pub const SMALL_INSTANCE_MM3: f64 = 0.5;

pub fn is_small_instance(volume_mm3: f64) -> bool {
    volume_mm3 < SMALL_INSTANCE_MM3
}

/// Voxel-derived shape of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceGeometry {
    pub voxel_count: usize,
    /// Mean voxel-center position, mm.
    pub centroid: [f64; 3],
    /// Faces per axis whose neighbor is outside the grid or has another label.
    pub exposed_faces: [usize; 3],
    /// Largest centroid-to-voxel-center distance, mm.
    pub radius: f64,
}

impl InstanceGeometry {
    pub fn compute(volume: &LabelVolume, voxels: &[usize]) -> Self {
        let data = volume.data();
        let dims = volume.dims();
        let mut sum = [0.0; 3];
        let mut exposed = [0usize; 3];
        for &v in voxels {
            let p = volume.position(v);
            for k in 0..3 {
                sum[k] += p[k];
            }
            let c = volume.coords(v);
            let strides = [1, dims[0], dims[0] * dims[1]];
            for axis in 0..3 {
                let below = c[axis] == 0 || data[v - strides[axis]] != data[v];
                let above = c[axis] + 1 == dims[axis] || data[v + strides[axis]] != data[v];
                exposed[axis] += below as usize + above as usize;
            }
        }
        let n = voxels.len().max(1) as f64;
        let centroid = sum.map(|s| s / n);
        let radius = voxels
            .iter()
            .map(|&v| {
                let p = volume.position(v);
                (0..3).map(|k| (p[k] - centroid[k]).powi(2)).sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt();
        Self {
            voxel_count: voxels.len(),
            centroid,
            exposed_faces: exposed,
            radius,
        }
    }

    pub fn volume_mm3(&self, spacing: [f64; 3]) -> f64 {
        self.voxel_count as f64 * spacing[0] * spacing[1] * spacing[2]
    }

    pub fn surface_area_mm2(&self, spacing: [f64; 3]) -> f64 {
        let [sx, sy, sz] = spacing;
        self.exposed_faces[0] as f64 * (sy * sz) + self.exposed_faces[1] as f64 * (sx * sz) + self.exposed_faces[2] as f64 * (sx * sy)
    }
}

pub type GeometryMap = BTreeMap<u32, InstanceGeometry>;

/// Geometry of every label in the volume.
pub fn instance_geometry(volume: &LabelVolume) -> GeometryMap {
    let by_label: Vec<(u32, Vec<usize>)> = voxels_by_label(volume).into_iter().collect();
    by_label
        .par_iter()
        .map(|(label, voxels)| (*label, InstanceGeometry::compute(volume, voxels)))
        .collect()
}

/// Angle in degrees between the mother tangent at the parameter of
/// `x_mother` and the daughter tangent at its `t_min`.
pub fn budding_angle(mother: &Parabola<f64>, daughter: &Parabola<f64>, x_mother: [f64; 3]) -> f64 {
    let tm = mother.tangent(mother.project(&Vec3(x_mother)));
    let td = daughter.tangent(daughter.t_min);
    tm.dot(&td).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Type of a column written by [`vertex_features`] or [`edge_features`].
pub fn standard_column_kind(table: TableKind, name: &str) -> Option<ColumnKind> {
    let kind = match (table, name) {
        (_, "proofread" | "flags") => ColumnKind::Str,
        (TableKind::Vertex, "label" | "voxel_count" | "generation" | "component" | "in_degree" | "out_degree") => {
            ColumnKind::Int
        }
        (TableKind::Edge, "source_index" | "target_index" | "source_label" | "target_label" | "manual") => {
            ColumnKind::Int
        }
        (TableKind::Vertex, "volume_mm3" | "surface_area_mm2" | "length_mm" | "alpha" | "t_min" | "t_max")
        | (TableKind::Vertex, "residual_mean" | "residual_std" | "residual_skew")
        | (TableKind::Vertex, "centroid_x" | "centroid_y" | "centroid_z")
        | (TableKind::Edge, "length_mm" | "contact_area_mm2" | "contact_width_mm" | "h_source" | "h_target")
        | (TableKind::Edge, "confidence" | "budding_angle_deg") => ColumnKind::Float,
        _ => return None,
    };
    Some(kind)
}

fn floats(values: impl IntoIterator<Item = Option<f64>>) -> Column {
    Column::Float(values.into_iter().collect())
}

fn ints(values: impl IntoIterator<Item = Option<i64>>) -> Column {
    Column::Int(values.into_iter().collect())
}

fn strings(values: impl IntoIterator<Item = Option<String>>) -> Column {
    Column::Str(values.into_iter().collect())
}

/// One row per graph vertex in ascending id order. Fit columns are empty
/// for vertices without a fit.
pub fn vertex_features(volume: &LabelVolume, graph: &SkeletonGraph, fits: &Fits) -> FeatureTable {
    vertex_features_from(&instance_geometry(volume), volume.spacing(), graph, fits)
}

pub fn vertex_features_from(
    geometry: &GeometryMap,
    spacing: [f64; 3],
    graph: &SkeletonGraph,
    fits: &Fits,
) -> FeatureTable {
    let ids: Vec<u32> = graph.vertex_ids().collect();
    let geo: Vec<Option<&InstanceGeometry>> = ids.iter().map(|v| geometry.get(v)).collect();
    let fit: Vec<Option<&Parabola<f64>>> = ids.iter().map(|v| fits.get(v)).collect();
    let stats: Vec<_> = fit.iter().map(|f| f.map(|p| p.residual_stats())).collect();
    let gens = generations(graph);
    let mut indeg: BTreeMap<u32, i64> = BTreeMap::new();
    let mut outdeg: BTreeMap<u32, i64> = BTreeMap::new();
    for e in graph.edges() {
        *outdeg.entry(e.source).or_default() += 1;
        *indeg.entry(e.target).or_default() += 1;
    }

    let mut t = FeatureTable::new(TableKind::Vertex);
    let mut add = |name: &str, c: Column| t.push(name, c).expect("vertex columns share row count");
    add("label", ints(ids.iter().map(|&v| Some(v as i64))));
    add("voxel_count", ints(geo.iter().map(|g| g.map(|g| g.voxel_count as i64))));
    add("volume_mm3", floats(geo.iter().map(|g| g.map(|g| g.volume_mm3(spacing)))));
    add("surface_area_mm2", floats(geo.iter().map(|g| g.map(|g| g.surface_area_mm2(spacing)))));
    add("length_mm", floats(fit.iter().map(|f| f.map(|p| p.arc_length()))));
    add("alpha", floats(fit.iter().map(|f| f.map(|p| p.alpha))));
    add("t_min", floats(fit.iter().map(|f| f.map(|p| p.t_min))));
    add("t_max", floats(fit.iter().map(|f| f.map(|p| p.t_max))));
    add("residual_mean", floats(stats.iter().map(|s| s.map(|s| s.mean))));
    add("residual_std", floats(stats.iter().map(|s| s.map(|s| s.std))));
    add("residual_skew", floats(stats.iter().map(|s| s.map(|s| s.skew))));
    for (k, axis) in ["x", "y", "z"].iter().enumerate() {
        add(&format!("centroid_{axis}"), floats(geo.iter().map(|g| g.map(|g| g.centroid[k]))));
    }
    add("generation", ints(ids.iter().map(|v| gens.generation.get(v).map(|&g| g as i64))));
    add("component", ints(ids.iter().map(|v| gens.component.get(v).map(|&c| c as i64))));
    add("in_degree", ints(ids.iter().map(|v| Some(indeg.get(v).copied().unwrap_or(0)))));
    add("out_degree", ints(ids.iter().map(|v| Some(outdeg.get(v).copied().unwrap_or(0)))));
    add(
        "proofread",
        strings(ids.iter().map(|&v| graph.vertex(v).map(|x| x.state.as_str().to_string()))),
    );
    add("flags", strings(fit.iter().map(|f| f.and_then(|p| p.flags.describe()))));
    t
}

/// One row per edge in ascending unordered-pair order. `source_index` and
/// `target_index` are rows of the vertex table.
pub fn edge_features(graph: &SkeletonGraph, fits: &Fits) -> FeatureTable {
    let row: BTreeMap<u32, i64> = graph.vertex_ids().enumerate().map(|(i, v)| (v, i as i64)).collect();
    let edges: Vec<_> = graph.edges().collect();
    let angle = |e: &crate::graph::Edge| match (fits.get(&e.source), fits.get(&e.target)) {
        (Some(m), Some(d)) => Some(budding_angle(m, d, e.x_source)),
        _ => None,
    };

    let mut t = FeatureTable::new(TableKind::Edge);
    let mut add = |name: &str, c: Column| t.push(name, c).expect("edge columns share row count");
    add("source_index", ints(edges.iter().map(|e| Some(row[&e.source]))));
    add("target_index", ints(edges.iter().map(|e| Some(row[&e.target]))));
    add("source_label", ints(edges.iter().map(|e| Some(e.source as i64))));
    add("target_label", ints(edges.iter().map(|e| Some(e.target as i64))));
    add("length_mm", floats(edges.iter().map(|e| Some(e.length()))));
    add("contact_area_mm2", floats(edges.iter().map(|e| Some(e.contact_area))));
    add("contact_width_mm", floats(edges.iter().map(|e| Some(e.contact_area.sqrt()))));
    add("h_source", floats(edges.iter().map(|e| e.h_source)));
    add("h_target", floats(edges.iter().map(|e| e.h_target)));
    add("confidence", floats(edges.iter().map(|e| e.confidence)));
    add("budding_angle_deg", floats(edges.iter().map(|e| angle(e))));
    add("proofread", strings(edges.iter().map(|e| Some(e.state.as_str().to_string()))));
    add("manual", ints(edges.iter().map(|e| Some(e.manual as i64))));
    add("flags", strings(edges.iter().map(|e| e.flags.describe())));
    t
}
