//! Skeleton-tree estimation for dendroid colonies from labeled voxel volumes.
//!
//! The pipeline:
//!
//! 1. **volume** – exact Euclidean distance transform, persistence watershed
//!    instance segmentation, nearest-label propagation onto a skeleton mask.
//! 2. **parabola** – oriented spatial parabola fit per instance; height
//!    function, arc length and residual statistics.
//! 3. **graph** – region adjacency graph, edge orientation from instance
//!    heights, sibling-edge pruning, proofreading analytics.
//! 4. **edit** – undoable merge/cut/edge edits kept in sync between the
//!    label volume and the graph; proofreading queue.
//! 5. **features** / **linkproto** – per-vertex and per-edge feature tables
//!    and the CSV shared-folder protocol.
//! 6. **synth** – procedural colonies with known ground truth.
//!
//! Geometry is generic over [`Real`] (`f32`/`f64`); the aliases below fix
//! the `f64` instantiation used by the pipeline.

pub mod edit;
mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod linkproto;
pub mod parabola;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3d = linalg::Vec3<f64>;
pub type Vec3f = linalg::Vec3<f32>;
pub type Mat3d = linalg::Mat3<f64>;
pub type Mat3f = linalg::Mat3<f32>;
pub type Parabola64 = parabola::Parabola<f64>;
pub type Parabola32 = parabola::Parabola<f32>;
