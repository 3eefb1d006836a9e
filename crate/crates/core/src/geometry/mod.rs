//! Coordinates, point clouds, the dead-reckoning error model and
//! Hausdorff-distance fidelity.

mod cloud;
mod hausdorff;
mod reckoning;
mod vec3;

pub use cloud::{centroid, Dim, IngestReport, PointCloud};
pub use hausdorff::{
    hausdorff_raw, hd, identity_assignment, translate_centroid, translate_stochastic, StochasticChoice,
    Translation,
    STOCHASTIC_SAMPLE,
};
pub use reckoning::{chord_bound, deviate, DeadReckoning};
pub use vec3::Vec3;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("point {index} has d != 0 in a 2D cloud")]
    NotPlanar { index: usize },
    #[error("point {index} duplicates an earlier point")]
    Duplicate { index: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cloud size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("assignment index {index} out of range")]
    BadAssignment { index: usize },
    #[error("epsilon must lie in [0, 180) degrees, got {0}")]
    InvalidEpsilon(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
