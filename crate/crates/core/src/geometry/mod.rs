//! SE(3) arithmetic, object shape primitives and surface features.

pub mod features;
pub mod lie;
pub mod planar;
mod model;
mod pose;

pub use features::{edge_bounds_face, extract_surface_features, transform_feature, SurfaceFeature};
pub use model::{ModelRegistry, ObjectModel, Shape, DEFAULT_SPACING, MODELS_SCHEMA};
pub use pose::{random_unit_vector, Pose};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("model registry schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(String),
}

/// `a * b`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

/// `inverse(a) * b`.
pub fn relative(a: &Pose, b: &Pose) -> Pose {
    a.relative(b)
}
