//! Synthetic tabletop sequences: scenes, depth rendering, noisy detections
//! and odometry.

pub mod camera;
pub mod dataset;
pub mod noise;
pub mod scene;

pub use camera::{render_objects, render_scene_objects, CameraFrame, DepthImage, Intrinsics, LabeledRender};
pub use dataset::{generate_dataset, read_dataset, write_dataset, Dataset, DatasetSpec, FrameRecord, DATASET_SCHEMA};
pub use noise::{emit_measurements, emit_odometry, integrate_odometry, NoiseSpec, SemanticMeasurement, Sigma, SIGMA_FLOOR};
pub use scene::{generate_scene, generate_scene_with, orbit_trajectory, GroundTruthScene, SceneConfig, SceneObject, Table, TrajectoryConfig};

use thiserror::Error;

use crate::geometry::{GeometryError, ModelRegistry, Pose};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could only place {placed} of {requested} objects")]
    PlacementFailure { requested: usize, placed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Renders `scene` from `camera`; the frame index is left at 0.
pub fn render_depth(scene: &GroundTruthScene, registry: &ModelRegistry, camera: &Pose, intrinsics: &Intrinsics) -> CameraFrame {
    CameraFrame {
        t: 0,
        pose: *camera,
        intrinsics: *intrinsics,
        depth: render_scene_objects(registry, &scene.class_poses(), camera, intrinsics).depth,
    }
}
