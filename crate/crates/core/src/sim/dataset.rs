//! Whole simulated sequences and their on-disk layout.
//!
//! ```text
//! <dir>/scene.json          ground truth, trajectory, intrinsics, models
//! <dir>/frames/NNNN.depth   little-endian f32 depth, row-major
//! <dir>/frames/NNNN.meas.json
//! <dir>/odom.json           initial pose and relative odometry
//! <dir>/noise.json          noise parameters used for generation
//! ```

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::camera::{render_scene_objects, CameraFrame, DepthImage, Intrinsics};
use super::noise::{emit_measurements, emit_odometry, NoiseSpec, SemanticMeasurement};
use super::scene::{generate_scene_with, orbit_trajectory, GroundTruthScene, SceneConfig, TrajectoryConfig};
use super::SimError;
use crate::geometry::{ModelRegistry, Pose};

pub const DATASET_SCHEMA: &str = "geofuse-dataset/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_objects: usize,
    pub n_frames: usize,
    pub scene_seed: u64,
    pub scene: SceneConfig,
    pub trajectory: TrajectoryConfig,
    pub intrinsics: Intrinsics,
    pub noise: NoiseSpec,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_objects: 18,
            n_frames: 200,
            scene_seed: 0,
            scene: SceneConfig::default(),
            trajectory: TrajectoryConfig::default(),
            intrinsics: Intrinsics::default(),
            noise: NoiseSpec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FrameRecord {
    /// Depth and the ground-truth camera pose.
    pub frame: CameraFrame,
    pub measurements: Vec<SemanticMeasurement>,
    /// Pixels won in the z-buffer per object, indexed like `scene.objects`.
    pub visible: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub scene: GroundTruthScene,
    pub registry: ModelRegistry,
    pub intrinsics: Intrinsics,
    pub frames: Vec<FrameRecord>,
    /// Known pose of the first camera; anchors the map frame to the table.
    pub initial_pose: Pose,
    /// `odometry[k]` is the measured motion from frame `k` to `k + 1`.
    pub odometry: Vec<Pose>,
    pub noise: NoiseSpec,
}

impl Dataset {
    pub fn trajectory(&self) -> Vec<Pose> {
        self.frames.iter().map(|f| f.frame.pose).collect()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn generate_dataset(spec: &DatasetSpec, registry: &ModelRegistry) -> Result<Dataset, SimError> {
    spec.noise.validate()?;
    if spec.n_frames < 2 {
        return Err(SimError::Config("a sequence needs at least two frames".into()));
    }
    let scene = generate_scene_with(spec.n_objects, registry, spec.scene_seed, &spec.scene)?;
    let traj = orbit_trajectory(spec.n_frames, &spec.trajectory, spec.scene_seed);
    let class_poses = scene.class_poses();
    let frames = traj
        .iter()
        .enumerate()
        .map(|(t, cam)| {
            let render = render_scene_objects(registry, &class_poses, cam, &spec.intrinsics);
            let frame = CameraFrame {
                t,
                pose: *cam,
                intrinsics: spec.intrinsics,
                depth: render.depth.clone(),
            };
            let mut rng = spec.noise.frame_rng(t);
            let measurements = emit_measurements(&scene, registry.num_classes(), &frame, &render, &spec.noise, &mut rng);
            FrameRecord {
                visible: render.visible_pixels(scene.objects.len()),
                frame,
                measurements,
            }
        })
        .collect();
    let odometry = emit_odometry(&traj, &spec.noise, &mut spec.noise.odometry_rng());
    Ok(Dataset {
        scene,
        registry: registry.clone(),
        intrinsics: spec.intrinsics,
        frames,
        initial_pose: traj[0],
        odometry,
        noise: spec.noise.clone(),
    })
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    schema: String,
    scene: GroundTruthScene,
    intrinsics: Intrinsics,
    trajectory: Vec<Pose>,
    spacing: f64,
    models: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct MeasFile {
    schema: String,
    t: usize,
    measurements: Vec<SemanticMeasurement>,
    visible: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OdomFile {
    schema: String,
    initial_pose: Pose,
    odometry: Vec<Pose>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| SimError::Format(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SimError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SimError::Format(format!("{}: {e}", path.display())))
}

fn check_schema(found: &str, path: &Path) -> Result<(), SimError> {
    if found == DATASET_SCHEMA {
        Ok(())
    } else {
        Err(SimError::Format(format!(
            "{}: expected schema {DATASET_SCHEMA}, found {found}",
            path.display()
        )))
    }
}

pub fn frame_stem(t: usize) -> String {
    format!("{t:04}")
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<(), SimError> {
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir)?;
    let models: serde_json::Value =
        serde_json::from_str(&ds.registry.to_json()).map_err(|e| SimError::Format(e.to_string()))?;
    write_json(
        &dir.join("scene.json"),
        &SceneFile {
            schema: DATASET_SCHEMA.into(),
            scene: ds.scene.clone(),
            intrinsics: ds.intrinsics,
            trajectory: ds.trajectory(),
            spacing: ds.registry.spacing(),
            models,
        },
    )?;
    for rec in &ds.frames {
        let stem = frame_stem(rec.frame.t);
        fs::write(frames_dir.join(format!("{stem}.depth")), rec.frame.depth.to_le_bytes())?;
        write_json(
            &frames_dir.join(format!("{stem}.meas.json")),
            &MeasFile {
                schema: DATASET_SCHEMA.into(),
                t: rec.frame.t,
                measurements: rec.measurements.clone(),
                visible: rec.visible.clone(),
            },
        )?;
    }
    write_json(
        &dir.join("odom.json"),
        &OdomFile {
            schema: DATASET_SCHEMA.into(),
            initial_pose: ds.initial_pose,
            odometry: ds.odometry.clone(),
        },
    )?;
    write_json(&dir.join("noise.json"), &ds.noise)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, SimError> {
    if !dir.is_dir() {
        return Err(SimError::Format(format!("{} is not a dataset directory", dir.display())));
    }
    let scene_path = dir.join("scene.json");
    let sf: SceneFile = read_json(&scene_path)?;
    check_schema(&sf.schema, &scene_path)?;
    let registry = ModelRegistry::from_json(&sf.models.to_string(), sf.spacing)?;
    let odom_path = dir.join("odom.json");
    let of: OdomFile = read_json(&odom_path)?;
    check_schema(&of.schema, &odom_path)?;
    let noise: NoiseSpec = read_json(&dir.join("noise.json"))?;
    if of.odometry.len() + 1 != sf.trajectory.len() {
        return Err(SimError::Format("odometry length does not match trajectory".into()));
    }
    let mut frames = Vec::with_capacity(sf.trajectory.len());
    for (t, pose) in sf.trajectory.iter().enumerate() {
        let stem = frame_stem(t);
        let depth_path = dir.join("frames").join(format!("{stem}.depth"));
        let bytes = fs::read(&depth_path).map_err(|e| SimError::Format(format!("{}: {e}", depth_path.display())))?;
        let depth = DepthImage::from_le_bytes(sf.intrinsics.width, sf.intrinsics.height, &bytes)
            .ok_or_else(|| SimError::Format(format!("{}: bad depth payload", depth_path.display())))?;
        let meas_path = dir.join("frames").join(format!("{stem}.meas.json"));
        let mf: MeasFile = read_json(&meas_path)?;
        check_schema(&mf.schema, &meas_path)?;
        if mf.t != t {
            return Err(SimError::Format(format!("{}: frame index {} != {t}", meas_path.display(), mf.t)));
        }
        frames.push(FrameRecord {
            frame: CameraFrame {
                t,
                pose: *pose,
                intrinsics: sf.intrinsics,
                depth,
            },
            measurements: mf.measurements,
            visible: mf.visible,
        });
    }
    Ok(Dataset {
        scene: sf.scene,
        registry,
        intrinsics: sf.intrinsics,
        frames,
        initial_pose: of.initial_pose,
        odometry: of.odometry,
        noise,
    })
}
