//! Pinhole camera, depth images and point-splat rendering.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{ModelRegistry, ObjectModel, Pose};

/// Splat disc radius as a multiple of the sampling spacing. Slightly above
/// `1/sqrt(2)` so the discs of a square sampling grid cover the surface.
pub const SPLAT_RADIUS: f64 = 0.75;

/// Points closer than this to the optical center are not rendered.
pub const NEAR_PLANE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            cx: 159.5,
            cy: 119.5,
            width: 320,
            height: 240,
        }
    }
}

impl Intrinsics {
    /// Continuous pixel coordinates of a camera-frame point, `None` behind
    /// the near plane.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= NEAR_PLANE {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Camera-frame point at depth `z` along the ray through pixel `(u, v)`.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Row-major depth in meters; 0 marks pixels without a return.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u] as f64
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| **d > 0.0).count()
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|d| d.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(width: usize, height: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != width * height * 4 {
            return None;
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect::<Vec<_>>();
        if data.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return None;
        }
        Some(Self { width, height, data })
    }
}

/// One depth observation with the camera pose it was taken from.
#[derive(Clone, Debug)]
pub struct CameraFrame {
    pub t: usize,
    pub pose: Pose,
    pub intrinsics: Intrinsics,
    pub depth: DepthImage,
}

/// Calls `visit(pixel_index, depth)` for every pixel covered by the splats
/// of `model` placed at `cam_from_obj` (object pose in the camera frame).
///
/// Each surface sample is an oriented disc of radius `SPLAT_RADIUS *
/// spacing` in its tangent plane. A pixel takes the depth where its ray
/// meets that plane, and only if the hit stays on the object's surface, so
/// back-projected pixels lie on the true surface.
pub fn splat_model(
    model: &ObjectModel,
    cam_from_obj: &Pose,
    intr: &Intrinsics,
    spacing: f64,
    mut visit: impl FnMut(usize, f64),
) {
    let rot = cam_from_obj.rotation().to_rotation_matrix();
    let rot_t = rot.transpose();
    let t = cam_from_obj.translation();
    let (w, h) = (intr.width as i64, intr.height as i64);
    let radius = SPLAT_RADIUS * spacing;
    let on_surface = 0.25 * spacing;
    for (p, n) in model.surface_points.iter().zip(&model.surface_normals) {
        let pc = rot * p + t;
        let nc = rot * n;
        if pc.z - radius <= NEAR_PLANE {
            continue;
        }
        let facing = -nc.dot(&pc);
        if facing <= 1e-3 * pc.norm() {
            continue;
        }
        let (u, v) = (intr.fx * pc.x / pc.z + intr.cx, intr.fy * pc.y / pc.z + intr.cy);
        let rx = radius * intr.fx / (pc.z - radius);
        let ry = radius * intr.fy / (pc.z - radius);
        let i0 = ((u - rx).ceil() as i64).max(0);
        let i1 = ((u + rx).floor() as i64).min(w - 1);
        let j0 = ((v - ry).ceil() as i64).max(0);
        let j1 = ((v + ry).floor() as i64).min(h - 1);
        let np = nc.dot(&pc);
        for j in j0..=j1 {
            let dy = (j as f64 - intr.cy) / intr.fy;
            for i in i0..=i1 {
                let dir = Vector3::new((i as f64 - intr.cx) / intr.fx, dy, 1.0);
                let denom = nc.dot(&dir);
                if denom >= 0.0 {
                    continue;
                }
                let z = np / denom;
                let hit = dir * z;
                if (hit - pc).norm_squared() > radius * radius {
                    continue;
                }
                let local = rot_t * (hit - t);
                if model.shape.signed_distance(&local).abs() > on_surface {
                    continue;
                }
                visit(j as usize * intr.width + i as usize, z);
            }
        }
    }
}

/// Depth image plus, per pixel, the index of the object that won the
/// z-buffer (`None` for empty pixels).
#[derive(Clone, Debug)]
pub struct LabeledRender {
    pub depth: DepthImage,
    pub labels: Vec<Option<u32>>,
}

impl LabeledRender {
    /// Number of pixels won by each of `n` objects.
    pub fn visible_pixels(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for l in self.labels.iter().flatten() {
            counts[*l as usize] += 1;
        }
        counts
    }
}

/// Renders `(model, world pose)` pairs seen from `camera` with a z-buffer.
pub fn render_objects(
    objects: &[(&ObjectModel, Pose)],
    camera: &Pose,
    intr: &Intrinsics,
    spacing: f64,
) -> LabeledRender {
    let n = intr.num_pixels();
    let mut zbuf = vec![f64::INFINITY; n];
    let mut labels = vec![None; n];
    for (k, (model, pose)) in objects.iter().enumerate() {
        let rel = camera.relative(pose);
        splat_model(model, &rel, intr, spacing, |idx, z| {
            if z < zbuf[idx] {
                zbuf[idx] = z;
                labels[idx] = Some(k as u32);
            }
        });
    }
    let data = zbuf
        .iter()
        .map(|z| if z.is_finite() { *z as f32 } else { 0.0 })
        .collect();
    LabeledRender {
        depth: DepthImage {
            width: intr.width,
            height: intr.height,
            data,
        },
        labels,
    }
}

/// Renders a single model alone and returns the back-projected camera-frame
/// points of the pixels it covers, one per pixel.
pub fn render_model_points(model: &ObjectModel, cam_from_obj: &Pose, intr: &Intrinsics, spacing: f64) -> Vec<Vector3<f64>> {
    let mut best: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    splat_model(model, cam_from_obj, intr, spacing, |idx, z| {
        let e = best.entry(idx).or_insert(f64::INFINITY);
        if z < *e {
            *e = z;
        }
    });
    let mut pixels: Vec<(usize, f64)> = best.into_iter().collect();
    pixels.sort_unstable_by_key(|(idx, _)| *idx);
    pixels
        .into_iter()
        .map(|(idx, z)| {
            let (u, v) = ((idx % intr.width) as f64, (idx / intr.width) as f64);
            intr.back_project(u, v, z)
        })
        .collect()
}

/// Camera pose at `eye` looking at `target`, with image y pointing towards
/// world `-z` (x right, y down, z forward).
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> Pose {
    let forward = (target - eye).normalize();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        right = Vector3::x();
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    Pose::new(rot, *eye)
}

/// Renders ground-truth models of a registry at the given world poses.
pub fn render_scene_objects(
    registry: &ModelRegistry,
    objects: &[(u32, Pose)],
    camera: &Pose,
    intr: &Intrinsics,
) -> LabeledRender {
    let models: Vec<(&ObjectModel, Pose)> = objects
        .iter()
        .map(|(class, pose)| (registry.get(*class).expect("class present in registry"), *pose))
        .collect();
    render_objects(&models, camera, intr, registry.spacing())
}
