use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use super::GeometryError;

pub const MODELS_SCHEMA: &str = "geofuse-models/1";

/// Default surface sampling spacing in meters.
pub const DEFAULT_SPACING: f64 = 0.005;

/// Convex primitive in its body frame, centered at the origin.
/// Cylinders are aligned with body +z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Box { extents: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
}

impl Shape {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = match *self {
            Shape::Box { extents } => extents.iter().all(|e| e.is_finite() && *e > 0.0),
            Shape::Cylinder { radius, height } => {
                radius.is_finite() && height.is_finite() && radius > 0.0 && height > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidShape(format!("{self:?}")))
        }
    }

    /// Half extents of the tightest body-aligned bounding box.
    pub fn half_extents(&self) -> Vector3<f64> {
        match *self {
            Shape::Box { extents } => Vector3::from(extents) * 0.5,
            Shape::Cylinder { radius, height } => Vector3::new(radius, radius, height * 0.5),
        }
    }

    /// Exact signed distance (negative inside) from a body-frame point.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Shape::Box { .. } => {
                let h = self.half_extents();
                let q = p.abs() - h;
                let outside = q.map(|v| v.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
            Shape::Cylinder { radius, height } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                let dx = rho - radius;
                let dz = p.z.abs() - height * 0.5;
                let outside = (dx.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                outside + dx.max(dz).min(0.0)
            }
        }
    }

    /// Outward unit normal of the face closest to a boundary point; on
    /// edges the tie goes to the face with the larger relative coordinate.
    pub fn normal_at(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            Shape::Box { .. } => {
                let h = self.half_extents();
                let r = Vector3::new(p.x.abs() / h.x, p.y.abs() / h.y, p.z.abs() / h.z);
                let axis = r.imax();
                let mut n = Vector3::zeros();
                n[axis] = p[axis].signum();
                n
            }
            Shape::Cylinder { radius, height } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                if p.z.abs() / (0.5 * height) >= rho / radius {
                    Vector3::new(0.0, 0.0, p.z.signum())
                } else {
                    Vector3::new(p.x / rho, p.y / rho, 0.0)
                }
            }
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.signed_distance(p) <= 0.0
    }

    /// Deterministic grid sampling of the boundary.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vector3<f64>> {
        match *self {
            Shape::Box { extents } => sample_box(extents, spacing),
            Shape::Cylinder { radius, height } => sample_cylinder(radius, height, spacing),
        }
    }
}

fn divisions(length: f64, spacing: f64) -> usize {
    ((length / spacing).ceil() as usize).max(1)
}

fn sample_box(extents: [f64; 3], spacing: f64) -> Vec<Vector3<f64>> {
    let h = Vector3::from(extents) * 0.5;
    let n = [
        divisions(extents[0], spacing),
        divisions(extents[1], spacing),
        divisions(extents[2], spacing),
    ];
    let coord = |axis: usize, k: usize| -h[axis] + extents[axis] * k as f64 / n[axis] as f64;
    let mut pts = Vec::new();
    // Faces normal to axis `a` own the grid lines on their border only for
    // axes with a larger index, so each edge and corner is emitted once.
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let range = |axis: usize| {
            if axis < a {
                1..n[axis]
            } else {
                0..n[axis] + 1
            }
        };
        for sign in [1.0, -1.0] {
            for kb in range(b) {
                for kc in range(c) {
                    let mut p = Vector3::zeros();
                    p[a] = sign * h[a];
                    p[b] = coord(b, kb);
                    p[c] = coord(c, kc);
                    pts.push(p);
                }
            }
        }
    }
    pts
}

fn sample_cylinder(radius: f64, height: f64, spacing: f64) -> Vec<Vector3<f64>> {
    let half = height * 0.5;
    let n_circ = ((TAU * radius / spacing).ceil() as usize).max(8);
    let n_h = divisions(height, spacing);
    let mut pts = Vec::new();
    let ring = |z: f64, pts: &mut Vec<Vector3<f64>>| {
        for k in 0..n_circ {
            let a = TAU * k as f64 / n_circ as f64;
            pts.push(Vector3::new(radius * a.cos(), radius * a.sin(), z));
        }
    };
    for z in [half, -half] {
        // interior grid of the cap, strictly inside the rim
        let m = (radius / spacing).floor() as i64;
        for i in -m..=m {
            for j in -m..=m {
                let (x, y) = (i as f64 * spacing, j as f64 * spacing);
                if x * x + y * y < (radius - 0.5 * spacing).powi(2) {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        ring(z, &mut pts);
    }
    for k in 1..n_h {
        ring(-half + height * k as f64 / n_h as f64, &mut pts);
    }
    pts
}

/// Known rigid object geometry for one class.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    pub class_id: u32,
    pub name: String,
    pub shape: Shape,
    /// Rotational symmetry axis in the body frame, if any.
    pub symmetry_axis: Option<Vector3<f64>>,
    pub surface_points: Vec<Vector3<f64>>,
    /// Outward normals matching `surface_points`.
    pub surface_normals: Vec<Vector3<f64>>,
    /// Sampling spacing used for `surface_points`.
    pub spacing: f64,
}

impl ObjectModel {
    pub fn new(class_id: u32, name: impl Into<String>, shape: Shape, spacing: f64) -> Result<Self, GeometryError> {
        shape.validate()?;
        if !(spacing > 0.0) {
            return Err(GeometryError::InvalidShape(format!("spacing {spacing}")));
        }
        let symmetry_axis = match shape {
            Shape::Cylinder { .. } => Some(Vector3::z()),
            Shape::Box { .. } => None,
        };
        let surface_points = shape.sample_surface(spacing);
        let surface_normals = surface_points.iter().map(|p| shape.normal_at(p)).collect();
        Ok(Self {
            class_id,
            name: name.into(),
            shape,
            symmetry_axis,
            surface_points,
            surface_normals,
            spacing,
        })
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        self.shape.half_extents()
    }

    /// Corners of the body-aligned bounding box.
    pub fn bbox_corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_extents();
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vector3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ModelEntry {
    class_id: u32,
    name: String,
    shape: String,
    dims: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RegistryFile {
    schema: String,
    models: Vec<ModelEntry>,
}

/// Class-indexed set of object models, classes numbered `1..=C`.
#[derive(Clone, Debug)]
pub struct ModelRegistry {
    models: Vec<ObjectModel>,
    spacing: f64,
}

impl ModelRegistry {
    pub fn new(mut models: Vec<ObjectModel>, spacing: f64) -> Result<Self, GeometryError> {
        models.sort_by_key(|m| m.class_id);
        for (i, m) in models.iter().enumerate() {
            if m.class_id as usize != i + 1 {
                return Err(GeometryError::Schema(format!(
                    "class ids must be contiguous from 1, found {} at position {}",
                    m.class_id, i
                )));
            }
        }
        Ok(Self { models, spacing })
    }

    /// Eight tabletop objects with household proportions.
    pub fn default_household() -> Self {
        Self::default_household_with_spacing(DEFAULT_SPACING)
    }

    pub fn default_household_with_spacing(spacing: f64) -> Self {
        let specs: [(&str, Shape); 8] = [
            ("cracker_box", Shape::Box { extents: [0.16, 0.06, 0.21] }),
            ("sugar_box", Shape::Box { extents: [0.09, 0.04, 0.175] }),
            ("soup_can", Shape::Cylinder { radius: 0.033, height: 0.10 }),
            ("pudding_box", Shape::Box { extents: [0.11, 0.09, 0.035] }),
            ("tuna_can", Shape::Cylinder { radius: 0.043, height: 0.033 }),
            ("gelatin_box", Shape::Box { extents: [0.085, 0.073, 0.03] }),
            ("meat_can", Shape::Box { extents: [0.10, 0.06, 0.083] }),
            ("coffee_can", Shape::Cylinder { radius: 0.051, height: 0.14 }),
        ];
        let models = specs
            .iter()
            .enumerate()
            .map(|(i, (name, shape))| ObjectModel::new(i as u32 + 1, *name, *shape, spacing).unwrap())
            .collect();
        Self { models, spacing }
    }

    pub fn get(&self, class_id: u32) -> Result<&ObjectModel, GeometryError> {
        class_id
            .checked_sub(1)
            .and_then(|i| self.models.get(i as usize))
            .ok_or(GeometryError::UnknownClass(class_id))
    }

    pub fn num_classes(&self) -> u32 {
        self.models.len() as u32
    }

    pub fn models(&self) -> &[ObjectModel] {
        &self.models
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn to_json(&self) -> String {
        let file = RegistryFile {
            schema: MODELS_SCHEMA.to_string(),
            models: self
                .models
                .iter()
                .map(|m| {
                    let (shape, dims) = match m.shape {
                        Shape::Box { extents } => ("box", extents.to_vec()),
                        Shape::Cylinder { radius, height } => ("cylinder", vec![radius, height]),
                    };
                    ModelEntry {
                        class_id: m.class_id,
                        name: m.name.clone(),
                        shape: shape.to_string(),
                        dims,
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    pub fn from_json(text: &str, spacing: f64) -> Result<Self, GeometryError> {
        let file: RegistryFile =
            serde_json::from_str(text).map_err(|e| GeometryError::Schema(e.to_string()))?;
        if file.schema != MODELS_SCHEMA {
            return Err(GeometryError::Schema(format!("unsupported schema {:?}", file.schema)));
        }
        let models = file
            .models
            .into_iter()
            .map(|e| {
                let shape = match (e.shape.as_str(), e.dims.as_slice()) {
                    ("box", [x, y, z]) => Shape::Box { extents: [*x, *y, *z] },
                    ("cylinder", [r, h]) => Shape::Cylinder { radius: *r, height: *h },
                    (s, d) => {
                        return Err(GeometryError::Schema(format!("bad shape {s:?} with dims {d:?}")))
                    }
                };
                ObjectModel::new(e.class_id, e.name, shape, spacing)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(models, spacing)
    }

    pub fn load(path: &Path, spacing: f64) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io(e.to_string()))?;
        Self::from_json(&text, spacing)
    }
}
