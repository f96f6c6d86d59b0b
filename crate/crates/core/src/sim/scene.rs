//! Ground-truth tabletop scenes and camera trajectories.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::camera::look_at;
use super::SimError;
use crate::geometry::planar::{convex_hull, inside_margin, sat_gap, P2};
use crate::geometry::{extract_surface_features, ModelRegistry, ObjectModel, Pose, Shape, SurfaceFeature};
use crate::relations::{ContactKind, ContactRelation, TABLE_ID};

/// Finite horizontal support plane through the world origin, normal `+z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub half_extents: [f64; 2],
}

impl Default for Table {
    fn default() -> Self {
        Self {
            half_extents: [0.6, 0.4],
        }
    }
}

impl Table {
    pub fn plane(&self) -> SurfaceFeature {
        let [hx, hy] = self.half_extents;
        SurfaceFeature::Plane {
            center: Vector3::zeros(),
            boundary: vec![
                Vector3::new(-hx, -hy, 0.0),
                Vector3::new(hx, -hy, 0.0),
                Vector3::new(hx, hy, 0.0),
                Vector3::new(-hx, hy, 0.0),
            ],
            normal: Vector3::z(),
        }
    }

    /// World-frame features of the table; it has a single plane (index 0).
    pub fn features(&self) -> Vec<SurfaceFeature> {
        vec![self.plane()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    /// Object id, `1..=n`; `0` is the table.
    pub id: u32,
    pub class_id: u32,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScene {
    pub objects: Vec<SceneObject>,
    pub table: Table,
    pub gravity: Vector3<f64>,
    /// Support contacts created by the generator.
    pub contacts: Vec<ContactRelation>,
}

impl GroundTruthScene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// `(class, world pose)` pairs in object order.
    pub fn class_poses(&self) -> Vec<(u32, Pose)> {
        self.objects.iter().map(|o| (o.class_id, o.pose)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub table: Table,
    /// Objects resting on the table keep their footprint inside this
    /// centered rectangle.
    pub region_half_extents: [f64; 2],
    /// Minimum horizontal gap between footprints of objects that do not
    /// support each other.
    pub clearance: f64,
    /// Minimum inset of a stacked footprint from its support face border.
    pub support_margin: f64,
    pub stack_probability: f64,
    pub max_stack_level: usize,
    pub upright_cylinder_probability: f64,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            table: Table::default(),
            region_half_extents: [0.3, 0.22],
            clearance: 0.015,
            support_margin: 0.005,
            stack_probability: 0.3,
            max_stack_level: 2,
            upright_cylinder_probability: 0.6,
            max_attempts: 5000,
        }
    }
}

struct Placed {
    footprint: Vec<P2>,
    support: Option<usize>,
    level: usize,
    /// Upward-facing plane a box offers for stacking: feature index,
    /// height and horizontal polygon.
    top: Option<(usize, f64, Vec<P2>)>,
}

enum Resting {
    /// Plane feature of the object facing down.
    Face(usize),
    /// Curved feature rolling on the support.
    Side(usize),
}

fn resting_orientation(model: &ObjectModel, rng: &mut ChaCha8Rng, upright_p: f64) -> (UnitQuaternion<f64>, Resting, Option<usize>) {
    match model.shape {
        Shape::Box { .. } => {
            let axis = rng.random_range(0..3usize);
            let positive = rng.random_bool(0.5);
            let mut n = Vector3::zeros();
            n[axis] = if positive { 1.0 } else { -1.0 };
            let down = -Vector3::z();
            let r0 = UnitQuaternion::rotation_between(&n, &down)
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI));
            let bottom = 2 * axis + usize::from(!positive);
            let top = 2 * axis + usize::from(positive);
            (r0, Resting::Face(bottom), Some(top))
        }
        Shape::Cylinder { .. } => {
            if rng.random_bool(upright_p) {
                if rng.random_bool(0.5) {
                    (UnitQuaternion::identity(), Resting::Face(1), None)
                } else {
                    (UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI), Resting::Face(0), None)
                }
            } else {
                (UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2), Resting::Side(2), None)
            }
        }
    }
}

fn horizontal(points: impl Iterator<Item = Vector3<f64>>) -> Vec<P2> {
    convex_hull(&points.map(|p| P2::new(p.x, p.y)).collect::<Vec<_>>())
}

/// Places `n_objects` random models on the table with rejection sampling;
/// boxes may carry other objects on their upward face.
pub fn generate_scene(n_objects: usize, registry: &ModelRegistry, rng_seed: u64) -> Result<GroundTruthScene, SimError> {
    generate_scene_with(n_objects, registry, rng_seed, &SceneConfig::default())
}

pub fn generate_scene_with(
    n_objects: usize,
    registry: &ModelRegistry,
    rng_seed: u64,
    cfg: &SceneConfig,
) -> Result<GroundTruthScene, SimError> {
    if n_objects == 0 {
        return Err(SimError::Config("n_objects must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(n_objects);
    let mut placed: Vec<Placed> = Vec::with_capacity(n_objects);
    let mut contacts = Vec::with_capacity(n_objects);
    let [rx, ry] = cfg.region_half_extents;

    for i in 0..n_objects {
        let id = i as u32 + 1;
        let mut success = false;
        for _ in 0..cfg.max_attempts {
            let class_id = rng.random_range(1..=registry.num_classes());
            let model = registry.get(class_id)?;
            let support = if rng.random_bool(cfg.stack_probability) {
                let candidates: Vec<usize> = placed
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.top.is_some() && p.level < cfg.max_stack_level)
                    .map(|(k, _)| k)
                    .collect();
                if candidates.is_empty() {
                    None
                } else {
                    Some(candidates[rng.random_range(0..candidates.len())])
                }
            } else {
                None
            };
            let (r0, resting, top_face) = resting_orientation(model, &mut rng, cfg.upright_cylinder_probability);
            let yaw = rng.random_range(0.0..TAU);
            let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw) * r0;
            let corners = model.bbox_corners();
            let drop = -corners.iter().map(|c| (rot * c).z).fold(f64::INFINITY, f64::min);

            let (base_height, x, y) = match support {
                None => (0.0, rng.random_range(-rx..rx), rng.random_range(-ry..ry)),
                Some(s) => {
                    let (_, h, poly) = placed[s].top.as_ref().expect("support has a top face");
                    let (lo, hi) = poly.iter().fold(
                        (P2::repeat(f64::INFINITY), P2::repeat(f64::NEG_INFINITY)),
                        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
                    );
                    (*h, rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y))
                }
            };
            let pose = Pose::new(rot, Vector3::new(x, y, base_height + drop));
            let footprint = horizontal(corners.iter().map(|c| pose.transform_point(c)));

            let contained = match support {
                None => footprint.iter().all(|p| p.x.abs() <= rx && p.y.abs() <= ry),
                Some(s) => {
                    let poly = &placed[s].top.as_ref().unwrap().2;
                    footprint.iter().all(|p| inside_margin(poly, p) >= cfg.support_margin)
                }
            };
            if !contained {
                continue;
            }
            let mut ancestors = Vec::new();
            let mut cur = support;
            while let Some(s) = cur {
                ancestors.push(s);
                cur = placed[s].support;
            }
            let clear = placed
                .iter()
                .enumerate()
                .filter(|(k, _)| !ancestors.contains(k))
                .all(|(_, p)| sat_gap(&footprint, &p.footprint) >= cfg.clearance);
            if !clear {
                continue;
            }

            let top = top_face.map(|f| {
                let feats = extract_surface_features(model);
                let face = feats[f].transformed(&pose);
                let height = face.center().z;
                (f, height, horizontal(face.boundary_points().into_iter()))
            });
            let (support_id, support_feat) = match support {
                None => (TABLE_ID, 0),
                Some(s) => (objects[s].id, placed[s].top.as_ref().unwrap().0),
            };
            contacts.push(match resting {
                Resting::Face(f) => ContactRelation {
                    kind: ContactKind::P2P,
                    obj_a: support_id,
                    obj_b: id,
                    feat_a: support_feat,
                    feat_b: f,
                }
                .canonical(),
                Resting::Side(f) => ContactRelation {
                    kind: ContactKind::P2C,
                    obj_a: support_id,
                    obj_b: id,
                    feat_a: support_feat,
                    feat_b: f,
                },
            });
            placed.push(Placed {
                footprint,
                support,
                level: support.map_or(0, |s| placed[s].level + 1),
                top,
            });
            objects.push(SceneObject { id, class_id, pose });
            success = true;
            break;
        }
        if !success {
            return Err(SimError::PlacementFailure {
                requested: n_objects,
                placed: i,
            });
        }
    }
    Ok(GroundTruthScene {
        objects,
        table: cfg.table,
        gravity: -Vector3::z(),
        contacts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    /// Mean horizontal distance from the target.
    pub radius: f64,
    /// Mean camera height above the table.
    pub height: f64,
    pub target: [f64; 3],
    pub radius_wobble: f64,
    pub height_wobble: f64,
    /// Number of full orbits over the sequence.
    pub turns: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            radius: 0.8,
            height: 0.55,
            target: [0.0, 0.0, 0.05],
            radius_wobble: 0.08,
            height_wobble: 0.05,
            turns: 1.0,
        }
    }
}

/// Camera poses orbiting the table center, starting at a seeded azimuth.
pub fn orbit_trajectory(n_frames: usize, cfg: &TrajectoryConfig, rng_seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5e_ed0f_0b17);
    let start = rng.random_range(0.0..TAU);
    let target = Vector3::from(cfg.target);
    (0..n_frames)
        .map(|k| {
            let s = k as f64 / n_frames.max(1) as f64;
            let theta = start + TAU * cfg.turns * s;
            let r = cfg.radius + cfg.radius_wobble * (3.0 * TAU * s).sin();
            let h = cfg.height + cfg.height_wobble * (2.0 * TAU * s).cos();
            let eye = Vector3::new(r * theta.cos(), r * theta.sin(), h);
            look_at(&eye, &target)
        })
        .collect()
}
