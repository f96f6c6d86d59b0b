//! Contact predicates, physical plausibility checks and relation inference.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::{ContactKind, ContactRelation, RelationError, TABLE_ID};
use crate::geometry::planar::{convex_hull, project_along, sat_overlap, P2};
use crate::geometry::{edge_bounds_face, extract_surface_features, ModelRegistry, Pose, SurfaceFeature};
use crate::optimizer::residuals::{contact_signs, contact_terms, FeatureGeom};
use crate::sim::Table;

/// Points used to outline the projected strip around a curved feature.
pub const STRIP_HULL_POINTS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelationConfig {
    pub eps_n_pp: f64,
    pub eps_c_pp: f64,
    pub eps_n_pc: f64,
    pub eps_c_pc: f64,
    pub eps_c_cc: f64,
    pub eps_g: f64,
    /// Unit gravity direction.
    pub gravity: Vector3<f64>,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            eps_n_pp: 0.1,
            eps_c_pp: 0.008,
            eps_n_pc: 0.1,
            eps_c_pc: 0.008,
            eps_c_cc: 0.008,
            eps_g: 0.8,
            gravity: -Vector3::z(),
        }
    }
}

impl RelationConfig {
    pub fn validate(&self) -> Result<(), RelationError> {
        let positive = [self.eps_n_pp, self.eps_c_pp, self.eps_n_pc, self.eps_c_pc, self.eps_c_cc, self.eps_g]
            .iter()
            .all(|v| *v > 0.0);
        if positive && self.eps_g < 1.0 && (self.gravity.norm() - 1.0).abs() < 1e-9 {
            Ok(())
        } else {
            Err(RelationError::Config(format!("invalid relation config {self:?}")))
        }
    }
}

fn expect_plane(f: &SurfaceFeature) -> (Vector3<f64>, Vector3<f64>) {
    match f {
        SurfaceFeature::Plane { center, normal, .. } => (*center, *normal),
        SurfaceFeature::Curved { .. } => panic!("plane feature expected"),
    }
}

fn expect_curved(f: &SurfaceFeature) -> (Vector3<f64>, Vector3<f64>, f64) {
    match f {
        SurfaceFeature::Curved { center, axis, radius, .. } => (*center, *axis, *radius),
        SurfaceFeature::Plane { .. } => panic!("curved feature expected"),
    }
}

/// Plane-plane contact: antiparallel normals and coplanar centers.
pub fn check_p2p(pa: &SurfaceFeature, pb: &SurfaceFeature, cfg: &RelationConfig) -> bool {
    let (ca, na) = expect_plane(pa);
    let (cb, nb) = expect_plane(pb);
    (na.dot(&nb) + 1.0).abs() < cfg.eps_n_pp && na.dot(&(cb - ca)).abs() < cfg.eps_c_pp
}

/// Plane-curved contact: the axis lies parallel to the plane at a distance
/// equal to the radius, on either side.
pub fn check_p2c(p: &SurfaceFeature, c: &SurfaceFeature, cfg: &RelationConfig) -> bool {
    let (cp, np) = expect_plane(p);
    let (cc, nc, r) = expect_curved(c);
    np.dot(&nc).abs() < cfg.eps_n_pc && (np.dot(&(cc - cp)).abs() - r).abs() < cfg.eps_c_pc
}

/// Curved-curved contact: the common normal distance of the two axes equals
/// the sum of radii.
pub fn check_c2c(ca: &SurfaceFeature, cb: &SurfaceFeature, cfg: &RelationConfig) -> Result<bool, RelationError> {
    let (pa, na, ra) = expect_curved(ca);
    let (pb, nb, rb) = expect_curved(cb);
    let cr = na.cross(&nb);
    let len = cr.norm();
    if len < 1e-6 {
        return Err(RelationError::DegenerateAxes);
    }
    Ok(((cr / len).dot(&(pb - pa)).abs() - (ra + rb)).abs() < cfg.eps_c_cc)
}

/// A supporting plane may not be parallel to gravity.
pub fn support_direction_check(p: &SurfaceFeature, cfg: &RelationConfig) -> bool {
    let (_, n) = expect_plane(p);
    cfg.gravity.dot(&n).abs() > cfg.eps_g
}

/// The same check applied to the common normal of two curved features.
pub fn common_normal_support_check(ca: &SurfaceFeature, cb: &SurfaceFeature, cfg: &RelationConfig) -> bool {
    let cr = ca.direction().cross(&cb.direction());
    let len = cr.norm();
    len >= 1e-6 && cfg.gravity.dot(&(cr / len)).abs() > cfg.eps_g
}

/// Convex outline of a feature projected along `gravity`. Curved features
/// become a strip of half-width `radius` around the projected axis.
pub fn projected_outline(f: &SurfaceFeature, gravity: &Vector3<f64>) -> Vec<P2> {
    let points = match f {
        SurfaceFeature::Plane { boundary, .. } => boundary.clone(),
        SurfaceFeature::Curved {
            endpoints, radius, axis, ..
        } => {
            if *radius == 0.0 {
                endpoints.to_vec()
            } else {
                // rim circles at both ends, in the plane perpendicular to the axis
                let u = axis.cross(&if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() }).normalize();
                let v = axis.cross(&u);
                let per_end = STRIP_HULL_POINTS / 2;
                endpoints
                    .iter()
                    .flat_map(|e| {
                        (0..per_end).map(move |k| {
                            let a = TAU * k as f64 / per_end as f64;
                            e + (u * a.cos() + v * a.sin()) * *radius
                        })
                    })
                    .collect()
            }
        }
    };
    convex_hull(&project_along(&points, gravity))
}

/// The two features' projections along gravity overlap (2D separating axes).
pub fn projection_overlap_check(fa: &SurfaceFeature, fb: &SurfaceFeature, cfg: &RelationConfig) -> bool {
    sat_overlap(&projected_outline(fa, &cfg.gravity), &projected_outline(fb, &cfg.gravity))
}

/// Geometric predicate for the feature pair plus both physical checks.
/// Returns the relation kind with the plane first for P2C, and whether the
/// features had to be swapped to get there.
pub fn test_pair(fa: &SurfaceFeature, fb: &SurfaceFeature, cfg: &RelationConfig) -> Option<(ContactKind, bool)> {
    let (kind, swapped, geometric) = match (fa.is_plane(), fb.is_plane()) {
        (true, true) => (ContactKind::P2P, false, check_p2p(fa, fb, cfg)),
        (true, false) => (ContactKind::P2C, false, check_p2c(fa, fb, cfg)),
        (false, true) => (ContactKind::P2C, true, check_p2c(fb, fa, cfg)),
        (false, false) => (ContactKind::C2C, false, check_c2c(fa, fb, cfg).unwrap_or(false)),
    };
    if !geometric {
        return None;
    }
    let supported = match kind {
        ContactKind::C2C => common_normal_support_check(fa, fb, cfg),
        _ => [fa, fb].iter().filter(|f| f.is_plane()).all(|f| support_direction_check(f, cfg)),
    };
    (supported && projection_overlap_check(fa, fb, cfg)).then_some((kind, swapped))
}

/// An object placed in the world for relation inference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub id: u32,
    pub class_id: u32,
    pub pose: Pose,
}

struct Body {
    id: u32,
    pose: Pose,
    /// Body-frame features.
    local: Vec<SurfaceFeature>,
    world: Vec<SurfaceFeature>,
    radius: f64,
}

/// All contact relations among `objects` and the table, canonical, sorted
/// and deduplicated. Contacts along an edge or boundary of a face that is
/// already in plane contact with the same object are dropped, so a box
/// resting flat yields only its face relation.
pub fn infer_relations(
    objects: &[Placement],
    table: &Table,
    registry: &ModelRegistry,
    cfg: &RelationConfig,
) -> Result<Vec<ContactRelation>, RelationError> {
    let mut sorted = objects.to_vec();
    sorted.sort_by_key(|o| o.id);
    let mut bodies = vec![Body {
        id: TABLE_ID,
        pose: Pose::identity(),
        local: table.features(),
        world: table.features(),
        radius: f64::INFINITY,
    }];
    for o in &sorted {
        let model = registry.get(o.class_id)?;
        let local = extract_surface_features(model);
        let world = local.iter().map(|f| f.transformed(&o.pose)).collect();
        bodies.push(Body {
            id: o.id,
            pose: o.pose,
            local,
            world,
            radius: model.half_extents().norm(),
        });
    }
    let reach = cfg.eps_c_pp.max(cfg.eps_c_pc).max(cfg.eps_c_cc);
    let mut out = Vec::new();
    for i in 0..bodies.len() {
        for j in i + 1..bodies.len() {
            let (a, b) = (&bodies[i], &bodies[j]);
            if a.id != TABLE_ID && (a.pose.translation() - b.pose.translation()).norm() > a.radius + b.radius + reach {
                continue;
            }
            let mut pair = Vec::new();
            for (fi, fa) in a.world.iter().enumerate() {
                for (fj, fb) in b.world.iter().enumerate() {
                    if let Some((kind, swapped)) = test_pair(fa, fb, cfg) {
                        let rel = if swapped {
                            ContactRelation { kind, obj_a: b.id, obj_b: a.id, feat_a: fj, feat_b: fi }
                        } else {
                            ContactRelation { kind, obj_a: a.id, obj_b: b.id, feat_a: fi, feat_b: fj }
                        };
                        pair.push(rel.canonical());
                    }
                }
            }
            out.extend(drop_subsumed(&pair, &bodies));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn local_feature(bodies: &[Body], id: u32, feat: usize) -> &SurfaceFeature {
    let body = bodies.iter().find(|b| b.id == id).expect("body exists");
    &body.local[feat]
}

fn covers(bodies: &[Body], id: u32, primary: usize, other: usize) -> bool {
    primary == other || edge_bounds_face(local_feature(bodies, id, other), local_feature(bodies, id, primary))
}

/// Removes relations of one object pair that are implied by a plane contact
/// of the same pair: every feature is the contacting feature itself or an
/// edge bounding it.
fn drop_subsumed(pair: &[ContactRelation], bodies: &[Body]) -> Vec<ContactRelation> {
    let primaries: Vec<&ContactRelation> = pair.iter().filter(|r| r.kind != ContactKind::C2C).collect();
    pair.iter()
        .filter(|r| {
            !primaries.iter().any(|p| {
                if p == r {
                    return false;
                }
                let feat_of = |rel: &ContactRelation, id: u32| if rel.obj_a == id { rel.feat_a } else { rel.feat_b };
                let strictly_larger = p.kind == ContactKind::P2P || r.kind == ContactKind::C2C;
                strictly_larger
                    && covers(bodies, p.obj_a, feat_of(p, p.obj_a), feat_of(r, p.obj_a))
                    && covers(bodies, p.obj_b, feat_of(p, p.obj_b), feat_of(r, p.obj_b))
            })
        })
        .copied()
        .collect()
}

/// A relation with its unweighted residual terms, for audit output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    #[serde(flatten)]
    pub relation: ContactRelation,
    pub residuals: Vec<f64>,
}

/// World pose of a relation member; the table sits at the identity.
pub fn member_pose(id: u32, poses: &[Placement]) -> Option<Pose> {
    if id == TABLE_ID {
        Some(Pose::identity())
    } else {
        poses.iter().find(|p| p.id == id).map(|p| p.pose)
    }
}

/// Body-frame features of a relation member.
pub fn member_features(id: u32, poses: &[Placement], table: &Table, registry: &ModelRegistry) -> Result<Vec<SurfaceFeature>, RelationError> {
    if id == TABLE_ID {
        return Ok(table.features());
    }
    let p = poses
        .iter()
        .find(|p| p.id == id)
        .ok_or(RelationError::UnknownObject(id))?;
    Ok(extract_surface_features(registry.get(p.class_id)?))
}

/// Evaluates the unweighted contact terms of each relation at `poses`, with
/// the distance sign taken from the same configuration.
pub fn relation_records(
    relations: &[ContactRelation],
    poses: &[Placement],
    table: &Table,
    registry: &ModelRegistry,
) -> Result<Vec<RelationRecord>, RelationError> {
    relations
        .iter()
        .map(|r| {
            let pa = member_pose(r.obj_a, poses).ok_or(RelationError::UnknownObject(r.obj_a))?;
            let pb = member_pose(r.obj_b, poses).ok_or(RelationError::UnknownObject(r.obj_b))?;
            let fa = FeatureGeom::of(&member_features(r.obj_a, poses, table, registry)?[r.feat_a]);
            let fb = FeatureGeom::of(&member_features(r.obj_b, poses, table, registry)?[r.feat_b]);
            let signs = contact_signs(r.kind, &pa, &fa, &pb, &fb);
            let terms = contact_terms(r.kind, &pa.to_iso(), &fa, &pb.to_iso(), &fb, signs);
            let n = crate::optimizer::residuals::contact_len(r.kind);
            Ok(RelationRecord {
                relation: *r,
                residuals: terms[..n].to_vec(),
            })
        })
        .collect()
}

/// Distance term of a relation record: the second term for P2P and P2C,
/// the only term for C2C.
pub fn distance_term(rec: &RelationRecord) -> f64 {
    match rec.relation.kind {
        ContactKind::C2C => rec.residuals[0],
        _ => rec.residuals[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObjectModel, Shape};
    use crate::sim::generate_scene;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn plane(center: Vector3<f64>, normal: Vector3<f64>) -> SurfaceFeature {
        let (u, v) = crate::geometry::planar::plane_basis(&normal);
        let h = 0.05;
        SurfaceFeature::Plane {
            center,
            boundary: vec![center - u * h - v * h, center + u * h - v * h, center + u * h + v * h, center - u * h + v * h],
            normal,
        }
    }

    fn curved(center: Vector3<f64>, axis: Vector3<f64>, radius: f64) -> SurfaceFeature {
        let axis = axis.normalize();
        SurfaceFeature::Curved {
            center,
            axis,
            endpoints: [center - axis * 0.05, center + axis * 0.05],
            radius,
        }
    }

    fn cfg() -> RelationConfig {
        RelationConfig::default()
    }

    #[test]
    fn p2p_examples() {
        let table = plane(Vector3::zeros(), Vector3::z());
        let bottom = plane(Vector3::zeros(), -Vector3::z());
        assert!(check_p2p(&table, &bottom, &cfg()));
        let lifted = plane(Vector3::new(0.0, 0.0, 0.05), -Vector3::z());
        assert!(!check_p2p(&table, &lifted, &RelationConfig { eps_c_pp: 0.005, ..cfg() }));
        let side = plane(Vector3::zeros(), Vector3::x());
        assert!(!check_p2p(&table, &side, &cfg()));
    }

    #[test]
    fn p2c_examples() {
        let table = plane(Vector3::zeros(), Vector3::z());
        let lying = curved(Vector3::new(0.0, 0.0, 0.03), Vector3::x(), 0.03);
        assert!(check_p2c(&table, &lying, &cfg()));
        let edge = curved(Vector3::new(0.01, 0.0, 0.0), Vector3::y(), 0.0);
        assert!(check_p2c(&table, &edge, &cfg()));
        let standing = curved(Vector3::new(0.0, 0.0, 0.03), Vector3::z(), 0.03);
        assert!(!check_p2c(&table, &standing, &cfg()));
        // either side of the plane
        let below = curved(Vector3::new(0.0, 0.0, -0.03), Vector3::x(), 0.03);
        assert!(check_p2c(&table, &below, &cfg()));
    }

    #[test]
    fn c2c_examples() {
        let a = curved(Vector3::zeros(), Vector3::x(), 0.02);
        let b = curved(Vector3::new(0.0, 0.0, 0.04), Vector3::y(), 0.02);
        assert!(check_c2c(&a, &b, &cfg()).unwrap());
        let far = curved(Vector3::new(0.0, 0.0, 0.06), Vector3::y(), 0.02);
        assert!(!check_c2c(&a, &far, &RelationConfig { eps_c_cc: 0.005, ..cfg() }).unwrap());
        let e1 = curved(Vector3::zeros(), Vector3::x(), 0.0);
        let e2 = curved(Vector3::zeros(), Vector3::new(1.0, 1.0, 0.0), 0.0);
        assert!(check_c2c(&e1, &e2, &cfg()).unwrap());
        let parallel = curved(Vector3::new(0.0, 0.04, 0.0), Vector3::x(), 0.02);
        assert!(matches!(check_c2c(&a, &parallel, &cfg()), Err(RelationError::DegenerateAxes)));
    }

    #[test]
    fn support_direction_examples() {
        assert!(support_direction_check(&plane(Vector3::zeros(), Vector3::z()), &cfg()));
        assert!(support_direction_check(&plane(Vector3::zeros(), -Vector3::z()), &cfg()));
        assert!(!support_direction_check(&plane(Vector3::zeros(), Vector3::x()), &cfg()));
        let tilt = |deg: f64| {
            let r = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), deg.to_radians());
            plane(Vector3::zeros(), r * Vector3::z())
        };
        assert!(support_direction_check(&tilt(30.0), &cfg()));
        assert!(!support_direction_check(&tilt(45.0), &cfg()));
    }

    #[test]
    fn curved_pairs_need_a_vertical_common_normal() {
        let a = curved(Vector3::zeros(), Vector3::x(), 0.02);
        let stacked = curved(Vector3::new(0.0, 0.0, 0.04), Vector3::y(), 0.02);
        assert!(test_pair(&a, &stacked, &cfg()).is_some());
        // a vertical edge touching a horizontal one from the side
        let side = curved(Vector3::new(0.0, 0.02, 0.0), Vector3::z(), 0.0);
        assert!(check_c2c(&a, &side, &cfg()).unwrap());
        assert!(test_pair(&a, &side, &cfg()).is_none());
    }

    #[test]
    fn exact_contacts_pass_any_threshold_and_double_violations_fail() {
        for eps in [1e-9, 1e-4, 0.01] {
            let c = RelationConfig {
                eps_n_pp: eps,
                eps_c_pp: eps,
                eps_n_pc: eps,
                eps_c_pc: eps,
                eps_c_cc: eps,
                ..cfg()
            };
            let table = plane(Vector3::zeros(), Vector3::z());
            assert!(check_p2p(&table, &plane(Vector3::zeros(), -Vector3::z()), &c));
            assert!(!check_p2p(&table, &plane(Vector3::new(0.0, 0.0, 2.0 * eps), -Vector3::z()), &c));
            let lying = curved(Vector3::new(0.0, 0.0, 0.03), Vector3::x(), 0.03);
            assert!(check_p2c(&table, &lying, &c));
            let high = curved(Vector3::new(0.0, 0.0, 0.03 + 2.0 * eps), Vector3::x(), 0.03);
            assert!(!check_p2c(&table, &high, &c));
            let a = curved(Vector3::zeros(), Vector3::x(), 0.02);
            assert!(check_c2c(&a, &curved(Vector3::new(0.0, 0.0, 0.04), Vector3::y(), 0.02), &c).unwrap());
            let gap = curved(Vector3::new(0.0, 0.0, 0.04 + 2.0 * eps), Vector3::y(), 0.02);
            assert!(!check_c2c(&a, &gap, &c).unwrap());
        }
    }

    fn cube_model() -> ModelRegistry {
        let m = ObjectModel::new(1, "cube", Shape::Box { extents: [0.1; 3] }, 0.01).unwrap();
        let c = ObjectModel::new(2, "can", Shape::Cylinder { radius: 0.03, height: 0.1 }, 0.01).unwrap();
        ModelRegistry::new(vec![m, c], 0.01).unwrap()
    }

    fn at(id: u32, class_id: u32, pose: Pose) -> Placement {
        Placement { id, class_id, pose }
    }

    #[test]
    fn cube_on_table_has_one_face_relation() {
        let reg = cube_model();
        let cube = at(1, 1, Pose::from_translation(Vector3::new(0.1, 0.0, 0.05)));
        let rels = infer_relations(&[cube], &Table::default(), &reg, &cfg()).unwrap();
        assert_eq!(
            rels,
            vec![ContactRelation {
                kind: ContactKind::P2P,
                obj_a: TABLE_ID,
                obj_b: 1,
                feat_a: 0,
                feat_b: 5
            }]
        );
    }

    #[test]
    fn stacked_cubes_and_lying_can() {
        let reg = cube_model();
        let objs = [
            at(1, 1, Pose::from_translation(Vector3::new(0.0, 0.0, 0.05))),
            at(2, 1, Pose::from_translation(Vector3::new(0.01, 0.0, 0.15))),
            at(3, 2, Pose::from_axis_angle(Vector3::y() * FRAC_PI_2, Vector3::new(0.3, 0.0, 0.03))),
        ];
        let rels = infer_relations(&objs, &Table::default(), &reg, &cfg()).unwrap();
        let expect = vec![
            ContactRelation { kind: ContactKind::P2C, obj_a: TABLE_ID, obj_b: 3, feat_a: 0, feat_b: 2 },
            ContactRelation { kind: ContactKind::P2P, obj_a: TABLE_ID, obj_b: 1, feat_a: 0, feat_b: 5 },
            ContactRelation { kind: ContactKind::P2P, obj_a: 1, obj_b: 2, feat_a: 4, feat_b: 5 },
        ];
        let mut expect = expect;
        expect.sort();
        assert_eq!(rels, expect);
    }

    #[test]
    fn side_by_side_cubes_are_not_related() {
        let reg = cube_model();
        let objs = [
            at(1, 1, Pose::from_translation(Vector3::new(0.0, 0.0, 0.05))),
            at(2, 1, Pose::from_translation(Vector3::new(0.102, 0.0, 0.05))),
        ];
        let rels = infer_relations(&objs, &Table::default(), &reg, &cfg()).unwrap();
        assert!(rels.iter().all(|r| r.obj_a == TABLE_ID));
        assert_eq!(rels.len(), 2);
    }

    #[test]
    fn generated_scenes_recover_generator_contacts() {
        let reg = ModelRegistry::default_household();
        for seed in 0..8 {
            let scene = generate_scene(18, &reg, seed).unwrap();
            let objs: Vec<Placement> = scene.objects.iter().map(|o| at(o.id, o.class_id, o.pose)).collect();
            let rels = infer_relations(&objs, &scene.table, &reg, &cfg()).unwrap();
            let mut expect: Vec<ContactRelation> = scene.contacts.iter().map(|c| c.canonical()).collect();
            expect.sort();
            assert_eq!(rels, expect, "seed {seed}");
            // input order does not matter
            let mut rev = objs.clone();
            rev.reverse();
            assert_eq!(infer_relations(&rev, &scene.table, &reg, &cfg()).unwrap(), rels);
        }
    }

    #[test]
    fn exact_relations_have_zero_residuals() {
        let reg = ModelRegistry::default_household();
        let scene = generate_scene(18, &reg, 3).unwrap();
        let objs: Vec<Placement> = scene.objects.iter().map(|o| at(o.id, o.class_id, o.pose)).collect();
        let recs = relation_records(&scene.contacts, &objs, &scene.table, &reg).unwrap();
        for r in &recs {
            assert!(r.residuals.iter().all(|v| v.abs() < 1e-9), "{r:?}");
        }
        let json = serde_json::to_value(&recs).unwrap();
        assert!(json[0]["kind"].is_string() && json[0]["residuals"].is_array());
    }

    fn random_polygon(rng: &mut impl rand::Rng) -> Vec<P2> {
        let c = P2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let pts: Vec<P2> = (0..rng.random_range(3..8))
            .map(|_| c + P2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
            .collect();
        convex_hull(&pts)
    }

    fn point_in(poly: &[P2], p: &P2) -> bool {
        crate::geometry::planar::inside_margin(poly, p) >= 0.0
    }

    /// Minimum distance from `p` to the polygon outline.
    fn boundary_distance(poly: &[P2], p: &P2) -> f64 {
        (0..poly.len())
            .map(|i| {
                let a = poly[i];
                let e = poly[(i + 1) % poly.len()] - a;
                let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                (a + e * t - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn polygon_sat_matches_grid_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let step = 0.0025;
        let mut checked = 0;
        while checked < 500 {
            let a = random_polygon(&mut rng);
            let b = random_polygon(&mut rng);
            if a.len() < 3 || b.len() < 3 {
                continue;
            }
            // dense grid: overlap iff some sample lies in both
            let mut hit = false;
            let mut near_tangent = false;
            for i in -200..=200 {
                for j in -200..=200 {
                    let p = P2::new(i as f64 * step, j as f64 * step);
                    let (ina, inb) = (point_in(&a, &p), point_in(&b, &p));
                    if ina && inb {
                        hit = true;
                    }
                    if (ina || boundary_distance(&a, &p) < step) && (inb || boundary_distance(&b, &p) < step) && !(ina && inb) {
                        near_tangent = true;
                    }
                }
            }
            if near_tangent && !hit {
                continue;
            }
            checked += 1;
            assert_eq!(sat_overlap(&a, &b), hit);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn predicates_invariant_under_rigid_motion(
            rx in -3.0..3.0f64, ry in -3.0..3.0f64, rz in -3.0..3.0f64,
            tx in -1.0..1.0f64, ty in -1.0..1.0f64, tz in -1.0..1.0f64,
            tilt in 0.0..FRAC_PI_4, gap in 0.0..0.02f64,
        ) {
            let motion = Pose::from_axis_angle(Vector3::new(rx, ry, rz), Vector3::new(tx, ty, tz));
            let r = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), tilt);
            let table = plane(Vector3::zeros(), Vector3::z());
            let bottom = plane(Vector3::new(0.0, 0.0, gap), r * -Vector3::z());
            let lying = curved(Vector3::new(0.0, 0.0, 0.03 + gap), r * Vector3::x(), 0.03);
            let base = cfg();
            let moved = RelationConfig { gravity: motion.rotate_vector(&base.gravity), ..base.clone() };
            let m = |f: &SurfaceFeature| f.transformed(&motion);
            prop_assert_eq!(check_p2p(&table, &bottom, &base), check_p2p(&m(&table), &m(&bottom), &moved));
            let flat = plane(Vector3::new(0.0, 0.0, gap), -Vector3::z());
            prop_assert_eq!(check_p2p(&table, &flat, &base), check_p2p(&flat, &table, &base));
            prop_assert_eq!(check_p2c(&table, &lying, &base), check_p2c(&m(&table), &m(&lying), &moved));
            prop_assert_eq!(test_pair(&table, &bottom, &base).is_some(), test_pair(&m(&table), &m(&bottom), &moved).is_some());
            prop_assert_eq!(test_pair(&table, &lying, &base).is_some(), test_pair(&m(&table), &m(&lying), &moved).is_some());
        }
    }
}
