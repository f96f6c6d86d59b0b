//! Oriented bounding box overlap by separating axes, and track merging.

use nalgebra::Vector3;

use super::{false_positive_score, AssocConfig, TrackedObject};
use crate::geometry::{ModelRegistry, ObjectModel, Pose};

fn world_corners(model: &ObjectModel, pose: &Pose) -> [Vector3<f64>; 8] {
    model.bbox_corners().map(|c| pose.transform_point(&c))
}

fn interval(points: &[Vector3<f64>; 8], axis: &Vector3<f64>) -> (f64, f64) {
    points
        .iter()
        .map(|p| p.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Collision ratio of two oriented boxes: along each of the six face
/// normals, the projected overlap divided by the shorter projected extent;
/// the ratio is the minimum over those axes. It is 0 when any separating
/// axis exists, including the nine edge-pair directions, so `ratio > 0`
/// exactly when the boxes intersect.
pub fn obb_collision_ratio(ma: &ObjectModel, pa: &Pose, mb: &ObjectModel, pb: &Pose) -> f64 {
    let ca = world_corners(ma, pa);
    let cb = world_corners(mb, pb);
    let ra = pa.rotation().to_rotation_matrix();
    let rb = pb.rotation().to_rotation_matrix();
    let face_axes: Vec<Vector3<f64>> = (0..3)
        .map(|i| ra.matrix().column(i).into_owned())
        .chain((0..3).map(|i| rb.matrix().column(i).into_owned()))
        .collect();
    let mut ratio = f64::INFINITY;
    for axis in &face_axes {
        let (a0, a1) = interval(&ca, axis);
        let (b0, b1) = interval(&cb, axis);
        let overlap = a1.min(b1) - a0.max(b0);
        if overlap <= 0.0 {
            return 0.0;
        }
        ratio = ratio.min(overlap / (a1 - a0).min(b1 - b0));
    }
    for i in 0..3 {
        for j in 3..6 {
            let axis = face_axes[i].cross(&face_axes[j]);
            let n = axis.norm();
            if n < 1e-9 {
                continue;
            }
            let axis = axis / n;
            let (a0, a1) = interval(&ca, &axis);
            let (b0, b1) = interval(&cb, &axis);
            if a1.min(b1) - a0.max(b0) <= 0.0 {
                return 0.0;
            }
        }
    }
    ratio.min(1.0)
}

/// Merges every pair of tracks whose boxes overlap by more than the
/// configured ratio. The track with the higher false-positive score is
/// removed and its measurement log moves to the other. Pairs are visited
/// in id order. Returns `(kept, removed)` id pairs.
pub fn merge_overlapping(objects: &mut Vec<TrackedObject>, registry: &ModelRegistry, cfg: &AssocConfig) -> Vec<(u32, u32)> {
    objects.sort_by_key(|o| o.id);
    let mut merges = Vec::new();
    let mut alive = vec![true; objects.len()];
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            if !alive[i] || !alive[j] {
                continue;
            }
            let (Ok(ma), Ok(mb)) = (registry.get(objects[i].class_id), registry.get(objects[j].class_id)) else {
                continue;
            };
            let ratio = obb_collision_ratio(ma, &objects[i].pose, mb, &objects[j].pose);
            if ratio <= cfg.merge_collision_threshold {
                continue;
            }
            let fi = false_positive_score(&objects[i]).unwrap_or(1.0);
            let fj = false_positive_score(&objects[j]).unwrap_or(1.0);
            // ties keep the older (lower id) track
            let (keep, drop) = if fj < fi { (j, i) } else { (i, j) };
            let victim = objects[drop].clone();
            objects[keep].absorb(&victim);
            alive[drop] = false;
            merges.push((objects[keep].id, victim.id));
        }
    }
    let mut k = 0;
    objects.retain(|_| {
        k += 1;
        alive[k - 1]
    });
    merges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn boxm(e: [f64; 3]) -> ObjectModel {
        ObjectModel::new(1, "b", Shape::Box { extents: e }, 0.01).unwrap()
    }

    #[test]
    fn separated_boxes_have_zero_ratio() {
        let m = boxm([0.1, 0.1, 0.1]);
        let a = Pose::identity();
        let b = Pose::from_translation(Vector3::new(0.2, 0.0, 0.0));
        assert_eq!(obb_collision_ratio(&m, &a, &m, &b), 0.0);
    }

    #[test]
    fn coincident_boxes_have_unit_ratio() {
        let m = boxm([0.1, 0.2, 0.05]);
        let p = Pose::from_axis_angle(Vector3::new(0.3, 0.1, -0.2), Vector3::new(0.1, 0.2, 0.3));
        assert!((obb_collision_ratio(&m, &p, &m, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_overlap_along_one_axis() {
        let m = boxm([0.1, 0.1, 0.1]);
        let b = Pose::from_translation(Vector3::new(0.05, 0.0, 0.0));
        assert!((obb_collision_ratio(&m, &Pose::identity(), &m, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_on_configuration_needs_cross_axes() {
        // two long bars rotated 45 degrees about different axes, close
        // along the diagonal but not touching
        let m = boxm([0.4, 0.02, 0.02]);
        let a = Pose::from_axis_angle(Vector3::x() * std::f64::consts::FRAC_PI_4, Vector3::zeros());
        let b = Pose::new(
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2)
                * nalgebra::UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_4),
            Vector3::new(0.0, 0.0, 0.0295),
        );
        assert_eq!(obb_collision_ratio(&m, &a, &m, &b), 0.0);
        let closer = Pose::new(*b.rotation(), Vector3::new(0.0, 0.0, 0.027));
        assert!(obb_collision_ratio(&m, &a, &m, &closer) > 0.0);
    }

    #[test]
    fn ratio_agrees_with_containment_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m1 = boxm([0.1, 0.06, 0.03]);
        let m2 = boxm([0.05, 0.12, 0.08]);
        let mut checked = 0;
        while checked < 100 {
            let a = Pose::random(&mut rng, 0.08);
            let b = Pose::random(&mut rng, 0.08);
            // surface samples of one box inside the other; dilated and
            // eroded shapes bracket the tangent cases
            let inside = |ma: &ObjectModel, pa: &Pose, mb: &ObjectModel, pb: &Pose, off: f64| {
                let rel = pb.inverse().compose(pa);
                ma.surface_points.iter().any(|p| mb.shape.signed_distance(&rel.transform_point(p)) <= off)
            };
            let hit_loose = inside(&m1, &a, &m2, &b, 0.01) || inside(&m2, &b, &m1, &a, 0.01);
            let hit_tight = inside(&m1, &a, &m2, &b, -0.01) || inside(&m2, &b, &m1, &a, -0.01);
            if hit_loose != hit_tight {
                continue;
            }
            checked += 1;
            assert_eq!(obb_collision_ratio(&m1, &a, &m2, &b) > 0.0, hit_tight);
        }
    }
}
