//! Pairwise interpenetration depth from surface samples and exact signed
//! distances.

use crate::geometry::{ObjectModel, Pose};

/// Deepest penetration (meters, `>= 0`) of either object's surface samples
/// into the other object's volume.
pub fn max_penetration(ma: &ObjectModel, pa: &Pose, mb: &ObjectModel, pb: &Pose) -> f64 {
    one_way(ma, pa, mb, pb).max(one_way(mb, pb, ma, pa))
}

fn one_way(ma: &ObjectModel, pa: &Pose, mb: &ObjectModel, pb: &Pose) -> f64 {
    let rb = pb.inverse();
    let b_in_a = rb.compose(pa);
    // cheap rejection on bounding spheres
    let ra = ma.half_extents().norm();
    let rbn = mb.half_extents().norm();
    if b_in_a.translation().norm() > ra + rbn {
        return 0.0;
    }
    ma.surface_points
        .iter()
        .map(|p| -mb.shape.signed_distance(&b_in_a.transform_point(p)))
        .fold(0.0, f64::max)
}

/// Penetration of an object below the horizontal plane `z = 0`.
pub fn table_penetration(m: &ObjectModel, pose: &Pose) -> f64 {
    m.surface_points
        .iter()
        .map(|p| -pose.transform_point(p).z)
        .fold(0.0, f64::max)
}
