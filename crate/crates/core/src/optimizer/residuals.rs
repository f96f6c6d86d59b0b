//! Factor residuals, generic over the scalar so one implementation gives
//! both values and autodiff Jacobians.
//!
//! Pose errors are 6-vectors `[rotation (axis-angle), translation]`.

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::geometry::lie::{self, lift_iso, Iso, V3};
use crate::geometry::{Pose, SurfaceFeature};
use crate::relations::ContactKind;

fn pack<T: Real>(rot: V3<T>, t: V3<T>) -> [T; 6] {
    [rot[0], rot[1], rot[2], t[0], t[1], t[2]]
}

/// `log(relative(relative(x_prev, x_t), odo))`.
pub fn odometry_error<T: Real>(x_prev: &Iso<T>, x_t: &Iso<T>, odo: &Iso<f64>) -> [T; 6] {
    x_prev.relative(x_t).relative(&lift_iso(odo)).log6()
}

/// `log(relative(relative(x_t, o), z))`. With a symmetry axis (object body
/// frame) the rotation about it is removed by a swing-twist split, so the
/// error is exactly invariant to rotating `z` about that axis.
pub fn measurement_error<T: Real>(x_t: &Iso<T>, o: &Iso<T>, z: &Iso<f64>, symmetry: Option<[f64; 3]>) -> [T; 6] {
    let e = x_t.relative(o).relative(&lift_iso(z));
    let rot = match symmetry {
        Some(axis) => e.q.swing_log(axis),
        None => e.q.log(),
    };
    pack(rot, e.t)
}

/// `log(relative(prior, o))`.
pub fn prior_error<T: Real>(o: &Iso<T>, prior: &Iso<f64>) -> [T; 6] {
    lift_iso::<T>(prior).relative(o).log6()
}

/// Body-frame geometry of one surface feature, as needed by contact terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGeom {
    pub center: [f64; 3],
    /// Plane normal or curved-surface axis.
    pub direction: [f64; 3],
    pub radius: f64,
}

impl FeatureGeom {
    pub fn of(f: &SurfaceFeature) -> Self {
        Self {
            center: f.center().into(),
            direction: f.direction().into(),
            radius: f.radius(),
        }
    }
}

struct WorldFeature<T> {
    c: V3<T>,
    n: V3<T>,
    r: f64,
}

fn world<T: Real>(pose: &Iso<T>, f: &FeatureGeom) -> WorldFeature<T> {
    WorldFeature {
        c: pose.apply(lie::lift3(f.center)),
        n: pose.rotate(lie::lift3(f.direction)),
        r: f.radius,
    }
}

/// Signs fixed when a contact factor is created so that the squared
/// residual stays smooth: the P2C side of the plane the curved feature
/// lies on, and the C2C orientation of the common normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactSigns {
    pub side: f64,
}

impl Default for ContactSigns {
    fn default() -> Self {
        Self { side: 1.0 }
    }
}

/// Unweighted contact terms. P2P: `[N_a.N_b + 1, N_a.(C_b - C_a)]`;
/// P2C: `[N_p.N_c, s N_p.(C_c - C_p) - r]`; C2C: `[s n.(C_b - C_a) - (r_a + r_b)]`
/// with `n = normalize(N_a x N_b)`. Only the first `len(kind)` entries
/// are meaningful.
pub fn contact_terms<T: Real>(
    kind: ContactKind,
    pa: &Iso<T>,
    fa: &FeatureGeom,
    pb: &Iso<T>,
    fb: &FeatureGeom,
    signs: ContactSigns,
) -> [T; 2] {
    let a = world(pa, fa);
    let b = world(pb, fb);
    let d = lie::sub(b.c, a.c);
    match kind {
        ContactKind::P2P => [lie::dot(a.n, b.n) + T::one(), lie::dot(a.n, d)],
        ContactKind::P2C => [
            lie::dot(a.n, b.n),
            lie::dot(a.n, d).scale(signs.side) - T::cst(b.r),
        ],
        ContactKind::C2C => {
            let cr = lie::cross(a.n, b.n);
            let n = lie::scale(cr, T::one() / lie::norm(cr));
            [lie::dot(n, d).scale(signs.side) - T::cst(a.r + b.r), T::zero()]
        }
    }
}

/// Number of meaningful entries in [`contact_terms`].
pub fn contact_len(kind: ContactKind) -> usize {
    match kind {
        ContactKind::C2C => 1,
        _ => 2,
    }
}

/// Number of meaningful entries in [`contact_residual`].
pub fn contact_residual_len(kind: ContactKind) -> usize {
    match kind {
        ContactKind::P2P => 4,
        ContactKind::P2C => 2,
        ContactKind::C2C => 1,
    }
}

/// Signs that make the current configuration's distance terms positive.
pub fn contact_signs(kind: ContactKind, pa: &Pose, fa: &FeatureGeom, pb: &Pose, fb: &FeatureGeom) -> ContactSigns {
    let ca = pa.transform_point(&Vector3::from(fa.center));
    let cb = pb.transform_point(&Vector3::from(fb.center));
    let na = pa.rotate_vector(&Vector3::from(fa.direction));
    let nb = pb.rotate_vector(&Vector3::from(fb.direction));
    let side = match kind {
        ContactKind::P2P => 1.0,
        ContactKind::P2C => na.dot(&(cb - ca)),
        ContactKind::C2C => na.cross(&nb).dot(&(cb - ca)),
    };
    ContactSigns {
        side: if side < 0.0 { -1.0 } else { 1.0 },
    }
}

/// Weighted contact residual for least squares. P2P direction uses the
/// vector `sqrt(w_q / 2) (N_a + N_b)`, whose squared norm is exactly
/// `w_q (N_a.N_b + 1)` and which stays linear in the tilt near contact;
/// the other terms are `sqrt(w)` times the scalar terms of
/// [`contact_terms`]. Entries: P2P `[dir(3), dist]`, P2C `[dir, dist]`,
/// C2C `[dist]`.
#[allow(clippy::too_many_arguments)]
pub fn contact_residual<T: Real>(
    kind: ContactKind,
    pa: &Iso<T>,
    fa: &FeatureGeom,
    pb: &Iso<T>,
    fb: &FeatureGeom,
    signs: ContactSigns,
    w_p: f64,
    w_q: f64,
) -> [T; 4] {
    let r = contact_terms(kind, pa, fa, pb, fb, signs);
    match kind {
        ContactKind::P2P => {
            let na = pa.rotate(lie::lift3(fa.direction));
            let nb = pb.rotate(lie::lift3(fb.direction));
            let s = (0.5 * w_q).sqrt();
            let sum = lie::add(na, nb);
            [sum[0].scale(s), sum[1].scale(s), sum[2].scale(s), r[1].scale(w_p.sqrt())]
        }
        ContactKind::P2C => [r[0].scale(w_q.sqrt()), r[1].scale(w_p.sqrt()), T::zero(), T::zero()],
        ContactKind::C2C => [r[0].scale(w_p.sqrt()), T::zero(), T::zero(), T::zero()],
    }
}

pub fn odometry_residual(x_prev: &Pose, x_t: &Pose, odo: &Pose) -> Vector6<f64> {
    Vector6::from(odometry_error(&x_prev.to_iso(), &x_t.to_iso(), &odo.to_iso()))
}

pub fn measurement_residual(x_t: &Pose, o: &Pose, z: &Pose, symmetry: Option<Vector3<f64>>) -> Vector6<f64> {
    Vector6::from(measurement_error(&x_t.to_iso(), &o.to_iso(), &z.to_iso(), symmetry.map(Into::into)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn consistent_odometry_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = Pose::random(&mut rng, 1.0);
            let t = Pose::random(&mut rng, 0.3);
            assert!(odometry_residual(&a, &a.compose(&t), &t).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_translation_odometry() {
        let a = Pose::identity();
        let b = Pose::from_translation(Vector3::new(0.01, 0.0, 0.0));
        let r = odometry_residual(&a, &b, &Pose::identity());
        assert!((r.fixed_rows::<3>(3).norm() - 0.01).abs() < 1e-15);
        assert!(r.fixed_rows::<3>(0).norm() < 1e-15);
    }

    #[test]
    fn odometry_error_matches_matrix_log() {
        // independent route: rotation matrices and nalgebra's log
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = Pose::random(&mut rng, 1.0);
            let b = Pose::random(&mut rng, 1.0);
            let t = Pose::random(&mut rng, 1.0);
            let (ra, rb, rt) = (
                a.rotation().to_rotation_matrix(),
                b.rotation().to_rotation_matrix(),
                t.rotation().to_rotation_matrix(),
            );
            let rel_r = ra.inverse() * rb;
            let rel_t = ra.inverse() * (b.translation() - a.translation());
            let e_r = rel_r.inverse() * rt;
            let e_t = rel_r.inverse() * (t.translation() - rel_t);
            let r = odometry_residual(&a, &b, &t);
            assert!((r.fixed_rows::<3>(0) - e_r.scaled_axis()).norm() < 1e-9);
            assert!((r.fixed_rows::<3>(3) - e_t).norm() < 1e-9);
        }
    }

    #[test]
    fn symmetric_measurement_ignores_twist() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = Pose::random(&mut rng, 1.0);
            let o = Pose::random(&mut rng, 1.0);
            let z = x.relative(&o).compose(&Pose::from_axis_angle(Vector3::new(0.01, -0.02, 0.03), Vector3::zeros()));
            let axis = Vector3::z();
            let base = measurement_residual(&x, &o, &z, Some(axis));
            for alpha in [0.3, 1.0, 2.5, -3.0] {
                let zt = z.compose(&Pose::from_axis_angle(axis * alpha, Vector3::zeros()));
                let r = measurement_residual(&x, &o, &zt, Some(axis));
                assert!((r - base).norm() < 1e-9, "{alpha}");
            }
            let pure = x.relative(&o).compose(&Pose::from_axis_angle(axis * 1.2, Vector3::zeros()));
            assert!(measurement_residual(&x, &o, &pure, Some(axis)).norm() < 1e-9);
            assert!(measurement_residual(&x, &o, &pure, None).norm() > 1.0);
        }
    }

    #[test]
    fn floating_cube_distance_term() {
        let cube_bottom = FeatureGeom {
            center: [0.0, 0.0, -0.05],
            direction: [0.0, 0.0, -1.0],
            radius: 0.0,
        };
        let table = FeatureGeom {
            center: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
            radius: 0.0,
        };
        let lifted = Pose::from_translation(Vector3::new(0.0, 0.0, 0.055)).to_iso();
        let id = Pose::identity().to_iso();
        let r = contact_residual::<f64>(ContactKind::P2P, &id, &table, &lifted, &cube_bottom, ContactSigns::default(), 1e4, 1e2);
        assert!(r[..3].iter().all(|v| v.abs() < 1e-15));
        assert!((r[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_contacts_have_zero_terms() {
        let id = Pose::identity().to_iso();
        let plane = FeatureGeom {
            center: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
            radius: 0.0,
        };
        let lying = FeatureGeom {
            center: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
            radius: 0.03,
        };
        let pose = Pose::new(
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2),
            Vector3::new(0.1, 0.2, 0.03),
        );
        let s = contact_signs(ContactKind::P2C, &Pose::identity(), &plane, &pose, &lying);
        let r = contact_terms::<f64>(ContactKind::P2C, &id, &plane, &pose.to_iso(), &lying, s);
        assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);

        let cyl = FeatureGeom {
            center: [0.0; 3],
            direction: [1.0, 0.0, 0.0],
            radius: 0.02,
        };
        let cyl_b = FeatureGeom {
            direction: [0.0, 1.0, 0.0],
            ..cyl
        };
        let above = Pose::from_translation(Vector3::new(0.0, 0.0, 0.04));
        let s = contact_signs(ContactKind::C2C, &Pose::identity(), &cyl, &above, &cyl_b);
        let r = contact_terms::<f64>(ContactKind::C2C, &id, &cyl, &above.to_iso(), &cyl_b, s);
        assert!(r[0].abs() < 1e-15);
    }

    #[test]
    fn p2p_direction_vector_matches_scalar_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fa = FeatureGeom {
            center: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
            radius: 0.0,
        };
        let fb = FeatureGeom {
            center: [0.0, 0.0, -0.05],
            direction: [0.0, 0.0, -1.0],
            radius: 0.0,
        };
        for _ in 0..50 {
            let a = Pose::random(&mut rng, 0.2);
            let b = Pose::random(&mut rng, 0.2);
            let s = ContactSigns::default();
            let t = contact_terms::<f64>(ContactKind::P2P, &a.to_iso(), &fa, &b.to_iso(), &fb, s);
            let r = contact_residual::<f64>(ContactKind::P2P, &a.to_iso(), &fa, &b.to_iso(), &fb, s, 4.0, 9.0);
            let dir2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            assert!((dir2 - 9.0 * t[0]).abs() < 1e-12);
            assert!((r[3] - 2.0 * t[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_terms_are_rigid_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fa = FeatureGeom {
            center: [0.01, 0.02, 0.03],
            direction: [0.0, 0.6, 0.8],
            radius: 0.0,
        };
        let fb = FeatureGeom {
            center: [-0.02, 0.0, 0.01],
            direction: [1.0, 0.0, 0.0],
            radius: 0.02,
        };
        for kind in [ContactKind::P2P, ContactKind::P2C, ContactKind::C2C] {
            let a = Pose::random(&mut rng, 0.2);
            let b = Pose::random(&mut rng, 0.2);
            let g = Pose::random(&mut rng, 1.0);
            let s = contact_signs(kind, &a, &fa, &b, &fb);
            let r1 = contact_terms::<f64>(kind, &a.to_iso(), &fa, &b.to_iso(), &fb, s);
            let r2 = contact_terms::<f64>(kind, &g.compose(&a).to_iso(), &fa, &g.compose(&b).to_iso(), &fb, s);
            assert!((r1[0] - r2[0]).abs() < 1e-12 && (r1[1] - r2[1]).abs() < 1e-12);
        }
    }
}
