use nalgebra::{Quaternion, UnitQuaternion, Vector3, Vector6};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::lie::{Iso, Quat};

/// Rigid transform in SE(3): unit quaternion plus translation in meters.
///
/// The quaternion is kept normalized with `w >= 0` after every operation so
/// that equal rotations have a single representation.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        let t = self.translation;
        write!(
            f,
            "Pose(q=[{:.6}, {:.6}, {:.6}, {:.6}], t=[{:.6}, {:.6}, {:.6}])",
            q.w, q.i, q.j, q.k, t.x, t.y, t.z
        )
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let q = q.into_inner();
    let q = if q.w < 0.0 { -q } else { q };
    UnitQuaternion::new_normalize(q)
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::from_scaled_axis(axis_angle), translation)
    }

    /// Builds from raw `[w, x, y, z]` and `[x, y, z]`; the quaternion is normalized.
    pub fn from_arrays(q: [f64; 4], t: [f64; 3]) -> Self {
        Self::new(
            UnitQuaternion::new_normalize(Quaternion::new(q[0], q[1], q[2], q[3])),
            Vector3::from(t),
        )
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion_array(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    /// `self * other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.translation + self.rotation * other.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose::new(inv, -(inv * self.translation))
    }

    /// `inverse(self) * other`, the pose of `other` seen from `self`.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Right retraction `self * Exp(delta)` with `delta = [rot(3), trans(3)]`;
    /// the translation increment is expressed in the body frame.
    pub fn retract(&self, delta: &Vector6<f64>) -> Pose {
        let omega = Vector3::new(delta[0], delta[1], delta[2]);
        let rho = Vector3::new(delta[3], delta[4], delta[5]);
        Pose::new(
            self.rotation * UnitQuaternion::from_scaled_axis(omega),
            self.translation + self.rotation * rho,
        )
    }

    /// Inverse of [`Pose::retract`].
    pub fn local(&self, other: &Pose) -> Vector6<f64> {
        let omega = (self.rotation.inverse() * other.rotation).scaled_axis();
        let rho = self.rotation.inverse() * (other.translation - self.translation);
        Vector6::new(omega.x, omega.y, omega.z, rho.x, rho.y, rho.z)
    }

    /// Tangent coordinates on SO(3) x R^3: axis-angle rotation then translation.
    pub fn log6(&self) -> Vector6<f64> {
        let w = self.rotation.scaled_axis();
        let t = self.translation;
        Vector6::new(w.x, w.y, w.z, t.x, t.y, t.z)
    }

    pub fn angle_to(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    pub fn to_iso(&self) -> Iso<f64> {
        let q = self.rotation.quaternion();
        Iso {
            q: Quat {
                w: q.w,
                x: q.i,
                y: q.j,
                z: q.k,
            },
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
    }

    pub fn from_iso(iso: &Iso<f64>) -> Pose {
        Pose::from_arrays([iso.q.w, iso.q.x, iso.q.y, iso.q.z], iso.t)
    }

    /// Uniformly random rotation, translation uniform in `[-extent, extent]^3`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, extent: f64) -> Pose {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let t = Vector3::new(
            rng.random_range(-extent..=extent),
            rng.random_range(-extent..=extent),
            rng.random_range(-extent..=extent),
        );
        Pose::new(UnitQuaternion::new_normalize(q), t)
    }

    /// Applies a small Gaussian perturbation: the rotation by an axis-angle
    /// whose angle is `N(0, rot_sigma)` about a uniformly random axis, the
    /// translation by isotropic `N(0, trans_sigma)` per axis.
    pub fn perturbed<R: Rng + ?Sized>(&self, rng: &mut R, rot_sigma: f64, trans_sigma: f64) -> Pose {
        let mut out = *self;
        if rot_sigma > 0.0 {
            let axis = random_unit_vector(rng);
            let angle: f64 = rot_sigma * rng.sample::<f64, _>(StandardNormal);
            out = Pose::new(
                UnitQuaternion::from_scaled_axis(axis * angle) * out.rotation,
                out.translation,
            );
        }
        if trans_sigma > 0.0 {
            let d = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) * trans_sigma;
            out = Pose::new(out.rotation, out.translation + d);
        }
        out
    }
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            q: self.quaternion_array(),
            t: self.translation_array(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        let [w, x, y, z] = r.q;
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if w >= 0.0 && (norm - 1.0).abs() < 1e-12 {
            // already canonical: keep the stored bits
            Ok(Pose {
                rotation: UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
                translation: Vector3::from(r.t),
            })
        } else {
            Ok(Pose::from_arrays(r.q, r.t))
        }
    }
}
