//! Scalar-generic SO(3)/SE(3) arithmetic used by residuals.
//!
//! Mirrors [`Pose`](super::Pose) but works on any [`Real`], so the same code
//! path yields residual values (`f64`) and Jacobians ([`Jet`]).

use crate::autodiff::{Jet, Real};

pub type V3<T> = [T; 3];

#[inline]
pub fn add<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: V3<T>, s: T) -> V3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: V3<T>, b: V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: V3<T>, b: V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm<T: Real>(a: V3<T>) -> T {
    dot(a, a).sqrt()
}

pub fn lift3<T: Real>(a: [f64; 3]) -> V3<T> {
    [T::cst(a[0]), T::cst(a[1]), T::cst(a[2])]
}

pub fn value3<T: Real>(a: V3<T>) -> [f64; 3] {
    [a[0].value(), a[1].value(), a[2].value()]
}

#[derive(Clone, Copy, Debug)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    pub fn vec(&self) -> V3<T> {
        [self.x, self.y, self.z]
    }

    pub fn mul(&self, o: &Quat<T>) -> Quat<T> {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn conj(&self) -> Quat<T> {
        Quat {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Rotates `v` by this (unit) quaternion.
    pub fn rotate(&self, v: V3<T>) -> V3<T> {
        let u = self.vec();
        let t = scale(cross(u, v), T::cst(2.0));
        add(add(v, scale(t, self.w)), cross(u, t))
    }

    pub fn normalized(&self) -> Quat<T> {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Quat {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Exponential map from an axis-angle vector.
    pub fn exp(omega: V3<T>) -> Quat<T> {
        let theta2 = dot(omega, omega);
        let (w, s) = if theta2.value() < 1e-12 {
            (
                T::one() - theta2.scale(1.0 / 8.0),
                T::cst(0.5) - theta2.scale(1.0 / 48.0),
            )
        } else {
            let theta = theta2.sqrt();
            let half = theta.scale(0.5);
            (half.cos(), half.sin() / theta)
        };
        Quat {
            w,
            x: omega[0] * s,
            y: omega[1] * s,
            z: omega[2] * s,
        }
    }

    /// Logarithm map to the axis-angle vector with angle in [0, pi].
    pub fn log(&self) -> V3<T> {
        let q = if self.w.value() < 0.0 {
            Quat {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            *self
        };
        let v = q.vec();
        let n2 = dot(v, v);
        if n2.value() < 1e-16 {
            // first order: 2 v / w
            scale(v, T::cst(2.0) / q.w)
        } else {
            let n = n2.sqrt();
            let theta = n.atan2(q.w).scale(2.0);
            scale(v, theta / n)
        }
    }

    /// Removes the twist about the body-frame `axis` and returns the log of
    /// the remaining swing rotation. The result is orthogonal to `axis` and
    /// invariant under `q -> q * Rot(axis, alpha)`.
    pub fn swing_log(&self, axis: [f64; 3]) -> V3<T> {
        let a = lift3::<T>(axis);
        let proj = dot(self.vec(), a);
        let n2 = self.w * self.w + proj * proj;
        if n2.value() < 1e-18 {
            // half-turn about an axis orthogonal to `axis`: no twist part
            return self.log();
        }
        let twist = Quat {
            w: self.w,
            x: a[0] * proj,
            y: a[1] * proj,
            z: a[2] * proj,
        }
        .normalized();
        self.mul(&twist.conj()).log()
    }
}

/// Rigid transform over a generic scalar.
#[derive(Clone, Copy, Debug)]
pub struct Iso<T> {
    pub q: Quat<T>,
    pub t: V3<T>,
}

impl<T: Real> Iso<T> {
    pub fn compose(&self, o: &Iso<T>) -> Iso<T> {
        Iso {
            q: self.q.mul(&o.q),
            t: add(self.t, self.q.rotate(o.t)),
        }
    }

    pub fn inverse(&self) -> Iso<T> {
        let qi = self.q.conj();
        let t = qi.rotate(self.t);
        Iso {
            q: qi,
            t: [-t[0], -t[1], -t[2]],
        }
    }

    /// `inverse(self) * o`.
    pub fn relative(&self, o: &Iso<T>) -> Iso<T> {
        self.inverse().compose(o)
    }

    pub fn apply(&self, p: V3<T>) -> V3<T> {
        add(self.q.rotate(p), self.t)
    }

    pub fn rotate(&self, v: V3<T>) -> V3<T> {
        self.q.rotate(v)
    }

    /// Tangent coordinates `[rot(3), trans(3)]` on SO(3) x R^3.
    pub fn log6(&self) -> [T; 6] {
        let w = self.q.log();
        [w[0], w[1], w[2], self.t[0], self.t[1], self.t[2]]
    }
}

/// Seeds six tangent directions starting at `offset` on top of `base`,
/// i.e. returns `base (+) delta` evaluated at `delta = 0` with jets.
pub fn seeded(base: &Iso<f64>, offset: usize) -> Iso<Jet> {
    let omega = [
        Jet::variable(0.0, offset),
        Jet::variable(0.0, offset + 1),
        Jet::variable(0.0, offset + 2),
    ];
    let rho = [
        Jet::variable(0.0, offset + 3),
        Jet::variable(0.0, offset + 4),
        Jet::variable(0.0, offset + 5),
    ];
    let q = lift_quat(&base.q).mul(&Quat::exp(omega));
    let t = add(lift3(base.t), lift_quat(&base.q).rotate(rho));
    Iso { q, t }
}

pub fn lift_quat<T: Real>(q: &Quat<f64>) -> Quat<T> {
    Quat {
        w: T::cst(q.w),
        x: T::cst(q.x),
        y: T::cst(q.y),
        z: T::cst(q.z),
    }
}

pub fn lift_iso<T: Real>(p: &Iso<f64>) -> Iso<T> {
    Iso {
        q: lift_quat(&p.q),
        t: lift3(p.t),
    }
}
