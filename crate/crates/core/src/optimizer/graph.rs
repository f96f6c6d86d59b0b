//! Factor graph over robot and object poses.

use nalgebra::{Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::residuals::{
    contact_residual, contact_residual_len, measurement_error, odometry_error, prior_error, ContactSigns, FeatureGeom,
};
use super::OptimizerError;
use crate::autodiff::{Jet, Real, JET_DIM};
use crate::geometry::lie::{lift_iso, seeded, Iso};
use crate::geometry::Pose;
use crate::relations::{ContactRelation, TABLE_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKey {
    Robot(usize),
    Object(u32),
}

/// Upper-triangular `U` with `U^T U` equal to the inverse of `cov`.
pub fn sqrt_information(cov: &Matrix6<f64>) -> Result<Matrix6<f64>, OptimizerError> {
    let info = cov
        .try_inverse()
        .ok_or_else(|| OptimizerError::Config("covariance is singular".into()))?;
    let l = info
        .cholesky()
        .ok_or_else(|| OptimizerError::Config("covariance is not positive definite".into()))?
        .unpack();
    Ok(l.transpose())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Odometry {
        from: usize,
        to: usize,
        odo: Pose,
        sqrt_info: Matrix6<f64>,
    },
    Measurement {
        t: usize,
        object: u32,
        z: Pose,
        sqrt_info: Matrix6<f64>,
        /// Body-frame symmetry axis of the object model.
        symmetry: Option<Vector3<f64>>,
    },
    Prior {
        key: VarKey,
        prior: Pose,
        sqrt_info: Matrix6<f64>,
    },
    /// Contact between two objects, or an object and the fixed table.
    Contact {
        relation: ContactRelation,
        fa: FeatureGeom,
        fb: FeatureGeom,
        signs: ContactSigns,
        w_p: f64,
        w_q: f64,
    },
}

fn member(id: u32) -> Option<VarKey> {
    (id != TABLE_ID).then_some(VarKey::Object(id))
}

impl Factor {
    /// Variables the factor touches; `None` stands for the fixed table.
    pub fn members(&self) -> [Option<VarKey>; 2] {
        match self {
            Factor::Odometry { from, to, .. } => [Some(VarKey::Robot(*from)), Some(VarKey::Robot(*to))],
            Factor::Measurement { t, object, .. } => [Some(VarKey::Robot(*t)), Some(VarKey::Object(*object))],
            Factor::Prior { key, .. } => [Some(*key), None],
            Factor::Contact { relation, .. } => [member(relation.obj_a), member(relation.obj_b)],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factor::Contact { relation, .. } => contact_residual_len(relation.kind),
            _ => 6,
        }
    }

    /// Whitened residual at the given member poses (the second is ignored
    /// for priors).
    pub fn residual<T: Real>(&self, a: &Iso<T>, b: &Iso<T>) -> [T; 6] {
        let raw: [T; 6] = match self {
            Factor::Odometry { odo, .. } => odometry_error(a, b, &odo.to_iso()),
            Factor::Measurement { z, symmetry, .. } => measurement_error(a, b, &z.to_iso(), symmetry.map(Into::into)),
            Factor::Prior { prior, .. } => prior_error(a, &prior.to_iso()),
            Factor::Contact {
                relation,
                fa,
                fb,
                signs,
                w_p,
                w_q,
            } => {
                let r = contact_residual(relation.kind, a, fa, b, fb, *signs, *w_p, *w_q);
                return [r[0], r[1], r[2], r[3], T::zero(), T::zero()];
            }
        };
        let u = match self {
            Factor::Odometry { sqrt_info, .. } | Factor::Measurement { sqrt_info, .. } | Factor::Prior { sqrt_info, .. } => {
                sqrt_info
            }
            Factor::Contact { .. } => unreachable!(),
        };
        let mut out = [T::zero(); 6];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, r) in raw.iter().enumerate() {
                if u[(i, j)] != 0.0 {
                    *o += r.scale(u[(i, j)]);
                }
            }
        }
        out
    }
}

/// A linearized factor: residual and Jacobian blocks for its members.
pub struct Linearized {
    pub dim: usize,
    pub residual: [f64; 6],
    /// `jac[k][row][col]` for member `k`.
    pub jac: [[[f64; 6]; 6]; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorGraph {
    pub variables: BTreeMap<VarKey, Pose>,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, key: VarKey, initial: Pose) {
        self.variables.insert(key, initial);
    }

    pub fn add_factor(&mut self, factor: Factor) -> Result<(), OptimizerError> {
        for key in factor.members().into_iter().flatten() {
            if !self.variables.contains_key(&key) {
                return Err(OptimizerError::MissingVariable(key));
            }
        }
        self.factors.push(factor);
        Ok(())
    }

    fn member_pose(&self, key: Option<VarKey>) -> Iso<f64> {
        key.map(|k| self.variables[&k].to_iso()).unwrap_or_else(|| Pose::identity().to_iso())
    }

    /// Whitened residual of one factor at the current values.
    pub fn factor_residual(&self, f: &Factor) -> [f64; 6] {
        let [a, b] = f.members();
        f.residual(&self.member_pose(a), &self.member_pose(b))
    }

    /// Sum of squared whitened residuals.
    pub fn cost(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| self.factor_residual(f)[..f.dim()].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Residual and Jacobians with respect to right-multiplied tangent
    /// increments of each member, by forward-mode autodiff.
    pub fn linearize(&self, f: &Factor) -> Linearized {
        let [ka, kb] = f.members();
        let seed = |key: Option<VarKey>, offset: usize| -> Iso<Jet> {
            match key {
                Some(k) => seeded(&self.variables[&k].to_iso(), offset),
                None => lift_iso(&Pose::identity().to_iso()),
            }
        };
        let r = f.residual(&seed(ka, 0), &seed(kb, 6));
        let mut out = Linearized {
            dim: f.dim(),
            residual: [0.0; 6],
            jac: [[[0.0; 6]; 6]; 2],
        };
        debug_assert_eq!(JET_DIM, 12);
        for (row, v) in r.iter().enumerate().take(out.dim) {
            out.residual[row] = v.v;
            for col in 0..6 {
                out.jac[0][row][col] = v.d[col];
                out.jac[1][row][col] = v.d[6 + col];
            }
        }
        out
    }
}
