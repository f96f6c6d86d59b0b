//! Geometric consistency between a rendered hypothesis and observed depth.

use serde::{Deserialize, Serialize};

use super::AssocError;
use crate::geometry::ObjectModel;
use crate::sim::camera::render_model_points;
use crate::sim::{CameraFrame, SemanticMeasurement};
use nalgebra::Vector3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigmoid {
    pub slope: f64,
    pub midpoint: f64,
}

impl Sigmoid {
    pub fn eval(&self, u: f64) -> f64 {
        1.0 / (1.0 + (-self.slope * (u - self.midpoint)).exp())
    }
}

impl Default for Sigmoid {
    fn default() -> Self {
        Self {
            slope: 12.0,
            midpoint: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    /// Depth agreement radius for inliers (m).
    pub eps_res: f64,
    /// Depth disagreement beyond which a point is a clear outlier (m).
    pub eps_out: f64,
    pub inlier: Sigmoid,
    pub outlier: Sigmoid,
    pub occlusion: Sigmoid,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            eps_res: 0.01,
            eps_out: 0.02,
            inlier: Sigmoid::default(),
            outlier: Sigmoid::default(),
            occlusion: Sigmoid::default(),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), AssocError> {
        let ok = self.eps_res > 0.0
            && self.eps_res <= self.eps_out
            && [self.inlier, self.outlier, self.occlusion].iter().all(|s| s.slope > 0.0);
        if ok {
            Ok(())
        } else {
            Err(AssocError::Config(format!("invalid score config {self:?}")))
        }
    }
}

/// Point counts behind the three ratios; the ratios share one denominator
/// so they always sum to one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointCounts {
    pub inlier: usize,
    pub outlier: usize,
    pub occluded: usize,
}

impl PointCounts {
    pub fn total(&self) -> usize {
        self.inlier + self.outlier + self.occluded
    }

    /// `(r_in, r_out, r_occ)`.
    pub fn ratios(&self) -> (f64, f64, f64) {
        let n = self.total() as f64;
        (self.inlier as f64 / n, self.outlier as f64 / n, self.occluded as f64 / n)
    }
}

/// Classifies camera-frame hypothesis points against the observed depth.
pub fn count_points(rendered: &[Vector3<f64>], frame: &CameraFrame, cfg: &ScoreConfig) -> Result<PointCounts, AssocError> {
    if rendered.is_empty() {
        return Err(AssocError::EmptyRender);
    }
    let intr = &frame.intrinsics;
    let mut c = PointCounts::default();
    for p in rendered {
        let observed = intr.project(p).and_then(|(u, v)| {
            let (i, j) = (u.round(), v.round());
            if i < 0.0 || j < 0.0 || i >= intr.width as f64 || j >= intr.height as f64 {
                None
            } else {
                let d = frame.depth.get(i as usize, j as usize);
                (d > 0.0).then_some(d)
            }
        });
        match observed {
            Some(d) if d < p.z - cfg.eps_res => c.occluded += 1,
            Some(d) if (d - p.z).abs() <= cfg.eps_res => c.inlier += 1,
            _ => c.outlier += 1,
        }
    }
    Ok(c)
}

/// `(r_in, r_out, r_occ)` for camera-frame hypothesis points.
pub fn classify_points(rendered: &[Vector3<f64>], frame: &CameraFrame, cfg: &ScoreConfig) -> Result<(f64, f64, f64), AssocError> {
    Ok(count_points(rendered, frame, cfg)?.ratios())
}

/// `S(r_in) * S(1 - r_out) * S(1 - r_occ)`.
pub fn combine_ratios(r_in: f64, r_out: f64, r_occ: f64, cfg: &ScoreConfig) -> f64 {
    cfg.inlier.eval(r_in) * cfg.outlier.eval(1.0 - r_out) * cfg.occlusion.eval(1.0 - r_occ)
}

/// Renders `model` at the measured camera-frame pose and scores how well
/// it explains the observed depth.
pub fn geometric_consistency_score(
    z: &SemanticMeasurement,
    model: &ObjectModel,
    frame: &CameraFrame,
    cfg: &ScoreConfig,
) -> Result<f64, AssocError> {
    let pts = render_model_points(model, &z.pose, &frame.intrinsics, model.spacing);
    let (r_in, r_out, r_occ) = classify_points(&pts, frame, cfg)?;
    Ok(combine_ratios(r_in, r_out, r_occ, cfg))
}
