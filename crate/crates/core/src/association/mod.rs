//! Measurement-to-object association with geometric consistency scoring,
//! false-positive pruning and overlap merging.

pub mod merge;
pub mod score;

pub use merge::{merge_overlapping, obb_collision_ratio};
pub use score::{classify_points, combine_ratios, count_points, geometric_consistency_score, PointCounts, ScoreConfig, Sigmoid};

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

use crate::geometry::{ModelRegistry, Pose};
use crate::optimizer::residuals::measurement_residual;
use crate::sim::{CameraFrame, NoiseSpec, SemanticMeasurement, Sigma, SIGMA_FLOOR};

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("hypothesis renders no pixels")]
    EmptyRender,
    #[error("track {0} has no measurements")]
    InvalidTrack(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocConfig {
    /// A measurement starts a new object when its best likelihood is at
    /// most this value (unnormalized units of the likelihood product).
    pub eps_new: f64,
    /// Tracks whose false-positive score exceeds this are removed.
    pub eps_fp: f64,
    /// Measurement covariance over `[rot (rad), trans (m)]`.
    pub meas_noise: Matrix6<f64>,
    pub merge_collision_threshold: f64,
    /// Pruning runs every this many keyframes and after the last one;
    /// `None` prunes only after the last keyframe.
    pub prune_every: Option<usize>,
}

/// Association gates are this much wider than the measurement noise.
pub const GATE_SCALE: f64 = 1.5;

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            eps_new: 1.0,
            eps_fp: 0.4,
            meas_noise: gate_covariance(NoiseSpec::default().meas_sigma),
            merge_collision_threshold: 0.5,
            prune_every: None,
        }
    }
}

/// Association covariance for a measurement noise level.
pub fn gate_covariance(meas_sigma: Sigma) -> Matrix6<f64> {
    diagonal_covariance(meas_sigma.at_least(SIGMA_FLOOR).scaled(GATE_SCALE))
}

pub fn diagonal_covariance(s: Sigma) -> Matrix6<f64> {
    let (r, t) = (s.rot * s.rot, s.trans * s.trans);
    Matrix6::from_diagonal(&Vector6::new(r, r, r, t, t, t))
}

impl AssocConfig {
    pub fn validate(&self) -> Result<(), AssocError> {
        let sym = (self.meas_noise - self.meas_noise.transpose()).abs().max() <= 1e-12 * self.meas_noise.abs().max();
        let pd = self.meas_noise.cholesky().is_some();
        let ok = sym
            && pd
            && self.eps_new >= 0.0
            && (0.0..=1.0).contains(&self.eps_fp)
            && (0.0..=1.0).contains(&self.merge_collision_threshold)
            && self.prune_every != Some(0);
        if ok {
            Ok(())
        } else {
            Err(AssocError::Config(format!("invalid association config {self:?}")))
        }
    }
}

/// How a measurement's own evidence score is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scoring {
    /// Geometric consistency against the observed depth.
    Geometric,
    /// The detector's confidence.
    Confidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRef {
    pub t: usize,
    /// Index into the frame's measurement list.
    pub index: usize,
    /// Class reported by the measurement.
    pub class_id: u32,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub id: u32,
    pub class_id: u32,
    /// World pose.
    pub pose: Pose,
    pub measurement_log: Vec<MeasurementRef>,
}

impl TrackedObject {
    pub fn new(id: u32, z: &SemanticMeasurement, index: usize, x_t: &Pose, score: f64) -> Self {
        Self {
            id,
            class_id: z.class_id,
            pose: x_t.compose(&z.pose),
            measurement_log: vec![MeasurementRef {
                t: z.t,
                index,
                class_id: z.class_id,
                score,
            }],
        }
    }

    pub fn n_meas(&self) -> usize {
        self.measurement_log.len()
    }

    /// Best score over the measurement log, 0 for an empty log.
    pub fn best_score(&self) -> f64 {
        self.measurement_log.iter().map(|m| m.score).fold(0.0, f64::max)
    }

    pub fn best_measurement(&self) -> Option<&MeasurementRef> {
        self.measurement_log
            .iter()
            .fold(None, |best: Option<&MeasurementRef>, m| match best {
                Some(b) if b.score >= m.score => Some(b),
                _ => Some(m),
            })
    }

    pub fn record(&mut self, t: usize, index: usize, class_id: u32, score: f64) {
        self.measurement_log.push(MeasurementRef {
            t,
            index,
            class_id,
            score,
        });
    }

    /// Takes over another track's measurements. The label becomes the class
    /// reported most often in the combined log; ties keep the current one.
    pub fn absorb(&mut self, other: &TrackedObject) {
        self.measurement_log.extend(other.measurement_log.iter().copied());
        self.measurement_log.sort_by_key(|m| (m.t, m.index));
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for m in &self.measurement_log {
            *votes.entry(m.class_id).or_default() += 1;
        }
        let own = votes.get(&self.class_id).copied().unwrap_or(0);
        if let Some((&c, &n)) = votes.iter().max_by_key(|(c, n)| (**n, std::cmp::Reverse(**c))) {
            if n > own {
                self.class_id = c;
            }
        }
    }
}

/// `1 - R / (1 + exp(-n))` with `R` the best score and `n` the number of
/// assigned measurements.
pub fn false_positive_score(obj: &TrackedObject) -> Result<f64, AssocError> {
    let n = obj.n_meas();
    if n == 0 {
        return Err(AssocError::InvalidTrack(obj.id));
    }
    Ok(1.0 - obj.best_score() / (1.0 + (-(n as f64)).exp()))
}

/// Removes tracks whose false-positive score exceeds `eps_fp`; returns
/// their ids.
pub fn prune_false_positives(objects: &mut Vec<TrackedObject>, eps_fp: f64) -> Vec<u32> {
    let mut removed = Vec::new();
    objects.retain(|o| {
        let keep = false_positive_score(o).map(|f| f <= eps_fp).unwrap_or(false);
        if !keep {
            removed.push(o.id);
        }
        keep
    });
    removed
}

/// Evidence score of each measurement.
pub fn measurement_scores(
    measurements: &[SemanticMeasurement],
    frame: &CameraFrame,
    registry: &ModelRegistry,
    cfg: &ScoreConfig,
    scoring: Scoring,
) -> Vec<f64> {
    measurements
        .iter()
        .map(|z| match scoring {
            Scoring::Confidence => z.confidence,
            Scoring::Geometric => registry
                .get(z.class_id)
                .ok()
                .and_then(|m| geometric_consistency_score(z, m, frame, cfg).ok())
                .unwrap_or(0.0),
        })
        .collect()
}

/// Zero-mean Gaussian density of `r` under covariance `q`.
pub fn gaussian_density(r: &Vector6<f64>, q: &Matrix6<f64>) -> f64 {
    let Some(chol) = q.cholesky() else {
        return 0.0;
    };
    let m2 = r.dot(&chol.solve(r));
    let det = chol.determinant();
    (-0.5 * m2).exp() / ((2.0 * std::f64::consts::PI).powi(6) * det).sqrt()
}

/// Likelihood of `z` coming from `obj` given its precomputed evidence
/// score: class indicator times score times the Gaussian density of the
/// pose error.
pub fn likelihood_with_score(
    z: &SemanticMeasurement,
    score: f64,
    obj: &TrackedObject,
    x_t: &Pose,
    registry: &ModelRegistry,
    cfg: &AssocConfig,
) -> f64 {
    if z.class_id != obj.class_id {
        return 0.0;
    }
    let symmetry = registry.get(obj.class_id).ok().and_then(|m| m.symmetry_axis);
    let r = measurement_residual(x_t, &obj.pose, &z.pose, symmetry);
    score * gaussian_density(&r, &cfg.meas_noise)
}

pub fn association_likelihood(
    z: &SemanticMeasurement,
    obj: &TrackedObject,
    x_t: &Pose,
    registry: &ModelRegistry,
    frame: &CameraFrame,
    score_cfg: &ScoreConfig,
    cfg: &AssocConfig,
) -> f64 {
    if z.class_id != obj.class_id {
        return 0.0;
    }
    let score = registry
        .get(z.class_id)
        .ok()
        .and_then(|m| geometric_consistency_score(z, m, frame, score_cfg).ok())
        .unwrap_or(0.0);
    likelihood_with_score(z, score, obj, x_t, registry, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "object", rename_all = "lowercase")]
pub enum Assignment {
    Existing(u32),
    New(u32),
}

impl Assignment {
    pub fn object(&self) -> u32 {
        match *self {
            Assignment::Existing(id) | Assignment::New(id) => id,
        }
    }
}

/// One association decision, for audit logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub measurement: usize,
    pub class_id: u32,
    pub score: f64,
    #[serde(flatten)]
    pub assignment: Assignment,
    /// Nonzero likelihoods per candidate object id.
    pub likelihoods: Vec<(u32, f64)>,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Assigns each measurement, in order, to the most likely unclaimed object
/// or to a new object. An object takes at most one measurement per frame;
/// ties go to the lowest id. New objects get consecutive ids from
/// `next_id`.
pub fn associate_frame(
    measurements: &[SemanticMeasurement],
    scores: &[f64],
    objects: &mut Vec<TrackedObject>,
    x_t: &Pose,
    registry: &ModelRegistry,
    cfg: &AssocConfig,
    next_id: &mut u32,
) -> (Vec<Assignment>, Vec<TraceRecord>) {
    objects.sort_by_key(|o| o.id);
    let existing = objects.len();
    let mut claimed = vec![false; existing];
    let mut out = Vec::with_capacity(measurements.len());
    let mut trace = Vec::with_capacity(measurements.len());
    for (k, z) in measurements.iter().enumerate() {
        let score = scores[k];
        let mut best: Option<(usize, f64)> = None;
        let mut likelihoods = Vec::new();
        for (j, obj) in objects[..existing].iter().enumerate() {
            if claimed[j] {
                continue;
            }
            let l = likelihood_with_score(z, score, obj, x_t, registry, cfg);
            if l > 0.0 {
                likelihoods.push((obj.id, l));
            }
            if best.is_none_or(|(_, b)| l > b) {
                best = Some((j, l));
            }
        }
        let assignment = match best {
            Some((j, l)) if l > cfg.eps_new => {
                claimed[j] = true;
                objects[j].record(z.t, k, z.class_id, score);
                Assignment::Existing(objects[j].id)
            }
            _ => {
                let id = *next_id;
                *next_id += 1;
                objects.push(TrackedObject::new(id, z, k, x_t, score));
                Assignment::New(id)
            }
        };
        trace.push(TraceRecord {
            t: z.t,
            measurement: k,
            class_id: z.class_id,
            score,
            assignment,
            likelihoods,
        });
        out.push(assignment);
    }
    (out, trace)
}
