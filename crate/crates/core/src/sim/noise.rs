//! Noisy semantic measurements and odometry.

use nalgebra::UnitQuaternion;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::camera::{CameraFrame, LabeledRender};
use super::scene::GroundTruthScene;
use super::SimError;
use crate::geometry::{random_unit_vector, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma {
    /// Radians.
    pub rot: f64,
    /// Meters.
    pub trans: f64,
}

impl Sigma {
    /// Componentwise maximum with `floor`, for covariances that must stay
    /// invertible when the noise is zero.
    pub fn at_least(self, floor: Sigma) -> Sigma {
        Sigma {
            rot: self.rot.max(floor.rot),
            trans: self.trans.max(floor.trans),
        }
    }

    pub fn scaled(self, k: f64) -> Sigma {
        Sigma {
            rot: self.rot * k,
            trans: self.trans * k,
        }
    }
}

/// Smallest sigma used when turning a noise model into covariances.
pub const SIGMA_FLOOR: Sigma = Sigma { rot: 1e-4, trans: 1e-4 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub odom_sigma: Sigma,
    pub meas_sigma: Sigma,
    /// Expected number of spurious measurements per frame.
    pub false_positive_rate: f64,
    pub miss_rate: f64,
    pub class_confusion_rate: f64,
    pub rng_seed: u64,
    /// Objects with fewer rendered pixels are never detected.
    pub min_visible_pixels: usize,
    /// Uniform range of detector confidences for real objects.
    pub true_confidence: [f64; 2],
    /// Uniform range of detector confidences for spurious detections.
    pub false_confidence: [f64; 2],
    /// Spurious poses lie within this distance of an observed surface point.
    pub false_positive_offset: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            odom_sigma: Sigma { rot: 0.00025, trans: 0.0005 },
            meas_sigma: Sigma {
                rot: 5f64.to_radians(),
                trans: 0.01,
            },
            false_positive_rate: 1.0,
            miss_rate: 0.1,
            class_confusion_rate: 0.05,
            rng_seed: 0,
            min_visible_pixels: 200,
            true_confidence: [0.55, 1.0],
            false_confidence: [0.3, 1.0],
            false_positive_offset: 0.05,
        }
    }
}

impl NoiseSpec {
    /// Noise-free measurements, no spurious or missed detections.
    pub fn zero(rng_seed: u64) -> Self {
        Self {
            odom_sigma: Sigma { rot: 0.0, trans: 0.0 },
            meas_sigma: Sigma { rot: 0.0, trans: 0.0 },
            false_positive_rate: 0.0,
            miss_rate: 0.0,
            class_confusion_rate: 0.0,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = [self.odom_sigma, self.meas_sigma]
            .iter()
            .all(|s| s.rot >= 0.0 && s.trans >= 0.0 && s.rot.is_finite() && s.trans.is_finite())
            && self.false_positive_rate >= 0.0
            && self.false_positive_rate.is_finite()
            && unit(self.miss_rate)
            && unit(self.class_confusion_rate)
            && [self.true_confidence, self.false_confidence]
                .iter()
                .all(|r| unit(r[0]) && unit(r[1]) && r[0] <= r[1])
            && self.false_positive_offset >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("invalid noise settings {self:?}")))
        }
    }

    /// Independent random stream for frame `t` (stream 0 is odometry).
    pub fn frame_rng(&self, t: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(t as u64 + 1);
        rng
    }

    pub fn odometry_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(0);
        rng
    }
}

/// One detector output: class and object pose in the camera frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticMeasurement {
    pub t: usize,
    pub class_id: u32,
    pub pose: Pose,
    pub confidence: f64,
    /// Ground-truth object that produced the measurement; `None` for
    /// spurious detections. Simulator annotation, never read by the mapper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<u32>,
}

fn uniform_in<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Detector simulation for one frame. `render` must be the labeled render
/// of `scene` from `frame.pose`. The output order is shuffled so that true
/// and spurious detections interleave.
pub fn emit_measurements<R: Rng>(
    scene: &GroundTruthScene,
    num_classes: u32,
    frame: &CameraFrame,
    render: &LabeledRender,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Vec<SemanticMeasurement> {
    let visible = render.visible_pixels(scene.objects.len());
    let mut out = Vec::new();
    for (k, obj) in scene.objects.iter().enumerate() {
        if visible[k] < noise.min_visible_pixels {
            continue;
        }
        if rng.random_bool(noise.miss_rate) {
            continue;
        }
        let truth = frame.pose.relative(&obj.pose);
        let pose = truth.perturbed(rng, noise.meas_sigma.rot, noise.meas_sigma.trans);
        let mut class_id = obj.class_id;
        if num_classes > 1 && rng.random_bool(noise.class_confusion_rate) {
            let other = rng.random_range(1..num_classes);
            class_id = if other >= obj.class_id { other + 1 } else { other };
        }
        out.push(SemanticMeasurement {
            t: frame.t,
            class_id,
            pose,
            confidence: uniform_in(rng, noise.true_confidence),
            source: Some(obj.id),
        });
    }

    let n_fp = if noise.false_positive_rate > 0.0 {
        Poisson::new(noise.false_positive_rate)
            .map(|p| p.sample(rng) as usize)
            .unwrap_or(0)
    } else {
        0
    };
    let intr = &frame.intrinsics;
    let valid: Vec<usize> = (0..frame.depth.data.len()).filter(|&i| frame.depth.data[i] > 0.0).collect();
    for _ in 0..n_fp {
        let anchor = if valid.is_empty() {
            let u = rng.random_range(0.0..intr.width as f64);
            let v = rng.random_range(0.0..intr.height as f64);
            intr.back_project(u, v, rng.random_range(0.5..1.0))
        } else {
            let idx = valid[rng.random_range(0..valid.len())];
            let (u, v) = ((idx % intr.width) as f64, (idx / intr.width) as f64);
            intr.back_project(u, v, frame.depth.data[idx] as f64)
        };
        let offset = random_unit_vector(rng) * noise.false_positive_offset * rng.random::<f64>().cbrt();
        let rot = UnitQuaternion::from_scaled_axis(random_unit_vector(rng) * rng.random_range(0.0..std::f64::consts::PI));
        out.push(SemanticMeasurement {
            t: frame.t,
            class_id: rng.random_range(1..=num_classes),
            pose: Pose::new(rot, anchor + offset),
            confidence: uniform_in(rng, noise.false_confidence),
            source: None,
        });
    }
    out.shuffle(rng);
    out
}

/// Relative motions `relative(x[t-1], x[t])` for `t = 1..n`, perturbed by
/// odometry noise. The result has `traj.len() - 1` elements.
pub fn emit_odometry<R: Rng>(traj: &[Pose], noise: &NoiseSpec, rng: &mut R) -> Vec<Pose> {
    traj.windows(2)
        .map(|w| {
            w[0].relative(&w[1])
                .perturbed(rng, noise.odom_sigma.rot, noise.odom_sigma.trans)
        })
        .collect()
}

/// Chains odometry from an initial pose.
pub fn integrate_odometry(initial: &Pose, odometry: &[Pose]) -> Vec<Pose> {
    let mut out = Vec::with_capacity(odometry.len() + 1);
    out.push(*initial);
    for step in odometry {
        let next = out.last().unwrap().compose(step);
        out.push(next);
    }
    out
}
