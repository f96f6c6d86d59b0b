//! Scoring pipeline runs against the simulator's ground truth.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::detection::{
    coco_thresholds, greedy_match, map_50_95, match_counts, mean_average_precision, project_bbox, Detection2D,
    GroundTruth2D,
};
use super::pose::{accuracy_curve, add_s, contact_violation_stats, subsample, ContactStats};
use super::EvalError;
use crate::optimizer::{KeyframeMap, PipelineOutput, Variant};
use crate::relations::Placement;
use crate::sim::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Detection confidence threshold for precision and recall.
    pub conf_thresh: f64,
    /// IoU threshold of the matching that selects true positives for ADD-S.
    pub add_s_iou: f64,
    pub curve_max: f64,
    pub curve_samples: usize,
    /// Cap on model points used per ADD-S evaluation.
    pub add_s_max_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            conf_thresh: 0.5,
            add_s_iou: 0.5,
            curve_max: 0.02,
            curve_samples: 41,
            add_s_max_points: 256,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let ok = (0.0..=1.0).contains(&self.conf_thresh)
            && self.add_s_iou > 0.0
            && self.add_s_iou <= 1.0
            && self.curve_max > 0.0
            && self.curve_samples >= 2
            && self.add_s_max_points >= 1;
        if ok {
            Ok(())
        } else {
            Err(EvalError::Config(format!("{self:?}")))
        }
    }
}

/// Amodal boxes of every object that has been detectable at some frame up
/// to `t` and whose box intersects the image at `t`.
pub fn ground_truth_boxes(ds: &Dataset) -> Vec<GroundTruth2D> {
    let mut seen = vec![false; ds.scene.objects.len()];
    let mut out = Vec::new();
    for (t, rec) in ds.frames.iter().enumerate() {
        for (k, px) in rec.visible.iter().enumerate() {
            seen[k] |= *px >= ds.noise.min_visible_pixels;
        }
        for (k, o) in ds.scene.objects.iter().enumerate() {
            if !seen[k] {
                continue;
            }
            let Ok(model) = ds.registry.get(o.class_id) else { continue };
            if let Ok(bbox) = project_bbox(model, &o.pose, &rec.frame.pose, &ds.intrinsics) {
                out.push(GroundTruth2D {
                    t,
                    class_id: o.class_id,
                    bbox,
                    object: o.id,
                });
            }
        }
    }
    out
}

/// Boxes of the map objects seen from the estimated camera of each keyframe.
pub fn map_detections(ds: &Dataset, maps: &[KeyframeMap]) -> Vec<Detection2D> {
    let mut out = Vec::new();
    for m in maps {
        for o in &m.objects {
            let Ok(model) = ds.registry.get(o.class_id) else { continue };
            if let Ok(bbox) = project_bbox(model, &o.pose, &m.camera, &ds.intrinsics) {
                out.push(Detection2D {
                    t: m.t,
                    class_id: o.class_id,
                    bbox,
                    score: o.score.clamp(0.0, 1.0),
                    source: o.id,
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_assoc_ms: f64,
    pub mean_stage1_ms: f64,
    pub mean_relations_ms: f64,
    pub mean_stage2_ms: f64,
    /// Mean and 95th percentile of the per-frame total.
    pub mean_total_ms: f64,
    pub p95_total_ms: f64,
}

impl TimingSummary {
    pub fn of(maps: &[KeyframeMap]) -> Self {
        if maps.is_empty() {
            return Self::default();
        }
        let n = maps.len() as f64;
        let mean = |f: fn(&KeyframeMap) -> f64| maps.iter().map(f).sum::<f64>() / n;
        let mut totals: Vec<f64> = maps.iter().map(|m| m.timings.total_ms()).collect();
        totals.sort_by(f64::total_cmp);
        let p95 = totals[((0.95 * n).ceil() as usize).clamp(1, totals.len()) - 1];
        Self {
            mean_assoc_ms: mean(|m| m.timings.assoc_ms),
            mean_stage1_ms: mean(|m| m.timings.stage1_ms),
            mean_relations_ms: mean(|m| m.timings.relations_ms),
            mean_stage2_ms: mean(|m| m.timings.stage2_ms),
            mean_total_ms: mean(|m| m.timings.total_ms()),
            p95_total_ms: p95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub variant: Variant,
    pub map_50: f64,
    pub map_75: f64,
    pub map_50_95: f64,
    pub pr_50: PrecisionRecall,
    pub pr_75: PrecisionRecall,
    /// Averaged over the IoU thresholds 0.50 to 0.95.
    pub pr_50_95: PrecisionRecall,
    /// ADD-S of every true positive at every keyframe.
    pub add_s_curve: Vec<(f64, f64)>,
    /// ADD-S of the true positives of the final map.
    pub final_add_s: Vec<f64>,
    /// Measurements associated with each final true positive.
    pub final_support: Vec<usize>,
    pub contact: ContactStats,
    pub n_tracks: usize,
    /// Final tracks supported only by spurious measurements.
    pub spurious_tracks: usize,
    pub timings: TimingSummary,
}

impl VariantMetrics {
    /// Fraction of final true positives with ADD-S below `thresh`, counting
    /// only objects with at least `min_support` measurements.
    pub fn final_accuracy(&self, thresh: f64, min_support: usize) -> Option<f64> {
        let errs: Vec<f64> = self
            .final_add_s
            .iter()
            .zip(&self.final_support)
            .filter(|(_, s)| **s >= min_support)
            .map(|(e, _)| *e)
            .collect();
        if errs.is_empty() {
            None
        } else {
            Some(errs.iter().filter(|e| **e < thresh).count() as f64 / errs.len() as f64)
        }
    }
}

fn pr_at(dets: &[Detection2D], gts: &[GroundTruth2D], iou: f64, conf: f64) -> PrecisionRecall {
    let c = match_counts(dets, gts, iou, conf);
    PrecisionRecall {
        precision: c.precision(),
        recall: c.recall(),
    }
}

/// ADD-S of matched detections, per keyframe in `frames`.
fn true_positive_add_s(
    ds: &Dataset,
    maps: &[KeyframeMap],
    dets: &[Detection2D],
    gts: &[GroundTruth2D],
    cfg: &EvalConfig,
) -> Vec<(usize, u32, f64)> {
    let matches = greedy_match(dets, gts, cfg.add_s_iou);
    let by_t: BTreeMap<usize, &KeyframeMap> = maps.iter().map(|m| (m.t, m)).collect();
    let mut points = BTreeMap::new();
    let mut out = Vec::new();
    for (d, g) in matches {
        let Some(g) = g else { continue };
        let det = &dets[d];
        let (Some(map), Some(truth)) = (by_t.get(&det.t), ds.scene.object(gts[g].object)) else {
            continue;
        };
        let Some(est) = map.objects.iter().find(|o| o.id == det.source) else { continue };
        let Ok(model) = ds.registry.get(truth.class_id) else { continue };
        let pts = points
            .entry(truth.class_id)
            .or_insert_with(|| subsample(&model.surface_points, cfg.add_s_max_points));
        out.push((det.t, det.source, add_s(pts, &est.pose, &truth.pose)));
    }
    out
}

/// All metrics of one pipeline run.
pub fn evaluate_run(ds: &Dataset, out: &PipelineOutput, cfg: &EvalConfig) -> Result<VariantMetrics, EvalError> {
    cfg.validate()?;
    let gts = ground_truth_boxes(ds);
    let dets = map_detections(ds, &out.maps);
    let th = coco_thresholds();
    let prs: Vec<PrecisionRecall> = th.iter().map(|&t| pr_at(&dets, &gts, t, cfg.conf_thresh)).collect();
    let pr_50_95 = PrecisionRecall {
        precision: prs.iter().map(|p| p.precision).sum::<f64>() / prs.len() as f64,
        recall: prs.iter().map(|p| p.recall).sum::<f64>() / prs.len() as f64,
    };

    let all = true_positive_add_s(ds, &out.maps, &dets, &gts, cfg);
    let errors: Vec<f64> = all.iter().map(|x| x.2).collect();
    let last_t = out.maps.last().map(|m| m.t);
    let final_map = out.maps.last();
    let mut final_add_s = Vec::new();
    let mut final_support = Vec::new();
    for (t, id, e) in &all {
        if Some(*t) == last_t {
            final_add_s.push(*e);
            let n = final_map
                .and_then(|m| m.objects.iter().find(|o| o.id == *id))
                .map_or(0, |o| o.n_meas);
            final_support.push(n);
        }
    }

    let contact = final_map
        .map(|m| {
            let places: Vec<Placement> = m
                .objects
                .iter()
                .map(|o| Placement {
                    id: o.id,
                    class_id: o.class_id,
                    pose: o.pose,
                })
                .collect();
            contact_violation_stats(&places, &m.relations, &ds.registry)
        })
        .unwrap_or_default();

    let spurious_tracks = out
        .tracks
        .iter()
        .filter(|o| {
            o.measurement_log.iter().all(|m| {
                ds.frames
                    .get(m.t)
                    .and_then(|f| f.measurements.get(m.index))
                    .is_none_or(|z| z.source.is_none())
            })
        })
        .count();
    let n_tracks = match out.variant {
        Variant::Fbf => final_map.map_or(0, |m| m.objects.len()),
        _ => out.tracks.len(),
    };

    Ok(VariantMetrics {
        variant: out.variant,
        map_50: mean_average_precision(&dets, &gts, 0.5),
        map_75: mean_average_precision(&dets, &gts, 0.75),
        map_50_95: map_50_95(&dets, &gts),
        pr_50: prs[0],
        pr_75: prs[5],
        pr_50_95,
        add_s_curve: accuracy_curve(&errors, cfg.curve_max, cfg.curve_samples),
        final_add_s,
        final_support,
        contact,
        n_tracks,
        spurious_tracks,
        timings: TimingSummary::of(&out.maps),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub variants: Vec<VariantMetrics>,
}

impl MetricReport {
    pub fn get(&self, v: Variant) -> Option<&VariantMetrics> {
        self.variants.iter().find(|m| m.variant == v)
    }

    /// Rows of detection metrics, one column per variant.
    pub fn tables_csv(&self) -> String {
        let mut s = String::from("metric");
        for v in &self.variants {
            s.push(',');
            s.push_str(v.variant.name());
        }
        s.push('\n');
        type Row = (&'static str, fn(&VariantMetrics) -> f64);
        let rows: [Row; 9] = [
            ("mAP_50", |m| m.map_50),
            ("mAP_75", |m| m.map_75),
            ("mAP_50:95", |m| m.map_50_95),
            ("Pr_50", |m| m.pr_50.precision),
            ("Rec_50", |m| m.pr_50.recall),
            ("Pr_75", |m| m.pr_75.precision),
            ("Rec_75", |m| m.pr_75.recall),
            ("Pr_50:95", |m| m.pr_50_95.precision),
            ("Rec_50:95", |m| m.pr_50_95.recall),
        ];
        for (name, f) in rows {
            s.push_str(name);
            for v in &self.variants {
                s.push_str(&format!(",{:.4}", f(v)));
            }
            s.push('\n');
        }
        s
    }

    /// ADD-S accuracy against threshold, one column per variant.
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("threshold_m");
        for v in &self.variants {
            s.push(',');
            s.push_str(v.variant.name());
        }
        s.push('\n');
        let n = self.variants.iter().map(|v| v.add_s_curve.len()).max().unwrap_or(0);
        for i in 0..n {
            let th = self
                .variants
                .iter()
                .find_map(|v| v.add_s_curve.get(i).map(|p| p.0))
                .unwrap_or(0.0);
            s.push_str(&format!("{th:.4}"));
            for v in &self.variants {
                s.push_str(&format!(",{:.4}", v.add_s_curve.get(i).map_or(0.0, |p| p.1)));
            }
            s.push('\n');
        }
        s
    }
}
