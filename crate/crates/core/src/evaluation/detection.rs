//! 2D boxes from 6D poses, IoU, and COCO-style detection metrics.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{ObjectModel, Pose};
use crate::sim::Intrinsics;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin).max(0.0) * (self.ymax - self.ymin).max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.xmin < self.xmax && self.ymin < self.ymax
    }
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = BBox {
        xmin: a.xmin.max(b.xmin),
        ymin: a.ymin.max(b.ymin),
        xmax: a.xmax.min(b.xmax),
        ymax: a.ymax.min(b.ymax),
    }
    .area();
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Bounds of the model's surface samples projected into the image and
/// clipped to it. Points behind the near plane are skipped.
pub fn project_bbox(model: &ObjectModel, object: &Pose, camera: &Pose, intr: &Intrinsics) -> Result<BBox, EvalError> {
    project_points_bbox(&model.surface_points, object, camera, intr)
}

pub fn project_points_bbox(
    points: &[nalgebra::Vector3<f64>],
    object: &Pose,
    camera: &Pose,
    intr: &Intrinsics,
) -> Result<BBox, EvalError> {
    let cam_from_obj = camera.inverse().compose(object);
    let mut b = BBox {
        xmin: f64::INFINITY,
        ymin: f64::INFINITY,
        xmax: f64::NEG_INFINITY,
        ymax: f64::NEG_INFINITY,
    };
    let mut any = false;
    for p in points {
        if let Some((u, v)) = intr.project(&cam_from_obj.transform_point(p)) {
            any = true;
            b.xmin = b.xmin.min(u);
            b.ymin = b.ymin.min(v);
            b.xmax = b.xmax.max(u);
            b.ymax = b.ymax.max(v);
        }
    }
    if !any {
        return Err(EvalError::BehindCamera);
    }
    // pixel centers sit on integers, so the image spans [-0.5, size - 0.5]
    let (w, h) = (intr.width as f64 - 0.5, intr.height as f64 - 0.5);
    let clipped = BBox {
        xmin: b.xmin.clamp(-0.5, w),
        ymin: b.ymin.clamp(-0.5, h),
        xmax: b.xmax.clamp(-0.5, w),
        ymax: b.ymax.clamp(-0.5, h),
    };
    if clipped.is_valid() {
        Ok(clipped)
    } else {
        Err(EvalError::OutsideImage)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub t: usize,
    pub class_id: u32,
    pub bbox: BBox,
    pub score: f64,
    /// Map object (or measurement index for raw detections) behind the box.
    pub source: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth2D {
    pub t: usize,
    pub class_id: u32,
    pub bbox: BBox,
    pub object: u32,
}

/// Greedy one-to-one matching, highest score first. Each detection takes
/// the unmatched ground truth box of the same frame and class with the
/// largest IoU, provided it reaches `iou_thresh`. Returns, per detection in
/// score order, its index in `dets` and the matched ground truth index.
pub fn greedy_match(dets: &[Detection2D], gts: &[GroundTruth2D], iou_thresh: f64) -> Vec<(usize, Option<usize>)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // stable sort keeps input order among equal scores
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut by_frame: std::collections::HashMap<(usize, u32), Vec<usize>> = std::collections::HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_frame.entry((g.t, g.class_id)).or_default().push(i);
    }
    let mut taken = vec![false; gts.len()];
    order
        .into_iter()
        .map(|d| {
            let det = &dets[d];
            let mut best: Option<(usize, f64)> = None;
            for &g in by_frame.get(&(det.t, det.class_id)).map(Vec::as_slice).unwrap_or(&[]) {
                if taken[g] {
                    continue;
                }
                let o = iou(&det.bbox, &gts[g].bbox);
                if o >= iou_thresh && best.is_none_or(|(_, bo)| o > bo) {
                    best = Some((g, o));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (d, best.map(|(g, _)| g))
        })
        .collect()
}

/// Area under the precision-recall curve with all-points interpolation
/// for one class. Zero when the class has no ground truth.
pub fn average_precision(dets: &[Detection2D], gts: &[GroundTruth2D], class_id: u32, iou_thresh: f64) -> f64 {
    let dets: Vec<Detection2D> = dets.iter().filter(|d| d.class_id == class_id).copied().collect();
    let gts: Vec<GroundTruth2D> = gts.iter().filter(|g| g.class_id == class_id).copied().collect();
    if gts.is_empty() {
        return 0.0;
    }
    let matches = greedy_match(&dets, &gts, iou_thresh);
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(matches.len());
    let mut precision = Vec::with_capacity(matches.len());
    for (k, (_, m)) in matches.iter().enumerate() {
        if m.is_some() {
            tp += 1;
        }
        recall.push(tp as f64 / gts.len() as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // precision envelope, then sum over recall steps
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}

fn gt_classes(gts: &[GroundTruth2D]) -> Vec<u32> {
    let mut c: Vec<u32> = gts.iter().map(|g| g.class_id).collect();
    c.sort_unstable();
    c.dedup();
    c
}

/// AP averaged over the classes present in the ground truth.
pub fn mean_average_precision(dets: &[Detection2D], gts: &[GroundTruth2D], iou_thresh: f64) -> f64 {
    let classes = gt_classes(gts);
    if classes.is_empty() {
        return 0.0;
    }
    classes
        .iter()
        .map(|&c| average_precision(dets, gts, c, iou_thresh))
        .sum::<f64>()
        / classes.len() as f64
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| 0.5 + 0.05 * i as f64)
}

pub fn map_50_95(dets: &[Detection2D], gts: &[GroundTruth2D]) -> f64 {
    let th = coco_thresholds();
    th.iter().map(|&t| mean_average_precision(dets, gts, t)).sum::<f64>() / th.len() as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }
}

/// TP/FP/FN over detections scoring at least `conf_thresh`.
pub fn match_counts(dets: &[Detection2D], gts: &[GroundTruth2D], iou_thresh: f64, conf_thresh: f64) -> MatchCounts {
    let kept: Vec<Detection2D> = dets.iter().filter(|d| d.score >= conf_thresh).copied().collect();
    let tp = greedy_match(&kept, gts, iou_thresh).iter().filter(|(_, m)| m.is_some()).count();
    MatchCounts {
        tp,
        fp: kept.len() - tp,
        fn_: gts.len() - tp,
    }
}

pub fn precision_recall(dets: &[Detection2D], gts: &[GroundTruth2D], iou_thresh: f64, conf_thresh: f64) -> (f64, f64) {
    let c = match_counts(dets, gts, iou_thresh, conf_thresh);
    (c.precision(), c.recall())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn bx(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> BBox {
        BBox { xmin, ymin, xmax, ymax }
    }

    fn det(t: usize, class_id: u32, bbox: BBox, score: f64) -> Detection2D {
        Detection2D {
            t,
            class_id,
            bbox,
            score,
            source: 0,
        }
    }

    fn gt(t: usize, class_id: u32, bbox: BBox) -> GroundTruth2D {
        GroundTruth2D {
            t,
            class_id,
            bbox,
            object: 0,
        }
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(2.0, 2.0, 3.0, 3.0)), 0.0);
        // overlap 0.5 of area 1 each: 0.5 / 1.5
        assert!((iou(&a, &bx(0.5, 0.0, 1.5, 1.0)) - 1.0 / 3.0).abs() < 1e-15);
    }

    fn cube() -> ObjectModel {
        ObjectModel::new(1, "cube", Shape::Box { extents: [0.1, 0.1, 0.1] }, 0.005).unwrap()
    }

    #[test]
    fn centered_cube_box_is_centered() {
        let intr = Intrinsics::default();
        let b = project_bbox(&cube(), &Pose::from_translation(Vector3::new(0.0, 0.0, 1.0)), &Pose::identity(), &intr).unwrap();
        assert!(((b.xmin + b.xmax) / 2.0 - intr.cx).abs() < 1e-9);
        assert!(((b.ymin + b.ymax) / 2.0 - intr.cy).abs() < 1e-9);
    }

    #[test]
    fn box_moves_right_with_object() {
        let intr = Intrinsics::default();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..10 {
            let o = Pose::from_translation(Vector3::new(0.02 * k as f64, 0.0, 1.0));
            let b = project_bbox(&cube(), &o, &Pose::identity(), &intr).unwrap();
            assert!(b.xmin > prev);
            prev = b.xmin;
        }
    }

    #[test]
    fn behind_camera_and_outside_image_are_errors() {
        let intr = Intrinsics::default();
        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(project_bbox(&cube(), &behind, &Pose::identity(), &intr), Err(EvalError::BehindCamera)));
        let aside = Pose::from_translation(Vector3::new(5.0, 0.0, 1.0));
        assert!(matches!(project_bbox(&cube(), &aside, &Pose::identity(), &intr), Err(EvalError::OutsideImage)));
    }

    #[test]
    fn box_matches_dense_sampling() {
        use rand::{Rng, SeedableRng};
        let intr = Intrinsics::default();
        let coarse = cube();
        let dense = ObjectModel::new(1, "cube", coarse.shape, coarse.spacing / 10.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let o = Pose::from_axis_angle(
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.6..1.2)),
            );
            let a = project_bbox(&coarse, &o, &Pose::identity(), &intr).unwrap();
            let b = project_bbox(&dense, &o, &Pose::identity(), &intr).unwrap();
            for (x, y) in [(a.xmin, b.xmin), (a.ymin, b.ymin), (a.xmax, b.xmax), (a.ymax, b.ymax)] {
                assert!((x - y).abs() <= 1.0, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn perfect_and_empty_detections() {
        let gts = vec![gt(0, 1, bx(0.0, 0.0, 10.0, 10.0)), gt(1, 1, bx(5.0, 5.0, 20.0, 20.0)), gt(1, 2, bx(0.0, 0.0, 3.0, 3.0))];
        let dets: Vec<Detection2D> = gts.iter().map(|g| det(g.t, g.class_id, g.bbox, 0.9)).collect();
        assert_eq!(mean_average_precision(&dets, &gts, 0.5), 1.0);
        assert_eq!(map_50_95(&dets, &gts), 1.0);
        assert_eq!(precision_recall(&dets, &gts, 0.5, 0.5), (1.0, 1.0));
        assert_eq!(mean_average_precision(&[], &gts, 0.5), 0.0);
        assert_eq!(precision_recall(&[], &gts, 0.5, 0.5), (0.0, 0.0));
        // half of the ground truth detected perfectly
        let half = vec![gt(0, 1, bx(0.0, 0.0, 10.0, 10.0)), gt(0, 1, bx(50.0, 50.0, 60.0, 60.0))];
        assert_eq!(precision_recall(&dets[..1], &half, 0.5, 0.5), (1.0, 0.5));
    }

    /// Five detections, three ground truth boxes of one class.
    fn fixture() -> (Vec<Detection2D>, Vec<GroundTruth2D>) {
        let g = vec![
            gt(0, 1, bx(0.0, 0.0, 10.0, 10.0)),
            gt(0, 1, bx(20.0, 0.0, 30.0, 10.0)),
            gt(1, 1, bx(0.0, 0.0, 10.0, 10.0)),
        ];
        let d = vec![
            det(0, 1, bx(0.0, 0.0, 10.0, 10.0), 0.9),  // TP on g0
            det(0, 1, bx(1.0, 0.0, 11.0, 10.0), 0.8),  // g0 taken: FP
            det(1, 1, bx(40.0, 0.0, 50.0, 10.0), 0.7), // disjoint: FP
            det(0, 1, bx(21.0, 0.0, 31.0, 10.0), 0.6), // TP on g1 (IoU 9/11)
            det(1, 1, bx(0.0, 0.0, 10.0, 10.0), 0.3),  // TP on g2
        ];
        (d, g)
    }

    /// Brute-force AP: for each rank cutoff compute (P, R), then integrate the
    /// interpolated precision max_{k: R_k >= r} P_k over the recall levels hit.
    fn enumerated_ap(flags: &[bool], n_gt: usize) -> f64 {
        let pts: Vec<(f64, f64)> = (1..=flags.len())
            .map(|k| {
                let tp = flags[..k].iter().filter(|f| **f).count() as f64;
                (tp / k as f64, tp / n_gt as f64)
            })
            .collect();
        let mut levels: Vec<f64> = pts.iter().map(|p| p.1).collect();
        levels.insert(0, 0.0);
        levels.dedup();
        levels
            .windows(2)
            .map(|w| {
                let p = pts.iter().filter(|(_, r)| *r >= w[1]).map(|(p, _)| *p).fold(0.0, f64::max);
                (w[1] - w[0]) * p
            })
            .sum()
    }

    #[test]
    fn ap_matches_enumerated_oracle() {
        let (d, g) = fixture();
        let flags = [true, false, false, true, true];
        let oracle = enumerated_ap(&flags, 3);
        // by hand: recall 1/3 at precision 1, 2/3 at 2/4, 1 at 3/5
        assert!((oracle - (1.0 / 3.0 + 0.6 / 3.0 + 0.6 / 3.0)).abs() < 1e-15);
        assert!((average_precision(&d, &g, 1, 0.5) - oracle).abs() < 1e-15);
        // at IoU 0.85 the 9/11 overlap no longer counts
        let strict = enumerated_ap(&[true, false, false, false, true], 3);
        assert!((average_precision(&d, &g, 1, 0.85) - strict).abs() < 1e-15);
    }

    #[test]
    fn mixed_counts() {
        let (d, g) = fixture();
        // confidence >= 0.5 keeps the first four: 2 TP, 2 FP, 1 FN
        let c = match_counts(&d, &g, 0.5, 0.5);
        assert_eq!(c, MatchCounts { tp: 2, fp: 2, fn_: 1 });
        assert_eq!(precision_recall(&d, &g, 0.5, 0.5), (0.5, 2.0 / 3.0));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64).prop_map(|(x, y, w, h)| bx(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn ap_invariants(
            gts in prop::collection::vec((0usize..3, 1u32..3, arb_box()), 1..12),
            dets in prop::collection::vec((0usize..3, 1u32..3, arb_box(), 0.0..1.0f64), 0..20),
        ) {
            let g: Vec<GroundTruth2D> = gts.iter().map(|(t, c, b)| gt(*t, *c, *b)).collect();
            let d: Vec<Detection2D> = dets.iter().map(|(t, c, b, s)| det(*t, *c, *b, *s)).collect();
            // strictly monotone rescaling of scores
            let r: Vec<Detection2D> = d.iter().map(|x| Detection2D { score: x.score.powi(3) * 0.5 + 0.1, ..*x }).collect();
            for th in [0.5, 0.75] {
                let a = mean_average_precision(&d, &g, th);
                prop_assert!((a - mean_average_precision(&r, &g, th)).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            prop_assert!(map_50_95(&d, &g) <= mean_average_precision(&d, &g, 0.5) + 1e-12);
            let c = match_counts(&d, &g, 0.5, 0.5);
            prop_assert_eq!(c.tp + c.fn_, g.len());
            prop_assert_eq!(c.tp + c.fp, d.iter().filter(|x| x.score >= 0.5).count());
        }
    }
}
