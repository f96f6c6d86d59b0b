//! Detection and pose metrics for mapping runs.

pub mod detection;
pub mod pose;
pub mod report;

pub use detection::{
    average_precision, coco_thresholds, greedy_match, iou, map_50_95, match_counts, mean_average_precision,
    precision_recall, project_bbox, BBox, Detection2D, GroundTruth2D, MatchCounts,
};
pub use pose::{accuracy_curve, add_s, contact_violation_stats, subsample, ContactStats};
pub use report::{
    evaluate_run, ground_truth_boxes, map_detections, EvalConfig, MetricReport, PrecisionRecall, TimingSummary,
    VariantMetrics,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("object lies entirely behind the camera")]
    BehindCamera,
    #[error("object projects outside the image")]
    OutsideImage,
    #[error("invalid configuration: {0}")]
    Config(String),
}
