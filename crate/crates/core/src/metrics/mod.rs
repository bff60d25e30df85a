//! Box IoU, prediction/ground-truth matching, detection metrics and rewards.

mod answer;
mod ap;
mod assignment;
mod iou;
mod matching;
mod reward;

use thiserror::Error;

pub use answer::{extract_option, mcq_accuracy, ExactMatch, TextScorer};
pub use ap::{
    ap_at, ar_at_k, evaluate, interpolated_ap, ImageDetections, LabelMetrics, MetricReport, PreparedSet,
    AP_THRESHOLDS, AR_THRESHOLDS, DEFAULT_AR_K,
};
pub use assignment::solve_assignment;
pub use iou::{intersection_volume, iou3d, iou_matrix, MIN_EXTENT};
pub use matching::{f1_at, match_boxes, match_boxes_at, match_from_ious, F1Scores, MatchReport, MatchedPair, DEFAULT_TAU};
pub use reward::{
    answer_region, detection_reward, detection_reward_from_report, detection_reward_recall_variant, format_ok,
    total_reward, RewardBreakdown, DEFAULT_ALPHA,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("degenerate box '{label}': an extent is below {MIN_EXTENT}")]
    DegenerateBox { label: String },
}
