//! Rule-based RL rewards: answer accuracy plus a format bonus.

use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

use super::matching::{match_boxes_at, MatchReport, DEFAULT_TAU};
use super::MetricsError;

pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub accuracy: f64,
    pub format: f64,
    pub total: f64,
    pub alpha: Option<f64>,
    pub r_iou: Option<f64>,
    pub r_f1: Option<f64>,
}

impl RewardBreakdown {
    /// Adds the format term and recomputes the total.
    pub fn with_format(mut self, format_ok: bool) -> Self {
        self.format = if format_ok { 1.0 } else { 0.0 };
        self.total = self.accuracy + self.format;
        self
    }
}

/// Combines an accuracy in `[0, 1]` with the binary format reward.
pub fn total_reward(accuracy: f64, format_ok: bool) -> RewardBreakdown {
    RewardBreakdown {
        accuracy,
        format: 0.0,
        total: accuracy,
        alpha: None,
        r_iou: None,
        r_f1: None,
    }
    .with_format(format_ok)
}

/// Accuracy term for detection answers: `alpha * mean IoU + (1 - alpha) * F1`.
/// The format term is left at 0; see [`RewardBreakdown::with_format`].
pub fn detection_reward(preds: &[Box3D], gts: &[Box3D], alpha: f64) -> Result<RewardBreakdown, MetricsError> {
    let report = match_boxes_at(preds, gts, DEFAULT_TAU)?;
    Ok(detection_reward_from_report(&report, alpha))
}

pub fn detection_reward_from_report(report: &MatchReport, alpha: f64) -> RewardBreakdown {
    let r_iou = report.mean_matched_iou;
    let r_f1 = report.f1;
    let d = (report.num_preds + report.num_gts) as f64;
    // Same blend over the common denominator n_pred + n_gt, rounded once.
    let accuracy = if d > 0.0 {
        (alpha * r_iou * d + (1.0 - alpha) * 2.0 * report.true_positives() as f64) / d
    } else {
        alpha * r_iou + (1.0 - alpha) * r_f1
    };
    RewardBreakdown {
        accuracy,
        format: 0.0,
        total: accuracy,
        alpha: Some(alpha),
        r_iou: Some(r_iou),
        r_f1: Some(r_f1),
    }
}

/// Variant of the accuracy term that uses recall in place of F1.
pub fn detection_reward_recall_variant(
    preds: &[Box3D],
    gts: &[Box3D],
    alpha: f64,
) -> Result<f64, MetricsError> {
    let report = match_boxes_at(preds, gts, DEFAULT_TAU)?;
    Ok(alpha * report.mean_matched_iou + (1.0 - alpha) * report.recall)
}

/// True when the response is exactly one `<think>...</think>` block followed by
/// a non-empty answer.
pub fn format_ok(response: &str) -> bool {
    let s = response.trim();
    let Some(rest) = s.strip_prefix("<think>") else {
        return false;
    };
    let Some(end) = rest.find("</think>") else {
        return false;
    };
    let (reasoning, tail) = (&rest[..end], &rest[end + "</think>".len()..]);
    let answer = tail.trim();
    !reasoning.trim().is_empty()
        && !reasoning.contains("<think>")
        && !answer.is_empty()
        && !answer.contains("<think>")
        && !answer.contains("</think>")
}

/// Text after the reasoning block, or the whole text if there is none.
pub fn answer_region(response: &str) -> &str {
    match response.rfind("</think>") {
        Some(i) => response[i + "</think>".len()..].trim(),
        None => response.trim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EulerAngles, Vec3};

    fn aa(c: [f64; 3], s: [f64; 3]) -> Box3D {
        Box3D::new(Vec3::from(c), Vec3::from(s), EulerAngles::ZERO, "x").unwrap()
    }

    #[test]
    fn total_reward_examples() {
        assert_eq!(total_reward(1.0, true).total, 2.0);
        assert_eq!(total_reward(0.0, false).total, 0.0);
        assert_eq!(total_reward(7.0 / 12.0, true).total, 7.0 / 12.0 + 1.0);
    }

    #[test]
    fn perfect_and_empty_detection() {
        let gts = vec![aa([0.0, 0.0, 2.0], [1.0; 3]), aa([2.0, 0.0, 3.0], [0.5; 3])];
        assert_eq!(detection_reward(&gts, &gts, DEFAULT_ALPHA).unwrap().accuracy, 1.0);
        assert_eq!(detection_reward(&[], &gts, DEFAULT_ALPHA).unwrap().accuracy, 0.0);
    }

    #[test]
    fn seven_twelfths() {
        let gts = vec![aa([0.0, 0.0, 2.0], [1.0; 3])];
        let preds = vec![aa([0.5, 0.0, 2.0], [2.0, 1.0, 1.0]), aa([10.0, 0.0, 2.0], [1.0; 3])];
        let r = detection_reward(&preds, &gts, 0.5).unwrap();
        assert_eq!(r.r_iou, Some(0.5));
        assert_eq!(r.accuracy, 7.0 / 12.0);
        assert_eq!(r.with_format(true).total, 7.0 / 12.0 + 1.0);
    }

    #[test]
    fn format_check() {
        assert!(format_ok("<think>reasoning</think> B"));
        assert!(format_ok("<think>\na\nb\n</think>\n[{\"bbox_3d\":[1]}]"));
        assert!(!format_ok("B"));
        assert!(!format_ok("<think>r</think>"));
        assert!(!format_ok("<think></think> B"));
        assert!(!format_ok("<think>a</think> B <think>c</think> D"));
        assert!(!format_ok("preface <think>a</think> B"));
    }

    #[test]
    fn answer_region_strips_reasoning() {
        assert_eq!(answer_region("<think>pick A</think> C"), "C");
        assert_eq!(answer_region("  C "), "C");
    }
}
