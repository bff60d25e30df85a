use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

use super::assignment::solve_assignment;
use super::iou::iou_matrix;
use super::MetricsError;

/// IoU threshold for counting a matched pair as a true positive.
pub const DEFAULT_TAU: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Sorted by prediction index.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
    /// Mean IoU over `pairs`, 0 when there are none.
    pub mean_matched_iou: f64,
    pub num_preds: usize,
    pub num_gts: usize,
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchReport {
    /// Sum of matched IoUs, accumulated in prediction-index order.
    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }

    /// Matched pairs whose IoU exceeds `tau`.
    pub fn true_positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.iou > self.tau).count()
    }
}

pub fn match_boxes(preds: &[Box3D], gts: &[Box3D]) -> Result<MatchReport, MetricsError> {
    match_boxes_at(preds, gts, DEFAULT_TAU)
}

/// Maximum-total-IoU one-to-one matching. Pairs whose IoU is zero are dropped.
pub fn match_boxes_at(preds: &[Box3D], gts: &[Box3D], tau: f64) -> Result<MatchReport, MetricsError> {
    let ious = iou_matrix(preds, gts)?;
    Ok(match_from_ious(&ious, gts.len(), tau))
}

/// Matching on a precomputed `preds x gts` IoU matrix.
pub fn match_from_ious(ious: &[Vec<f64>], num_gts: usize, tau: f64) -> MatchReport {
    let cost: Vec<Vec<f64>> = ious.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
    let assign = solve_assignment(&cost, num_gts);

    let mut pairs = Vec::new();
    let mut gt_taken = vec![false; num_gts];
    for (i, j) in assign.iter().enumerate() {
        if let Some(j) = *j {
            let iou = ious[i][j];
            if iou > 0.0 {
                pairs.push(MatchedPair { pred: i, gt: j, iou });
                gt_taken[j] = true;
            }
        }
    }
    let matched_preds: Vec<bool> = {
        let mut m = vec![false; ious.len()];
        for p in &pairs {
            m[p.pred] = true;
        }
        m
    };
    let unmatched_preds = (0..ious.len()).filter(|i| !matched_preds[*i]).collect();
    let unmatched_gts = (0..num_gts).filter(|j| !gt_taken[*j]).collect();
    let mean_matched_iou = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.iou).sum::<f64>() / pairs.len() as f64
    };

    let mut report = MatchReport {
        pairs,
        unmatched_preds,
        unmatched_gts,
        mean_matched_iou,
        num_preds: ious.len(),
        num_gts,
        tau,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    let s = f1_at(&report, ious.len(), num_gts, tau);
    report.precision = s.precision;
    report.recall = s.recall;
    report.f1 = s.f1;
    report
}

/// Precision, recall and F1 where a true positive is a matched pair with
/// `iou > tau`.
///
/// With no predictions and no ground truth all three are 1. Any other 0/0 is 0.
pub fn f1_at(report: &MatchReport, n_preds: usize, n_gts: usize, tau: f64) -> F1Scores {
    if n_preds == 0 && n_gts == 0 {
        return F1Scores {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let tp = report.pairs.iter().filter(|p| p.iou > tau).count() as f64;
    let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
    let precision = ratio(tp, n_preds);
    // Nothing to find means nothing was missed, however many boxes were predicted.
    let recall = if n_gts == 0 { 1.0 } else { ratio(tp, n_gts) };
    // 2PR / (P + R) written as 2 TP / (n_pred + n_gt): one rounding.
    let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (n_preds + n_gts) as f64 };
    F1Scores {
        precision,
        recall,
        f1,
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
    fn identical_lists_match_fully() {
        let boxes = vec![aa([0.0, 0.0, 2.0], [1.0; 3]), aa([3.0, 0.0, 2.0], [1.0; 3]), aa([0.0, 3.0, 5.0], [0.5; 3])];
        let r = match_boxes(&boxes, &boxes).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.pred == p.gt && p.iou == 1.0));
        assert_eq!(r.mean_matched_iou, 1.0);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_preds() {
        let gts = vec![aa([0.0, 0.0, 2.0], [1.0; 3])];
        let r = match_boxes(&[], &gts).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.mean_matched_iou, 0.0);
        assert_eq!(r.recall, 0.0);
        assert_eq!(r.unmatched_gts, vec![0]);
    }

    #[test]
    fn both_empty_is_perfect_f1() {
        let r = match_boxes(&[], &[]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.mean_matched_iou, 0.0);
    }

    #[test]
    fn no_gts_keeps_full_recall() {
        let preds = vec![aa([0.0, 0.0, 2.0], [1.0; 3])];
        let r = match_boxes(&preds, &[]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 1.0, 0.0));
    }

    #[test]
    fn two_preds_one_gt() {
        // The gt is nested in a box of twice its volume: IoU exactly 1/2.
        let gts = vec![aa([0.0, 0.0, 2.0], [1.0; 3])];
        let preds = vec![aa([0.5, 0.0, 2.0], [2.0, 1.0, 1.0]), aa([10.0, 0.0, 2.0], [1.0; 3])];
        let r = match_boxes(&preds, &gts).unwrap();
        assert_eq!(r.pairs, vec![MatchedPair { pred: 0, gt: 0, iou: 0.5 }]);
        assert_eq!(r.unmatched_preds, vec![1]);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_below_tau() {
        let gts = vec![aa([0.0, 0.0, 2.0], [1.0; 3])];
        let preds = vec![aa([0.9, 0.0, 2.0], [1.0; 3])];
        let r = match_boxes(&preds, &gts).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn crossing_case_beats_greedy() {
        // IoU matrix [[0.9, 0.8], [0.8, 0]]; optimum pairs off-diagonal.
        let ious = vec![vec![0.9, 0.8], vec![0.8, 0.0]];
        let r = match_from_ious(&ious, 2, DEFAULT_TAU);
        assert!((r.total_iou() - 1.6).abs() < 1e-15);
        assert_eq!(r.pairs.len(), 2);
    }

    #[test]
    fn zero_iou_assignment_dropped() {
        let ious = vec![vec![0.0, 0.0], vec![0.0, 0.7]];
        let r = match_from_ious(&ious, 2, DEFAULT_TAU);
        assert_eq!(r.pairs, vec![MatchedPair { pred: 1, gt: 1, iou: 0.7 }]);
        assert_eq!(r.unmatched_preds, vec![0]);
        assert_eq!(r.unmatched_gts, vec![0]);
    }
}
