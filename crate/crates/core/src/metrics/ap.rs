//! Average precision and average recall for score-less detections.
//!
//! Predictions are ranked by their position in the model output (generation
//! order), ties across images broken by image index.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::Box3D;

use super::iou::iou_matrix;
use super::MetricsError;

/// Thresholds averaged into the headline `AP` value.
pub const AP_THRESHOLDS: [f64; 10] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50];
/// Thresholds averaged for AR.
pub const AR_THRESHOLDS: [f64; 3] = [0.15, 0.25, 0.50];
pub const DEFAULT_AR_K: usize = 100;

/// Predictions (in generation order) and ground truth for one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub preds: Vec<Box3D>,
    pub gts: Vec<Box3D>,
}

/// Per-image IoU matrices, computed once and reused across labels and
/// thresholds.
pub struct PreparedSet<'a> {
    images: &'a [ImageDetections],
    ious: Vec<Vec<Vec<f64>>>,
}

impl<'a> PreparedSet<'a> {
    pub fn new(images: &'a [ImageDetections]) -> Result<Self, MetricsError> {
        let ious = images
            .iter()
            .map(|im| iou_matrix(&im.preds, &im.gts))
            .collect::<Result<_, _>>()?;
        Ok(Self { images, ious })
    }

    /// Labels with at least one ground-truth box, sorted.
    pub fn gt_labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .images
            .iter()
            .flat_map(|im| im.gts.iter().map(|g| g.label.as_str()))
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Ranked true-positive flags for one label and the label's GT count.
    fn sweep(&self, label: &str, tau: f64, top_k: Option<usize>) -> (Vec<bool>, usize) {
        let mut ranked: Vec<(usize, usize)> = Vec::new();
        let mut n_gt = 0;
        for (img, im) in self.images.iter().enumerate() {
            n_gt += im.gts.iter().filter(|g| g.label == label).count();
            for (g, p) in im.preds.iter().enumerate() {
                if p.label == label && top_k.is_none_or(|k| g < k) {
                    ranked.push((g, img));
                }
            }
        }
        ranked.sort_unstable();

        let mut used: Vec<Vec<bool>> = self.images.iter().map(|im| vec![false; im.gts.len()]).collect();
        let flags = ranked
            .into_iter()
            .map(|(g, img)| {
                let gts = &self.images[img].gts;
                let mut best: Option<(usize, f64)> = None;
                for (j, gt) in gts.iter().enumerate() {
                    let iou = self.ious[img][g][j];
                    if gt.label == label && !used[img][j] && iou > tau && best.is_none_or(|(_, b)| iou > b) {
                        best = Some((j, iou));
                    }
                }
                if let Some((j, _)) = best {
                    used[img][j] = true;
                    true
                } else {
                    false
                }
            })
            .collect();
        (flags, n_gt)
    }

    /// 101-point interpolated AP for one label; `None` if it has no GT.
    pub fn label_ap(&self, label: &str, tau: f64) -> Option<f64> {
        let (flags, n_gt) = self.sweep(label, tau, None);
        (n_gt > 0).then(|| interpolated_ap(&flags, n_gt))
    }

    /// Recall of the label's GT by the top-k predictions of each image.
    pub fn label_recall(&self, label: &str, tau: f64, k: usize) -> Option<f64> {
        let (flags, n_gt) = self.sweep(label, tau, Some(k));
        (n_gt > 0).then(|| flags.iter().filter(|f| **f).count() as f64 / n_gt as f64)
    }
}

/// COCO-style 101-point interpolation of a ranked TP/FP sequence.
pub fn interpolated_ap(tp_flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (i, &f) in tp_flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    // Make precision monotone from the right.
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    for r in 0..=100 {
        let t = r as f64 / 100.0;
        let idx = recall.partition_point(|&x| x < t);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    sum / 101.0
}

fn macro_mean(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// AP at one threshold, macro-averaged over labels that have ground truth.
pub fn ap_at(images: &[ImageDetections], tau: f64) -> Result<f64, MetricsError> {
    let set = PreparedSet::new(images)?;
    Ok(macro_mean(set.gt_labels().iter().map(|l| set.label_ap(l, tau))))
}

/// Recall from the top-k predictions per image, macro-averaged over labels
/// and then averaged over `taus`.
pub fn ar_at_k(images: &[ImageDetections], k: usize, taus: &[f64]) -> Result<f64, MetricsError> {
    let set = PreparedSet::new(images)?;
    Ok(ar_with(&set, k, taus))
}

fn ar_with(set: &PreparedSet, k: usize, taus: &[f64]) -> f64 {
    let labels = set.gt_labels();
    if taus.is_empty() {
        return 0.0;
    }
    taus.iter()
        .map(|&t| macro_mean(labels.iter().map(|l| set.label_recall(l, t, k))))
        .sum::<f64>()
        / taus.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    #[serde(rename = "AP@15")]
    pub ap15: f64,
    #[serde(rename = "AP@25")]
    pub ap25: f64,
    #[serde(rename = "AP@50")]
    pub ap50: f64,
    #[serde(rename = "AR@100")]
    pub ar100: f64,
}

/// Detection metrics as fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP@15")]
    pub ap15: f64,
    #[serde(rename = "AP@25")]
    pub ap25: f64,
    #[serde(rename = "AP@50")]
    pub ap50: f64,
    #[serde(rename = "AR@100")]
    pub ar100: f64,
    pub per_label: BTreeMap<String, LabelMetrics>,
    pub ranking: String,
    pub num_images: usize,
}

pub fn evaluate(images: &[ImageDetections]) -> Result<MetricReport, MetricsError> {
    let set = PreparedSet::new(images)?;
    let labels = set.gt_labels();
    let ap = |tau: f64| macro_mean(labels.iter().map(|l| set.label_ap(l, tau)));
    let per_label = labels
        .iter()
        .map(|l| {
            let m = LabelMetrics {
                ap15: set.label_ap(l, 0.15).unwrap_or(0.0),
                ap25: set.label_ap(l, 0.25).unwrap_or(0.0),
                ap50: set.label_ap(l, 0.50).unwrap_or(0.0),
                ar100: AR_THRESHOLDS
                    .iter()
                    .map(|&t| set.label_recall(l, t, DEFAULT_AR_K).unwrap_or(0.0))
                    .sum::<f64>()
                    / AR_THRESHOLDS.len() as f64,
            };
            (l.clone(), m)
        })
        .collect();
    Ok(MetricReport {
        ap: AP_THRESHOLDS.iter().map(|&t| ap(t)).sum::<f64>() / AP_THRESHOLDS.len() as f64,
        ap15: ap(0.15),
        ap25: ap(0.25),
        ap50: ap(0.50),
        ar100: ar_with(&set, DEFAULT_AR_K, &AR_THRESHOLDS),
        per_label,
        ranking: "generation_order".into(),
        num_images: images.len(),
    })
}
