//! Run configuration shared by the pipeline commands.
//!
//! Loaded from TOML; every field has a default so an empty file is valid.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generate::{GenConfig, Task, TeacherKind};
use crate::metrics::{DEFAULT_ALPHA, DEFAULT_TAU};
use crate::visibility::DEFAULT_REL_TOL;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; per-scene and per-sample seeds are derived from it.
    pub seed: u64,
    /// Shared focal length, in pixels, for FoV unification.
    pub f_new: f64,
    /// Weight of mean IoU against F1 in the detection reward.
    pub alpha: f64,
    /// IoU a matched pair needs to count as a true positive in F1.
    pub tau: f64,
    /// Extra AP thresholds reported by `eval-3dod` next to the fixed table.
    pub iou_thresholds: Vec<f64>,
    /// Relative depth gap tolerated by the visibility check, both when
    /// ingesting scenes and for correspondence questions. Overrides
    /// `gen.rel_tol`.
    pub rel_tol: f64,
    /// Samples requested per task and scene before weighting.
    pub per_task: usize,
    /// Task weights by tag; the count for a task is `round(per_task * w)`.
    /// Tasks not listed get weight 1.
    pub task_weights: BTreeMap<Task, f64>,
    /// Worker threads; 0 uses all available cores.
    pub jobs: usize,
    pub gen: GenConfig,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub store: PathBuf,
    pub out: PathBuf,
    /// Recorded teacher replies (`{"prompt_hash", "response"}` lines).
    pub teacher_replay: Option<PathBuf>,
    /// Few-shot example files for chain-of-thought prompts.
    pub few_shot: BTreeMap<TeacherKind, PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            store: PathBuf::from("store"),
            out: PathBuf::from("out"),
            teacher_replay: None,
            few_shot: BTreeMap::new(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            f_new: 500.0,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            iou_thresholds: vec![0.15, 0.25, 0.50],
            rel_tol: DEFAULT_REL_TOL,
            per_task: 4,
            task_weights: BTreeMap::new(),
            jobs: 0,
            gen: GenConfig::default(),
            paths: Paths::default(),
        }
    }
}

fn check(ok: bool, what: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(what.to_string()))
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.gen;
        check(self.f_new.is_finite() && self.f_new > 0.0, "f_new must be positive")?;
        check(unit(self.alpha), "alpha must lie in [0, 1]")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]")?;
        check(
            self.iou_thresholds.iter().all(|t| *t > 0.0 && *t <= 1.0),
            "iou_thresholds must lie in (0, 1]",
        )?;
        check(self.rel_tol > 0.0 && self.rel_tol < 1.0, "rel_tol must lie in (0, 1)")?;
        check(
            self.task_weights.values().all(|w| w.is_finite() && *w >= 0.0),
            "task weights must be finite and non-negative",
        )?;
        check(g.min_depth_gap >= 0.0 && g.min_depth_gap.is_finite(), "gen.min_depth_gap must be non-negative")?;
        check(g.distance_tie_tol >= 0.0 && g.distance_tie_tol.is_finite(), "gen.distance_tie_tol must be non-negative")?;
        check(g.anchor_max_height_gap > 0.0, "gen.anchor_max_height_gap must be positive")?;
        check(g.rel_tol > 0.0 && g.rel_tol < 1.0, "gen.rel_tol must lie in (0, 1)")?;
        check(g.points_per_instance >= 1, "gen.points_per_instance must be at least 1")?;
        check(g.min_option_separation_px >= 0.0, "gen.min_option_separation_px must be non-negative")?;
        check(g.max_depth_order_objects >= 2, "gen.max_depth_order_objects must be at least 2")?;
        check((2..=8).contains(&g.num_options), "gen.num_options must lie in 2..=8")?;
        check(
            g.motion.dominance_ratio > 0.0 && g.motion.dominance_ratio <= 1.0,
            "gen.motion.dominance_ratio must lie in (0, 1]",
        )?;
        check(
            g.motion.min_rotation_deg >= 0.0 && g.motion.min_translation >= 0.0,
            "gen.motion floors must be non-negative",
        )
    }

    /// Generator thresholds with the run-level `rel_tol` applied.
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            rel_tol: self.rel_tol,
            ..self.gen.clone()
        }
    }

    /// Samples requested for `task` in each scene.
    pub fn count_for(&self, task: Task) -> usize {
        let w = self.task_weights.get(&task).copied().unwrap_or(1.0);
        (self.per_task as f64 * w).round() as usize
    }

    /// Hex digest of every setting that can change an output. Paths and the
    /// worker count are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = 0;
        c.paths = Paths::default();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_and_weights() {
        let cfg = RunConfig::from_toml(
            "seed = 9\nalpha = 0.3\nper_task = 10\n[task_weights]\nvideo_count = 0.5\ndepth_order = 0\n[gen]\nmin_depth_gap = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gen.min_depth_gap, 0.2);
        assert_eq!(cfg.count_for(Task::VideoCount), 5);
        assert_eq!(cfg.count_for(Task::DepthOrder), 0);
        assert_eq!(cfg.count_for(Task::Measurement), 10);
    }

    #[test]
    fn rejects_out_of_range_and_unknown() {
        for bad in ["alpha = 1.5", "tau = 0", "rel_tol = 1.0", "bogus = 1", "[gen]\nnum_options = 1", "f_new = -3"] {
            assert!(matches!(RunConfig::from_toml(bad), Err(ConfigError::Invalid(_))), "{bad}");
        }
    }

    #[test]
    fn hash_ignores_paths_and_jobs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.jobs = 7;
        b.paths.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
