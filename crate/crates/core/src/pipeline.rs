//! Store-level commands: ingest manifests, unify FoV, generate samples,
//! evaluate detections, score rewards and render BEV images.
//!
//! Errors split into validation failures (bad input the caller can fix) and
//! data errors (missing files, unreadable images, geometry failures).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::dataset::{
    load_manifest, load_store, normalize, parse_jsonl, unify_pack, write_pack, DatasetError, NormalizeOptions,
    ScenePack,
};
use crate::fov::FovError;
use crate::generate::{
    generate_scene, parse_detection_json, render_bev, BevStyle, GenError, GenReport, InstructionSample,
    ReplayTeacher, SceneInputs, Task, TeacherClient,
};
use crate::geometry::Box3D;
use crate::metrics::{
    answer_region, ap_at, detection_reward_from_report, evaluate, format_ok, match_boxes_at, mcq_accuracy,
    total_reward, ExactMatch, ImageDetections, MetricReport, MetricsError, RewardBreakdown, TextScorer,
};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const EVAL_FILE: &str = "eval_3dod.json";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    /// Process exit code: 2 for validation failures, 3 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Data(_) => 3,
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        if e.is_validation() {
            PipelineError::Validation(e.to_string())
        } else {
            PipelineError::Data(e.to_string())
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Validation(e.to_string())
    }
}

impl From<GenError> for PipelineError {
    fn from(e: GenError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<FovError> for PipelineError {
    fn from(e: FovError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::Data(format!("worker pool: {e}")))
}

fn load_packs(store: &Path) -> Result<Vec<ScenePack>, PipelineError> {
    let packs = load_store(store)?;
    if packs.is_empty() {
        return Err(PipelineError::Validation(format!(
            "{}: store holds no scene packs",
            store.display()
        )));
    }
    Ok(packs)
}

/// Normalizes each manifest into a scene pack in `cfg.paths.store`. Image
/// and depth paths resolve against the manifest's directory.
pub fn ingest(manifests: &[PathBuf], cfg: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    if manifests.is_empty() {
        return Err(PipelineError::Validation("no manifests given".into()));
    }
    let mut seen = BTreeSet::new();
    let mut packs = Vec::new();
    for path in manifests {
        let manifest = load_manifest(path)?;
        if !seen.insert(manifest.scene_id.clone()) {
            return Err(PipelineError::Validation(format!(
                "{}: duplicate scene id '{}'",
                path.display(),
                manifest.scene_id
            )));
        }
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let root = dir.canonicalize().map_err(|e| io_err(dir, e))?;
        let opts = NormalizeOptions {
            root: Some(root),
            rel_tol: cfg.rel_tol,
        };
        packs.push(normalize(&manifest, &opts)?);
    }
    packs
        .iter()
        .map(|p| write_pack(&cfg.paths.store, p).map_err(PipelineError::from))
        .collect()
}

/// Re-images every scene in the store at `cfg.f_new`. With `resample`, the
/// frame images are resized to the new dimensions and written under
/// `<store>/images/<scene>/`; the path is recorded in the frame's
/// `unified_image` extra field.
pub fn unify_store(cfg: &RunConfig, resample: bool) -> Result<usize, PipelineError> {
    let store = &cfg.paths.store;
    let packs = load_packs(store)?;
    for pack in &packs {
        let mut unified = unify_pack(pack, cfg.f_new)?;
        if resample {
            resample_images(store, pack, &mut unified)?;
        }
        write_pack(store, &unified)?;
    }
    Ok(packs.len())
}

fn resample_images(store: &Path, original: &ScenePack, unified: &mut ScenePack) -> Result<(), PipelineError> {
    let dir = store.join("images").join(&unified.scene_id);
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for (i, frame) in unified.frames.iter_mut().enumerate() {
        let src = original.resolve(&original.frames[i].image);
        let img = image::open(&src).map_err(|e| io_err(&src, e))?;
        let resized = img.resize_exact(
            frame.camera.width,
            frame.camera.height,
            image::imageops::FilterType::Triangle,
        );
        let dst = dir.join(format!("{i}.png"));
        resized.save(&dst).map_err(|e| io_err(&dst, e))?;
        let abs = dst.canonicalize().map_err(|e| io_err(&dst, e))?;
        frame
            .extra
            .insert("unified_image".into(), Value::String(abs.display().to_string()));
    }
    Ok(())
}

/// Task histogram and generation diagnostics for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub config_hash: String,
    pub seed: u64,
    pub scenes: usize,
    pub total: usize,
    pub by_family: BTreeMap<String, usize>,
    pub by_task: BTreeMap<String, usize>,
    pub rejected: BTreeMap<String, BTreeMap<String, usize>>,
    /// Scenes each task was skipped for, with the reason.
    pub skipped: BTreeMap<String, BTreeMap<String, String>>,
    pub cot_missing: usize,
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub samples: Vec<InstructionSample>,
    pub report: DistributionReport,
}

fn read_to_string(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn load_teacher(cfg: &RunConfig) -> Result<Option<ReplayTeacher>, PipelineError> {
    let Some(path) = &cfg.paths.teacher_replay else {
        return Ok(None);
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    ReplayTeacher::from_jsonl(BufReader::new(file))
        .map(Some)
        .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
}

fn generate_pack(
    pack: &ScenePack,
    tasks: &[Task],
    cfg: &RunConfig,
    teacher: Option<&dyn TeacherClient>,
    few_shot: &BTreeMap<crate::generate::TeacherKind, String>,
) -> Result<(Vec<InstructionSample>, GenReport), PipelineError> {
    let mut inputs = SceneInputs::new(pack);
    inputs.depths = (0..pack.frames.len())
        .map(|i| pack.load_depth(i))
        .collect::<Result<_, _>>()?;
    inputs.teacher = teacher;
    inputs.few_shot = few_shot.clone();
    let gen_cfg = cfg.gen_config();
    let mut samples = Vec::new();
    let mut report = GenReport::default();
    for &task in tasks {
        let (s, r) = generate_scene(&inputs, &[task], &gen_cfg, cfg.seed, cfg.count_for(task))
            .map_err(|e| PipelineError::Data(format!("scene {}: {e}", pack.scene_id)))?;
        samples.extend(s);
        report.merge(&r);
    }
    Ok((samples, report))
}

/// Generates samples for every scene in the store. Scenes run in parallel on
/// `cfg.jobs` workers; output follows scene id order.
pub fn generate(cfg: &RunConfig, tasks: &[Task]) -> Result<GenOutput, PipelineError> {
    if tasks.is_empty() {
        return Err(PipelineError::Validation("no tasks selected".into()));
    }
    let packs = load_packs(&cfg.paths.store)?;
    let teacher = load_teacher(cfg)?;
    let few_shot = cfg
        .paths
        .few_shot
        .iter()
        .map(|(k, p)| read_to_string(p).map(|s| (*k, s)))
        .collect::<Result<BTreeMap<_, _>, _>>()?;
    let teacher_ref = teacher.as_ref().map(|t| t as &dyn TeacherClient);

    let per_scene = thread_pool(cfg.jobs)?.install(|| {
        packs
            .par_iter()
            .map(|p| generate_pack(p, tasks, cfg, teacher_ref, &few_shot))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let hash = cfg.hash();
    let mut samples = Vec::new();
    let mut report = DistributionReport {
        config_hash: hash.clone(),
        seed: cfg.seed,
        scenes: packs.len(),
        total: 0,
        by_family: BTreeMap::new(),
        by_task: BTreeMap::new(),
        rejected: BTreeMap::new(),
        skipped: BTreeMap::new(),
        cot_missing: 0,
    };
    let mut merged = GenReport::default();
    for (pack, (s, r)) in packs.iter().zip(per_scene) {
        for (tag, why) in &r.skipped {
            report
                .skipped
                .entry(tag.clone())
                .or_default()
                .insert(pack.scene_id.clone(), why.clone());
        }
        merged.merge(&r);
        samples.extend(s.into_iter().map(|mut s| {
            s.meta.config_hash = Some(hash.clone());
            s
        }));
    }
    for s in &samples {
        *report.by_family.entry(s.task.family().into()).or_default() += 1;
    }
    report.total = samples.len();
    report.by_task = merged.generated;
    report.rejected = merged.rejected;
    report.cot_missing = merged.cot_missing;
    Ok(GenOutput { samples, report })
}

/// Writes `samples.jsonl` and `report.json` into `dir`.
pub fn write_gen_output(dir: &Path, out: &GenOutput) -> Result<(PathBuf, PathBuf), PipelineError> {
    let samples = dir.join(SAMPLES_FILE);
    let report = dir.join(REPORT_FILE);
    write_text(&samples, &crate::dataset::to_jsonl_string(&out.samples)?)?;
    write_text(&report, &pretty(&out.report))?;
    Ok((samples, report))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxEntry {
    bbox_3d: Vec<f64>,
    label: String,
}

/// One scene's predictions, either as a raw model response or as boxes.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredRecord {
    scene: String,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    boxes: Option<Vec<BoxEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: MetricReport,
    /// AP at each configured IoU threshold, keyed `AP@<tau>`.
    pub thresholds: BTreeMap<String, f64>,
    /// Records whose response held no parsable box list; scored as empty.
    pub unparsed: Vec<String>,
    /// Store scenes without a prediction record; scored as empty.
    pub missing_scenes: Vec<String>,
    pub config_hash: String,
}

/// Ground-truth boxes a detection answer for the scene should contain.
pub fn scene_gt_boxes(pack: &ScenePack) -> Vec<Box3D> {
    let multi = pack.frames.len() > 1;
    pack.objects
        .iter()
        .filter(|o| multi || o.present_in(0))
        .map(|o| o.bbox.clone())
        .collect()
}

/// Scores prediction records against the store. Every store scene is one
/// image; scenes without a record count as empty predictions.
pub fn eval_3dod(preds: impl BufRead, cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    let records: Vec<PredRecord> = parse_jsonl(preds)?;
    if records.is_empty() {
        return Err(PipelineError::Validation("prediction file is empty".into()));
    }
    let packs = load_packs(&cfg.paths.store)?;
    let known: BTreeSet<&str> = packs.iter().map(|p| p.scene_id.as_str()).collect();
    let mut by_scene: BTreeMap<String, Vec<Box3D>> = BTreeMap::new();
    let mut unparsed = Vec::new();
    for (n, r) in records.into_iter().enumerate() {
        let line = n + 1;
        if !known.contains(r.scene.as_str()) {
            return Err(PipelineError::Validation(format!("line {line}: unknown scene '{}'", r.scene)));
        }
        if by_scene.contains_key(&r.scene) {
            return Err(PipelineError::Validation(format!("line {line}: duplicate scene '{}'", r.scene)));
        }
        let boxes = match (r.response, r.boxes) {
            (Some(text), None) => parse_detection_json(answer_region(&text)).unwrap_or_else(|_| {
                unparsed.push(r.scene.clone());
                Vec::new()
            }),
            (None, Some(entries)) => entries
                .into_iter()
                .map(|e| Box3D::from_bbox_3d(&e.bbox_3d, e.label))
                .collect::<Result<_, _>>()
                .map_err(|e| PipelineError::Validation(format!("line {line}: {e}")))?,
            _ => {
                return Err(PipelineError::Validation(format!(
                    "line {line}: give exactly one of 'response' or 'boxes'"
                )))
            }
        };
        by_scene.insert(r.scene, boxes);
    }
    let mut missing = Vec::new();
    let images: Vec<ImageDetections> = packs
        .iter()
        .map(|p| {
            let preds = by_scene.remove(&p.scene_id).unwrap_or_else(|| {
                missing.push(p.scene_id.clone());
                Vec::new()
            });
            ImageDetections {
                preds,
                gts: scene_gt_boxes(p),
            }
        })
        .collect();
    let metrics = evaluate(&images)?;
    let mut thresholds = BTreeMap::new();
    for &t in &cfg.iou_thresholds {
        thresholds.insert(format!("AP@{t}"), ap_at(&images, t)?);
    }
    Ok(EvalReport {
        metrics,
        thresholds,
        unparsed,
        missing_scenes: missing,
        config_hash: cfg.hash(),
    })
}

/// Writes the evaluation report as pretty JSON.
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<(), PipelineError> {
    write_text(path, &pretty(report))
}

/// One rollout to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub task: Task,
    /// Full model output, reasoning block included.
    pub response: String,
    /// Reference answer: the box list for detection tasks, the option line
    /// for multiple choice, otherwise free text.
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Option letter of a multiple-choice reference such as `B. north` or
/// `C: point-C`.
fn option_letter(answer: &str) -> Option<char> {
    let mut it = answer.chars();
    let (l, sep) = (it.next()?, it.next()?);
    (('A'..='H').contains(&l) && matches!(sep, '.' | ':') && it.next().is_none_or(char::is_whitespace)).then_some(l)
}

/// Accuracy plus format reward for one rollout.
///
/// Detection tasks use the IoU/F1 blend with a match threshold of `tau`; a
/// response without a parsable box list scores accuracy 0. Multiple-choice
/// references score the extracted option letter, anything else exact match.
pub fn score_reward(req: &RewardRequest, alpha: f64, tau: f64) -> Result<RewardBreakdown, PipelineError> {
    let alpha = req.alpha.unwrap_or(alpha);
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PipelineError::Validation(format!("alpha {alpha} is outside [0, 1]")));
    }
    let fmt = format_ok(&req.response);
    if matches!(req.task, Task::Detection3d | Task::Detection3dMulti) {
        let gts = parse_detection_json(&req.answer)
            .map_err(|e| PipelineError::Validation(format!("reference answer: {e}")))?;
        let scored = parse_detection_json(answer_region(&req.response))
            .ok()
            .and_then(|preds| match_boxes_at(&preds, &gts, tau).ok());
        let r = match scored {
            Some(report) => detection_reward_from_report(&report, alpha),
            None => RewardBreakdown {
                alpha: Some(alpha),
                r_iou: Some(0.0),
                r_f1: Some(0.0),
                ..total_reward(0.0, false)
            },
        };
        return Ok(r.with_format(fmt));
    }
    let acc = match option_letter(req.answer.trim()) {
        Some(gold) => mcq_accuracy(&req.response, gold),
        None => ExactMatch.score(&req.response, &req.answer),
    };
    Ok(total_reward(acc, fmt))
}

/// Scores newline-delimited requests from `input`, writing one response line
/// per request. Blank lines are skipped; malformed lines get an `error`
/// response. Returns the number of requests and of failed ones.
pub fn reward_stream(
    input: impl BufRead,
    mut output: impl Write,
    alpha: f64,
    tau: f64,
) -> Result<(usize, usize), PipelineError> {
    let (mut seen, mut failed) = (0, 0);
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::Data(format!("stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let resp = match serde_json::from_str::<RewardRequest>(&line) {
            Ok(req) => match score_reward(&req, alpha, tau) {
                Ok(r) => RewardResponse {
                    id: req.id,
                    task: Some(req.task),
                    reward: Some(r),
                    error: None,
                },
                Err(e) => RewardResponse {
                    id: req.id,
                    task: Some(req.task),
                    reward: None,
                    error: Some(e.to_string()),
                },
            },
            Err(e) => RewardResponse {
                id: serde_json::from_str::<Value>(&line).ok().and_then(|v| v.get("id").cloned()),
                task: None,
                reward: None,
                error: Some(format!("line {}: {e}", n + 1)),
            },
        };
        failed += usize::from(resp.error.is_some());
        let text = serde_json::to_string(&resp).expect("response serializes");
        writeln!(output, "{text}").map_err(|e| PipelineError::Data(format!("stdout: {e}")))?;
    }
    output.flush().map_err(|e| PipelineError::Data(format!("stdout: {e}")))?;
    if seen == 0 {
        return Err(PipelineError::Validation("no reward requests on input".into()));
    }
    Ok((seen, failed))
}

/// Renders the scene's BEV image as PNG bytes.
pub fn render_scene_bev(cfg: &RunConfig, scene: &str) -> Result<Vec<u8>, PipelineError> {
    let packs = load_packs(&cfg.paths.store)?;
    let pack = packs
        .iter()
        .find(|p| p.scene_id == scene)
        .ok_or_else(|| PipelineError::Validation(format!("unknown scene '{scene}'")))?;
    let cameras: Vec<_> = pack.frames.iter().map(|f| f.pose.clone()).collect();
    render_bev(&pack.objects, &cameras, &BevStyle::default())
        .to_png()
        .map_err(|e| PipelineError::Data(e.to_string()))
}
