//! `spatial-forge` command-line driver.
//!
//! Exit codes: 0 on success, 2 for validation failures, 3 for data errors.

use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use spatial_forge::config::RunConfig;
use spatial_forge::generate::Task;
use spatial_forge::pipeline::{self, PipelineError, EVAL_FILE};

#[derive(Parser, Debug)]
#[command(name = "spatial-forge", version, about = "Spatial instruction data and 3D detection scoring")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, env = "SPATIAL_FORGE_CONFIG")]
    config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Shared focal length in pixels.
    #[arg(long = "f-new", global = true)]
    f_new: Option<f64>,
    /// IoU weight in the detection reward.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// IoU threshold for F1 matching.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Relative depth tolerance of the visibility check.
    #[arg(long = "rel-tol", global = true)]
    rel_tol: Option<f64>,
    /// Comma-separated task tags; default is every task.
    #[arg(long, global = true, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Scene pack directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize scene manifests into the store.
    Ingest {
        #[arg(required = false)]
        manifests: Vec<PathBuf>,
    },
    /// Re-image every stored scene at the shared focal length.
    UnifyFov {
        /// Also resize the frame images into the store.
        #[arg(long)]
        resample: bool,
    },
    /// Generate instruction samples and the distribution report.
    Gen,
    /// Score detection predictions against the store.
    #[command(name = "eval-3dod")]
    Eval3dod {
        /// JSONL of `{"scene", "response" | "boxes"}` records.
        predictions: PathBuf,
    },
    /// Score rollouts: JSON requests on stdin, one reward per line on stdout.
    Reward,
    /// Render a scene's bird's-eye view as PNG.
    RenderBev {
        scene: String,
        /// Output file; defaults to `<out>/<scene>_bev.png`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    PipelineError::Validation(msg.into()).into()
}

fn build_config(g: &GlobalArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).map_err(PipelineError::from)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = g.f_new {
        cfg.f_new = v;
    }
    if let Some(v) = g.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = g.tau {
        cfg.tau = v;
    }
    if let Some(v) = g.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = &g.store {
        cfg.paths.store = v.clone();
    }
    if let Some(v) = &g.out {
        cfg.paths.out = v.clone();
    }
    cfg.validate().map_err(PipelineError::from)?;
    Ok(cfg)
}

fn parse_tasks(list: &Option<Vec<String>>) -> anyhow::Result<Vec<Task>> {
    match list {
        None => Ok(Task::ALL.to_vec()),
        Some(names) => names
            .iter()
            .filter(|n| !n.trim().is_empty())
            .map(|n| n.trim().parse::<Task>().map_err(validation))
            .collect(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| PipelineError::Data(format!("{e:#}")).into())
}

/// Prints a line to stdout; a closed pipe on the reading side is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    match writeln!(io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(PipelineError::Data(format!("stdout: {e}")).into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = build_config(&cli.global)?;
    match cli.command {
        Command::Ingest { manifests } => {
            for p in pipeline::ingest(&manifests, &cfg)? {
                emit(&p.display().to_string())?;
            }
        }
        Command::UnifyFov { resample } => {
            let n = pipeline::unify_store(&cfg, resample)?;
            eprintln!("unified {n} scenes at f = {}", cfg.f_new);
        }
        Command::Gen => {
            let tasks = parse_tasks(&cli.global.tasks)?;
            let out = pipeline::generate(&cfg, &tasks)?;
            let (samples, report) = pipeline::write_gen_output(&cfg.paths.out, &out)?;
            eprintln!("{} samples -> {}", out.samples.len(), samples.display());
            eprintln!("report -> {}", report.display());
        }
        Command::Eval3dod { predictions } => {
            let file = std::fs::File::open(&predictions)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", predictions.display())))?;
            let report = pipeline::eval_3dod(BufReader::new(file), &cfg)?;
            let path = cfg.paths.out.join(EVAL_FILE);
            pipeline::write_eval_report(&path, &report)?;
            emit(&serde_json::to_string_pretty(&report)?)?;
        }
        Command::Reward => {
            let (seen, failed) = pipeline::reward_stream(io::stdin().lock(), io::stdout().lock(), cfg.alpha, cfg.tau)?;
            if failed > 0 {
                return Err(validation(format!("{failed} of {seen} requests were invalid")));
            }
        }
        Command::RenderBev { scene, output } => {
            let png = pipeline::render_scene_bev(&cfg, &scene)?;
            let path = output.unwrap_or_else(|| cfg.paths.out.join(format!("{scene}_bev.png")));
            write_file(&path, &png)?;
            emit(&path.display().to_string())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(3, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
