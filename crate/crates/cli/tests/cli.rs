//! End-to-end checks of the `spatial-forge` binary on the fixture corpus.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spatial-forge"));
    c.env_remove("SPATIAL_FORGE_CONFIG");
    c
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn manifests() -> Vec<PathBuf> {
    ["office", "printer", "walkthrough"]
        .iter()
        .map(|s| fixtures().join(s).join("manifest.json"))
        .collect()
}

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(text) = stdin {
            pipe.write_all(text.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Ingests, unifies and generates into a fresh directory; returns it.
fn pipeline_run(dir: &Path, jobs: &str) -> PathBuf {
    let store = dir.join("store");
    let out = dir.join("out");
    let (s, o) = (store.to_str().unwrap(), out.to_str().unwrap());
    let mut args = vec!["--store", s, "ingest"];
    let ms: Vec<String> = manifests().iter().map(|p| p.display().to_string()).collect();
    args.extend(ms.iter().map(String::as_str));
    let r = run(&args, None);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(code(&run(&["--store", s, "unify-fov"], None)), 0);
    let r = run(&["--store", s, "--out", o, "--seed", "7", "--jobs", jobs, "gen"], None);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

#[test]
fn empty_inputs_exit_2() {
    let r = run(&["reward"], Some(""));
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("no reward requests"));
    assert_eq!(code(&run(&["ingest"], None)), 2);
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["--store", empty, "gen"], None)), 2);
    let preds = dir.path().join("p.jsonl");
    std::fs::write(&preds, "").unwrap();
    assert_eq!(code(&run(&["--store", empty, "eval-3dod", preds.to_str().unwrap()], None)), 2);
}

#[test]
fn invalid_config_and_missing_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha = 2.0\n").unwrap();
    assert_eq!(code(&run(&["--config", cfg.to_str().unwrap(), "gen"], None)), 2);
    let mut env_run = bin();
    env_run.env("SPATIAL_FORGE_CONFIG", &cfg).arg("gen");
    assert_eq!(env_run.output().unwrap().status.code(), Some(2));
    assert_eq!(code(&run(&["--tasks", "no_such_task", "gen"], None)), 2);
    let gone = dir.path().join("absent");
    assert_eq!(code(&run(&["--store", gone.to_str().unwrap(), "gen"], None)), 3);
}

#[test]
fn printer_reward_is_two() {
    let answer = "[\n\t{\"bbox_3d\":[-0.16,0.12,1.56,0.44,0.51,0.41,0.11,0.28,0.05],\"label\":\"printer\"},\n\t{\"bbox_3d\":[0.40,-0.02,1.96,0.45,0.51,0.36,0.11,0.27,0.05],\"label\":\"printer\"}\n]";
    let req = serde_json::json!({
        "id": "printer",
        "task": "detection3d",
        "response": format!("<think>Two printers on the cabinet.</think> {answer}"),
        "answer": answer,
    });
    let r = run(&["reward"], Some(&format!("{req}\n")));
    assert_eq!(code(&r), 0);
    let v: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["id"], "printer");
    assert_eq!(v["accuracy"], 1.0);
    assert_eq!(v["format"], 1.0);
    assert_eq!(v["total"], 2.0);
}

#[test]
fn reward_stream_keeps_going_after_bad_line() {
    let input = "{\"task\": \"video_count\", \"response\": \"<think>t</think> 3\", \"answer\": \"3\"}\n{oops\n";
    let r = run(&["reward"], Some(input));
    assert_eq!(code(&r), 2);
    let lines: Vec<Value> = String::from_utf8(r.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["total"], 2.0);
    assert!(lines[1]["error"].is_string());
}

#[test]
fn end_to_end_outputs_are_byte_stable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = pipeline_run(a.path(), "1");
    let out_b = pipeline_run(b.path(), "4");
    for name in ["samples.jsonl", "report.json"] {
        let x = std::fs::read(out_a.join(name)).unwrap();
        let y = std::fs::read(out_b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
        let golden = fixtures().join("golden").join(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
            std::fs::write(&golden, &x).unwrap();
        }
        let want = std::fs::read(&golden).expect("golden file present; set UPDATE_GOLDEN=1 to create it");
        assert!(x == want, "{name} differs from the golden copy");
    }

    let store = a.path().join("store");
    let preds = a.path().join("preds.jsonl");
    std::fs::write(
        &preds,
        "{\"scene\": \"printer\", \"response\": \"<think>t</think> [{\\\"bbox_3d\\\":[-0.16,0.12,1.56,0.44,0.51,0.41,0.11,0.28,0.05],\\\"label\\\":\\\"printer\\\"}]\"}\n",
    )
    .unwrap();
    let r = run(
        &["--store", store.to_str().unwrap(), "--out", out_a.to_str().unwrap(), "eval-3dod", preds.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["missing_scenes"], serde_json::json!(["office", "walkthrough"]));
    // Two printers in the printer scene plus one in the office; one is found.
    assert_eq!(report["per_label"]["printer"]["AR@100"], 1.0 / 3.0);
    assert!(report["thresholds"]["AP@0.25"].is_number());

    let png = a.path().join("office.png");
    let r = run(
        &["--store", store.to_str().unwrap(), "render-bev", "office", "--output", png.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&r), 0);
    assert_eq!(&std::fs::read(&png).unwrap()[1..4], b"PNG");
    assert_eq!(code(&run(&["--store", store.to_str().unwrap(), "render-bev", "nowhere"], None)), 2);
}
