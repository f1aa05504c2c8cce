use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plothole::inject::ContinuityRecord;
use plothole::jsonl::read_jsonl;
use serde_json::{json, Value};

fn small_config(dir: &Path) -> PathBuf {
    let c = json!({
        "corpus": {"synthetic_count": 24, "n_train": 12, "n_test": 12},
        "train": {"epochs": 2, "n_seeds": 2},
        "model": {"d_emb": 16, "ffn_hidden": 32, "n_enc_layers": 1},
    });
    let path = dir.join("c.json");
    fs::write(&path, c.to_string()).unwrap();
    path
}

fn plothole(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plothole")).args(args).env("PLOTHOLE_LOG", "error").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = plothole(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct Work {
    dir: tempfile::TempDir,
    config: PathBuf,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        Self { dir, config }
    }

    fn out(&self, name: &str) -> String {
        self.dir.path().join(name).display().to_string()
    }

    fn run(&self, out: &str, args: &[&str]) -> String {
        let config = self.config.display().to_string();
        let mut all = vec!["--config", config.as_str(), "--out", out];
        all.extend_from_slice(args);
        ok(&all)
    }
}

fn datasets(root: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(root).join("work/datasets");
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn inject_twice_gives_identical_datasets() {
    let w = Work::new();
    let (a, b) = (w.out("a"), w.out("b"));
    for out in [&a, &b] {
        w.run(out, &["ingest", "--seed", "7"]);
        w.run(out, &["inject", "--seed", "7"]);
    }
    let (da, db) = (datasets(&a), datasets(&b));
    assert!(da.iter().any(|(n, _)| n == "continuity_test.jsonl"));
    assert_eq!(da, db);
    assert!(w.run(&a, &["inject", "--seed", "7"]).contains("up to date"));
    assert!(w.run(&a, &["inject", "--seed", "7", "--force"]).contains("inject: done"));
    assert_eq!(datasets(&a), db);
    // A different seed is a different config.
    w.run(&a, &["ingest", "--seed", "8"]);
    w.run(&a, &["inject", "--seed", "8"]);
    assert_ne!(datasets(&a), db);
}

#[test]
fn train_writes_one_checkpoint_per_seed_and_a_run_result() {
    let w = Work::new();
    let out = w.out("w");
    for stage in ["ingest", "inject", "encode", "kg"] {
        w.run(&out, &[stage, "--problem", "continuity"]);
    }
    w.run(&out, &["train", "--problem", "continuity", "--seeds", "5", "--use-kg", "false"]);
    let dir = Path::new(&out).join("work/checkpoints/continuity");
    let ckpts: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".phckpt"))
        .collect();
    assert_eq!(ckpts.len(), 5, "{ckpts:?}");
    let results: Value = serde_json::from_str(&fs::read_to_string(dir.join("run_results.json")).unwrap()).unwrap();
    let results = results["results"].as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert_eq!(results[0]["model"], "C-BERT");
    assert_eq!(results[0]["seeds"], json!([0, 1, 2, 3, 4]));
    assert_eq!(results[0]["per_seed"].as_array().unwrap().len(), 5);
    assert!(!Path::new(&out).join("work/checkpoints/unresolved").exists());
}

#[test]
fn human_rows_come_from_the_answer_log() {
    let w = Work::new();
    let out = w.out("w");
    for stage in ["ingest", "inject"] {
        w.run(&out, &[stage]);
    }
    let test: Vec<ContinuityRecord> = read_jsonl(&Path::new(&out).join("work/datasets/continuity_test.jsonl")).unwrap();
    let answers = Path::new(&out).join("work/annotation/answers.jsonl");
    fs::create_dir_all(answers.parent().unwrap()).unwrap();
    let lines: String = test
        .iter()
        .map(|r| {
            let a = json!({"task_id": format!("continuity-{}", r.story_id), "annotator_id": "a", "sentence_index": r.label_index, "timestamp": 0});
            format!("{a}\n")
        })
        .collect();
    fs::write(&answers, lines).unwrap();
    for stage in ["encode", "kg", "train", "eval"] {
        w.run(&out, &[stage, "--problem", "continuity"]);
    }
    let args = ["--problem", "continuity", "--set", "human.source=annotation", "--set", "service.n_tasks=100"];
    w.run(&out, &[&["baseline"][..], &args].concat());
    let b: Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("work/reports/continuity_baselines.json")).unwrap()).unwrap();
    assert_eq!(b["human"]["value"], 1.0);
    assert!(b["human"]["source"].as_str().unwrap().starts_with("annotation study"));
    let report = w.run(&out, &[&["report"][..], &args].concat());
    assert!(report.contains("Human"), "{report}");
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let out = plothole(&["inject", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(plothole(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(plothole(&["train", "--use-kg", "maybe"]).status.code(), Some(1));
    assert_eq!(plothole(&["--help"]).status.code(), Some(0));
}

#[test]
fn validation_errors_exit_one() {
    let w = Work::new();
    let out = w.out("w");
    let missing = w.out("missing.json");
    let config = w.config.display().to_string();
    let cases: Vec<Vec<&str>> = vec![
        vec!["inject", "--config", &missing],
        vec!["inject", "--config", &config, "--set", "train.nope=1"],
        vec!["inject", "--config", &config, "--seeds", "1"],
        vec!["train", "--config", &config, "--out", &out],
        vec!["serve", "--config", &config, "--out", &out],
    ];
    for args in cases {
        let o = plothole(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
}

#[test]
fn config_prints_resolved_settings() {
    let v: Value = serde_json::from_str(&ok(&["config", "--seed", "3", "--use-kg", "true", "--set", "train.epochs=4"])).unwrap();
    assert_eq!((v["seed"].clone(), v["train"]["epochs"].clone()), (json!(3), json!(4)));
    assert_eq!((v["train"]["plain"].clone(), v["train"]["with_kg"].clone()), (json!(false), json!(true)));
}

#[test]
fn selfcheck_passes() {
    let stdout = ok(&["selfcheck"]);
    assert!(stdout.contains("5 of 5 checks passed"), "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn shipped_default_config_is_current() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let shipped: Value = serde_json::from_str(&fs::read_to_string(shipped).unwrap()).unwrap();
    let fresh: Value = serde_json::from_str(&ok(&["config"])).unwrap();
    assert_eq!(shipped, fresh);
}
