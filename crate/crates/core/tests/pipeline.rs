//! End-to-end stage runs on a small synthetic corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plothole::inject::Problem;
use plothole::pipeline::{Pipeline, PipelineConfig, PipelineError, Stage, StageOutcome};

fn small_config(root: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default()
        .with_overrides(&[
            "corpus.synthetic_count=24".into(),
            "corpus.n_train=12".into(),
            "corpus.n_test=12".into(),
            "train.epochs=2".into(),
            "train.n_seeds=2".into(),
            "model.d_emb=16".into(),
            "model.ffn_hidden=32".into(),
            "model.n_enc_layers=1".into(),
            "seed=7".into(),
        ])
        .unwrap();
    c.paths = c.paths.rebased(root);
    c
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_run_is_byte_identical_and_restartable() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = Pipeline::new(small_config(a.path())).unwrap();
    let pb = Pipeline::new(small_config(b.path())).unwrap();
    pa.run_all().unwrap();
    pb.run_all().unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let artifacts: Vec<&PathBuf> = ta.keys().filter(|p| !p.starts_with("work/stamps")).collect();
    assert!(artifacts.iter().any(|p| p.ends_with("continuity_report.txt")));
    assert!(artifacts.iter().filter(|p| p.extension().is_some_and(|e| e == "phckpt")).count() == 8);
    for p in artifacts {
        assert!(ta[p] == tb[p], "{} differs between runs", p.display());
    }
    for s in Stage::ALL {
        assert_eq!(pa.run(s).unwrap(), StageOutcome::UpToDate, "{}", s.name());
    }
    let report = fs::read_to_string(a.path().join("work/reports/continuity_report.txt")).unwrap();
    for row in ["Guessing", "Human", "C-BERT ", "C-BERT+GAT"] {
        assert!(report.contains(row), "{row} missing from\n{report}");
    }
    assert!(report.contains(" ± "));
}

#[test]
fn forced_rerun_rewrites_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(small_config(dir.path())).unwrap();
    p.run(Stage::Ingest).unwrap();
    p.run(Stage::Inject).unwrap();
    let before = tree(&dir.path().join("work/datasets"));
    p.force = true;
    assert_eq!(p.run(Stage::Inject).unwrap(), StageOutcome::Ran);
    assert_eq!(tree(&dir.path().join("work/datasets")), before);
}

#[test]
fn artifacts_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let p = Pipeline::new(cfg.clone()).unwrap();
    p.run(Stage::Ingest).unwrap();
    p.run(Stage::Inject).unwrap();
    let prov = plothole::jsonl::read_provenance(&dir.path().join("work/datasets/continuity_train.jsonl")).unwrap().unwrap();
    assert_eq!(prov.seed, 7);
    assert_eq!(prov.config_hash, cfg.hash());
    assert_eq!(prov.tool_version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn out_of_order_stage_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Pipeline::new(small_config(dir.path())).unwrap();
    p.problems = vec![Problem::Unresolved];
    let err = p.run(Stage::Train).unwrap_err();
    assert!(matches!(err, PipelineError::MissingInput { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn missing_configured_input_is_rejected_at_start() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.corpus.source = plothole::pipeline::CorpusSource::Jsonl;
    c.corpus.input = Some(dir.path().join("nope.jsonl"));
    let err = Pipeline::new(c).err().unwrap();
    assert_eq!(err.exit_code(), 1);
}

