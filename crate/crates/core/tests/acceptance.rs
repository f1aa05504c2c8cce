//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on
//! any failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use plothole::experiment::report::{ReportTable, GUESSING};
use plothole::experiment::stats::t_test_1sample;
use plothole::inject::Problem;
use plothole::pipeline::{Pipeline, PipelineConfig, Stage};
use plothole::selfcheck::{self, Check};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn outcome(name: &str, started: Instant, failures: Vec<String>, summary: String) -> Check {
    let passed = failures.is_empty();
    Check {
        name: name.into(),
        passed,
        detail: if passed { summary } else { failures.join("; ") },
        elapsed: started.elapsed(),
    }
}

/// The [1..5] vs 0 fixture, first confirmed against an independent t CDF.
fn statistics_fixture() -> Vec<String> {
    let mut fail = Vec::new();
    let r = t_test_1sample(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.0).unwrap();
    let t = 3.0 / (2.5f64.sqrt() / 5f64.sqrt());
    let reference = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 4.0).unwrap().cdf(t));
    if (reference - 0.0132).abs() > 1e-3 || (t - 4.2426).abs() > 1e-3 {
        fail.push(format!("independent reference gives t {t}, p {reference}"));
    }
    if (r.t - t).abs() > 1e-12 || (r.p - reference).abs() > 1e-10 {
        fail.push(format!("t-test gives t {}, p {} vs reference t {t}, p {reference}", r.t, r.p));
    }
    fail
}

fn default_config(root: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.paths = c.paths.rebased(root);
    c
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
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

/// `d.ddd ± d.ddd` for F1, `d.dde-k ± d.dde-k` for MSE.
fn cell_format_ok(cell: &str, problem: Problem) -> bool {
    let cell = cell.trim_matches('*');
    let Some((a, b)) = cell.split_once(" ± ") else { return false };
    let ok = |s: &str| match problem {
        Problem::Continuity => {
            s.len() == 5 && s.as_bytes()[1] == b'.' && s.chars().enumerate().all(|(i, c)| i == 1 || c.is_ascii_digit())
        }
        Problem::Unresolved => match s.split_once('e') {
            Some((m, e)) => {
                m.len() == 4
                    && m.as_bytes()[1] == b'.'
                    && m.chars().enumerate().all(|(i, c)| i == 1 || c.is_ascii_digit())
                    && e.trim_start_matches('-').chars().all(|c| c.is_ascii_digit())
                    && !e.is_empty()
            }
            None => false,
        },
    };
    ok(a) && ok(b)
}

fn check_table(t: &ReportTable, fail: &mut Vec<String>) -> String {
    let (model, ratio) = match t.problem {
        Problem::Continuity => ("C-BERT", 2.0),
        Problem::Unresolved => ("U-BERT", 0.5),
    };
    let names: Vec<&str> = t.rows.iter().map(|r| r.name.as_str()).collect();
    for want in [GUESSING.to_string(), model.to_string(), format!("{model}+GAT")] {
        if !names.contains(&want.as_str()) {
            fail.push(format!("{} report lacks row {want}", t.problem));
        }
    }
    let guess = t.row(GUESSING).map(|r| r.metric_mean).unwrap_or(f64::NAN);
    let Some(row) = t.row(model) else { return String::new() };
    let test = row.test_against(GUESSING);
    let p = test.map(|x| x.p).unwrap_or(f64::NAN);
    let beats = match t.problem {
        Problem::Continuity => row.metric_mean >= ratio * guess,
        Problem::Unresolved => row.metric_mean <= ratio * guess,
    };
    if !beats || !test.is_some_and(|x| x.significant_better) {
        fail.push(format!("{model}: {} vs guessing {} (p {p:.2e}) misses the {ratio}x bar", row.metric_mean, guess));
    }
    for r in t.rows.iter().filter(|r| r.ci95.is_some()) {
        if !cell_format_ok(&t.cell(r), t.problem) {
            fail.push(format!("{} cell {:?} is malformed", r.name, t.cell(r)));
        }
    }
    format!("{model} {} vs guessing {} (x{:.1}, p {p:.1e})", t.cell(row), t.metric.format(guess), row.metric_mean / guess)
}

fn reproduction(root: &Path) -> (Check, Option<BTreeMap<PathBuf, Vec<u8>>>) {
    let t0 = Instant::now();
    let mut fail = Vec::new();
    let p = match Pipeline::new(default_config(root)) {
        Ok(p) => p,
        Err(e) => return (outcome("reproduction", t0, vec![e.to_string()], String::new()), None),
    };
    let mut train_time = Duration::ZERO;
    for s in Stage::ALL {
        let ts = Instant::now();
        if let Err(e) = p.run(s) {
            return (outcome("reproduction", t0, vec![format!("{}: {e}", s.name())], String::new()), None);
        }
        if s == Stage::Train {
            train_time = ts.elapsed();
        }
    }
    let mut parts = Vec::new();
    for problem in [Problem::Continuity, Problem::Unresolved] {
        let text = fs::read_to_string(p.layout().report_json(problem)).unwrap();
        let table: ReportTable = serde_json::from_str(&text).unwrap();
        parts.push(check_table(&table, &mut fail));
        println!("{}", table.render_text());
    }
    if train_time > Duration::from_secs(600) {
        fail.push(format!("training took {:.0}s", train_time.as_secs_f64()));
    }
    parts.push(format!("training {:.0}s for 20 runs", train_time.as_secs_f64()));
    (outcome("reproduction vs guessing", t0, fail, parts.join("; ")), Some(files(root)))
}

fn determinism(root: &Path, first: &BTreeMap<PathBuf, Vec<u8>>) -> Check {
    let t0 = Instant::now();
    let mut fail = Vec::new();
    match Pipeline::new(default_config(root)).and_then(|p| p.run_all()) {
        Ok(()) => {}
        Err(e) => return outcome("determinism", t0, vec![e.to_string()], String::new()),
    }
    let second = files(root);
    let artifacts: Vec<&PathBuf> = first.keys().filter(|p| !p.starts_with("work/stamps")).collect();
    let kinds = |ext: &str| artifacts.iter().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    for p in &artifacts {
        if second.get(*p) != first.get(*p) {
            fail.push(format!("{} differs", p.display()));
        }
    }
    if second.keys().filter(|p| !p.starts_with("work/stamps")).count() != artifacts.len() {
        fail.push("artifact sets differ".into());
    }
    let summary = format!("{} artifacts identical ({} checkpoints, {} jsonl)", artifacts.len(), kinds("phckpt"), kinds("jsonl"));
    outcome("determinism", t0, fail, summary)
}

fn main() -> ExitCode {
    let mut checks = vec![
        selfcheck::injection_suite(200, 0, Duration::from_secs(30)),
        selfcheck::gradient_suite(Duration::from_secs(120)),
        selfcheck::distribution_suite(25, 0),
    ];
    let mut metrics = selfcheck::metric_suite(1000, 0);
    let extra = statistics_fixture();
    if !extra.is_empty() {
        metrics.passed = false;
        metrics.detail = extra.join("; ");
    }
    checks.push(metrics);
    checks.push(selfcheck::baseline_suite());
    for c in &checks {
        println!("{}", c.line());
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (repro, first) = reproduction(a.path());
    println!("{}", repro.line());
    checks.push(repro);
    let det = match first {
        Some(first) => determinism(b.path(), &first),
        None => outcome("determinism", Instant::now(), vec!["first run failed".into()], String::new()),
    };
    println!("{}", det.line());
    checks.push(det);
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
