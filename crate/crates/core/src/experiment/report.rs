//! Results tables in the "mean ± ci95" style, with significance tests and
//! the bolding rule.

use serde::{Deserialize, Serialize};

use super::stats::{confidence_interval, mean, t_test_1sample, t_test_2sample_welch, TTest};
use crate::error::StatsError;
use crate::inject::Problem;
use crate::jsonl::Provenance;

pub const ALPHA: f64 = 0.01;
pub const CI_LEVEL: f64 = 0.95;

/// Human benchmark values published for the original benchmark. These are
/// reference constants, not measurements of this corpus.
pub const PUBLISHED_HUMAN_F1: f64 = 0.5;
pub const PUBLISHED_HUMAN_MSE: f64 = 2.51e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Mse,
}

impl Metric {
    pub fn for_problem(p: Problem) -> Self {
        match p {
            Problem::Continuity => Metric::F1,
            Problem::Unresolved => Metric::Mse,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::F1 => "F1",
            Metric::Mse => "MSE",
        }
    }

    pub fn higher_is_better(self) -> bool {
        self == Metric::F1
    }

    /// Whether `a` is better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() { a > b } else { a < b }
    }

    pub fn format(self, v: f64) -> String {
        match self {
            Metric::F1 => format!("{v:.3}"),
            Metric::Mse => format!("{v:.2e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    OneSample,
    Welch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub against: String,
    pub kind: TestKind,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub degenerate: bool,
    /// `p < 0.01` and the difference favours this row.
    pub significant_better: bool,
}

impl TestRecord {
    fn new(against: &str, kind: TestKind, r: TTest, metric: Metric) -> Self {
        let favours = if metric.higher_is_better() { r.t > 0.0 } else { r.t < 0.0 };
        Self {
            against: against.to_string(),
            kind,
            t: r.t,
            df: r.df,
            p: r.p,
            degenerate: r.degenerate,
            significant_better: r.p < ALPHA && favours,
        }
    }
}

/// Per-seed results of one trained model variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: Problem,
    pub model: String,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub ci95: f64,
}

impl RunResult {
    pub fn new(problem: Problem, model: impl Into<String>, seeds: Vec<u64>, per_seed: Vec<f64>) -> Result<Self, StatsError> {
        let ci95 = confidence_interval(&per_seed, CI_LEVEL)?;
        Ok(Self { problem, model: model.into(), seeds, mean: mean(&per_seed), ci95, per_seed })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub metric_mean: f64,
    pub ci95: Option<f64>,
    pub per_seed: Vec<f64>,
    pub tests: Vec<TestRecord>,
    pub bold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl ReportRow {
    pub fn test_against(&self, name: &str) -> Option<&TestRecord> {
        self.tests.iter().find(|t| t.against == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanBaseline {
    pub value: f64,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub problem: Problem,
    pub metric: Metric,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
    pub provenance: Provenance,
}

pub const GUESSING: &str = "Guessing";
pub const HUMAN: &str = "Human";

/// Assembles the table: Guessing, Human (if given), then each model run.
/// Every run is tested against the guessing and human values (1-sample)
/// and against every other run (Welch). The best run is bolded when it is
/// significantly better than guessing and than every other run; a
/// non-significant gap between runs is recorded as a tie.
pub fn build_report(
    problem: Problem,
    guessing: f64,
    human: Option<&HumanBaseline>,
    runs: &[RunResult],
    config: serde_json::Value,
    provenance: Provenance,
) -> Result<ReportTable, StatsError> {
    let metric = Metric::for_problem(problem);
    let mut rows = vec![ReportRow {
        name: GUESSING.into(),
        metric_mean: guessing,
        ci95: None,
        per_seed: vec![],
        tests: vec![],
        bold: false,
        source: Some("expected value on this dataset".into()),
    }];
    if let Some(h) = human {
        rows.push(ReportRow {
            name: HUMAN.into(),
            metric_mean: h.value,
            ci95: None,
            per_seed: vec![],
            tests: vec![],
            bold: false,
            source: Some(h.source.clone()),
        });
    }
    let mut notes = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let mut tests = vec![TestRecord::new(GUESSING, TestKind::OneSample, t_test_1sample(&run.per_seed, guessing)?, metric)];
        if let Some(h) = human {
            tests.push(TestRecord::new(HUMAN, TestKind::OneSample, t_test_1sample(&run.per_seed, h.value)?, metric));
        }
        for (j, other) in runs.iter().enumerate() {
            if i != j {
                let r = t_test_2sample_welch(&run.per_seed, &other.per_seed)?;
                tests.push(TestRecord::new(&other.model, TestKind::Welch, r, metric));
            }
        }
        rows.push(ReportRow {
            name: run.model.clone(),
            metric_mean: run.mean,
            ci95: Some(run.ci95),
            per_seed: run.per_seed.clone(),
            tests,
            bold: false,
            source: None,
        });
    }
    let first_run = rows.len() - runs.len();
    let best = (first_run..rows.len()).reduce(|b, i| if metric.better(rows[i].metric_mean, rows[b].metric_mean) { i } else { b });
    if let Some(b) = best {
        let row = &rows[b];
        let beats_guess = row.test_against(GUESSING).is_some_and(|t| t.significant_better);
        let ties: Vec<String> = runs
            .iter()
            .filter(|r| r.model != row.name)
            .filter(|r| !row.test_against(&r.model).is_some_and(|t| t.significant_better))
            .map(|r| r.model.clone())
            .collect();
        if !beats_guess {
            notes.push(format!("{} does not beat guessing at p < {ALPHA}; nothing bolded", row.name));
        } else if !ties.is_empty() {
            notes.push(format!("{} ties with {} (Welch p ≥ {ALPHA}); nothing bolded", row.name, ties.join(", ")));
        } else {
            rows[b].bold = true;
        }
    }
    Ok(ReportTable { problem, metric, rows, notes, config, provenance })
}

impl ReportTable {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// `mean ± ci95` cell, wrapped in `**` when bolded.
    pub fn cell(&self, row: &ReportRow) -> String {
        let body = match row.ci95 {
            Some(ci) => format!("{} ± {}", self.metric.format(row.metric_mean), self.metric.format(ci)),
            None => self.metric.format(row.metric_mean),
        };
        if row.bold { format!("**{body}**") } else { body }
    }

    pub fn title(&self) -> &'static str {
        match self.problem {
            Problem::Continuity => "Continuity Error Model Results",
            Problem::Unresolved => "Unresolved Error Model Results",
        }
    }

    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(5).max(5);
        let mut out = format!("{}\n\n", self.title());
        out.push_str(&format!("{:<width$} | {}\n", "Model", self.metric.label()));
        out.push_str(&format!("{}-+-{}\n", "-".repeat(width), "-".repeat(24)));
        for r in &self.rows {
            out.push_str(&format!("{:<width$} | {}\n", r.name, self.cell(r)));
        }
        out.push_str(&format!(
            "\nModel rows: mean ± {:.0}% confidence interval over {} seeds. Bold: best result significantly better (p < {ALPHA}) than guessing and the other models, humans excluded.\n",
            CI_LEVEL * 100.0,
            self.rows.iter().map(|r| r.per_seed.len()).max().unwrap_or(0)
        ));
        for r in self.rows.iter().filter(|r| !r.tests.is_empty()) {
            for t in &r.tests {
                let kind = match t.kind {
                    TestKind::OneSample => "1-sample",
                    TestKind::Welch => "Welch",
                };
                out.push_str(&format!(
                    "  {} vs {} ({kind}): t = {:.4}, df = {:.2}, p = {:.3e}{}{}\n",
                    r.name,
                    t.against,
                    t.t,
                    t.df,
                    t.p,
                    if t.significant_better { ", significantly better" } else { "" },
                    if t.degenerate { ", zero variance" } else { "" },
                ));
            }
        }
        for r in self.rows.iter().filter_map(|r| r.source.as_ref().map(|s| (r, s))) {
            out.push_str(&format!("  {}: {}\n", r.0.name, r.1));
        }
        for n in &self.notes {
            out.push_str(&format!("Note: {n}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(name: &str, xs: &[f64]) -> RunResult {
        RunResult::new(Problem::Continuity, name, (0..xs.len() as u64).collect(), xs.to_vec()).unwrap()
    }

    fn table(runs: &[RunResult]) -> ReportTable {
        build_report(Problem::Continuity, 0.026, None, runs, serde_json::json!({}), Provenance::new("x", 0)).unwrap()
    }

    #[test]
    fn significant_winner_is_bold() {
        let t = table(&[run("A", &[0.180, 0.182, 0.181, 0.183, 0.184]), run("B", &[0.20, 0.21, 0.20, 0.21, 0.205])]);
        assert!(t.row("B").unwrap().bold);
        assert!(!t.row("A").unwrap().bold);
        assert!(t.notes.is_empty());
    }

    #[test]
    fn close_variants_tie() {
        let t = table(&[run("A", &[0.18, 0.20, 0.19, 0.21, 0.17]), run("B", &[0.19, 0.21, 0.18, 0.22, 0.18])]);
        let p = t.row("B").unwrap().test_against("A").unwrap().p;
        assert!(p > ALPHA);
        assert!(t.rows.iter().all(|r| !r.bold));
        assert!(t.notes[0].contains("ties"));
    }

    #[test]
    fn formatting_matches_tables() {
        assert_eq!(Metric::F1.format(0.182), "0.182");
        assert_eq!(Metric::Mse.format(4.69e-4), "4.69e-4");
        assert_eq!(Metric::Mse.format(1.37e-2), "1.37e-2");
        let t = table(&[run("C-BERT", &[0.178, 0.182, 0.186, 0.181, 0.183])]);
        let cell = t.cell(t.row("C-BERT").unwrap());
        assert_eq!(cell, "**0.182 ± 0.004**");
    }
}
