//! Human-baseline scores from stored answers and withheld labels.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use plothole::experiment::metrics::{f1_continuity, mse_unresolved};
use plothole::experiment::report::HumanBaseline;
use plothole::inject::Problem;
use serde::{Deserialize, Serialize};

use crate::store::{Answer, AnswerMap};
use crate::study::{Label, Study};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorScore {
    pub annotator_id: String,
    pub f1: Option<f64>,
    pub mse: Option<f64>,
    pub n_answers: usize,
}

/// Pooled and per-annotator scores. `empty` marks a report with no answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanReport {
    pub empty: bool,
    /// Pooled over every (task, annotator) continuity answer.
    pub f1: Option<f64>,
    /// Pooled over every (task, annotator) unresolved answer.
    pub mse: Option<f64>,
    /// Tasks with at least one answer.
    pub n_tasks: usize,
    pub n_annotators: usize,
    pub n_answers: usize,
    pub per_annotator: Vec<AnnotatorScore>,
}

#[derive(Default)]
struct Pairs {
    idx_pred: Vec<usize>,
    idx_label: Vec<usize>,
    frac_pred: Vec<f64>,
    frac_label: Vec<f64>,
}

impl Pairs {
    fn scores(&self) -> (Option<f64>, Option<f64>) {
        (f1_continuity(&self.idx_pred, &self.idx_label).ok(), mse_unresolved(&self.frac_pred, &self.frac_label).ok())
    }
}

pub fn human_report(study: &Study, answers: &AnswerMap) -> HumanReport {
    let mut pooled = Pairs::default();
    let mut by_annotator: BTreeMap<&str, (Pairs, usize)> = BTreeMap::new();
    let mut tasks = BTreeSet::new();
    for ((task_id, annotator), a) in answers {
        let Some(t) = study.get(task_id) else {
            warn!("answer for unknown task {task_id} ignored");
            continue;
        };
        let entry = by_annotator.entry(annotator).or_default();
        match (t.label, a.answer) {
            (Label::Index(l), Answer::SentenceIndex { sentence_index }) => {
                for p in [&mut pooled, &mut entry.0] {
                    p.idx_pred.push(sentence_index);
                    p.idx_label.push(l);
                }
            }
            (Label::Fraction(l), Answer::Fraction { fraction }) => {
                for p in [&mut pooled, &mut entry.0] {
                    p.frac_pred.push(fraction);
                    p.frac_label.push(l);
                }
            }
            _ => {
                warn!("answer of the wrong kind for {task_id} ignored");
                continue;
            }
        }
        entry.1 += 1;
        tasks.insert(task_id.as_str());
    }
    let (f1, mse) = pooled.scores();
    let per_annotator: Vec<AnnotatorScore> = by_annotator
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(id, (p, n))| {
            let (f1, mse) = p.scores();
            AnnotatorScore { annotator_id: id.to_string(), f1, mse, n_answers: n }
        })
        .collect();
    let n_answers = per_annotator.iter().map(|a| a.n_answers).sum();
    HumanReport {
        empty: n_answers == 0,
        f1,
        mse,
        n_tasks: tasks.len(),
        n_annotators: per_annotator.len(),
        n_answers,
        per_annotator,
    }
}

/// Human rows for the results tables; problems without answers are absent.
pub fn human_baselines(report: &HumanReport) -> BTreeMap<Problem, HumanBaseline> {
    let source = format!("annotation study: {} answers from {} annotators", report.n_answers, report.n_annotators);
    let mut out = BTreeMap::new();
    if let Some(v) = report.f1 {
        out.insert(Problem::Continuity, HumanBaseline { value: v, source: source.clone() });
    }
    if let Some(v) = report.mse {
        out.insert(Problem::Unresolved, HumanBaseline { value: v, source });
    }
    out
}
