//! Dataset preparation, multi-seed training and evaluation, and the results
//! tables.

pub mod metrics;
pub mod report;
pub mod stats;
pub mod train;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Story;
use crate::encode::{pad, Encoder};
use crate::error::{CorpusError, ExperimentError};
use crate::inject::{ContinuityRecord, Problem, UnresolvedRecord};
use crate::jsonl::Provenance;
use crate::kg::{embed_graph, extract_graph, max_entities, ExtractedGraph};
use crate::lexicon::NameLexicon;
use crate::models::{InputDims, Model, ModelConfig, ModelKind, PreparedGraph, Target};
use crate::scalar::Scalar;

pub use metrics::{expected_guess_f1, expected_guess_mse, f1_continuity, mse_unresolved};
pub use report::{build_report, HumanBaseline, Metric, ReportRow, ReportTable, RunResult};
pub use train::{predict_fractions, predict_indices, train, PreparedSample, TrainLog, TrainOptions};

/// One labelled example before encoding: the (possibly modified) sentences
/// and the target.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelledStory {
    pub story_id: String,
    pub sentences: Vec<String>,
    pub target: Target,
}

impl From<&ContinuityRecord> for LabelledStory {
    fn from(r: &ContinuityRecord) -> Self {
        Self { story_id: r.story_id.clone(), sentences: r.sentences.clone(), target: Target::Index(r.label_index) }
    }
}

impl From<&UnresolvedRecord> for LabelledStory {
    fn from(r: &UnresolvedRecord) -> Self {
        Self { story_id: r.story_id.clone(), sentences: r.sentences.clone(), target: Target::Fraction(r.label_fraction) }
    }
}

impl LabelledStory {
    pub fn story(&self) -> Result<Story, CorpusError> {
        Story::from_sentences(&self.story_id, &self.sentences)
    }
}

/// Dataset-wide widths shared by the train and test splits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Longest story, in sentences.
    pub n_max: usize,
    /// Largest entity count of any graph.
    pub d_n: usize,
    pub d_sent: usize,
}

impl DatasetMeta {
    pub fn new(stories: &[&LabelledStory], graphs: &[&ExtractedGraph], d_sent: usize) -> Self {
        let n_max = stories.iter().map(|s| s.sentences.len()).max().unwrap_or(1).max(1);
        let owned: Vec<ExtractedGraph> = graphs.iter().map(|g| (*g).clone()).collect();
        Self { n_max, d_n: max_entities(&owned), d_sent }
    }

    pub fn input_dims(&self) -> InputDims {
        InputDims { d_sent: self.d_sent, d_node: self.d_n, d_edge: self.d_sent, n_max: self.n_max }
    }
}

/// Extracts one knowledge graph per story, in input order.
pub fn extract_graphs(stories: &[LabelledStory], names: &NameLexicon) -> Result<Vec<ExtractedGraph>, ExperimentError> {
    stories.par_iter().map(|s| Ok(extract_graph(&s.story()?, names))).collect()
}

/// Encodes, pads and attaches graphs. `graphs` must be aligned with
/// `stories`; pass `None` for models without the KG branch.
pub fn prepare_samples<T: Scalar>(
    stories: &[LabelledStory],
    graphs: Option<&[ExtractedGraph]>,
    encoder: &Encoder,
    meta: &DatasetMeta,
) -> Result<Vec<PreparedSample<T>>, ExperimentError> {
    if let Some(g) = graphs {
        if g.len() != stories.len() {
            return Err(ExperimentError::Config(format!("{} graphs for {} stories", g.len(), stories.len())));
        }
    }
    stories
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let enc = encoder.encode_sentences(&s.story_id, &s.sentences)?;
            let encoding = pad::<T>(&s.story_id, &enc, meta.n_max)?;
            let graph = match graphs {
                Some(g) => {
                    if g[i].story_id != s.story_id {
                        return Err(ExperimentError::Config(format!(
                            "graph {} is for {:?}, expected {:?}",
                            i, g[i].story_id, s.story_id
                        )));
                    }
                    Some(PreparedGraph::new(&embed_graph(&g[i], meta.d_n, encoder)?)?)
                }
                None => None,
            };
            Ok(PreparedSample { encoding, graph, target: s.target })
        })
        .collect()
}

/// Training and seeding for one experiment. Seeds default to
/// `base..base + n_seeds` with `base` the global seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub n_seeds: usize,
    /// Explicit seeds; overrides `n_seeds` when nonempty.
    pub seeds: Vec<u64>,
    /// Train the variant without the KG branch.
    pub plain: bool,
    /// Train the variant with the GATv2 branch.
    pub with_kg: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let o = TrainOptions::default();
        Self {
            epochs: o.epochs,
            batch_size: o.batch_size,
            learning_rate: o.learning_rate,
            n_seeds: 5,
            seeds: vec![],
            plain: true,
            with_kg: true,
        }
    }
}

impl TrainSpec {
    pub fn options(&self) -> TrainOptions {
        TrainOptions { epochs: self.epochs, batch_size: self.batch_size, learning_rate: self.learning_rate }
    }

    pub fn seed_list(&self, base: u64) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.n_seeds as u64).map(|i| base.wrapping_add(i)).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let n = if self.seeds.is_empty() { self.n_seeds } else { self.seeds.len() };
        if n < 2 {
            return Err(ExperimentError::Config(format!("need at least 2 seeds for confidence intervals, got {n}")));
        }
        let mut uniq = self.seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != self.seeds.len() {
            return Err(ExperimentError::Config("seeds must be distinct".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ExperimentError::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ExperimentError::Config("epochs and batch_size must be positive".into()));
        }
        if !self.plain && !self.with_kg {
            return Err(ExperimentError::Config("no model variant enabled".into()));
        }
        Ok(())
    }

    /// `(display name, use_kg)` for every enabled variant.
    pub fn variants(&self, kind: ModelKind) -> Vec<(String, bool)> {
        let mut v = Vec::new();
        if self.plain {
            v.push((kind.name().to_string(), false));
        }
        if self.with_kg {
            v.push((format!("{}+GAT", kind.name()), true));
        }
        v
    }
}

pub fn model_kind(problem: Problem) -> ModelKind {
    match problem {
        Problem::Continuity => ModelKind::CBert,
        Problem::Unresolved => ModelKind::UBert,
    }
}

/// One `(variant, seed)` training job.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunJob {
    pub variant: String,
    pub use_kg: bool,
    pub seed: u64,
}

impl RunJob {
    /// File-name stem, e.g. `C-BERT+GAT_seed3`.
    pub fn stem(&self) -> String {
        format!("{}_seed{}", self.variant, self.seed)
    }
}

/// Jobs ordered by variant, then seed.
pub fn plan_runs(kind: ModelKind, spec: &TrainSpec, base_seed: u64) -> Vec<RunJob> {
    let seeds = spec.seed_list(base_seed);
    spec.variants(kind)
        .into_iter()
        .flat_map(|(variant, use_kg)| seeds.iter().map(move |&seed| RunJob { variant: variant.clone(), use_kg, seed }))
        .collect()
}

/// A trained model with the job that produced it.
#[derive(Clone, Debug)]
pub struct TrainedRun<T> {
    pub job: RunJob,
    pub model: Model<T>,
    pub log: TrainLog,
}

/// Trains every job on the current rayon pool. Each job is single-threaded
/// and deterministic; results keep job order.
pub fn train_runs<T: Scalar>(
    kind: ModelKind,
    model: &ModelConfig,
    spec: &TrainSpec,
    jobs: &[RunJob],
    dims: InputDims,
    train_set: &[PreparedSample<T>],
) -> Result<Vec<TrainedRun<T>>, ExperimentError> {
    spec.validate()?;
    model.validate()?;
    let opts = spec.options();
    jobs.par_iter()
        .map(|job| {
            let config = ModelConfig { use_kg: job.use_kg, ..model.clone() };
            let (m, log) = train(kind, &config, dims, train_set, &opts, job.seed)?;
            log::info!("trained {} ({} epochs, final loss {:.6})", job.stem(), log.epoch_losses.len(), log.epoch_losses.last().copied().unwrap_or(f64::NAN));
            Ok(TrainedRun { job: job.clone(), model: m, log })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predictions {
    Indices(Vec<usize>),
    Fractions(Vec<f64>),
}

/// Test-split score of one trained run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub job: RunJob,
    pub metric: f64,
    pub predictions: Predictions,
}

/// Groups scores into one [`RunResult`] per variant, in first-seen order.
pub fn collect_results(problem: Problem, scores: &[RunScore]) -> Result<Vec<RunResult>, ExperimentError> {
    let mut names: Vec<&str> = Vec::new();
    for s in scores {
        if !names.contains(&s.job.variant.as_str()) {
            names.push(&s.job.variant);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&RunScore> = scores.iter().filter(|s| s.job.variant == name).collect();
            Ok(RunResult::new(problem, name, mine.iter().map(|s| s.job.seed).collect(), mine.iter().map(|s| s.metric).collect())?)
        })
        .collect()
}

pub struct ExperimentOutcome<T> {
    pub report: ReportTable,
    pub runs: Vec<TrainedRun<T>>,
    pub scores: Vec<RunScore>,
}

/// Scores predictions against the sample targets.
pub fn evaluate<T: Scalar>(model: &Model<T>, samples: &[PreparedSample<T>]) -> Result<(f64, Predictions), ExperimentError> {
    match model.kind() {
        ModelKind::CBert => {
            let preds = predict_indices(model, samples)?;
            let labels = index_labels(samples)?;
            Ok((f1_continuity(&preds, &labels)?, Predictions::Indices(preds)))
        }
        ModelKind::UBert => {
            let preds = predict_fractions(model, samples)?;
            let labels = fraction_labels(samples)?;
            Ok((mse_unresolved(&preds, &labels)?, Predictions::Fractions(preds)))
        }
    }
}

/// Scores every run on `test`, in parallel, keeping run order.
pub fn score_runs<T: Scalar>(runs: &[TrainedRun<T>], test: &[PreparedSample<T>]) -> Result<Vec<RunScore>, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::Config("test split is empty".into()));
    }
    runs.par_iter()
        .map(|r| {
            let (metric, predictions) = evaluate(&r.model, test)?;
            Ok(RunScore { job: r.job.clone(), metric, predictions })
        })
        .collect()
}

fn index_labels<T>(samples: &[PreparedSample<T>]) -> Result<Vec<usize>, ExperimentError> {
    samples
        .iter()
        .map(|s| match s.target {
            Target::Index(i) => Ok(i),
            Target::Fraction(_) => Err(ExperimentError::Config("continuity sample has a fraction target".into())),
        })
        .collect()
}

fn fraction_labels<T>(samples: &[PreparedSample<T>]) -> Result<Vec<f64>, ExperimentError> {
    samples
        .iter()
        .map(|s| match s.target {
            Target::Fraction(r) => Ok(r),
            Target::Index(_) => Err(ExperimentError::Config("unresolved sample has an index target".into())),
        })
        .collect()
}

/// Expected metric of the guessing baseline on `test`.
pub fn guessing_value<T>(problem: Problem, test: &[PreparedSample<T>]) -> Result<f64, ExperimentError> {
    Ok(match problem {
        Problem::Continuity => {
            index_labels(test)?;
            let lengths: Vec<usize> = test.iter().map(|s| s.encoding.valid_len).collect();
            expected_guess_f1(&lengths)?
        }
        Problem::Unresolved => expected_guess_mse(&fraction_labels(test)?)?,
    })
}

pub struct SplitSamples<'a, T> {
    pub train: &'a [PreparedSample<T>],
    pub test: &'a [PreparedSample<T>],
}

/// The configuration block echoed into every report.
pub fn report_config(problem: Problem, model: &ModelConfig, spec: &TrainSpec, base_seed: u64, dims: InputDims, n_train: usize, n_test: usize) -> serde_json::Value {
    serde_json::json!({
        "problem": problem,
        "model": model,
        "train": spec,
        "seeds": spec.seed_list(base_seed),
        "dims": dims,
        "n_train": n_train,
        "n_test": n_test,
    })
}

/// Trains every enabled variant for every seed, scores each on the test
/// split and assembles the table. Both the KG and plain variants read the
/// same samples; plain models ignore the graphs.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment<T: Scalar>(
    problem: Problem,
    model: &ModelConfig,
    spec: &TrainSpec,
    base_seed: u64,
    dims: InputDims,
    data: SplitSamples<'_, T>,
    human: Option<&HumanBaseline>,
    provenance: Provenance,
) -> Result<ExperimentOutcome<T>, ExperimentError> {
    let kind = model_kind(problem);
    let jobs = plan_runs(kind, spec, base_seed);
    let runs = train_runs(kind, model, spec, &jobs, dims, data.train)?;
    let scores = score_runs(&runs, data.test)?;
    let results = collect_results(problem, &scores)?;
    let guess = guessing_value(problem, data.test)?;
    let config = report_config(problem, model, spec, base_seed, dims, data.train.len(), data.test.len());
    let report = build_report(problem, guess, human, &results, config, provenance)?;
    Ok(ExperimentOutcome { report, runs, scores })
}
