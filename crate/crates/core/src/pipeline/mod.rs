//! Restartable file-based stages: ingest → inject → encode → kg → train →
//! eval → baseline → report. Every artifact carries provenance (a jsonl
//! header line, or a json sidecar for binary files) and every stage leaves
//! a stamp so that rerunning it with the same config is a no-op.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::synth::synthetic_corpus;
use crate::corpus::{filter_corpus, ingest, read_corpus, split_train_test, write_corpus, InputFormat};
use crate::encode::{export_table, Encoder, EncoderKind, EncoderSpec};
pub use crate::error::PipelineError;
use crate::experiment::report::{build_report, HumanBaseline, ReportTable, RunResult, PUBLISHED_HUMAN_F1, PUBLISHED_HUMAN_MSE};
use crate::experiment::{
    collect_results, extract_graphs, model_kind, plan_runs, prepare_samples, report_config, score_runs, train_runs,
    DatasetMeta, LabelledStory, PreparedSample, RunJob, RunScore, TrainLog, TrainedRun,
};
use crate::experiment::metrics::{expected_guess_f1, expected_guess_mse};
use crate::inject::{build_datasets, ContinuityRecord, Lexicon, Problem, Skipped, UnresolvedRecord};
use crate::jsonl::{self, Provenance};
use crate::kg::{import_triples, max_entities, write_graphs, ExtractedGraph, GraphRecord};
use crate::lexicon::{Morphology, NameLexicon};
use crate::models::{InputDims, Model, ModelConfig, ModelKind};
use crate::nn::checkpoint::{checkpoint_bytes, load_into, read_checkpoint};
use crate::scalar::Scalar;

pub use config::{CorpusSource, HumanSource, KgSource, PipelineConfig, Precision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Inject,
    Encode,
    Kg,
    Train,
    Eval,
    Baseline,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Ingest, Stage::Inject, Stage::Encode, Stage::Kg, Stage::Train, Stage::Eval, Stage::Baseline, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Inject => "inject",
            Stage::Encode => "encode",
            Stage::Kg => "kg",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Baseline => "baseline",
            Stage::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    UpToDate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    stage: Stage,
    scope: String,
    key: String,
    outputs: Vec<PathBuf>,
}

/// Sidecar of a binary artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar<T> {
    #[serde(rename = "_provenance")]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingInfo {
    pub problem: Problem,
    pub encoder: EncoderSpec,
    pub dim: usize,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub kind: ModelKind,
    pub job: RunJob,
    pub config: ModelConfig,
    pub dims: InputDims,
    pub precision: Precision,
    pub log: TrainLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub problem: Problem,
    pub n_train: usize,
    pub n_test: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFile {
    #[serde(rename = "_provenance")]
    pub provenance: Provenance,
    pub problem: Problem,
    pub dims: InputDims,
    pub n_train: usize,
    pub n_test: usize,
    pub results: Vec<RunResult>,
    pub scores: Vec<RunScore>,
}

/// Per-variant metrics of freshly trained runs on their training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResults {
    pub problem: Problem,
    pub split: String,
    pub results: Vec<RunResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineFile {
    #[serde(rename = "_provenance")]
    pub provenance: Provenance,
    pub problem: Problem,
    pub guessing: f64,
    pub human: Option<HumanBaseline>,
}

/// Paths of every artifact, derived from the configured directories.
pub struct Layout<'a> {
    pub config: &'a PipelineConfig,
}

impl Layout<'_> {
    pub fn stories(&self) -> PathBuf {
        self.config.paths.corpus.join("stories.jsonl")
    }
    pub fn ingest_errors(&self) -> PathBuf {
        self.config.paths.corpus.join("ingest_errors.jsonl")
    }
    pub fn dataset(&self, p: Problem, split: Split) -> PathBuf {
        self.config.paths.datasets.join(format!("{p}_{}.jsonl", split.name()))
    }
    pub fn skipped(&self) -> PathBuf {
        self.config.paths.datasets.join("skipped.jsonl")
    }
    pub fn dataset_meta(&self) -> PathBuf {
        self.config.paths.datasets.join("meta.json")
    }
    pub fn embeddings(&self, p: Problem) -> PathBuf {
        self.config.paths.embeddings.join(format!("{p}.phemb"))
    }
    pub fn graphs(&self, p: Problem, split: Split) -> PathBuf {
        self.config.paths.graphs.join(format!("{p}_{}.jsonl", split.name()))
    }
    pub fn checkpoint_dir(&self, p: Problem) -> PathBuf {
        self.config.paths.checkpoints.join(p.as_str())
    }
    pub fn checkpoint(&self, p: Problem, job: &RunJob) -> PathBuf {
        self.checkpoint_dir(p).join(format!("{}.phckpt", job.stem()))
    }
    pub fn train_results(&self, p: Problem) -> PathBuf {
        self.checkpoint_dir(p).join("run_results.json")
    }
    pub fn eval(&self, p: Problem) -> PathBuf {
        self.config.paths.reports.join(format!("{p}_eval.json"))
    }
    pub fn baseline(&self, p: Problem) -> PathBuf {
        self.config.paths.reports.join(format!("{p}_baselines.json"))
    }
    pub fn report_text(&self, p: Problem) -> PathBuf {
        self.config.paths.reports.join(format!("{p}_report.txt"))
    }
    pub fn report_json(&self, p: Problem) -> PathBuf {
        self.config.paths.reports.join(format!("{p}_report.json"))
    }
    fn stamp(&self, stage: Stage, scope: &str) -> PathBuf {
        let name = if scope.is_empty() { stage.name().to_string() } else { format!("{}-{scope}", stage.name()) };
        self.config.paths.stamps.join(format!("{name}.json"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Sidecar path of a binary artifact: `x.phckpt` → `x.phckpt.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
    Ok(jsonl::write_file(path, text.as_bytes())?)
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|_| PipelineError::MissingInput { path: path.into(), stage })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

fn read_records<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput { path: path.into(), stage });
    }
    Ok(jsonl::read_jsonl(path)?)
}

fn expand(template: &str, p: Problem) -> PathBuf {
    PathBuf::from(template.replace("{problem}", p.as_str()))
}

/// A configured pipeline run.
pub struct Pipeline {
    pub config: PipelineConfig,
    /// Problems the per-problem stages act on.
    pub problems: Vec<Problem>,
    /// Rerun stages even when their stamp is current.
    pub force: bool,
    /// Human rows computed outside the core (e.g. from an answer log),
    /// used when `human.source` is `annotation`.
    pub annotation_human: BTreeMap<Problem, HumanBaseline>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let p = Self {
            config,
            problems: vec![Problem::Continuity, Problem::Unresolved],
            force: false,
            annotation_human: BTreeMap::new(),
        };
        p.check_inputs()?;
        Ok(p)
    }

    pub fn layout(&self) -> Layout<'_> {
        Layout { config: &self.config }
    }

    fn provenance(&self) -> Provenance {
        self.config.provenance()
    }

    /// Configured external inputs must exist before any stage starts.
    fn check_inputs(&self) -> Result<(), PipelineError> {
        let mut required: Vec<PathBuf> = Vec::new();
        if self.config.corpus.source != CorpusSource::Synthetic {
            required.extend(self.config.corpus.input.clone());
        }
        required.extend(self.config.inject.antonyms.clone());
        for &p in &self.problems {
            if self.config.kg.source == KgSource::Import {
                required.extend(self.config.kg.import_path.as_deref().map(|t| expand(t, p)));
            }
            if self.config.encoder.kind == EncoderKind::Imported {
                let t = self.config.encoder.import_path.as_deref().ok_or_else(|| {
                    PipelineError::Config("encoder.import_path is required for the imported encoder".into())
                })?;
                required.push(expand(t, p));
            }
        }
        match required.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(PipelineError::Config(format!("configured input {} does not exist", p.display()))),
            None => Ok(()),
        }
    }

    fn scope(&self) -> String {
        self.problems.iter().map(|p| p.as_str()).collect::<Vec<_>>().join("+")
    }

    /// Baseline and report also depend on externally supplied human rows.
    fn stage_key(&self, stage: Stage, scope: &str) -> String {
        match stage {
            Stage::Baseline | Stage::Report if self.config.human.source == HumanSource::Annotation => {
                jsonl::hash_json(&(stage, scope, &self.config, &self.annotation_human))
            }
            _ => jsonl::hash_json(&(stage, scope, &self.config)),
        }
    }

    /// Runs `body` unless a current stamp says the outputs already exist.
    fn stamped(
        &self,
        stage: Stage,
        scope: &str,
        body: impl FnOnce() -> Result<Vec<PathBuf>, PipelineError>,
    ) -> Result<StageOutcome, PipelineError> {
        let stamp_path = self.layout().stamp(stage, scope);
        let key = self.stage_key(stage, scope);
        if !self.force {
            if let Ok(text) = std::fs::read_to_string(&stamp_path) {
                if let Ok(stamp) = serde_json::from_str::<Stamp>(&text) {
                    if stamp.key == key && stamp.outputs.iter().all(|p| p.exists()) {
                        info!("{}: up to date", stage.name());
                        return Ok(StageOutcome::UpToDate);
                    }
                }
            }
        }
        info!("{}: running", stage.name());
        let outputs = body()?;
        write_json(&stamp_path, &Stamp { stage, scope: scope.to_string(), key, outputs })?;
        Ok(StageOutcome::Ran)
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome, PipelineError> {
        match stage {
            Stage::Ingest => self.stamped(stage, "", || self.ingest()),
            Stage::Inject => self.stamped(stage, "", || self.inject()),
            Stage::Encode => self.stamped(stage, &self.scope(), || self.encode()),
            Stage::Kg => self.stamped(stage, &self.scope(), || self.kg()),
            Stage::Train => self.stamped(stage, &self.scope(), || self.train()),
            Stage::Eval => self.stamped(stage, &self.scope(), || self.eval()),
            Stage::Baseline => self.stamped(stage, &self.scope(), || self.baseline()),
            Stage::Report => self.stamped(stage, &self.scope(), || self.report().map(|(paths, _)| paths)),
        }
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<(), PipelineError> {
        for s in Stage::ALL {
            self.run(s)?;
        }
        Ok(())
    }

    fn ingest(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let c = &self.config.corpus;
        let (raw, errors) = match c.source {
            CorpusSource::Synthetic => (synthetic_corpus(c.synthetic_count, self.config.seed), Vec::new()),
            CorpusSource::Jsonl | CorpusSource::PlainDir => {
                let format = if c.source == CorpusSource::Jsonl { InputFormat::Jsonl } else { InputFormat::PlainDir };
                let input = c.input.as_ref().expect("validated");
                let got = ingest(input, format)?;
                (got.stories, got.errors)
            }
        };
        for e in &errors {
            warn!("ingest: line {}: {}", e.line, e.message);
        }
        let n_raw = raw.len();
        let stories = filter_corpus(raw, c.min_words, c.min_upvotes);
        info!("ingest: kept {} of {n_raw} stories", stories.len());
        let prov = self.provenance();
        let l = self.layout();
        write_corpus(&l.stories(), Some(&prov), &stories)?;
        jsonl::write_jsonl(&l.ingest_errors(), Some(&prov), &errors)?;
        Ok(vec![l.stories(), l.ingest_errors()])
    }

    fn lexicon(&self) -> Result<Lexicon, PipelineError> {
        match &self.config.inject.antonyms {
            None => Ok(Lexicon::builtin().clone()),
            Some(p) => {
                let text = String::from_utf8(jsonl::read_file(p)?)
                    .map_err(|_| PipelineError::Input(format!("{} is not UTF-8", p.display())))?;
                Ok(Lexicon::new(&text, Morphology::builtin().clone())?)
            }
        }
    }

    fn inject(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        if !l.stories().exists() {
            return Err(PipelineError::MissingInput { path: l.stories(), stage: "ingest" });
        }
        let stories = read_corpus(&l.stories())?;
        let c = &self.config.corpus;
        let (train, test) = split_train_test(&stories, c.n_train, c.n_test, self.config.seed)?;
        let lexicon = self.lexicon()?;
        let dtr = build_datasets(&train, &lexicon, self.config.seed)?;
        let dte = build_datasets(&test, &lexicon, self.config.seed)?;
        let prov = self.provenance();
        let mut outputs = Vec::new();
        let mut summaries = Vec::new();
        for (split, d) in [(Split::Train, &dtr), (Split::Test, &dte)] {
            let cont: Vec<ContinuityRecord> = d.continuity.iter().map(ContinuityRecord::from).collect();
            let unres: Vec<UnresolvedRecord> = d.unresolved.iter().map(UnresolvedRecord::from).collect();
            jsonl::write_jsonl(&l.dataset(Problem::Continuity, split), Some(&prov), &cont)?;
            jsonl::write_jsonl(&l.dataset(Problem::Unresolved, split), Some(&prov), &unres)?;
            outputs.push(l.dataset(Problem::Continuity, split));
            outputs.push(l.dataset(Problem::Unresolved, split));
        }
        for p in [Problem::Continuity, Problem::Unresolved] {
            let (train, test) = self.load_labelled(p)?;
            let n_max = train.iter().chain(&test).map(|s| s.sentences.len()).max().unwrap_or(0);
            summaries.push(DatasetSummary { problem: p, n_train: train.len(), n_test: test.len(), n_max });
        }
        let skipped: Vec<Skipped> = dtr.skipped.iter().chain(&dte.skipped).cloned().collect();
        for s in &skipped {
            warn!("inject: skipped {} for {}: {}", s.story_id, s.problem, s.reason);
        }
        jsonl::write_jsonl(&l.skipped(), Some(&prov), &skipped)?;
        write_json(&l.dataset_meta(), &Sidecar { provenance: prov, body: serde_json::json!({ "datasets": summaries }) })?;
        outputs.extend([l.skipped(), l.dataset_meta()]);
        Ok(outputs)
    }

    /// Train and test examples of `problem`.
    pub fn load_labelled(&self, p: Problem) -> Result<(Vec<LabelledStory>, Vec<LabelledStory>), PipelineError> {
        let l = self.layout();
        let load = |split| -> Result<Vec<LabelledStory>, PipelineError> {
            let path = l.dataset(p, split);
            Ok(match p {
                Problem::Continuity => read_records::<ContinuityRecord>(&path, "inject")?.iter().map(Into::into).collect(),
                Problem::Unresolved => read_records::<UnresolvedRecord>(&path, "inject")?.iter().map(Into::into).collect(),
            })
        };
        Ok((load(Split::Train)?, load(Split::Test)?))
    }

    fn encoder(&self, p: Problem) -> Result<Encoder, PipelineError> {
        let mut spec = self.config.encoder.clone();
        if let Some(t) = &spec.import_path {
            spec.import_path = Some(expand(t, p).to_string_lossy().into_owned());
        }
        Ok(Encoder::from_spec(&spec)?)
    }

    fn encode(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        for &p in &self.problems {
            let (train, test) = self.load_labelled(p)?;
            let encoder = self.encoder(p)?;
            let stories: Vec<(String, Vec<String>)> =
                train.iter().chain(&test).map(|s| (s.story_id.clone(), s.sentences.clone())).collect();
            let table = export_table(&encoder, &stories)?;
            let path = l.embeddings(p);
            table.write(&path)?;
            let info = EmbeddingInfo { problem: p, encoder: self.config.encoder.clone(), dim: table.dim(), rows: table.len() };
            write_json(&sidecar_path(&path), &Sidecar { provenance: self.provenance(), body: info })?;
            outputs.extend([sidecar_path(&path), path]);
        }
        Ok(outputs)
    }

    fn kg(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        for &p in &self.problems {
            let (train, test) = self.load_labelled(p)?;
            let (gtr, gte) = match self.config.kg.source {
                KgSource::Extract => {
                    let names = NameLexicon::builtin();
                    (extract_graphs(&train, names)?, extract_graphs(&test, names)?)
                }
                KgSource::Import => {
                    let path = expand(self.config.kg.import_path.as_deref().expect("validated"), p);
                    let imported = import_triples(&path)?;
                    (align_graphs(&train, &imported), align_graphs(&test, &imported))
                }
            };
            let all: Vec<ExtractedGraph> = gtr.iter().chain(&gte).cloned().collect();
            let d_n = max_entities(&all);
            for (split, g) in [(Split::Train, &gtr), (Split::Test, &gte)] {
                write_graphs(&l.graphs(p, split), Some(&self.provenance()), g, d_n)?;
                outputs.push(l.graphs(p, split));
            }
        }
        Ok(outputs)
    }

    fn load_graphs(&self, p: Problem, split: Split) -> Result<Vec<ExtractedGraph>, PipelineError> {
        let recs: Vec<GraphRecord> = read_records(&self.layout().graphs(p, split), "kg")?;
        Ok(recs.iter().map(GraphRecord::to_graph).collect::<Result<_, _>>()?)
    }

    /// Encoded train and test samples with the dataset-wide widths.
    pub fn samples<T: Scalar>(
        &self,
        p: Problem,
    ) -> Result<(DatasetMeta, Vec<PreparedSample<T>>, Vec<PreparedSample<T>>), PipelineError> {
        let (train, test) = self.load_labelled(p)?;
        let (gtr, gte) = (self.load_graphs(p, Split::Train)?, self.load_graphs(p, Split::Test)?);
        let emb = self.layout().embeddings(p);
        if !emb.exists() {
            return Err(PipelineError::MissingInput { path: emb, stage: "encode" });
        }
        let encoder = self.encoder(p)?;
        let stories: Vec<&LabelledStory> = train.iter().chain(&test).collect();
        let graphs: Vec<&ExtractedGraph> = gtr.iter().chain(&gte).collect();
        let meta = DatasetMeta::new(&stories, &graphs, encoder.dim());
        let str_ = prepare_samples(&train, Some(&gtr), &encoder, &meta)?;
        let ste = prepare_samples(&test, Some(&gte), &encoder, &meta)?;
        Ok((meta, str_, ste))
    }

    fn train(&self) -> Result<Vec<PathBuf>, PipelineError> {
        match self.config.precision {
            Precision::F64 => self.train_as::<f64>(),
            Precision::F32 => self.train_as::<f32>(),
        }
    }

    fn train_as<T: Scalar>(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        for &p in &self.problems {
            let (meta, train, _) = self.samples::<T>(p)?;
            let kind = model_kind(p);
            let jobs = plan_runs(kind, &self.config.train, self.config.seed);
            let runs = train_runs(kind, &self.config.model, &self.config.train, &jobs, meta.input_dims(), &train)?;
            for r in &runs {
                let path = l.checkpoint(p, &r.job);
                jsonl::write_file(&path, &checkpoint_bytes(&r.model.store))?;
                let info = CheckpointInfo {
                    kind,
                    job: r.job.clone(),
                    config: ModelConfig { use_kg: r.job.use_kg, seed: r.job.seed, ..self.config.model.clone() },
                    dims: meta.input_dims(),
                    precision: self.config.precision,
                    log: r.log.clone(),
                };
                write_json(&sidecar_path(&path), &Sidecar { provenance: self.provenance(), body: info })?;
                outputs.extend([sidecar_path(&path), path]);
            }
            let results = collect_results(p, &score_runs(&runs, &train)?)?;
            let body = TrainResults { problem: p, split: Split::Train.name().into(), results };
            write_json(&l.train_results(p), &Sidecar { provenance: self.provenance(), body })?;
            outputs.push(l.train_results(p));
        }
        Ok(outputs)
    }

    /// Loads the checkpoints of every planned run of `p`.
    pub fn load_runs<T: Scalar>(&self, p: Problem) -> Result<Vec<TrainedRun<T>>, PipelineError> {
        let l = self.layout();
        plan_runs(model_kind(p), &self.config.train, self.config.seed)
            .into_iter()
            .map(|job| {
                let path = l.checkpoint(p, &job);
                let info: Sidecar<CheckpointInfo> = read_json(&sidecar_path(&path), "train")?;
                let bytes = jsonl::read_file(&path).map_err(|_| PipelineError::MissingInput { path: path.clone(), stage: "train" })?;
                let mut model = Model::<T>::new(info.body.kind, &info.body.config, info.body.dims).map_err(crate::error::ExperimentError::from)?;
                let loaded = read_checkpoint::<T>(&bytes[..])?;
                load_into(&mut model.store, &loaded)?;
                Ok(TrainedRun { job, model, log: info.body.log })
            })
            .collect()
    }

    fn eval(&self) -> Result<Vec<PathBuf>, PipelineError> {
        match self.config.precision {
            Precision::F64 => self.eval_as::<f64>(),
            Precision::F32 => self.eval_as::<f32>(),
        }
    }

    fn eval_as<T: Scalar>(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        for &p in &self.problems {
            let (meta, train, test) = self.samples::<T>(p)?;
            let runs = self.load_runs::<T>(p)?;
            let scores = score_runs(&runs, &test)?;
            for s in &scores {
                info!("eval {p}: {} = {:.6}", s.job.stem(), s.metric);
            }
            let file = EvalFile {
                provenance: self.provenance(),
                problem: p,
                dims: meta.input_dims(),
                n_train: train.len(),
                n_test: test.len(),
                results: collect_results(p, &scores)?,
                scores,
            };
            write_json(&l.eval(p), &file)?;
            outputs.push(l.eval(p));
        }
        Ok(outputs)
    }

    fn human(&self, p: Problem) -> Option<HumanBaseline> {
        let h = &self.config.human;
        match h.source {
            HumanSource::None => None,
            HumanSource::Published => Some(HumanBaseline {
                value: match p {
                    Problem::Continuity => PUBLISHED_HUMAN_F1,
                    Problem::Unresolved => PUBLISHED_HUMAN_MSE,
                },
                source: "published reference value, not measured on this corpus".into(),
            }),
            HumanSource::Constant => match p {
                Problem::Continuity => h.continuity,
                Problem::Unresolved => h.unresolved,
            }
            .map(|value| HumanBaseline { value, source: "configured constant".into() }),
            HumanSource::Annotation => {
                let got = self.annotation_human.get(&p).cloned();
                if got.is_none() {
                    warn!("baseline {p}: no annotation answers; human row omitted");
                }
                got
            }
        }
    }

    fn baseline(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        for &p in &self.problems {
            let (_, test) = self.load_labelled(p)?;
            let guessing = match p {
                Problem::Continuity => {
                    let lengths: Vec<usize> = test.iter().map(|s| s.sentences.len()).collect();
                    expected_guess_f1(&lengths).map_err(crate::error::ExperimentError::from)?
                }
                Problem::Unresolved => {
                    let labels: Vec<f64> = test
                        .iter()
                        .map(|s| match s.target {
                            crate::models::Target::Fraction(r) => r,
                            crate::models::Target::Index(_) => unreachable!("unresolved records carry fractions"),
                        })
                        .collect();
                    expected_guess_mse(&labels).map_err(crate::error::ExperimentError::from)?
                }
            };
            let file = BaselineFile { provenance: self.provenance(), problem: p, guessing, human: self.human(p) };
            write_json(&l.baseline(p), &file)?;
            outputs.push(l.baseline(p));
        }
        Ok(outputs)
    }

    /// Builds, writes and returns the report of every selected problem.
    pub fn report(&self) -> Result<(Vec<PathBuf>, Vec<ReportTable>), PipelineError> {
        let l = self.layout();
        let mut outputs = Vec::new();
        let mut tables = Vec::new();
        for &p in &self.problems {
            let eval: EvalFile = read_json(&l.eval(p), "eval")?;
            let base: BaselineFile = read_json(&l.baseline(p), "baseline")?;
            let results = collect_results(p, &eval.scores)?;
            let config = report_config(p, &self.config.model, &self.config.train, self.config.seed, eval.dims, eval.n_train, eval.n_test);
            let table = build_report(p, base.guessing, base.human.as_ref(), &results, config, self.provenance())
                .map_err(crate::error::ExperimentError::from)?;
            jsonl::write_file(&l.report_text(p), table.render_text().as_bytes())?;
            jsonl::write_file(&l.report_json(p), table.to_json().as_bytes())?;
            outputs.extend([l.report_text(p), l.report_json(p)]);
            tables.push(table);
        }
        Ok((outputs, tables))
    }
}

/// Imported graphs in `stories` order; stories without triples get an
/// empty graph.
fn align_graphs(stories: &[LabelledStory], imported: &[ExtractedGraph]) -> Vec<ExtractedGraph> {
    let by_id: BTreeMap<&str, &ExtractedGraph> = imported.iter().map(|g| (g.story_id.as_str(), g)).collect();
    stories
        .iter()
        .map(|s| match by_id.get(s.story_id.as_str()) {
            Some(g) => (*g).clone(),
            None => {
                warn!("kg: no imported triples for {}", s.story_id);
                ExtractedGraph { story_id: s.story_id.clone(), entities: Vec::new(), triples: Vec::new() }
            }
        })
        .collect()
}
