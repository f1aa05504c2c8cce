//! The single json file that drives every stage, with dotted overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{DEFAULT_MIN_UPVOTES, DEFAULT_MIN_WORDS};
use crate::encode::EncoderSpec;
use crate::experiment::TrainSpec;
use crate::jsonl::{hash_json, Provenance};
use crate::models::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub datasets: PathBuf,
    pub embeddings: PathBuf,
    pub graphs: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
    /// Stage completion stamps.
    pub stamps: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        let w = PathBuf::from("work");
        Self {
            corpus: w.join("corpus"),
            datasets: w.join("datasets"),
            embeddings: w.join("embeddings"),
            graphs: w.join("graphs"),
            checkpoints: w.join("checkpoints"),
            reports: w.join("reports"),
            stamps: w.join("stamps"),
        }
    }
}

impl Paths {
    /// Every path, rebased under `root` when relative.
    pub fn rebased(&self, root: &Path) -> Paths {
        let j = |p: &PathBuf| if p.is_absolute() { p.clone() } else { root.join(p) };
        Paths {
            corpus: j(&self.corpus),
            datasets: j(&self.datasets),
            embeddings: j(&self.embeddings),
            graphs: j(&self.graphs),
            checkpoints: j(&self.checkpoints),
            reports: j(&self.reports),
            stamps: j(&self.stamps),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSource {
    /// The built-in seeded story generator.
    Synthetic,
    Jsonl,
    PlainDir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub source: CorpusSource,
    pub input: Option<PathBuf>,
    pub synthetic_count: usize,
    pub min_words: usize,
    pub min_upvotes: u64,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            source: CorpusSource::Synthetic,
            input: None,
            synthetic_count: 200,
            min_words: DEFAULT_MIN_WORDS,
            min_upvotes: DEFAULT_MIN_UPVOTES,
            n_train: 100,
            n_test: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectConfig {
    /// Antonym lexicon replacing the built-in one.
    pub antonyms: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgSource {
    Extract,
    Import,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KgConfig {
    pub source: KgSource,
    /// Triples jsonl; `{problem}` is replaced by the problem name.
    pub import_path: Option<String>,
}

impl Default for KgConfig {
    fn default() -> Self {
        Self { source: KgSource::Extract, import_path: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanSource {
    /// No human row.
    None,
    /// The published human benchmark values, labelled as such.
    Published,
    /// Values from `continuity` / `unresolved` below.
    Constant,
    /// Computed from the annotation service's answer log.
    Annotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanConfig {
    pub source: HumanSource,
    pub continuity: Option<f64>,
    pub unresolved: Option<f64>,
}

impl Default for HumanConfig {
    fn default() -> Self {
        Self { source: HumanSource::Published, continuity: None, unresolved: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub n_tasks: usize,
    pub answers: PathBuf,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            n_tasks: 10,
            answers: PathBuf::from("work/annotation/answers.jsonl"),
            static_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub precision: Precision,
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub inject: InjectConfig,
    pub encoder: EncoderSpec,
    pub kg: KgConfig,
    pub model: ModelConfig,
    pub train: TrainSpec,
    pub human: HumanConfig,
    pub service: ServiceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            precision: Precision::F64,
            paths: Paths::default(),
            corpus: CorpusConfig::default(),
            inject: InjectConfig::default(),
            encoder: EncoderSpec::default(),
            kg: KgConfig::default(),
            model: ModelConfig::default(),
            train: TrainSpec::default(),
            human: HumanConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `key.path=value` overrides. Values parse as JSON when they
    /// can and are taken as strings otherwise; unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, PipelineError> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("override {o:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            let mut slot = &mut v;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|m| m.get_mut(part))
                    .ok_or_else(|| PipelineError::Config(format!("unknown config key {key:?}")))?;
            }
            *slot = value;
        }
        serde_json::from_value(v).map_err(|e| PipelineError::Config(format!("invalid override: {e}")))
    }

    /// Hash of every setting that can change artifact content; output
    /// locations and service settings are excluded.
    pub fn hash(&self) -> String {
        let content = PipelineConfig { paths: Paths::default(), service: ServiceConfig::default(), ..self.clone() };
        hash_json(&content)
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.hash(), self.seed)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let c = &self.corpus;
        if c.source != CorpusSource::Synthetic && c.input.is_none() {
            return Err(PipelineError::Config("corpus.input is required for jsonl and plain-dir sources".into()));
        }
        if c.n_train == 0 || c.n_test == 0 {
            return Err(PipelineError::Config("corpus.n_train and corpus.n_test must be positive".into()));
        }
        if self.kg.source == KgSource::Import && self.kg.import_path.is_none() {
            return Err(PipelineError::Config("kg.import_path is required when kg.source is import".into()));
        }
        if self.encoder.dim == 0 {
            return Err(PipelineError::Config("encoder.dim must be positive".into()));
        }
        if self.human.source == HumanSource::Constant && self.human.continuity.is_none() && self.human.unresolved.is_none() {
            return Err(PipelineError::Config("human.source constant needs human.continuity or human.unresolved".into()));
        }
        self.model.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }
}
