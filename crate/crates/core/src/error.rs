use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("edge ({src}, {dst}) out of range for {n_nodes} nodes")]
    EdgeOutOfRange { src: usize, dst: usize, n_nodes: usize },
    #[error("{rows} edge feature rows for {edges} edges")]
    EdgeFeatureRows { rows: usize, edges: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: malformed entry {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: {word:?} lists itself as an antonym")]
    SelfAntonym { line: usize, word: String },
    #[error("line {line}: duplicate entry {word:?}")]
    DuplicateEntry { line: usize, word: String },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("story {id:?} has no sentences")]
    EmptyStory { id: String },
    #[error("split needs {required} stories but only {available} are available")]
    InsufficientStories { required: usize, available: usize },
}

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("story {story_id:?}: no sentence contains a verb")]
    NoVerbFound { story_id: String },
    #[error("story {story_id:?}: {n} sentences, at least {min} required")]
    StoryTooShort { story_id: String, n: usize, min: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("embedding {key:?} has {found} values, expected {expected}")]
    DimensionMismatch { key: String, expected: usize, found: usize },
    #[error("duplicate embedding key {key:?}")]
    DuplicateKey { key: String },
    #[error("no embedding for {key:?}")]
    MissingEmbedding { key: String },
    #[error("malformed embedding file: {0}")]
    Format(String),
    #[error("imported encoder needs an import path")]
    NoImportPath,
    #[error("story {story_id:?} has {n} sentences but the dataset length is {n_max}; dataset metadata is stale")]
    TooLong { story_id: String, n: usize, n_max: usize },
    #[error("cannot pad an empty batch")]
    EmptyBatch,
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("story {story_id:?} has {n_nodes} entities but d_n is {d_n}; dataset metadata is stale")]
    TooManyEntities { story_id: String, n_nodes: usize, d_n: usize },
    #[error("story {story_id:?}: bad triple: {message}")]
    BadTriple { story_id: String, message: String },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("story {0:?}: model uses the knowledge graph but none was supplied")]
    MissingGraph(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 samples, got {n}")]
    TooFewSamples { n: usize },
}

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no predictions to score")]
    Empty,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training options: {0}")]
    Options(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {path}; run the `{stage}` stage first")]
    MissingInput { path: PathBuf, stage: &'static str },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl PipelineError {
    /// 1 for problems with the config or inputs, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io(IoError::Write { .. }) | PipelineError::Nn(_) => 2,
            PipelineError::Experiment(e) => match e {
                ExperimentError::Config(_) | ExperimentError::Encode(_) | ExperimentError::Kg(_) | ExperimentError::Corpus(_) => 1,
                _ => 2,
            },
            _ => 1,
        }
    }
}
