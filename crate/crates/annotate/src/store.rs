//! Append-only jsonl answer log, compacted last-write-wins on load.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use plothole::jsonl;
use serde::{Deserialize, Serialize};

use crate::AnnotateError;

/// Either a sentence choice (continuity) or a missing fraction (unresolved).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    SentenceIndex { sentence_index: usize },
    Fraction { fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanAnswer {
    pub task_id: String,
    pub annotator_id: String,
    #[serde(flatten)]
    pub answer: Answer,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// Answers keyed by `(task_id, annotator_id)`.
pub type AnswerMap = BTreeMap<(String, String), HumanAnswer>;

#[derive(Debug)]
pub struct AnswerStore {
    path: PathBuf,
    answers: AnswerMap,
}

impl AnswerStore {
    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self, AnnotateError> {
        let mut answers = AnswerMap::new();
        if path.exists() {
            for a in jsonl::read_jsonl::<HumanAnswer>(path)? {
                answers.insert((a.task_id.clone(), a.annotator_id.clone()), a);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| AnnotateError::Store(format!("{}: {e}", dir.display())))?;
        }
        Ok(Self { path: path.to_path_buf(), answers })
    }

    /// Appends one line and fsyncs before updating the in-memory view.
    pub fn submit(&mut self, answer: HumanAnswer) -> Result<(), AnnotateError> {
        let mut line = serde_json::to_string(&answer).expect("answer serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| AnnotateError::Store(format!("{}: {e}", self.path.display())))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| AnnotateError::Store(format!("{}: {e}", self.path.display())))?;
        self.answers.insert((answer.task_id.clone(), answer.annotator_id.clone()), answer);
        Ok(())
    }

    pub fn answers(&self) -> &AnswerMap {
        &self.answers
    }

    pub fn has_answer(&self, task_id: &str, annotator_id: &str) -> bool {
        self.answers.contains_key(&(task_id.to_string(), annotator_id.to_string()))
    }
}
