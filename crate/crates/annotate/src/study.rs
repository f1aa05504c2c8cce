//! The fixed, seeded sample of tasks shown to annotators.

use std::collections::BTreeMap;
use std::path::Path;

use plothole::inject::{ContinuityRecord, Problem, UnresolvedRecord};
use plothole::jsonl;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::AnnotateError;

/// Client-bound task payload. Carries no label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: String,
    pub problem: Problem,
    pub story_id: String,
    pub sentences: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Label {
    Index(usize),
    Fraction(f64),
}

/// A task with its withheld label; never serialized.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyTask {
    pub task: AnnotationTask,
    pub label: Label,
}

/// Tasks per problem, in presentation order.
#[derive(Clone, Debug, Default)]
pub struct Study {
    tasks: BTreeMap<Problem, Vec<StudyTask>>,
}

fn pick<T>(items: Vec<T>, n: usize, seed: u64, problem: Problem) -> Vec<T> {
    let salt = match problem {
        Problem::Continuity => 0,
        Problem::Unresolved => 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xa11_0000 + salt));
    let mut chosen: Vec<usize> = sample(&mut rng, items.len(), n.min(items.len())).into_vec();
    chosen.sort_unstable();
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    chosen.into_iter().map(|i| slots[i].take().expect("indices are distinct")).collect()
}

impl Study {
    pub fn new(continuity: Vec<StudyTask>, unresolved: Vec<StudyTask>) -> Result<Self, AnnotateError> {
        let mut tasks = BTreeMap::new();
        tasks.insert(Problem::Continuity, continuity);
        tasks.insert(Problem::Unresolved, unresolved);
        let study = Self { tasks };
        let mut ids: Vec<&str> = study.all().map(|t| t.task.task_id.as_str()).collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(AnnotateError::Dataset("task ids are not unique".into()));
        }
        Ok(study)
    }

    /// A seeded sample of `n_tasks` test stories per problem, read from the
    /// `{problem}_test.jsonl` datasets in `dir`.
    pub fn from_datasets(dir: &Path, n_tasks: usize, seed: u64) -> Result<Self, AnnotateError> {
        let read = |p: Problem| {
            let path = dir.join(format!("{p}_test.jsonl"));
            if !path.exists() {
                return Err(AnnotateError::Dataset(format!("{} does not exist", path.display())));
            }
            Ok(path)
        };
        let cont: Vec<ContinuityRecord> = jsonl::read_jsonl(&read(Problem::Continuity)?)?;
        let unres: Vec<UnresolvedRecord> = jsonl::read_jsonl(&read(Problem::Unresolved)?)?;
        let cont = pick(cont, n_tasks, seed, Problem::Continuity)
            .into_iter()
            .map(|r| StudyTask {
                task: AnnotationTask {
                    task_id: format!("continuity-{}", r.story_id),
                    problem: Problem::Continuity,
                    story_id: r.story_id,
                    sentences: r.sentences,
                },
                label: Label::Index(r.label_index),
            })
            .collect();
        let unres = pick(unres, n_tasks, seed, Problem::Unresolved)
            .into_iter()
            .map(|r| StudyTask {
                task: AnnotationTask {
                    task_id: format!("unresolved-{}", r.story_id),
                    problem: Problem::Unresolved,
                    story_id: r.story_id,
                    sentences: r.sentences,
                },
                label: Label::Fraction(r.label_fraction),
            })
            .collect();
        Self::new(cont, unres)
    }

    pub fn tasks(&self, p: Problem) -> &[StudyTask] {
        self.tasks.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &StudyTask> {
        self.tasks.values().flatten()
    }

    pub fn get(&self, task_id: &str) -> Option<&StudyTask> {
        self.all().find(|t| t.task.task_id == task_id)
    }
}
