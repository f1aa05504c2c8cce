//! Story ingestion, segmentation, filtering and train/test splitting.

mod segment;
pub mod synth;
mod text;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use segment::{collapse_whitespace, segment_sentences};
pub use text::{
    is_function_word, is_preposition, noun_lemma, token_spans, tokenize, tokenize_lemmatize, tokenize_lemmatize_with, verb_lemma, Pos,
    Sentence, Span,
};

use crate::error::{CorpusError, IoError};
use crate::jsonl;

/// A segmented, tokenized and lemmatized document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upvotes: Option<u64>,
    /// Raw source text, kept for word counting and auditing.
    pub text: String,
    pub sentences: Vec<Sentence>,
}

impl Story {
    pub fn from_text(
        id: impl Into<String>,
        title: Option<String>,
        upvotes: Option<u64>,
        raw: &str,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let sentences: Vec<Sentence> = segment_sentences(raw).iter().map(|s| tokenize_lemmatize(s)).collect();
        if sentences.is_empty() {
            return Err(CorpusError::EmptyStory { id });
        }
        Ok(Self { id, title, upvotes, text: raw.to_string(), sentences })
    }

    /// Builds a story from already segmented sentences.
    pub fn from_sentences(id: impl Into<String>, sentences: &[String]) -> Result<Self, CorpusError> {
        let id = id.into();
        let sentences: Vec<Sentence> =
            sentences.iter().filter(|s| !s.trim().is_empty()).map(|s| tokenize_lemmatize(s.trim())).collect();
        if sentences.is_empty() {
            return Err(CorpusError::EmptyStory { id });
        }
        let text = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
        Ok(Self { id, title: None, upvotes: None, text, sentences })
    }

    /// Sentence count `n`.
    pub fn n(&self) -> usize {
        self.sentences.len()
    }

    /// Whitespace-delimited words of the raw text.
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Jsonl,
    PlainDir,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    title: Option<String>,
    upvotes: Option<u64>,
}

/// A record that could not be turned into a story.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct Ingested {
    pub stories: Vec<Story>,
    pub errors: Vec<RecordError>,
}

/// Reads stories in file order. Malformed records are reported per line and
/// skipped; an unreadable file or directory is fatal.
pub fn ingest(path: &Path, format: InputFormat) -> Result<Ingested, CorpusError> {
    match format {
        InputFormat::Jsonl => ingest_jsonl(path),
        InputFormat::PlainDir => ingest_dir(path),
    }
}

fn ingest_jsonl(path: &Path) -> Result<Ingested, CorpusError> {
    let mut out = Ingested::default();
    for (line, rec) in jsonl::read_jsonl_lines::<RawRecord>(path)? {
        let rec = match rec {
            Ok(r) => r,
            Err(message) => {
                out.errors.push(RecordError { line, message });
                continue;
            }
        };
        let id = match rec.id {
            Some(serde_json::Value::String(s)) => s,
            Some(v @ serde_json::Value::Number(_)) => v.to_string(),
            _ => {
                out.errors.push(RecordError { line, message: "missing or invalid \"id\" field".into() });
                continue;
            }
        };
        let Some(text) = rec.text else {
            out.errors.push(RecordError { line, message: format!("record {id:?}: missing \"text\" field") });
            continue;
        };
        match Story::from_text(id, rec.title, rec.upvotes, &text) {
            Ok(s) => out.stories.push(s),
            Err(e) => out.errors.push(RecordError { line, message: e.to_string() }),
        }
    }
    Ok(out)
}

fn ingest_dir(path: &Path) -> Result<Ingested, CorpusError> {
    let read_err = |source| CorpusError::Io(IoError::Read { path: path.to_path_buf(), source });
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(read_err)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let mut out = Ingested::default();
    for (i, file) in files.iter().enumerate() {
        let text = std::fs::read_to_string(file)
            .map_err(|source| CorpusError::Io(IoError::Read { path: file.clone(), source }))?;
        let id = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match Story::from_text(id, None, None, &text) {
            Ok(s) => out.stories.push(s),
            Err(e) => out.errors.push(RecordError { line: i + 1, message: e.to_string() }),
        }
    }
    Ok(out)
}

/// Keeps stories with at least `min_words` words and, when upvote metadata
/// is present, at least `min_upvotes` upvotes. Source order is preserved.
pub fn filter_corpus(stories: Vec<Story>, min_words: usize, min_upvotes: u64) -> Vec<Story> {
    stories
        .into_iter()
        .filter(|s| s.word_count() >= min_words && s.upvotes.is_none_or(|u| u >= min_upvotes))
        .collect()
}

pub const DEFAULT_MIN_WORDS: usize = 200;
pub const DEFAULT_MIN_UPVOTES: u64 = 1000;

/// Seeded shuffle, then the first `n_train` stories train and the next
/// `n_test` test.
pub fn split_train_test(
    stories: &[Story],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<Story>, Vec<Story>), CorpusError> {
    let required = n_train + n_test;
    if required > stories.len() {
        return Err(CorpusError::InsufficientStories { required, available: stories.len() });
    }
    let mut order: Vec<usize> = (0..stories.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| stories[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..required])))
}

pub fn write_corpus(path: &Path, provenance: Option<&jsonl::Provenance>, stories: &[Story]) -> Result<(), IoError> {
    jsonl::write_jsonl(path, provenance, stories)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Story>, IoError> {
    jsonl::read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn story(id: &str, words: usize, upvotes: Option<u64>) -> Story {
        let text = vec!["word"; words].join(" ") + ".";
        Story::from_text(id, None, upvotes, &text).unwrap()
    }

    #[test]
    fn ingest_jsonl_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, r#"{{"id": "a", "text": "Alice ran. Bob hid.", "upvotes": 1200}}"#).unwrap();
        writeln!(f, r#"{{"id": "b", "title": "T"}}"#).unwrap();
        writeln!(f, r#"{{"id": "c", "text": "One more."}}"#).unwrap();
        writeln!(f, "not json").unwrap();
        drop(f);
        let got = ingest(&path, InputFormat::Jsonl).unwrap();
        let ids: Vec<_> = got.stories.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(got.stories[0].n(), 2);
        assert_eq!(got.errors.len(), 2);
        assert_eq!(got.errors[0].line, 2);
        assert!(got.errors[0].message.contains("text"));
        assert_eq!(got.errors[1].line, 4);
    }

    #[test]
    fn ingest_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let got = ingest(&path, InputFormat::Jsonl).unwrap();
        assert!(got.stories.is_empty() && got.errors.is_empty());
    }

    #[test]
    fn ingest_missing_file_is_fatal() {
        assert!(ingest(Path::new("/nonexistent/x.jsonl"), InputFormat::Jsonl).is_err());
    }

    #[test]
    fn ingest_plain_dir_uses_file_stems() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.txt"), "Second story. Two lines.").unwrap();
        std::fs::write(dir.path().join("a.txt"), "First story.").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let got = ingest(dir.path(), InputFormat::PlainDir).unwrap();
        let ids: Vec<_> = got.stories.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn filter_thresholds() {
        let kept = filter_corpus(
            vec![story("a", 199, None), story("b", 200, None), story("c", 250, Some(500)), story("d", 300, Some(1000))],
            DEFAULT_MIN_WORDS,
            DEFAULT_MIN_UPVOTES,
        );
        let ids: Vec<_> = kept.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["b", "d"]);
        assert_eq!(filter_corpus(kept.clone(), 200, 1000), kept);
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let stories: Vec<_> = (0..20).map(|i| story(&i.to_string(), 3, None)).collect();
        let (tr, te) = split_train_test(&stories, 12, 6, 9).unwrap();
        let (tr2, te2) = split_train_test(&stories, 12, 6, 9).unwrap();
        assert_eq!((tr.clone(), te.clone()), (tr2, te2));
        assert!(tr.iter().all(|a| te.iter().all(|b| a.id != b.id)));
        assert_eq!((tr.len(), te.len()), (12, 6));
    }

    #[test]
    fn split_requires_enough_stories() {
        let stories: Vec<_> = (0..10).map(|i| story(&i.to_string(), 3, None)).collect();
        let err = split_train_test(&stories, 8, 4, 0).unwrap_err();
        assert!(matches!(err, CorpusError::InsufficientStories { required: 12, available: 10 }));
        assert!(err.to_string().contains("12") && err.to_string().contains("10"));
    }
}
