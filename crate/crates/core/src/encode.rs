//! Fixed-width sentence encodings: a signed feature-hashing encoder,
//! zero-padded story matrices, and import/export of precomputed embeddings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, Story};
use crate::error::{EncodeError, IoError};
use crate::jsonl;
use crate::nn::Tensor;
use crate::scalar::Scalar;

pub const EMBED_DIM: usize = 384;
pub const EMBED_MAGIC: &[u8; 6] = b"PHEMB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Hashed,
    Imported,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub dim: usize,
    pub hash_seed: u64,
    pub import_path: Option<String>,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self { kind: EncoderKind::Hashed, dim: EMBED_DIM, hash_seed: 0, import_path: None }
    }
}

fn features(text: &str) -> Vec<(String, f64)> {
    let words: Vec<String> = tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(|t| t.to_lowercase())
        .collect();
    let mut out: Vec<(String, f64)> = words.iter().map(|w| (format!("u:{w}"), 1.0)).collect();
    out.extend(words.windows(2).map(|p| (format!("b:{} {}", p[0], p[1]), 0.5)));
    out
}

/// Hashed encoding of one sentence: lowercased unigrams (weight 1) and
/// bigrams (weight 0.5) are hashed to an index and a sign, accumulated and
/// L2-normalized. Empty text gives the zero vector.
pub fn hash_encode(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for (feat, weight) in features(text) {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(feat.as_bytes());
        let d = h.finalize();
        let idx = u64::from_le_bytes(d[..8].try_into().unwrap()) % dim as u64;
        let sign = if d[8] & 1 == 0 { 1.0 } else { -1.0 };
        v[idx as usize] += sign * weight;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Lookup table of precomputed embeddings keyed by `story_id#sentence_index`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: BTreeMap<String, Vec<f32>>,
}

pub fn embedding_key(story_id: &str, index: usize) -> String {
    format!("{story_id}#{index}")
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, key: String, vec: Vec<f32>) -> Result<(), EncodeError> {
        if vec.len() != self.dim {
            return Err(EncodeError::DimensionMismatch { key, expected: self.dim, found: vec.len() });
        }
        if self.rows.contains_key(&key) {
            return Err(EncodeError::DuplicateKey { key });
        }
        self.rows.insert(key, vec);
        Ok(())
    }

    pub fn get(&self, story_id: &str, index: usize) -> Option<&[f32]> {
        self.rows.get(&embedding_key(story_id, index)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// PHEMB1 binary form, records in key order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.rows.len() * (self.dim * 4 + 24));
        out.extend_from_slice(EMBED_MAGIC);
        out.extend_from_slice(&(self.rows.len() as u32).to_le_bytes());
        for (k, v) in &self.rows {
            out.extend_from_slice(&(k.len() as u16).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], dim: usize) -> Result<Self, EncodeError> {
        let bad = |m: &str| EncodeError::Format(m.to_string());
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8], EncodeError> {
            if cur.len() < n {
                return Err(bad("unexpected end of file"));
            }
            let (a, b) = cur.split_at(n);
            cur = b;
            Ok(a)
        };
        if take(6)? != EMBED_MAGIC {
            return Err(bad("bad magic"));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let mut table = Self::new(dim);
        for _ in 0..count {
            let klen = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let key = String::from_utf8(take(klen)?.to_vec()).map_err(|_| bad("key is not UTF-8"))?;
            let raw = take(dim * 4)?;
            let vec = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            table.insert(key, vec)?;
        }
        if !cur.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(table)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        jsonl::write_file(path, &self.to_bytes())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), IoError> {
        let recs: Vec<JsonRow> = self.rows.iter().map(|(k, v)| JsonRow { key: k.clone(), vec: v.clone() }).collect();
        jsonl::write_jsonl(path, None, &recs)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    key: String,
    vec: Vec<f32>,
}

/// Loads a PHEMB1 file, or a `{key, vec}` jsonl file when the extension is
/// `.jsonl`. Every row must have `dim` values and keys must be unique.
pub fn import_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable, EncodeError> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let mut table = EmbeddingTable::new(dim);
        for row in jsonl::read_jsonl::<JsonRow>(path)? {
            table.insert(row.key, row.vec)?;
        }
        Ok(table)
    } else {
        EmbeddingTable::from_bytes(&jsonl::read_file(path)?, dim)
    }
}

/// A sentence encoder: hashed, or a lookup into imported embeddings.
#[derive(Clone, Debug)]
pub enum Encoder {
    Hashed { dim: usize, seed: u64 },
    Imported(EmbeddingTable),
}

impl Encoder {
    pub fn from_spec(spec: &EncoderSpec) -> Result<Self, EncodeError> {
        match spec.kind {
            EncoderKind::Hashed => Ok(Encoder::Hashed { dim: spec.dim, seed: spec.hash_seed }),
            EncoderKind::Imported => {
                let path = spec.import_path.as_deref().ok_or(EncodeError::NoImportPath)?;
                Ok(Encoder::Imported(import_embeddings(Path::new(path), spec.dim)?))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Hashed { dim, .. } => *dim,
            Encoder::Imported(t) => t.dim(),
        }
    }

    /// Encodes sentence `index` of story `story_id` whose text is `text`.
    pub fn encode_sentence(&self, story_id: &str, index: usize, text: &str) -> Result<Vec<f64>, EncodeError> {
        match self {
            Encoder::Hashed { dim, seed } => Ok(hash_encode(text, *dim, *seed)),
            Encoder::Imported(t) => t
                .get(story_id, index)
                .map(|v| v.iter().map(|&x| x as f64).collect())
                .ok_or_else(|| EncodeError::MissingEmbedding { key: embedding_key(story_id, index) }),
        }
    }

    /// Encodes free text (relation labels); imported tables cannot, so the
    /// hashed encoder with seed 0 of the same width is used for them.
    pub fn encode_text(&self, text: &str) -> Vec<f64> {
        match self {
            Encoder::Hashed { dim, seed } => hash_encode(text, *dim, *seed),
            Encoder::Imported(t) => hash_encode(text, t.dim(), 0),
        }
    }

    /// The `(n, dim)` matrix of a story's sentence encodings.
    pub fn encode_story(&self, story: &Story) -> Result<Tensor<f64>, EncodeError> {
        self.encode_sentences(&story.id, &story.sentence_texts())
    }

    pub fn encode_sentences(&self, story_id: &str, sentences: &[String]) -> Result<Tensor<f64>, EncodeError> {
        let mut data = Vec::with_capacity(sentences.len() * self.dim());
        for (i, s) in sentences.iter().enumerate() {
            data.extend(self.encode_sentence(story_id, i, s)?);
        }
        Ok(Tensor::from_vec(sentences.len(), self.dim(), data))
    }
}

/// Zero-padded `(N, dim)` story matrix with its valid length.
#[derive(Clone, Debug, PartialEq)]
pub struct StoryEncoding<T> {
    pub story_id: String,
    pub matrix: Tensor<T>,
    pub valid_len: usize,
}

/// Pads one `(n, dim)` encoding to `n_max` rows.
pub fn pad<T: Scalar>(story_id: &str, enc: &Tensor<f64>, n_max: usize) -> Result<StoryEncoding<T>, EncodeError> {
    let n = enc.rows();
    if n > n_max {
        return Err(EncodeError::TooLong { story_id: story_id.to_string(), n, n_max });
    }
    let mut matrix = Tensor::zeros(n_max, enc.cols());
    for (dst, src) in matrix.data_mut().iter_mut().zip(enc.data()) {
        *dst = T::lit(*src);
    }
    Ok(StoryEncoding { story_id: story_id.to_string(), matrix, valid_len: n })
}

/// Pads a batch of encodings to the dataset-wide length `n_max`.
pub fn pad_batch<T: Scalar>(encodings: &[(String, Tensor<f64>)], n_max: usize) -> Result<Vec<StoryEncoding<T>>, EncodeError> {
    if encodings.is_empty() {
        return Err(EncodeError::EmptyBatch);
    }
    encodings.iter().map(|(id, e)| pad(id, e, n_max)).collect()
}

/// Exports every sentence of `stories` into a table.
pub fn export_table(encoder: &Encoder, stories: &[(String, Vec<String>)]) -> Result<EmbeddingTable, EncodeError> {
    let mut table = EmbeddingTable::new(encoder.dim());
    for (id, sentences) in stories {
        for (i, s) in sentences.iter().enumerate() {
            let v = encoder.encode_sentence(id, i, s)?;
            table.insert(embedding_key(id, i), v.into_iter().map(|x| x as f32).collect())?;
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn hashed_is_deterministic_and_normalized() {
        let a = hash_encode("Alice ran home.", EMBED_DIM, 0);
        assert_eq!(a, hash_encode("Alice ran home.", EMBED_DIM, 0));
        assert!((norm(&a) - 1.0).abs() < 1e-9);
        assert_ne!(a, hash_encode("Alice ran home.", EMBED_DIM, 1));
        assert!(hash_encode("", EMBED_DIM, 0).iter().all(|&x| x == 0.0));
        assert_ne!(a, hash_encode("Alice ran not home.", EMBED_DIM, 0));
    }

    #[test]
    fn story_rows_follow_sentences() {
        let enc = Encoder::Hashed { dim: EMBED_DIM, seed: 0 };
        let s = vec!["A b.".to_string(), "C d.".into(), "E f.".into()];
        let m = enc.encode_sentences("x", &s).unwrap();
        assert_eq!(m.shape(), (3, EMBED_DIM));
        let swapped = enc.encode_sentences("x", &[s[1].clone(), s[0].clone(), s[2].clone()]).unwrap();
        assert_eq!(m.row(0), swapped.row(1));
        assert_eq!(m.row(1), swapped.row(0));
        assert_eq!(m.row(2), &hash_encode("E f.", EMBED_DIM, 0)[..]);
    }

    #[test]
    fn padding_rules() {
        let e = Tensor::<f64>::filled(3, 4, 1.0);
        let p: StoryEncoding<f64> = pad("s", &e, 5).unwrap();
        assert_eq!(p.valid_len, 3);
        assert!(p.matrix.row(3).iter().chain(p.matrix.row(4)).all(|&x| x == 0.0));
        let same: StoryEncoding<f64> = pad("s", &e, 3).unwrap();
        assert_eq!(same.matrix, e);
        assert!(matches!(pad::<f64>("s", &Tensor::filled(6, 4, 1.0), 5), Err(EncodeError::TooLong { .. })));
        assert!(matches!(pad_batch::<f64>(&[], 5), Err(EncodeError::EmptyBatch)));
    }

    #[test]
    fn table_validation_and_round_trip() {
        let mut t = EmbeddingTable::new(EMBED_DIM);
        t.insert("a#0".into(), vec![0.5; EMBED_DIM]).unwrap();
        t.insert("a#1".into(), (0..EMBED_DIM).map(|i| i as f32 / 7.0).collect()).unwrap();
        assert_eq!(t.len(), 2);
        assert!(matches!(t.insert("b#0".into(), vec![0.0; 300]), Err(EncodeError::DimensionMismatch { found: 300, .. })));
        assert!(matches!(t.insert("a#0".into(), vec![0.0; EMBED_DIM]), Err(EncodeError::DuplicateKey { .. })));
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("e.phemb");
        t.write(&bin).unwrap();
        assert_eq!(import_embeddings(&bin, EMBED_DIM).unwrap(), t);
        let js = dir.path().join("e.jsonl");
        t.write_jsonl(&js).unwrap();
        assert_eq!(import_embeddings(&js, EMBED_DIM).unwrap(), t);
        assert!(EmbeddingTable::from_bytes(&t.to_bytes()[..20], EMBED_DIM).is_err());
    }

    #[test]
    fn imported_lookup() {
        let mut t = EmbeddingTable::new(2);
        t.insert("s#0".into(), vec![1.0, 0.0]).unwrap();
        let enc = Encoder::Imported(t);
        assert_eq!(enc.encode_sentence("s", 0, "ignored").unwrap(), [1.0, 0.0]);
        assert!(matches!(enc.encode_sentence("s", 1, "x"), Err(EncodeError::MissingEmbedding { .. })));
    }
}
