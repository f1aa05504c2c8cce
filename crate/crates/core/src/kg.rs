//! Rule-based knowledge graphs: capitalization NER, recency coreference,
//! subject-verb-object triples, and one-hot/edge-text embeddings.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_function_word, Pos, Story};
use crate::encode::Encoder;
use crate::error::{IoError, KgError};
use crate::jsonl;
use crate::lexicon::{Gender, NameLexicon};
use crate::nn::Tensor;

/// Tokens `start..end` of sentence `sentence`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: usize,
    pub canonical_name: String,
    pub mention_spans: Vec<Mention>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: usize,
    pub relation_text: String,
    pub object: usize,
    pub sentence_index: usize,
    /// Subject and object are the same entity.
    pub self_relation: bool,
}

fn is_capitalized(tok: &str) -> bool {
    tok.chars().next().is_some_and(char::is_uppercase) && tok.chars().any(char::is_alphabetic)
}

fn is_open_quote(tok: &str) -> bool {
    matches!(tok, "\"" | "“" | "'" | "‘" | "(" | "[")
}

fn candidate(tok: &str, pos: Pos) -> bool {
    is_capitalized(tok) && pos != Pos::Pron && !is_function_word(&tok.to_lowercase())
}

/// Maximal runs of capitalized tokens. A run starting in sentence-initial
/// position (or right after an opening quote) keeps its first token only if
/// that word also appears capitalized mid-sentence somewhere in the story
/// or is a known name or title.
pub fn recognize_entities(story: &Story, names: &NameLexicon) -> Vec<Entity> {
    let initial = |sent: &crate::corpus::Sentence, i: usize| {
        let first_word = sent.tokens.iter().position(|t| t.chars().any(char::is_alphanumeric));
        Some(i) == first_word || (i > 0 && is_open_quote(&sent.tokens[i - 1]))
    };
    let mut mid_caps: HashSet<&str> = HashSet::new();
    for s in &story.sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            if candidate(t, s.pos_tags[i]) && !initial(s, i) {
                mid_caps.insert(t.as_str());
            }
        }
    }
    let mut mentions: Vec<(Mention, Vec<String>)> = Vec::new();
    for (si, s) in story.sentences.iter().enumerate() {
        let mut i = 0;
        while i < s.len() {
            let qualifies = |j: usize| {
                let t = s.tokens[j].as_str();
                candidate(t, s.pos_tags[j]) && (!initial(s, j) || mid_caps.contains(t) || names.contains(t))
            };
            if !candidate(&s.tokens[i], s.pos_tags[i]) {
                i += 1;
                continue;
            }
            let mut end = i;
            while end < s.len() && candidate(&s.tokens[end], s.pos_tags[end]) && (end == i || !initial(s, end)) {
                end += 1;
            }
            let start = if qualifies(i) { i } else { i + 1 };
            if start < end {
                let toks = s.tokens[start..end].to_vec();
                mentions.push((Mention { sentence: si, start, end }, toks));
            }
            i = end;
        }
    }
    merge_mentions(mentions)
}

/// Merges mentions with equal surface form, and shorter mentions whose
/// tokens are a subset of a longer one. The canonical name is the longest
/// mention; entity ids follow first-mention order.
fn merge_mentions(mentions: Vec<(Mention, Vec<String>)>) -> Vec<Entity> {
    let mut forms: Vec<Vec<String>> = Vec::new();
    for (_, toks) in &mentions {
        if !forms.contains(toks) {
            forms.push(toks.clone());
        }
    }
    let mut by_len: Vec<usize> = (0..forms.len()).collect();
    by_len.sort_by_key(|&f| std::cmp::Reverse(forms[f].len()));
    // Group heads are the longest forms; each form joins the first head containing all its tokens.
    let mut head_of: Vec<usize> = vec![usize::MAX; forms.len()];
    let mut heads: Vec<usize> = Vec::new();
    for &f in &by_len {
        let set: HashSet<&String> = forms[f].iter().collect();
        let host = heads.iter().copied().find(|&h| {
            let hs: HashSet<&String> = forms[h].iter().collect();
            set.is_subset(&hs)
        });
        match host {
            Some(h) => head_of[f] = h,
            None => {
                heads.push(f);
                head_of[f] = f;
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut spans: HashMap<usize, Vec<Mention>> = HashMap::new();
    for (m, toks) in &mentions {
        let f = forms.iter().position(|x| x == toks).unwrap();
        let h = head_of[f];
        if !order.contains(&h) {
            order.push(h);
        }
        spans.entry(h).or_default().push(*m);
    }
    order
        .into_iter()
        .enumerate()
        .map(|(id, h)| Entity { entity_id: id, canonical_name: forms[h].join(" "), mention_spans: spans.remove(&h).unwrap() })
        .collect()
}

fn entity_gender(e: &Entity, names: &NameLexicon) -> Option<Gender> {
    e.canonical_name.split(' ').find_map(|w| names.gender(w))
}

fn pronoun_gender(p: &str) -> Option<Option<Gender>> {
    match p {
        "he" | "him" => Some(Some(Gender::Male)),
        "she" | "her" => Some(Some(Gender::Female)),
        "they" | "them" | "it" => Some(None),
        _ => None,
    }
}

/// Pronoun position `(sentence, token)` to the entity it refers to.
pub type MentionMap = BTreeMap<(usize, usize), usize>;

/// Binds each personal pronoun to the most recent preceding entity mention;
/// gendered pronouns prefer the most recent entity of matching gender.
pub fn resolve_coreferences(story: &Story, entities: &[Entity], names: &NameLexicon) -> MentionMap {
    let mut starts: Vec<(Mention, usize)> =
        entities.iter().flat_map(|e| e.mention_spans.iter().map(move |m| (*m, e.entity_id))).collect();
    starts.sort();
    let genders: Vec<Option<Gender>> = entities.iter().map(|e| entity_gender(e, names)).collect();
    let mut map = MentionMap::new();
    for (si, s) in story.sentences.iter().enumerate() {
        for (ti, t) in s.tokens.iter().enumerate() {
            let Some(want) = pronoun_gender(&t.to_lowercase()) else { continue };
            let before: Vec<usize> = starts
                .iter()
                .filter(|(m, _)| (m.sentence, m.end) <= (si, ti))
                .map(|&(_, e)| e)
                .collect();
            let matching = want.and_then(|g| before.iter().rev().find(|&&e| genders[e] == Some(g)));
            if let Some(&e) = matching.or(before.last()) {
                map.insert((si, ti), e);
            }
        }
    }
    map
}

const PARTICLES: &[&str] = &["up", "down", "out", "off", "away", "back", "over", "on", "in", "into", "to", "at", "with", "for", "from", "about"];

/// Per sentence: first argument, then the first verb run after it (verbs,
/// negations and trailing particles), then the first argument after the run.
pub fn extract_triples(story: &Story, entities: &[Entity], mentions: &MentionMap) -> Vec<Triple> {
    let mut args: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
    for e in entities {
        for m in &e.mention_spans {
            args.entry(m.sentence).or_default().push((m.start, m.end, e.entity_id));
        }
    }
    for (&(si, ti), &e) in mentions {
        args.entry(si).or_default().push((ti, ti + 1, e));
    }
    let mut out = Vec::new();
    for (&si, list) in args.iter_mut() {
        list.sort();
        let s = &story.sentences[si];
        let (_, subj_end, subj) = list[0];
        let Some(v0) = (subj_end..s.len()).find(|&i| s.pos_tags[i] == Pos::Verb) else { continue };
        let mut end = v0;
        while end < s.len() && (s.pos_tags[end] == Pos::Verb || s.lemmas[end] == "not") {
            end += 1;
        }
        while end < s.len() && PARTICLES.contains(&s.lemmas[end].as_str()) {
            end += 1;
        }
        let Some(&(_, _, obj)) = list.iter().find(|(st, _, _)| *st >= end) else { continue };
        let relation_text = s.lemmas[v0..end].join(" ");
        out.push(Triple { subject: subj, relation_text, object: obj, sentence_index: si, self_relation: subj == obj });
    }
    out
}

/// Entities and triples of one story.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractedGraph {
    pub story_id: String,
    pub entities: Vec<Entity>,
    pub triples: Vec<Triple>,
}

pub fn extract_graph(story: &Story, names: &NameLexicon) -> ExtractedGraph {
    let entities = recognize_entities(story, names);
    let mentions = resolve_coreferences(story, &entities, names);
    let triples = extract_triples(story, &entities, &mentions);
    ExtractedGraph { story_id: story.id.clone(), entities, triples }
}

/// Node one-hots, directed edges and edge-text embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeGraph {
    pub node_embeddings: Tensor<f64>,
    pub edges: Vec<(usize, usize)>,
    pub edge_embeddings: Tensor<f64>,
}

impl KnowledgeGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_embeddings.rows()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

pub fn embed_graph(graph: &ExtractedGraph, d_n: usize, encoder: &Encoder) -> Result<KnowledgeGraph, KgError> {
    let n = graph.entities.len();
    if n > d_n {
        return Err(KgError::TooManyEntities { story_id: graph.story_id.clone(), n_nodes: n, d_n });
    }
    let mut nodes = Tensor::zeros(n, d_n);
    for i in 0..n {
        nodes.set(i, i, 1.0);
    }
    let edges: Vec<(usize, usize)> = graph.triples.iter().map(|t| (t.subject, t.object)).collect();
    let dim = encoder.dim();
    let mut data = Vec::with_capacity(edges.len() * dim);
    for t in &graph.triples {
        data.extend(encoder.encode_text(&t.relation_text));
    }
    Ok(KnowledgeGraph { node_embeddings: nodes, edges, edge_embeddings: Tensor::from_vec(graph.triples.len(), dim, data) })
}

/// Dataset-wide node dimension: the largest entity count of any story.
pub fn max_entities(graphs: &[ExtractedGraph]) -> usize {
    graphs.iter().map(|g| g.entities.len()).max().unwrap_or(0).max(1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: usize,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub s: usize,
    pub rel: String,
    pub o: usize,
    pub sent: usize,
}

/// Exported graph, one line per story.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub story_id: String,
    pub entities: Vec<EntityRecord>,
    pub triples: Vec<TripleRecord>,
    pub d_n: usize,
}

impl GraphRecord {
    pub fn new(g: &ExtractedGraph, d_n: usize) -> Self {
        Self {
            story_id: g.story_id.clone(),
            entities: g.entities.iter().map(|e| EntityRecord { id: e.entity_id, name: e.canonical_name.clone() }).collect(),
            triples: g
                .triples
                .iter()
                .map(|t| TripleRecord { s: t.subject, rel: t.relation_text.clone(), o: t.object, sent: t.sentence_index })
                .collect(),
            d_n,
        }
    }

    /// Back to entities and triples; mention spans are not exported.
    pub fn to_graph(&self) -> Result<ExtractedGraph, KgError> {
        let n = self.entities.len();
        if let Some(t) = self.triples.iter().find(|t| t.s >= n || t.o >= n) {
            return Err(KgError::BadTriple { story_id: self.story_id.clone(), message: format!("endpoint ({}, {}) out of range for {n} entities", t.s, t.o) });
        }
        Ok(ExtractedGraph {
            story_id: self.story_id.clone(),
            entities: self
                .entities
                .iter()
                .map(|e| Entity { entity_id: e.id, canonical_name: e.name.clone(), mention_spans: Vec::new() })
                .collect(),
            triples: self
                .triples
                .iter()
                .map(|t| Triple { subject: t.s, relation_text: t.rel.clone(), object: t.o, sentence_index: t.sent, self_relation: t.s == t.o })
                .collect(),
        })
    }
}

/// Externally produced triple, bypassing entity and relation extraction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportedTriple {
    pub story_id: String,
    pub s_name: String,
    pub rel: String,
    pub o_name: String,
    pub sent: usize,
}

/// Groups imported triples by story; entities are numbered by first appearance.
pub fn import_triples(path: &Path) -> Result<Vec<ExtractedGraph>, KgError> {
    let rows: Vec<ImportedTriple> = jsonl::read_jsonl(path)?;
    let mut graphs: Vec<ExtractedGraph> = Vec::new();
    for r in rows {
        if r.rel.trim().is_empty() {
            return Err(KgError::BadTriple { story_id: r.story_id, message: "empty relation".into() });
        }
        let g = match graphs.iter_mut().position(|g| g.story_id == r.story_id) {
            Some(i) => &mut graphs[i],
            None => {
                graphs.push(ExtractedGraph { story_id: r.story_id.clone(), entities: Vec::new(), triples: Vec::new() });
                graphs.last_mut().unwrap()
            }
        };
        let mut id_of = |name: &str| match g.entities.iter().position(|e| e.canonical_name == name) {
            Some(i) => i,
            None => {
                let id = g.entities.len();
                g.entities.push(Entity { entity_id: id, canonical_name: name.to_string(), mention_spans: Vec::new() });
                id
            }
        };
        let (s, o) = (id_of(&r.s_name), id_of(&r.o_name));
        g.triples.push(Triple { subject: s, relation_text: r.rel, object: o, sentence_index: r.sent, self_relation: s == o });
    }
    Ok(graphs)
}

pub fn write_graphs(path: &Path, provenance: Option<&jsonl::Provenance>, graphs: &[ExtractedGraph], d_n: usize) -> Result<(), IoError> {
    let recs: Vec<GraphRecord> = graphs.iter().map(|g| GraphRecord::new(g, d_n)).collect();
    jsonl::write_jsonl(path, provenance, &recs)
}
