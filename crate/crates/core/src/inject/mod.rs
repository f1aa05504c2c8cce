//! Synthetic plot-hole injection: continuity errors (a negated sentence)
//! and unresolved storylines (a truncated ending).

mod inflect;

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use inflect::{detect_form, inflect, match_case, VerbForm};

use crate::corpus::{tokenize_lemmatize, token_spans, Pos, Sentence, Story};
use crate::error::{InjectError, LexiconError};
use crate::lexicon::{builtin_antonyms_text, parse_antonyms, Morphology};

pub const BE_FORMS: [&str; 10] = ["be", "am", "is", "are", "was", "were", "been", "being", "'m", "'re"];

/// Antonyms, be-forms and verb morphology used by the injectors.
#[derive(Clone, Debug)]
pub struct Lexicon {
    antonyms: HashMap<String, Vec<String>>,
    be_forms: HashSet<String>,
    morph: Morphology,
}

impl Lexicon {
    pub fn new(antonyms_text: &str, morph: Morphology) -> Result<Self, LexiconError> {
        let antonyms = parse_antonyms(antonyms_text)?.into_iter().collect();
        let be_forms = BE_FORMS.iter().map(|s| s.to_string()).collect();
        Ok(Self { antonyms, be_forms, morph })
    }

    pub fn builtin() -> &'static Lexicon {
        static CELL: OnceLock<Lexicon> = OnceLock::new();
        CELL.get_or_init(|| {
            Lexicon::new(builtin_antonyms_text(), Morphology::builtin().clone()).expect("shipped antonyms parse")
        })
    }

    /// Ordered antonyms of a lowercase lemma, most relevant first; empty if unlisted.
    pub fn antonyms(&self, word: &str) -> &[String] {
        self.antonyms.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_be_form(&self, token: &str) -> bool {
        self.be_forms.contains(&token.to_lowercase())
    }

    pub fn morphology(&self) -> &Morphology {
        &self.morph
    }
}

/// Position of the first token tagged as a verb.
pub fn first_verb(sentence: &Sentence) -> Option<usize> {
    sentence.pos_tags.iter().position(|&p| p == Pos::Verb)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Edit {
    InsertNot,
    Replace,
}

fn planned_edit(sentence: &Sentence, v: usize, lexicon: &Lexicon) -> Edit {
    let lemma = &sentence.lemmas[v];
    if lemma == "be" || lexicon.is_be_form(&sentence.tokens[v]) || lexicon.antonyms(lemma).is_empty() {
        Edit::InsertNot
    } else {
        Edit::Replace
    }
}

/// A sentence is eligible when it has a verb and its negation would not
/// produce a double "not".
fn eligible(sentence: &Sentence, lexicon: &Lexicon) -> bool {
    let Some(v) = first_verb(sentence) else { return false };
    if planned_edit(sentence, v, lexicon) == Edit::Replace {
        return true;
    }
    !sentence.lemmas.get(v + 1).is_some_and(|l| l == "not")
}

/// Negates one sentence by its first verb. Returns the new sentence text.
pub fn negate_sentence(sentence: &Sentence, lexicon: &Lexicon) -> Option<String> {
    let v = first_verb(sentence)?;
    let spans = token_spans(&sentence.text);
    let span = spans[v];
    let text = &sentence.text;
    Some(match planned_edit(sentence, v, lexicon) {
        Edit::InsertNot => format!("{} not{}", &text[..span.end], &text[span.end..]),
        Edit::Replace => {
            let token = &sentence.tokens[v];
            let lemma = &sentence.lemmas[v];
            let after_aux = v > 0 && matches!(sentence.lemmas[v - 1].as_str(), "be" | "have");
            let form = detect_form(token, lemma, after_aux, &lexicon.morph);
            let target = &lexicon.antonyms(lemma)[0];
            let word = match_case(&inflect(target, form, &lexicon.morph), token);
            format!("{}{}{}", &text[..span.start], word, &text[span.end..])
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuitySample {
    pub story: Story,
    pub label_index: usize,
    pub original_sentence: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnresolvedSample {
    pub story: Story,
    pub label_fraction: f64,
    pub removed_count: usize,
    pub source_length: usize,
}

/// Picks a uniformly random eligible sentence and negates it.
pub fn inject_continuity<R: Rng>(story: &Story, lexicon: &Lexicon, rng: &mut R) -> Result<ContinuitySample, InjectError> {
    let candidates: Vec<usize> = (0..story.n()).filter(|&i| eligible(&story.sentences[i], lexicon)).collect();
    let &y = candidates.choose(rng).ok_or_else(|| InjectError::NoVerbFound { story_id: story.id.clone() })?;
    let original = &story.sentences[y];
    let text = negate_sentence(original, lexicon).expect("eligible sentences have a verb");
    let mut out = story.clone();
    out.sentences[y] = tokenize_lemmatize(&text);
    out.text = out.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
    Ok(ContinuitySample { story: out, label_index: y, original_sentence: original.text.clone() })
}

pub const MIN_UNRESOLVED_SENTENCES: usize = 10;

/// Truncates the ending: draws y from {⌊0.9n⌋, …, n} (1-based), keeps the
/// first y−1 sentences and labels the sample with the fraction removed.
pub fn inject_unresolved<R: Rng>(story: &Story, rng: &mut R) -> Result<UnresolvedSample, InjectError> {
    let n = story.n();
    if n < MIN_UNRESOLVED_SENTENCES {
        return Err(InjectError::StoryTooShort { story_id: story.id.clone(), n, min: MIN_UNRESOLVED_SENTENCES });
    }
    let y = rng.gen_range(9 * n / 10..=n);
    let m = n - y + 1;
    let mut out = story.clone();
    out.sentences.truncate(y - 1);
    out.text = out.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
    Ok(UnresolvedSample { story: out, label_fraction: m as f64 / n as f64, removed_count: m, source_length: n })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Continuity,
    Unresolved,
}

impl Problem {
    pub fn as_str(self) -> &'static str {
        match self {
            Problem::Continuity => "continuity",
            Problem::Unresolved => "unresolved",
        }
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Problem {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "continuity" => Ok(Problem::Continuity),
            "unresolved" => Ok(Problem::Unresolved),
            _ => Err(format!("unknown problem {s:?} (expected continuity or unresolved)")),
        }
    }
}

/// Independent generator for one story, stable across runs and platforms.
pub fn story_rng(seed: u64, problem: Problem, story_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(problem.as_str().as_bytes());
    h.update([0]);
    h.update(story_id.as_bytes());
    let digest = h.finalize();
    ChaCha8Rng::from_seed(digest.into())
}

/// A story left out of a dataset, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub story_id: String,
    pub problem: Problem,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Datasets {
    pub continuity: Vec<ContinuitySample>,
    pub unresolved: Vec<UnresolvedSample>,
    pub skipped: Vec<Skipped>,
}

/// One positive sample per eligible story per problem, in corpus order.
pub fn build_datasets(corpus: &[Story], lexicon: &Lexicon, seed: u64) -> Result<Datasets, InjectError> {
    if corpus.is_empty() {
        return Err(InjectError::EmptyCorpus);
    }
    let results: Vec<_> = corpus
        .par_iter()
        .map(|s| {
            let c = inject_continuity(s, lexicon, &mut story_rng(seed, Problem::Continuity, &s.id));
            let u = inject_unresolved(s, &mut story_rng(seed, Problem::Unresolved, &s.id));
            (c, u)
        })
        .collect();
    let mut out = Datasets::default();
    for (story, (c, u)) in corpus.iter().zip(results) {
        match c {
            Ok(c) => out.continuity.push(c),
            Err(e) => out.skipped.push(Skipped { story_id: story.id.clone(), problem: Problem::Continuity, reason: e.to_string() }),
        }
        match u {
            Ok(u) => out.unresolved.push(u),
            Err(e) => out.skipped.push(Skipped { story_id: story.id.clone(), problem: Problem::Unresolved, reason: e.to_string() }),
        }
    }
    for s in &out.skipped {
        info!("skipped {} for {}: {}", s.story_id, s.problem, s.reason);
    }
    Ok(out)
}

/// On-disk continuity record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRecord {
    pub story_id: String,
    pub sentences: Vec<String>,
    pub label_index: usize,
    pub original_sentence: String,
}

/// On-disk unresolved record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnresolvedRecord {
    pub story_id: String,
    pub sentences: Vec<String>,
    pub label_fraction: f64,
    pub removed_count: usize,
    pub source_length: usize,
}

impl From<&ContinuitySample> for ContinuityRecord {
    fn from(s: &ContinuitySample) -> Self {
        Self {
            story_id: s.story.id.clone(),
            sentences: s.story.sentence_texts(),
            label_index: s.label_index,
            original_sentence: s.original_sentence.clone(),
        }
    }
}

impl From<&UnresolvedSample> for UnresolvedRecord {
    fn from(s: &UnresolvedSample) -> Self {
        Self {
            story_id: s.story.id.clone(),
            sentences: s.story.sentence_texts(),
            label_fraction: s.label_fraction,
            removed_count: s.removed_count,
            source_length: s.source_length,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn story(sentences: &[&str]) -> Story {
        Story::from_sentences("s", &sentences.iter().map(|s| s.to_string()).collect::<Vec<_>>()).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn first_verb_positions() {
        assert_eq!(first_verb(&tokenize_lemmatize("Alice quickly ran home.")), Some(2));
        assert_eq!(first_verb(&tokenize_lemmatize("The dog.")), None);
        assert_eq!(first_verb(&tokenize_lemmatize("Is this real?")), Some(0));
    }

    #[test]
    fn antonym_lookup() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.antonyms("love")[0], "hate");
        assert!(lex.antonyms("zzz").is_empty());
        assert!(lex.antonyms.iter().all(|(k, v)| !v.contains(k)));
    }

    #[test]
    fn be_branch_inserts_not() {
        let lex = Lexicon::builtin();
        let s = story(&["Alice was happy.", "The dog."]);
        let out = inject_continuity(&s, lex, &mut rng()).unwrap();
        assert_eq!(out.label_index, 0);
        assert_eq!(out.story.sentence_texts(), ["Alice was not happy.", "The dog."]);
        assert_eq!(out.original_sentence, "Alice was happy.");
    }

    #[test]
    fn antonym_branch_reinflects() {
        let lex = Lexicon::builtin();
        let s = story(&["She loves him."]);
        let out = inject_continuity(&s, lex, &mut rng()).unwrap();
        assert_eq!(out.story.sentences[0].text, "She hates him.");
        let s = story(&["Loved by all, she stayed."]);
        assert_eq!(inject_continuity(&s, lex, &mut rng()).unwrap().story.sentences[0].text, "Hated by all, she stayed.");
    }

    #[test]
    fn verb_without_antonym_gets_not() {
        let lex = Lexicon::builtin();
        let s = story(&["Bob walked to the mill."]);
        assert_eq!(inject_continuity(&s, lex, &mut rng()).unwrap().story.sentences[0].text, "Bob walked not to the mill.");
    }

    #[test]
    fn double_negation_is_avoided() {
        let lex = Lexicon::builtin();
        let s = story(&["Alice was not happy.", "Bob was tired."]);
        for seed in 0..20 {
            let out = inject_continuity(&s, lex, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(out.label_index, 1);
        }
        assert!(matches!(
            inject_continuity(&story(&["Alice was not happy."]), lex, &mut rng()),
            Err(InjectError::NoVerbFound { .. })
        ));
    }

    #[test]
    fn verbless_story_fails() {
        let s = story(&["The dog.", "A cat."]);
        assert!(matches!(inject_continuity(&s, Lexicon::builtin(), &mut rng()), Err(InjectError::NoVerbFound { .. })));
    }

    #[test]
    fn unresolved_arithmetic() {
        let s = Story::from_sentences("s", &(0..100).map(|i| format!("Line {i} ended.")).collect::<Vec<_>>()).unwrap();
        let mut seen = HashSet::new();
        for seed in 0..400 {
            let out = inject_unresolved(&s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let kept = out.story.n();
            assert_eq!(kept + out.removed_count, 100);
            assert_eq!(out.label_fraction, out.removed_count as f64 / 100.0);
            seen.insert(out.removed_count);
        }
        // y in {90..100}: m = 101 - y in {1..11}.
        assert_eq!(seen, (1..=11).collect());
        let short = Story::from_sentences("t", &(0..9).map(|i| format!("Line {i}.")).collect::<Vec<_>>()).unwrap();
        assert!(matches!(inject_unresolved(&short, &mut rng()), Err(InjectError::StoryTooShort { n: 9, .. })));
    }

    proptest::proptest! {
        #[test]
        fn unresolved_label_is_the_removed_fraction(n in 10usize..200, seed in 0u64..1000) {
            let s = Story::from_sentences("s", &(0..n).map(|i| format!("Line {i} ended.")).collect::<Vec<_>>()).unwrap();
            let out = inject_unresolved(&s, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let m = out.removed_count;
            proptest::prop_assert!(m >= 1 && out.story.n() + m == n);
            proptest::prop_assert_eq!(out.label_fraction, m as f64 / n as f64);
            proptest::prop_assert!(out.story.sentences[..] == s.sentences[..out.story.n()]);
            // Tight bound from y >= floor(0.9n); 0.1 + 1/n alone fails e.g. at n = 19, m = 3.
            proptest::prop_assert!(m <= n - 9 * n / 10 + 1);
            proptest::prop_assert!(out.label_fraction < 0.1 + 2.0 / n as f64);
        }
    }

    #[test]
    fn fraction_bound_counterexample() {
        let (n, m) = (19usize, 19 - 9 * 19 / 10 + 1);
        assert_eq!(m, 3);
        assert!(m as f64 / n as f64 > 0.1 + 1.0 / n as f64);
    }

    #[test]
    fn story_rng_is_keyed() {
        let a: u64 = story_rng(1, Problem::Continuity, "x").gen();
        assert_eq!(a, story_rng(1, Problem::Continuity, "x").gen::<u64>());
        assert_ne!(a, story_rng(1, Problem::Unresolved, "x").gen::<u64>());
        assert_ne!(a, story_rng(2, Problem::Continuity, "x").gen::<u64>());
    }

    #[test]
    fn empty_corpus_is_fatal() {
        assert!(matches!(build_datasets(&[], Lexicon::builtin(), 0), Err(InjectError::EmptyCorpus)));
    }
}
