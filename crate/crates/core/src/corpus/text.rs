//! Tokenization, lemmatization and coarse part-of-speech tagging.

use serde::{Deserialize, Serialize};

use crate::lexicon::{Morphology, NameLexicon};

/// Coarse part-of-speech classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Verb,
    Noun,
    Pron,
    Other,
}

/// A tokenized, lemmatized and tagged sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    #[serde(rename = "pos")]
    pub pos_tags: Vec<Pos>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Byte span of one token in its source text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

const CLITICS: [&str; 7] = ["n't", "'s", "'re", "'ll", "'ve", "'d", "'m"];

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Whitespace/punctuation tokenization. Leading and trailing punctuation is
/// split off each whitespace chunk one character at a time, and English
/// clitics (`n't`, `'s`, …) become separate tokens. Inner hyphens and
/// apostrophes stay inside the word.
pub fn token_spans(text: &str) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut chunk_start = None;
    let bytes_end = text.len();
    let flush = |s: usize, e: usize, spans: &mut Vec<Span>| split_chunk(text, s, e, spans);
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                flush(s, i, &mut spans);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        flush(s, bytes_end, &mut spans);
    }
    spans
}

fn split_chunk(text: &str, mut start: usize, mut end: usize, spans: &mut Vec<Span>) {
    let mut trailing = Vec::new();
    while start < end {
        let c = text[start..end].chars().next().unwrap();
        if !is_punct(c) {
            break;
        }
        spans.push(Span { start, end: start + c.len_utf8() });
        start += c.len_utf8();
    }
    while end > start {
        let c = text[start..end].chars().next_back().unwrap();
        if !is_punct(c) {
            break;
        }
        trailing.push(Span { start: end - c.len_utf8(), end });
        end -= c.len_utf8();
    }
    if start < end {
        let word = &text[start..end];
        let lower = word.to_lowercase().replace('’', "'");
        let clitic = CLITICS
            .iter()
            .find(|cl| lower.len() > cl.len() && lower.ends_with(*cl))
            .map(|cl| cl.chars().count());
        match clitic {
            Some(n) => {
                let split = word.char_indices().rev().nth(n - 1).map(|(i, _)| start + i).unwrap();
                spans.push(Span { start, end: split });
                spans.push(Span { start: split, end });
            }
            None => spans.push(Span { start, end }),
        }
    }
    spans.extend(trailing.into_iter().rev());
}

pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|s| text[s.start..s.end].to_string()).collect()
}

const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "ourselves", "they", "them", "their", "theirs", "themselves", "who", "whom", "someone",
    "everyone", "anyone", "nobody", "everybody", "somebody", "something", "nothing", "everything",
    "anything",
];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "some", "any", "no", "every", "each",
    "all", "both", "either", "neither", "such", "what", "which", "whose", "another", "many",
    "much", "few", "several", "more", "most", "other",
];

const POSSESSIVES: &[&str] = &["my", "your", "his", "her", "its", "our", "their", "'s"];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "from", "up", "down", "out", "off", "over",
    "under", "around", "across", "behind", "beside", "near", "toward", "towards", "upon",
    "within", "without", "onto", "of", "inside", "outside", "past", "along", "beyond", "to",
];

const FUNCTION_WORDS: &[&str] = &[
    "and", "but", "or", "nor", "so", "yet", "because", "if", "while", "although", "though",
    "unless", "since", "than", "as", "then", "once", "here", "there", "when", "where", "why",
    "how", "not", "n't", "never", "very", "too", "also", "just", "only", "even", "still",
    "already", "always", "often", "soon", "again", "now", "ever", "almost", "away", "back",
    "together", "yes", "perhaps", "maybe", "later", "today", "tonight", "yesterday", "tomorrow",
    "home", "far", "well", "quite", "rather", "instead", "whether", "until", "till", "'s",
];

const ADJECTIVES: &[&str] = &[
    "happy", "sad", "angry", "tired", "old", "young", "big", "small", "good", "bad", "new",
    "long", "great", "little", "own", "right", "large", "high", "different", "early",
    "important", "same", "able", "dark", "cold", "warm", "hot", "red", "black", "white", "green",
    "blue", "brave", "quiet", "loud", "kind", "cruel", "gentle", "strong", "weak", "rich", "poor",
    "empty", "full", "calm", "afraid", "alone", "alive", "dead", "ready", "sure", "late",
    "strange", "silent", "bright", "wise", "foolish", "proud", "curious", "hungry", "scared",
    "excited", "bored", "worried", "surprised", "certain", "clear", "deep", "soft", "hard",
    "heavy", "golden", "ancient", "tall", "short", "first", "last", "next", "whole", "beautiful",
    "lonely", "grateful", "nervous", "fierce", "honest", "lost",
];

const MODALS: &[&str] = &["will", "would", "can", "could", "shall", "should", "may", "might", "must"];

const IRREGULAR_NOUNS: &[(&str, &str)] = &[
    ("men", "man"), ("women", "woman"), ("children", "child"), ("feet", "foot"),
    ("teeth", "tooth"), ("mice", "mouse"), ("people", "person"), ("wolves", "wolf"),
    ("knives", "knife"), ("lives", "life"), ("wives", "wife"), ("leaves", "leaf"),
];

/// Words ending in `-ing`/`-ed`/`-s` that are not inflected verbs.
const NOT_INFLECTED: &[&str] = &[
    "thing", "king", "ring", "sing", "bring", "string", "spring", "wing", "morning", "evening",
    "ceiling", "during", "sibling", "building", "bed", "red", "hundred", "seed", "need", "shed",
    "speed", "feed", "bleed", "breed", "sled", "shred", "news", "always", "perhaps", "was", "has",
    "is", "does", "goes", "this", "his", "its", "us", "yes", "less", "across", "kiss", "pass",
    "miss", "boss", "dress", "glass", "grass", "class",
];

/// Closed-class word (determiner, preposition, conjunction, adverb particle).
pub fn is_function_word(w: &str) -> bool {
    contains(DETERMINERS, w) || contains(PREPOSITIONS, w) || contains(FUNCTION_WORDS, w)
}

pub fn is_preposition(w: &str) -> bool {
    contains(PREPOSITIONS, w)
}

fn contains(list: &[&str], w: &str) -> bool {
    list.contains(&w)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn undouble(stem: &str) -> Option<String> {
    let cs: Vec<char> = stem.chars().collect();
    let n = cs.len();
    (n >= 3 && cs[n - 1] == cs[n - 2] && matches!(cs[n - 1], 'b' | 'd' | 'g' | 'm' | 'n' | 'p' | 'r' | 't'))
        .then(|| cs[..n - 1].iter().collect())
}

fn needs_final_e(stem: &str) -> bool {
    let cs: Vec<char> = stem.chars().collect();
    let n = cs.len();
    if n < 2 {
        return false;
    }
    let last = cs[n - 1];
    if matches!(last, 'v' | 'z' | 'c' | 'u') {
        return true;
    }
    // Single-syllable consonant-vowel-consonant stems: "hop" -> "hope".
    let vowel_groups = cs.windows(2).filter(|w| !is_vowel(w[0]) && is_vowel(w[1])).count()
        + usize::from(is_vowel(cs[0]));
    n >= 3
        && vowel_groups == 1
        && !is_vowel(last)
        && !matches!(last, 'w' | 'x' | 'y')
        && is_vowel(cs[n - 2])
        && !is_vowel(cs[n - 3])
}

/// Verb lemma of a lowercased form, if the form looks like a verb.
/// Returns the lemma and whether it was confirmed by the lexicon.
pub fn verb_lemma(w: &str, morph: &Morphology) -> Option<(String, bool)> {
    if let Some(l) = morph.irregular_lemma(w) {
        return Some((l.to_string(), true));
    }
    if morph.is_verb(w) {
        return Some((w.to_string(), true));
    }
    if contains(NOT_INFLECTED, w) {
        return None;
    }
    let strip = |suffix: &str| w.strip_suffix(suffix).filter(|s| s.chars().count() >= 2);
    let mut candidates: Vec<String> = Vec::new();
    let mut fallback: Option<String> = None;
    if let Some(stem) = strip("ies") {
        candidates.push(format!("{stem}y"));
    } else if let Some(stem) = strip("es") {
        candidates.push(format!("{stem}e"));
        candidates.push(stem.to_string());
    } else if let Some(stem) = w.strip_suffix('s').filter(|s| s.len() >= 2 && !s.ends_with('s') && !s.ends_with('u')) {
        candidates.push(stem.to_string());
    }
    if let Some(stem) = strip("ied") {
        candidates.push(format!("{stem}y"));
        fallback = Some(format!("{stem}y"));
    } else if let Some(stem) = strip("ed") {
        candidates.push(format!("{stem}e"));
        candidates.push(stem.to_string());
        if let Some(u) = undouble(stem) {
            candidates.push(u);
        }
        fallback = Some(regular_stem(stem));
    }
    if let Some(stem) = strip("ing") {
        candidates.push(format!("{stem}e"));
        candidates.push(stem.to_string());
        if let Some(u) = undouble(stem) {
            candidates.push(u);
        }
        fallback = Some(regular_stem(stem));
    }
    if let Some(hit) = candidates.into_iter().find(|c| morph.is_verb(c)) {
        return Some((hit, true));
    }
    fallback.map(|f| (f, false))
}

fn regular_stem(stem: &str) -> String {
    if let Some(u) = undouble(stem) {
        u
    } else if needs_final_e(stem) {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

pub fn noun_lemma(w: &str) -> String {
    if let Some(&(_, l)) = IRREGULAR_NOUNS.iter().find(|(f, _)| *f == w) {
        return l.to_string();
    }
    if contains(NOT_INFLECTED, w) || w.chars().count() <= 3 {
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["ches", "shes", "xes", "sses", "zes"] {
        if w.ends_with(suffix) {
            return w[..w.len() - 2].to_string();
        }
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return w[..w.len() - 1].to_string();
    }
    w.to_string()
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

fn is_aux(lemma: &str) -> bool {
    matches!(lemma, "be" | "have" | "do") || contains(MODALS, lemma)
}

/// Tags and lemmatizes one sentence with the shipped lexicons.
pub fn tokenize_lemmatize(text: &str) -> Sentence {
    tokenize_lemmatize_with(text, Morphology::builtin(), NameLexicon::builtin())
}

pub fn tokenize_lemmatize_with(text: &str, morph: &Morphology, names: &NameLexicon) -> Sentence {
    let tokens = tokenize(text);
    let mut lemmas: Vec<String> = Vec::with_capacity(tokens.len());
    let mut pos_tags = Vec::with_capacity(tokens.len());
    let first_word = tokens.iter().position(|t| t.chars().any(char::is_alphanumeric));
    for (i, tok) in tokens.iter().enumerate() {
        let lower = tok.to_lowercase().replace('’', "'");
        let prev = i.checked_sub(1).map(|p| (lemmas[p].as_str(), pos_tags[p], tokens[p].to_lowercase()));
        let (lemma, pos) = tag_token(tok, &lower, Some(i) == first_word, prev, morph, names);
        lemmas.push(lemma);
        pos_tags.push(pos);
    }
    Sentence { text: text.to_string(), tokens, lemmas, pos_tags }
}

fn tag_token(
    tok: &str,
    lower: &str,
    initial: bool,
    prev: Option<(&str, Pos, String)>,
    morph: &Morphology,
    names: &NameLexicon,
) -> (String, Pos) {
    if !lower.chars().any(char::is_alphabetic) {
        return (lower.to_string(), Pos::Other);
    }
    let prev_lower = prev.as_ref().map(|p| p.2.as_str());
    let prev_is_pron = prev.as_ref().is_some_and(|p| p.1 == Pos::Pron);
    match lower {
        "n't" => return ("not".into(), Pos::Other),
        "'s" if prev_is_pron => return ("be".into(), Pos::Verb),
        "'re" | "'m" => return ("be".into(), Pos::Verb),
        "'ll" => return ("will".into(), Pos::Verb),
        "'ve" => return ("have".into(), Pos::Verb),
        "'d" => return ("would".into(), Pos::Verb),
        _ => {}
    }
    if contains(PRONOUNS, lower) {
        return (lower.to_string(), Pos::Pron);
    }
    if contains(MODALS, lower) {
        return (lower.to_string(), Pos::Verb);
    }
    if let Some(l) = morph.irregular_lemma(lower).filter(|l| matches!(*l, "be" | "have" | "do")) {
        return (l.to_string(), Pos::Verb);
    }
    if matches!(lower, "be" | "have" | "do") {
        return (lower.to_string(), Pos::Verb);
    }
    if contains(DETERMINERS, lower) || contains(PREPOSITIONS, lower) || contains(FUNCTION_WORDS, lower) {
        return (lower.to_string(), Pos::Other);
    }
    if is_capitalized(tok) && (!initial || names.contains(lower)) {
        return (lower.to_string(), Pos::Noun);
    }
    if contains(ADJECTIVES, lower) {
        return (lower.to_string(), Pos::Other);
    }
    let nominal_context = prev.as_ref().is_some_and(|(plemma, ppos, pl)| {
        contains(DETERMINERS, pl)
            || contains(POSSESSIVES, pl)
            || (contains(PREPOSITIONS, pl) && pl != "to")
            || contains(ADJECTIVES, pl)
            || (*ppos == Pos::Verb && !is_aux(plemma))
    });
    if let Some((lemma, known)) = verb_lemma(lower, morph) {
        let base_or_plural = lemma == lower || lower.ends_with('s');
        let after_prep = prev_lower.is_some_and(|p| contains(PREPOSITIONS, p));
        let gerund = known && lower.ends_with("ing") && after_prep;
        let blocked = nominal_context
            && prev_lower != Some("to")
            && !gerund
            && (base_or_plural || lower.ends_with("ing") || !known);
        if !blocked && (known || lower.ends_with("ed") || lower.ends_with("ing")) {
            return (lemma, Pos::Verb);
        }
    }
    if lower.ends_with("ly") {
        return (lower.to_string(), Pos::Other);
    }
    for suffix in ["ous", "ful", "ive", "able", "ible", "less", "ish"] {
        if lower.ends_with(suffix) {
            return (lower.to_string(), Pos::Other);
        }
    }
    (noun_lemma(lower), Pos::Noun)
}
