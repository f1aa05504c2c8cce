//! Shipped word lists: verb morphology, verb antonyms and a gendered name list.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::error::LexiconError;

const VERBS: &str = include_str!("../data/verbs.txt");
const ANTONYMS: &str = include_str!("../data/antonyms.txt");
const NAMES: &str = include_str!("../data/names.txt");

/// Version tag of the shipped data files, echoed into dataset provenance.
pub const LEXICON_VERSION: &str = "1";

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Verb lemmas plus irregular past and participle forms.
#[derive(Clone, Debug, Default)]
pub struct Morphology {
    verbs: HashSet<String>,
    past: HashMap<String, Vec<String>>,
    participle: HashMap<String, Vec<String>>,
    form_to_lemma: HashMap<String, String>,
}

impl Morphology {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut m = Self::default();
        for (line, l) in content_lines(text) {
            let parts: Vec<&str> = l.split_whitespace().collect();
            match parts.as_slice() {
                [lemma] => {
                    m.verbs.insert(lemma.to_string());
                }
                [lemma, past, part] => {
                    let split = |s: &str| s.split('/').map(str::to_string).collect::<Vec<_>>();
                    m.verbs.insert(lemma.to_string());
                    m.past.insert(lemma.to_string(), split(past));
                    m.participle.insert(lemma.to_string(), split(part));
                }
                _ => return Err(LexiconError::Malformed { line, text: l.to_string() }),
            }
        }
        for (lemma, forms) in m.past.iter().chain(m.participle.iter()) {
            for f in forms {
                if f != lemma {
                    m.form_to_lemma.entry(f.clone()).or_insert_with(|| lemma.clone());
                }
            }
        }
        for (form, lemma) in [
            ("am", "be"), ("is", "be"), ("are", "be"), ("being", "be"), ("'m", "be"), ("'re", "be"),
            ("has", "have"), ("having", "have"), ("'ve", "have"),
            ("does", "do"), ("doing", "do"), ("goes", "go"), ("going", "go"),
            ("says", "say"), ("dying", "die"), ("lying", "lie"), ("tying", "tie"), ("untying", "untie"),
        ] {
            m.form_to_lemma.insert(form.to_string(), lemma.to_string());
        }
        Ok(m)
    }

    pub fn builtin() -> &'static Morphology {
        static CELL: OnceLock<Morphology> = OnceLock::new();
        CELL.get_or_init(|| Morphology::parse(VERBS).expect("shipped verb lexicon parses"))
    }

    pub fn is_verb(&self, lemma: &str) -> bool {
        self.verbs.contains(lemma)
    }

    pub fn verbs(&self) -> &HashSet<String> {
        &self.verbs
    }

    /// Lemma of an irregular form, unless the form is itself a listed lemma.
    pub fn irregular_lemma(&self, form: &str) -> Option<&str> {
        if self.verbs.contains(form) && form != "lay" {
            return None;
        }
        self.form_to_lemma.get(form).map(String::as_str)
    }

    pub fn past_forms(&self, lemma: &str) -> Option<&[String]> {
        self.past.get(lemma).map(Vec::as_slice)
    }

    pub fn participle_forms(&self, lemma: &str) -> Option<&[String]> {
        self.participle.get(lemma).map(Vec::as_slice)
    }
}

/// Parses `word: a1, a2, …` lines into ordered antonym lists.
pub fn parse_antonyms(text: &str) -> Result<Vec<(String, Vec<String>)>, LexiconError> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    let mut seen = HashSet::new();
    for (line, l) in content_lines(text) {
        let Some((word, rest)) = l.split_once(':') else {
            return Err(LexiconError::Malformed { line, text: l.to_string() });
        };
        let word = word.trim().to_lowercase();
        let list: Vec<String> =
            rest.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        if word.is_empty() || list.is_empty() {
            return Err(LexiconError::Malformed { line, text: l.to_string() });
        }
        if list.contains(&word) {
            return Err(LexiconError::SelfAntonym { line, word });
        }
        if !seen.insert(word.clone()) {
            return Err(LexiconError::DuplicateEntry { line, word });
        }
        out.push((word, list));
    }
    Ok(out)
}

pub fn builtin_antonyms_text() -> &'static str {
    ANTONYMS
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Gender {
    Male,
    Female,
}

/// Lowercased given names and titles mapped to grammatical gender.
#[derive(Clone, Debug, Default)]
pub struct NameLexicon {
    names: HashMap<String, Gender>,
}

impl NameLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut names = HashMap::new();
        for (line, l) in content_lines(text) {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let gender = match parts.as_slice() {
                [_, "m"] => Gender::Male,
                [_, "f"] => Gender::Female,
                _ => return Err(LexiconError::Malformed { line, text: l.to_string() }),
            };
            names.insert(parts[0].to_lowercase(), gender);
        }
        Ok(Self { names })
    }

    pub fn builtin() -> &'static NameLexicon {
        static CELL: OnceLock<NameLexicon> = OnceLock::new();
        CELL.get_or_init(|| NameLexicon::parse(NAMES).expect("shipped name lexicon parses"))
    }

    pub fn gender(&self, word: &str) -> Option<Gender> {
        self.names.get(&word.to_lowercase()).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.names.contains_key(&word.to_lowercase())
    }

    /// Given names (titles excluded) with their gender, sorted for stable iteration.
    pub fn given_names(&self) -> Vec<(&str, Gender)> {
        const TITLES: [&str; 11] =
            ["sir", "lord", "king", "prince", "mr", "lady", "queen", "princess", "mrs", "ms", "miss"];
        let mut v: Vec<_> = self
            .names
            .iter()
            .filter(|(n, _)| !TITLES.contains(&n.as_str()))
            .map(|(n, &g)| (n.as_str(), g))
            .collect();
        v.sort_unstable();
        v
    }
}
