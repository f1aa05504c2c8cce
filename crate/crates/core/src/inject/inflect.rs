//! Surface-form detection and re-inflection of verb lemmas.

use crate::lexicon::Morphology;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerbForm {
    Base,
    ThirdSingular,
    Past,
    Participle,
    Gerund,
}

/// Classifies the surface form `token` of `lemma`. `after_aux` says whether
/// the preceding token is a form of "be" or "have", which disambiguates
/// regular past tense from participles.
pub fn detect_form(token: &str, lemma: &str, after_aux: bool, morph: &Morphology) -> VerbForm {
    let w = token.to_lowercase();
    if w == lemma {
        return VerbForm::Base;
    }
    let in_past = morph.past_forms(lemma).is_some_and(|f| f.contains(&w));
    let in_part = morph.participle_forms(lemma).is_some_and(|f| f.contains(&w));
    match (in_past, in_part) {
        (true, false) => return VerbForm::Past,
        (false, true) => return VerbForm::Participle,
        (true, true) => return if after_aux { VerbForm::Participle } else { VerbForm::Past },
        _ => {}
    }
    if w.ends_with("ing") {
        VerbForm::Gerund
    } else if w.ends_with("ed") {
        if after_aux { VerbForm::Participle } else { VerbForm::Past }
    } else if w.ends_with('s') {
        VerbForm::ThirdSingular
    } else {
        VerbForm::Base
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

// Two-syllable verbs with final stress that double their last consonant.
const DOUBLING: &[&str] = &["permit", "admit", "commit", "omit", "prefer", "occur", "regret", "refer", "begin", "forbid", "forget"];

fn doubles_final(lemma: &str) -> bool {
    if DOUBLING.contains(&lemma) {
        return true;
    }
    let cs: Vec<char> = lemma.chars().collect();
    let n = cs.len();
    if n < 3 {
        return false;
    }
    let vowel_groups = (0..n).filter(|&i| is_vowel(cs[i]) && (i == 0 || !is_vowel(cs[i - 1]))).count();
    vowel_groups == 1
        && !is_vowel(cs[n - 1])
        && !matches!(cs[n - 1], 'w' | 'x' | 'y')
        && is_vowel(cs[n - 2])
        && !is_vowel(cs[n - 3])
}

fn consonant_y(lemma: &str) -> bool {
    let cs: Vec<char> = lemma.chars().collect();
    cs.len() >= 2 && cs[cs.len() - 1] == 'y' && !is_vowel(cs[cs.len() - 2])
}

fn regular_past(lemma: &str) -> String {
    if lemma.ends_with('e') {
        format!("{lemma}d")
    } else if consonant_y(lemma) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else if doubles_final(lemma) {
        format!("{lemma}{}ed", lemma.chars().last().unwrap())
    } else {
        format!("{lemma}ed")
    }
}

/// Inflects `lemma` into `form`, using irregular forms where listed.
pub fn inflect(lemma: &str, form: VerbForm, morph: &Morphology) -> String {
    match form {
        VerbForm::Base => lemma.to_string(),
        VerbForm::ThirdSingular => match lemma {
            "be" => "is".into(),
            "have" => "has".into(),
            _ if ["s", "sh", "ch", "x", "z", "o"].iter().any(|s| lemma.ends_with(s)) => format!("{lemma}es"),
            _ if consonant_y(lemma) => format!("{}ies", &lemma[..lemma.len() - 1]),
            _ => format!("{lemma}s"),
        },
        VerbForm::Past => morph.past_forms(lemma).map(|f| f[0].clone()).unwrap_or_else(|| regular_past(lemma)),
        VerbForm::Participle => morph
            .participle_forms(lemma)
            .map(|f| f[0].clone())
            .unwrap_or_else(|| regular_past(lemma)),
        VerbForm::Gerund => {
            if let Some(stem) = lemma.strip_suffix("ie") {
                format!("{stem}ying")
            } else if lemma.ends_with('e') && !lemma.ends_with("ee") && lemma != "be" {
                format!("{}ing", &lemma[..lemma.len() - 1])
            } else if doubles_final(lemma) {
                format!("{lemma}{}ing", lemma.chars().last().unwrap())
            } else {
                format!("{lemma}ing")
            }
        }
    }
}

/// Copies the capitalization pattern of `like` onto `word`.
pub fn match_case(word: &str, like: &str) -> String {
    let letters: Vec<char> = like.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    if like.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = word.chars();
        return cs.next().map(|c| c.to_uppercase().chain(cs).collect()).unwrap_or_default();
    }
    word.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m() -> &'static Morphology {
        Morphology::builtin()
    }

    #[test]
    fn regular_forms() {
        let cases = [
            ("hate", VerbForm::ThirdSingular, "hates"),
            ("hate", VerbForm::Past, "hated"),
            ("hate", VerbForm::Gerund, "hating"),
            ("stop", VerbForm::Past, "stopped"),
            ("stop", VerbForm::Gerund, "stopping"),
            ("open", VerbForm::Past, "opened"),
            ("cry", VerbForm::Past, "cried"),
            ("cry", VerbForm::ThirdSingular, "cries"),
            ("die", VerbForm::Gerund, "dying"),
            ("push", VerbForm::ThirdSingular, "pushes"),
            ("permit", VerbForm::Past, "permitted"),
            ("close", VerbForm::Participle, "closed"),
        ];
        for (l, f, want) in cases {
            assert_eq!(inflect(l, f, m()), want, "{l} {f:?}");
        }
    }

    #[test]
    fn irregular_forms() {
        assert_eq!(inflect("lose", VerbForm::Past, m()), "lost");
        assert_eq!(inflect("take", VerbForm::Participle, m()), "taken");
        assert_eq!(inflect("take", VerbForm::Past, m()), "took");
        assert_eq!(inflect("forget", VerbForm::Past, m()), "forgot");
    }

    #[test]
    fn form_detection() {
        assert_eq!(detect_form("loves", "love", false, m()), VerbForm::ThirdSingular);
        assert_eq!(detect_form("Loved", "love", false, m()), VerbForm::Past);
        assert_eq!(detect_form("loved", "love", true, m()), VerbForm::Participle);
        assert_eq!(detect_form("gave", "give", false, m()), VerbForm::Past);
        assert_eq!(detect_form("given", "give", false, m()), VerbForm::Participle);
        assert_eq!(detect_form("won", "win", true, m()), VerbForm::Participle);
        assert_eq!(detect_form("winning", "win", false, m()), VerbForm::Gerund);
    }

    #[test]
    fn case_is_preserved() {
        assert_eq!(match_case("hated", "Loved"), "Hated");
        assert_eq!(match_case("hated", "LOVED"), "HATED");
        assert_eq!(match_case("hated", "loved"), "hated");
    }
}
