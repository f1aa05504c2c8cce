//! Seeded generator of short templated stories for desk-scale experiments.
//!
//! Every story has a body of character-driven sentences followed by a fixed
//! four-sentence ending, so truncating the ending leaves a recognizable
//! trace of how much was removed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Story;
use crate::lexicon::{Gender, Morphology, NameLexicon};

const PLACES: &[&str] = &[
    "garden", "market", "harbor", "forest", "castle", "village", "library", "mill", "valley", "tower",
    "chapel", "meadow",
];
const OBJECTS: &[&str] =
    &["lantern", "map", "letter", "key", "sword", "basket", "ring", "coin", "cloak", "compass", "mirror", "flute"];

// {a}/{b}: character names, {p}: pronoun of {a}, {o}: object pronoun of {b},
// {pl}/{pl2}: places, {ob}: object.
const BODY: &[&str] = &[
    "{a} loved the quiet {pl} near the old river.",
    "{a} trusted {b} with the {ob} from the very start.",
    "{a} opened the {ob} carefully beside the warm fire.",
    "{a} remembered the old song about the {pl}.",
    "{a} accepted the {ob} from {b} with both hands.",
    "{a} smiled at {b} across the crowded {pl}.",
    "{b} believed every word about the {pl} and the {ob}.",
    "{a} won the long race to the {pl} that afternoon.",
    "{b} laughed at the story about the lost {ob}.",
    "{a} built a small shelter behind the {pl}.",
    "{b} found the {ob} under a pile of wet leaves.",
    "{p} liked the smell of fresh bread in the {pl}.",
    "{a} walked slowly to the {pl} with the {ob}.",
    "{p} carried the {ob} all the way to the {pl2}.",
    "{a} painted a picture of the {pl} for {b}.",
    "{b} cooked a warm meal for {a} in the {pl}.",
    "{a} visited the {pl} every morning before dawn.",
    "{a} was very happy in the {pl} that summer.",
    "The {ob} was heavy and cold in the hands of {a}.",
    "{b} was afraid of the dark path to the {pl2}.",
    "{a} asked {b} about the strange {ob} in the {pl}.",
    "{b} told {a} a secret about the {pl2}.",
    "{a} followed {b} through the {pl} in silence.",
    "{p} thought about the {ob} for a long time.",
    "A cold wind moved across the {pl} and the {pl2}.",
    "Old stories about the {pl2} were known in every house.",
];

const ENDING: [&str; 4] = [
    "As night fell, {a} gathered the {ob} and began the journey home.",
    "{b} waited by the gate of the {pl2} and watched the road.",
    "At last {a} reached the {pl2} and {b} ran to meet {o}.",
    "{a} and {b} lived together in the {pl2} for many happy years.",
];

pub const MIN_SENTENCES: usize = 24;
pub const MAX_SENTENCES: usize = 30;

fn cast(names: &NameLexicon, morph: &Morphology) -> Vec<(String, Gender)> {
    let mut v: Vec<(String, Gender)> = names
        .given_names()
        .into_iter()
        .filter(|(n, _)| !morph.is_verb(n) && !matches!(*n, "grace" | "rose" | "max" | "will"))
        .map(|(n, g)| {
            let mut cs = n.chars();
            let cap: String = cs.next().map(|c| c.to_uppercase().chain(cs).collect()).unwrap_or_default();
            (cap, g)
        })
        .collect();
    v.sort();
    v
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (k, v) in slots {
        s = s.replace(k, v);
    }
    s
}

/// Generates `count` stories deterministically from `seed`. Every story has
/// between 24 and 30 sentences, at least 200 words and at least 1000 upvotes.
pub fn synthetic_corpus(count: usize, seed: u64) -> Vec<Story> {
    let morph = Morphology::builtin();
    let people = cast(NameLexicon::builtin(), morph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| one_story(i, &people, &mut rng)).collect()
}

fn one_story(index: usize, people: &[(String, Gender)], rng: &mut ChaCha8Rng) -> Story {
    let pair: Vec<&(String, Gender)> = people.choose_multiple(rng, 2).collect();
    let (a, ga) = (&pair[0].0, pair[0].1);
    let (b, gb) = (&pair[1].0, pair[1].1);
    let p = if ga == Gender::Male { "He" } else { "She" };
    let o = if gb == Gender::Male { "him" } else { "her" };
    let home = *PLACES.choose(rng).unwrap();
    let n = rng.gen_range(MIN_SENTENCES..=MAX_SENTENCES);
    let mut sentences = Vec::with_capacity(n);
    let mut words = 0;
    for k in 0..n - ENDING.len() {
        let template = if k == 0 { BODY[0] } else { *BODY.choose(rng).unwrap() };
        let (first, second) = if rng.gen_bool(0.25) { (b, a) } else { (a, b) };
        let pron = if first == a { p } else if gb == Gender::Male { "He" } else { "She" };
        let pl = *PLACES.choose(rng).unwrap();
        let ob = *OBJECTS.choose(rng).unwrap();
        let s = fill(template, &[("{a}", first), ("{b}", second), ("{p}", pron), ("{pl2}", home), ("{pl}", pl), ("{ob}", ob)]);
        words += s.split_whitespace().count();
        sentences.push(s);
    }
    let ob = *OBJECTS.choose(rng).unwrap();
    for t in ENDING {
        let s = fill(t, &[("{a}", a), ("{b}", b), ("{o}", o), ("{pl2}", home), ("{ob}", ob)]);
        words += s.split_whitespace().count();
        sentences.push(s);
    }
    debug_assert!(words >= 200, "story {index} has {words} words");
    let raw = sentences.join(" ");
    let mut story = Story::from_text(
        format!("synth-{index:04}"),
        Some(format!("The {} of the {}", capitalize(ob), capitalize(home))),
        Some(rng.gen_range(1000..20_000)),
        &raw,
    )
    .expect("generated stories are nonempty");
    // Templates never contain abbreviations, so segmentation recovers them.
    debug_assert_eq!(story.n(), n);
    story.text = raw;
    story
}

fn capitalize(w: &str) -> String {
    let mut cs = w.chars();
    cs.next().map(|c| c.to_uppercase().chain(cs).collect()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, Pos};

    #[test]
    fn deterministic_and_filter_clean() {
        let a = synthetic_corpus(40, 3);
        assert_eq!(a, synthetic_corpus(40, 3));
        assert_ne!(a, synthetic_corpus(40, 4));
        assert_eq!(filter_corpus(a.clone(), 200, 1000).len(), 40);
        for s in &a {
            assert!((MIN_SENTENCES..=MAX_SENTENCES).contains(&s.n()), "{}", s.n());
        }
    }

    #[test]
    fn every_sentence_has_a_verb() {
        for s in synthetic_corpus(30, 11) {
            for sent in &s.sentences {
                assert!(sent.pos_tags.contains(&Pos::Verb), "{}", sent.text);
            }
        }
    }

    #[test]
    fn ending_is_fixed() {
        let s = &synthetic_corpus(1, 0)[0];
        let last = &s.sentences[s.n() - 1].text;
        assert!(last.contains("lived together"), "{last}");
    }
}
