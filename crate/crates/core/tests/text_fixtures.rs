use plothole::corpus::{segment_sentences, tokenize_lemmatize, Pos};

const SEG_RAW: &str = include_str!("fixtures/segmentation_raw.txt");
const SEG_EXPECTED: &str = include_str!("fixtures/segmentation_expected.txt");
const POS: &str = include_str!("fixtures/pos_fixture.txt");

#[test]
fn segmentation_matches_hand_boundaries() {
    let expected: Vec<&str> = SEG_EXPECTED.lines().collect();
    assert_eq!(expected.len(), 50);
    let got = segment_sentences(SEG_RAW);
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        assert_eq!(g, e, "sentence {i}");
    }
    assert_eq!(got.len(), expected.len());
}

#[test]
fn tagger_matches_hand_labeled_verbs() {
    let mut tokens_seen = 0;
    for line in POS.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let gold: Vec<(&str, Option<&str>)> = line
            .split_whitespace()
            .map(|t| {
                let (tok, tag) = t.rsplit_once('/').unwrap();
                (tok, tag.strip_prefix("VERB:"))
            })
            .collect();
        let text = gold.iter().map(|(t, _)| *t).collect::<Vec<_>>().join(" ");
        let s = tokenize_lemmatize(&text);
        let toks: Vec<&str> = gold.iter().map(|(t, _)| *t).collect();
        assert_eq!(s.tokens, toks, "{text}");
        for (i, (tok, verb)) in gold.iter().enumerate() {
            match verb {
                Some(lemma) => {
                    assert_eq!(s.pos_tags[i], Pos::Verb, "{tok:?} in {text:?}");
                    assert_eq!(s.lemmas[i], *lemma, "{tok:?} in {text:?}");
                }
                None => assert_ne!(s.pos_tags[i], Pos::Verb, "{tok:?} in {text:?}"),
            }
        }
        tokens_seen += gold.len();
    }
    assert!(tokens_seen >= 200);
}
