//! Rule-based sentence segmentation.

/// Abbreviations that end in a period but never end a sentence.
const ABBREVIATIONS: [&str; 7] = ["mr.", "mrs.", "dr.", "st.", "vs.", "e.g.", "i.e."];

const CLOSERS: [char; 5] = ['"', '\'', ')', '”', '’'];

/// Splits raw text into sentences.
///
/// A boundary falls after `.`, `!` or `?` (plus any closing quotes or
/// brackets) when the next non-space character is an uppercase letter or an
/// opening quote followed by one, unless the word ending in the period is a
/// guarded abbreviation. Segments are trimmed; text without a terminator is
/// one segment.
pub fn segment_sentences(raw: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && (matches!(chars[end].1, '.' | '!' | '?') || CLOSERS.contains(&chars[end].1)) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let has_space = next > end;
            let starts_upper = next < chars.len() && {
                let mut k = next;
                while k < chars.len() && matches!(chars[k].1, '"' | '\'' | '“' | '‘' | '(') {
                    k += 1;
                }
                k < chars.len() && chars[k].1.is_uppercase()
            };
            if has_space && starts_upper && !(c == '.' && ends_with_abbreviation(raw, chars[i].0 + 1)) {
                let byte_end = if end < chars.len() { chars[end].0 } else { raw.len() };
                push_trimmed(&mut out, &raw[start..byte_end]);
                start = chars[next].0;
                i = next;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    push_trimmed(&mut out, &raw[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

fn ends_with_abbreviation(raw: &str, byte_end: usize) -> bool {
    let prefix = &raw[..byte_end];
    let word_start = prefix.rfind(char::is_whitespace).map_or(0, |p| p + 1);
    let word = prefix[word_start..].trim_start_matches(['"', '\'', '(', '“', '‘']).to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_terminators() {
        assert_eq!(segment_sentences("Alice ran. Bob hid."), vec!["Alice ran.", "Bob hid."]);
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(segment_sentences("Dr. Who ran."), vec!["Dr. Who ran."]);
        assert_eq!(
            segment_sentences("He met Mrs. Smith on St. James street. She waved."),
            vec!["He met Mrs. Smith on St. James street.", "She waved."]
        );
    }

    #[test]
    fn lowercase_continuation_is_not_a_boundary() {
        assert_eq!(segment_sentences("It was 3 p.m. and late."), vec!["It was 3 p.m. and late."]);
    }

    #[test]
    fn no_terminator_is_one_segment() {
        assert_eq!(segment_sentences("  just words here  "), vec!["just words here"]);
    }

    #[test]
    fn quotes_stay_with_their_sentence() {
        assert_eq!(
            segment_sentences("\"Run!\" Bob shouted. \"Now?\" she asked."),
            vec!["\"Run!\"", "Bob shouted.", "\"Now?\" she asked."]
        );
    }

    proptest! {
        #[test]
        fn segmentation_is_lossless(words in proptest::collection::vec("[A-Za-z]{1,6}[.!?]?", 1..30),
                                    gaps in proptest::collection::vec("[ \t\n]{1,3}", 30)) {
            let mut text = String::new();
            for (w, g) in words.iter().zip(&gaps) {
                text.push_str(w);
                text.push_str(g);
            }
            let segs = segment_sentences(&text);
            prop_assert_eq!(collapse_whitespace(&segs.join(" ")), collapse_whitespace(&text));
            prop_assert!(segs.iter().all(|s| !s.trim().is_empty()));
        }
    }
}
