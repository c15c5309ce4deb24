use super::Lexicons;
use crate::{Error, Result};

/// Lowercase words of a question with everything but ASCII letters and
/// digits removed. Apostrophes and other punctuation vanish without
/// splitting the word ("isn't" -> "isnt").
pub fn question_tokens(raw: &str) -> Vec<String> {
    let cleaned: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_ascii_alphanumeric() {
                Some(c.to_ascii_lowercase())
            } else if c.is_whitespace() {
                Some(' ')
            } else {
                None
            }
        })
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Normalizes a raw question: keeps letters and digits, drops the
/// non-semantic phrases, lowercases, capitalizes the first letter and
/// appends a single question mark.
pub fn preprocess(raw: &str, lex: &Lexicons) -> Result<String> {
    let mut words = question_tokens(raw);
    // Removing a phrase can join words into a new match; run to a fixpoint.
    loop {
        let before = words.len();
        for phrase in &lex.drop_phrases {
            remove_phrase(&mut words, phrase);
        }
        if words.len() == before {
            break;
        }
    }
    if words.is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let mut out = words.join(" ");
    if let Some(first) = out.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    out.push('?');
    Ok(out)
}

fn remove_phrase(words: &mut Vec<String>, phrase: &[String]) {
    if phrase.is_empty() {
        return;
    }
    let mut i = 0;
    while i + phrase.len() <= words.len() {
        if words[i..i + phrase.len()].iter().zip(phrase).all(|(a, b)| a == b) {
            words.drain(i..i + phrase.len());
        } else {
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pp(s: &str) -> String {
        preprocess(s, &Lexicons::default()).unwrap()
    }

    #[test]
    fn drops_leading_phrase() {
        assert_eq!(pp("Do you think the dog is asleep?"), "The dog is asleep?");
    }

    #[test]
    fn collapses_punctuation() {
        assert_eq!(pp("Is it raining???"), "Is it raining?");
    }

    #[test]
    fn drops_two_phrases() {
        assert_eq!(pp("Can you see a cat in the picture?"), "A cat?");
    }

    #[test]
    fn apostrophes_join_words() {
        assert_eq!(pp("Isn't the dog ASLEEP?!"), "Isnt the dog asleep?");
    }

    #[test]
    fn nested_drop_phrases_reach_fixpoint() {
        assert_eq!(pp("Do you do you think think the cat sleeps"), "The cat sleeps?");
    }

    #[test]
    fn empty_after_stripping() {
        let lex = Lexicons::default();
        assert!(matches!(preprocess("?!?", &lex), Err(Error::EmptyQuestion)));
        assert!(matches!(preprocess("Do you see", &lex), Err(Error::EmptyQuestion)));
    }

    proptest! {
        #[test]
        fn idempotent(raw in "[a-zA-Z0-9 ?!',.]{0,40}") {
            let lex = Lexicons::default();
            if let Ok(once) = preprocess(&raw, &lex) {
                prop_assert_eq!(preprocess(&once, &lex).unwrap(), once);
            }
        }

        #[test]
        fn idempotent_with_phrases(
            parts in proptest::collection::vec(
                prop_oneof![
                    Just("do you think"), Just("in the picture"), Just("can you see"),
                    Just("cat"), Just("Is"), Just("the"), Just("dog?"), Just("do"), Just("you"),
                ],
                1..8,
            )
        ) {
            let lex = Lexicons::default();
            let raw = parts.join(" ");
            if let Ok(once) = preprocess(&raw, &lex) {
                prop_assert_eq!(preprocess(&once, &lex).unwrap(), once);
            }
        }
    }
}
