use super::{detect_negation, is_adjective, is_noun, is_pronoun, Lexicons, ParsedQuestion, Summary, Tuple};
use crate::{Error, Result};

/// Splits a summary into primary, relation and secondary arguments.
///
/// P is the subject (extended to `subject + preposition + object` when the
/// object names a clipart object or a location and more words follow),
/// or the first run of nouns when the summary has no subject. S starts at
/// the first later noun, pulling in adjectives right before it, and runs to
/// the end of the summary. Everything else is R.
pub fn extract_tuple(summary: &Summary, pq: &ParsedQuestion, lex: &Lexicons) -> Result<Tuple> {
    let words = &summary.words;
    if words.is_empty() {
        return Err(Error::TupleExtraction(String::new()));
    }
    let texts: Vec<&str> = words.iter().map(|w| w.text.as_str()).collect();

    let subject = words.iter().position(|w| {
        matches!(w.dep.as_str(), "nsubj" | "nsubjpass")
            && (is_noun(&w.pos) || (is_pronoun(&w.pos) && !lex.is_stop_pronoun(&w.text)))
    });

    // P occupies words[p_start..p_end].
    let (p_start, p_end) = match subject {
        Some(i) => (0, extend_subject(summary, &texts, i, lex)),
        None => {
            let start = words
                .iter()
                .position(|w| is_noun(&w.pos))
                .or_else(|| {
                    words
                        .iter()
                        .position(|w| is_pronoun(&w.pos) && !lex.is_stop_pronoun(&w.text))
                })
                .ok_or_else(|| Error::TupleExtraction(summary.to_string()))?;
            let mut end = start + 1;
            while end < words.len() && is_noun(&words[end].pos) {
                end += 1;
            }
            (start, end)
        }
    };

    let s_start = find_secondary(summary, &texts, p_end, lex);

    let take = |range: std::ops::Range<usize>| -> Vec<String> {
        range.map(|i| words[i].text.clone()).collect()
    };
    let p = take(p_start..p_end);
    let s = s_start.map(|k| take(k..words.len())).unwrap_or_default();
    let s_from = s_start.unwrap_or(words.len());
    let r = (0..words.len())
        .filter(|&i| !(p_start..p_end).contains(&i) && i < s_from)
        .map(|i| words[i].text.clone())
        .collect();

    Ok(Tuple {
        p,
        r,
        s,
        negated: pq_negated(pq, lex),
    })
}

/// End (exclusive) of P when the subject sits at `i`.
fn extend_subject(summary: &Summary, texts: &[&str], i: usize, lex: &Lexicons) -> usize {
    let words = &summary.words;
    let plain = i + 1;
    if !is_noun(&words[i].pos) || i + 2 >= words.len() || words[i + 1].pos != "IN" {
        return plain;
    }
    // "in front of" is a relation, not a location on the subject.
    if lex.skip_phrase_at(&texts[i + 1..]).is_some() {
        return plain;
    }
    match lex.object_or_location_match(&texts[i + 2..]) {
        Some(len) if i + 2 + len < words.len() => i + 2 + len,
        _ => plain,
    }
}

fn find_secondary(summary: &Summary, texts: &[&str], from: usize, lex: &Lexicons) -> Option<usize> {
    let words = &summary.words;
    let mut k = from;
    while k < words.len() {
        if let Some(len) = lex.skip_phrase_at(&texts[k..]) {
            k += len;
            continue;
        }
        if is_noun(&words[k].pos) {
            return Some(k);
        }
        if is_adjective(&words[k].pos) {
            let mut m = k;
            while m < words.len() && is_adjective(&words[m].pos) {
                m += 1;
            }
            if m < words.len() && is_noun(&words[m].pos) {
                return Some(k);
            }
            k = m;
            continue;
        }
        k += 1;
    }
    None
}

fn pq_negated(pq: &ParsedQuestion, lex: &Lexicons) -> bool {
    detect_negation(&pq.text(), lex)
}

/// Never-fail tuple: P is the first noun, R the remaining words, S empty.
/// Without a summary the kept-label words of the whole question are used;
/// with no noun at all, P is the whole word sequence.
pub fn fallback_tuple(pq: &ParsedQuestion, summary: Option<&Summary>, lex: &Lexicons) -> Tuple {
    let words: Vec<(String, String)> = match summary {
        Some(s) if !s.is_empty() => s.words.iter().map(|w| (w.text.clone(), w.pos.clone())).collect(),
        _ => {
            let kept: Vec<(String, String)> = pq
                .tokens()
                .iter()
                .filter(|t| lex.keeps_label(t.base_label()) && !lex.is_stop_pronoun(&t.surface))
                .map(|t| (t.surface.to_lowercase(), t.pos.clone()))
                .collect();
            if kept.is_empty() {
                pq.tokens()
                    .iter()
                    .filter(|t| t.surface.chars().any(char::is_alphanumeric))
                    .map(|t| (t.surface.to_lowercase(), t.pos.clone()))
                    .collect()
            } else {
                kept
            }
        }
    };
    let negated = pq_negated(pq, lex);
    match words.iter().position(|(_, pos)| is_noun(pos)) {
        Some(i) => Tuple {
            p: vec![words[i].0.clone()],
            r: words
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (w, _))| w.clone())
                .collect(),
            s: Vec::new(),
            negated,
        },
        None => Tuple {
            p: words.into_iter().map(|(w, _)| w).collect(),
            r: Vec::new(),
            s: Vec::new(),
            negated,
        },
    }
}
