use super::{is_noun, is_pronoun, Lexicons, ParsedQuestion, Summary, Word};
use crate::{Error, Result};

/// Cuts a parsed question down to its summary: drops everything before the
/// subject anchor, then every word whose dependency label is not kept.
pub fn summarize(pq: &ParsedQuestion, lex: &Lexicons) -> Result<Summary> {
    let anchor = find_anchor(pq, lex).ok_or_else(|| Error::Unanchorable(pq.text()))?;
    let words = pq.tokens()[anchor..]
        .iter()
        .enumerate()
        .filter(|(_, t)| lex.keeps_label(t.base_label()))
        .map(|(offset, t)| Word {
            index: anchor + offset,
            text: t.surface.to_lowercase(),
            pos: t.pos.clone(),
            dep: t.base_label().to_string(),
        })
        .collect();
    Ok(Summary { words })
}

fn usable(pq: &ParsedQuestion, lex: &Lexicons, i: usize) -> bool {
    let t = &pq.tokens()[i];
    is_noun(&t.pos) || (is_pronoun(&t.pos) && !lex.is_stop_pronoun(&t.surface))
}

fn find_anchor(pq: &ParsedQuestion, lex: &Lexicons) -> Option<usize> {
    let subject = pq
        .tokens()
        .iter()
        .position(|t| matches!(t.base_label(), "nsubj" | "nsubjpass"));
    match subject {
        Some(i) if usable(pq, lex, i) => Some(i),
        // Subject is neither a noun nor a kept pronoun: take the nearest
        // usable word, preferring the earlier one on ties.
        Some(i) => (1..pq.len()).find_map(|d| {
            [i.checked_sub(d), Some(i + d)]
                .into_iter()
                .flatten()
                .find(|&j| j < pq.len() && usable(pq, lex, j))
        }),
        None => (0..pq.len()).find(|&j| usable(pq, lex, j)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::testing::parse;

    fn summary(spec: &str) -> String {
        summarize(&parse(spec), &Lexicons::default()).unwrap().to_string()
    }

    #[test]
    fn girl_pushing_cat() {
        // The tagger labels "girl" PRP in the worked example; NN must behave the same.
        for tag in ["PRP", "NN"] {
            let spec = format!(
                "Is/VBZ/aux/4 the/DT/det/3 girl/{tag}/nsubj/4 pushing/VBG/root/0 the/DT/det/6 \
                 cat/NN/dobj/4 off/IN/case/9 the/DT/det/9 stool/NN/nmod/4 ?/./punct/4"
            );
            assert_eq!(summary(&spec), "girl pushing cat off stool");
        }
    }

    #[test]
    fn woman_on_couch() {
        let s = summary(
            "Is/VBZ/aux/6 the/DT/det/3 woman/NN/nsubj/6 on/IN/case/5 couch/NN/nmod/3 \
             petting/VBG/root/0 the/DT/det/8 dog/NN/dobj/6 ?/./punct/6",
        );
        assert_eq!(s, "woman on couch petting dog");
    }

    #[test]
    fn leaves_on_trees_without_subject() {
        let s = summary(
            "Are/VBP/cop/3 there/EX/expl/3 leaves/NNS/root/0 on/IN/case/6 the/DT/det/6 \
             trees/NNS/nmod/3 ?/./punct/3",
        );
        assert_eq!(s, "leaves on trees");
    }

    #[test]
    fn children_having_a_good_time() {
        let s = summary(
            "Are/VBP/aux/4 the/DT/det/3 children/NNS/nsubj/4 having/VBG/root/0 a/DT/det/7 \
             good/JJ/amod/7 time/NN/dobj/4",
        );
        assert_eq!(s, "children having good time");
    }

    #[test]
    fn kept_pronoun_anchors() {
        let s = summary("Is/VBZ/aux/3 she/PRP/nsubj/3 playing/VBG/root/0 football/NN/dobj/3");
        assert_eq!(s, "she playing football");
    }

    #[test]
    fn stop_pronoun_uses_nearest_noun() {
        let s = summary("Is/VBZ/aux/3 it/PRP/nsubj/3 night/NN/compound/4 time/NN/root/0");
        assert_eq!(s, "night time");
    }

    #[test]
    fn unanchorable() {
        let pq = parse("Is/VBZ/aux/3 it/PRP/nsubj/3 raining/VBG/root/0");
        assert!(matches!(
            summarize(&pq, &Lexicons::default()),
            Err(Error::Unanchorable(_))
        ));
    }

    #[test]
    fn summary_preserves_order() {
        let pq = parse(
            "Is/VBZ/aux/6 the/DT/det/3 woman/NN/nsubj/6 on/IN/case/5 couch/NN/nmod/3 \
             petting/VBG/root/0 the/DT/det/8 dog/NN/dobj/6",
        );
        let s = summarize(&pq, &Lexicons::default()).unwrap();
        assert!(s.words.windows(2).all(|w| w[0].index < w[1].index));
    }
}
