//! Reference systems that never look at the scene's content: the answer
//! prior, the question-prefix n-gram table and blind network variants.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::models::{FeatureMode, Variant, VerifierModel};
use crate::provenance::Provenance;
use crate::scene::{Answer, QaItem};
use crate::{Error, Result};

pub const NGRAM_ORDER: usize = 4;

/// Lowercased tokens after dropping every character that is neither
/// alphanumeric nor whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_lowercase).collect()
}

/// The first `min(n, len)` tokens, space joined.
pub fn question_prefix(text: &str, n: usize) -> String {
    let toks = tokenize(text);
    toks[..toks.len().min(n)].join(" ")
}

fn majority(yes: usize, no: usize) -> Answer {
    if no > yes {
        Answer::No
    } else {
        Answer::Yes
    }
}

/// Most common majority answer over the training items; ties answer yes.
pub fn prior_baseline(items: &[QaItem]) -> Result<Answer> {
    if items.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let yes = items.iter().filter(|i| i.majority_answer() == Answer::Yes).count();
    Ok(majority(yes, items.len() - yes))
}

/// Majority answer per question prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramTable {
    pub n: usize,
    /// prefix → (answer, number of training items giving that answer)
    pub entries: BTreeMap<String, (Answer, usize)>,
}

pub fn fit_ngram(items: &[QaItem], n: usize) -> Result<NgramTable> {
    if items.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for item in items {
        let c = counts.entry(question_prefix(&item.question_text, n)).or_default();
        match item.majority_answer() {
            Answer::Yes => c.0 += 1,
            Answer::No => c.1 += 1,
        }
    }
    let entries = counts
        .into_iter()
        .map(|(k, (y, no))| {
            let a = majority(y, no);
            (k, (a, if a == Answer::Yes { y } else { no }))
        })
        .collect();
    Ok(NgramTable { n, entries })
}

impl NgramTable {
    /// Stored answer for the question's prefix, "yes" when unseen.
    pub fn predict(&self, question: &str) -> Answer {
        self.entries
            .get(&question_prefix(question, self.n))
            .map_or(Answer::Yes, |e| e.0)
    }

    /// `prefix<TAB>answer<TAB>count` lines after an `# n=<n>` line.
    pub fn write<W: Write>(&self, out: &mut W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        writeln!(out, "# n={}", self.n)?;
        for (k, (a, c)) in &self.entries {
            writeln!(out, "{k}\t{}\t{c}", a.as_str())?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut n = NGRAM_ORDER;
        let mut entries = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if let Some(v) = line.strip_prefix("# n=") {
                n = v.trim().parse().map_err(|_| Error::format(origin, i + 1, "bad order"))?;
                continue;
            }
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let [k, a, c] = f.as_slice() else {
                return Err(Error::format(origin, i + 1, "expected prefix, answer and count"));
            };
            let a = Answer::parse(a).ok_or_else(|| Error::format(origin, i + 1, format!("bad answer `{a}`")))?;
            let c = c.parse().map_err(|_| Error::format(origin, i + 1, "bad count"))?;
            entries.insert(k.to_string(), (a, c));
        }
        Ok(NgramTable { n, entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), &path.display().to_string())
    }
}

/// A verifier without an image branch; the language embedding feeds the
/// head directly.
pub fn blind_variant(variant: Variant, embed_dim: usize, hidden: usize, seed: u64) -> VerifierModel {
    VerifierModel::new(variant, FeatureMode::None, embed_dim, hidden, 0, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(q: &str, answer: &str, id: usize) -> QaItem {
        QaItem {
            question_id: format!("q{id}"),
            scene_id: "s".into(),
            question_text: q.into(),
            human_answers: vec![answer.to_string(); 10],
            complement_of: None,
        }
    }

    #[test]
    fn prefixes() {
        assert_eq!(question_prefix("Is the dog happy today?", 4), "is the dog happy");
        assert_eq!(question_prefix("Is it day?", 4), "is it day");
        assert_eq!(question_prefix("Isn't the cat, asleep", 4), "isnt the cat asleep");
    }

    #[test]
    fn prior() {
        let mk = |yes: usize, no: usize| -> Vec<QaItem> {
            (0..yes)
                .map(|i| item("q", "yes", i))
                .chain((0..no).map(|i| item("q", "no", 100 + i)))
                .collect()
        };
        assert_eq!(prior_baseline(&mk(6, 4)).unwrap(), Answer::Yes);
        assert_eq!(prior_baseline(&mk(4, 6)).unwrap(), Answer::No);
        assert_eq!(prior_baseline(&mk(5, 5)).unwrap(), Answer::Yes);
        assert!(prior_baseline(&[]).is_err());
    }

    #[test]
    fn ngram_table() {
        let mut items: Vec<QaItem> = (0..3).map(|i| item("Is the dog happy?", "yes", i)).collect();
        items.push(item("is the dog happy", "no", 3));
        items.push(item("Is it day?", "no", 4));
        items.push(item("Are the cats asleep now", "no", 5));
        items.push(item("Are the cats asleep here", "yes", 6));
        items.push(item("Are the cats asleep there", "no", 7));
        items.push(item("Are the cats asleep again", "yes", 8));
        let t = fit_ngram(&items, 4).unwrap();
        assert_eq!(t.entries["is the dog happy"], (Answer::Yes, 3));
        assert_eq!(t.entries["is it day"], (Answer::No, 1));
        assert_eq!(t.entries["are the cats asleep"], (Answer::Yes, 2));
        assert_eq!(t.predict("Is it day"), Answer::No);
        assert_eq!(t.predict("Is the dog happy at all?"), Answer::Yes);
        assert_eq!(t.predict("Where is the moon"), Answer::Yes);

        let mut buf = Vec::new();
        t.write(&mut buf, None).unwrap();
        assert_eq!(NgramTable::read(buf.as_slice(), "mem").unwrap(), t);
    }

    #[test]
    fn ngram_at_least_prior_on_training_set() {
        use proptest::prelude::*;
        proptest!(|(rows in prop::collection::vec((0usize..4, any::<bool>()), 1..40))| {
            let texts = ["is the dog happy", "is there a cat", "are the kids playing", "is it"];
            let items: Vec<QaItem> = rows
                .iter()
                .enumerate()
                .map(|(i, &(t, y))| item(texts[t], if y { "yes" } else { "no" }, i))
                .collect();
            let acc = |pred: &dyn Fn(&QaItem) -> Answer| {
                items.iter().filter(|i| pred(i) == i.majority_answer()).count()
            };
            let prior = prior_baseline(&items).unwrap();
            let table = fit_ngram(&items, 4).unwrap();
            prop_assert!(acc(&|i| table.predict(&i.question_text)) >= acc(&|_| prior));
        });
    }
}
