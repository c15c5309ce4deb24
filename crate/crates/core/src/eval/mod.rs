//! Consensus VQA accuracy, complementary-pair accuracy and balance audits.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::question_prefix;
use crate::scene::{Answer, Corpus, QaItem, ANSWERS_PER_QUESTION};
use crate::{Error, Result};

/// Predicted answer string per question id.
pub type Predictions = BTreeMap<String, String>;

/// Lowercases, strips everything but letters, digits and whitespace, and
/// collapses runs of whitespace.
pub fn normalize_answer(s: &str) -> String {
    let kept: String = s
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Consensus score `min(#matching humans / 3, 1)`.
pub fn vqa_accuracy<S: AsRef<str>>(prediction: &str, human_answers: &[S]) -> Result<f64> {
    if human_answers.len() != ANSWERS_PER_QUESTION {
        return Err(Error::AnswerCount {
            question_id: String::new(),
            found: human_answers.len(),
        });
    }
    let pred = normalize_answer(prediction);
    let matches = human_answers
        .iter()
        .filter(|a| normalize_answer(a.as_ref()) == pred)
        .count();
    Ok((matches as f64 / 3.0).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub items: usize,
    /// Mean VQA accuracy in points (0 to 100).
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixStats {
    pub prefix: String,
    pub items: usize,
    pub yes: usize,
    pub no: usize,
    /// Share of the more frequent answer.
    pub majority_share: f64,
    /// Answer entropy in bits.
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceStats {
    pub items: usize,
    /// Fraction of items without a complement link.
    pub unpaired_fraction: f64,
    pub linked_pairs: usize,
    /// Among linked pairs, the fraction whose majority answers agree.
    /// Absent when there are no linked pairs.
    pub non_opposite_fraction: Option<f64>,
    pub yes_fraction: f64,
    pub no_fraction: f64,
    /// Per 4-token question prefix, sorted by prefix.
    pub prefixes: Vec<PrefixStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub items: usize,
    /// Mean VQA accuracy in points (0 to 100).
    pub accuracy: f64,
    /// Keyed by the majority human answer.
    pub per_answer: BTreeMap<String, ClassStats>,
    /// Fraction of qualifying pairs with both members right; absent without
    /// qualifying pairs.
    pub pair_accuracy: Option<f64>,
    pub qualifying_pairs: usize,
    pub balance: BalanceStats,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width human-readable summary.
    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<24}{:>10}\n", "items", self.items));
        s.push_str(&format!("{:<24}{:>10.2}\n", "vqa accuracy", self.accuracy));
        for (answer, c) in &self.per_answer {
            s.push_str(&format!(
                "{:<24}{:>10.2}  (n={})\n",
                format!("  answer {answer}"),
                c.accuracy,
                c.items
            ));
        }
        match self.pair_accuracy {
            Some(p) => s.push_str(&format!(
                "{:<24}{:>10.2}  (pairs={})\n",
                "pair accuracy",
                100.0 * p,
                self.qualifying_pairs
            )),
            None => s.push_str(&format!("{:<24}{:>10}\n", "pair accuracy", "n/a")),
        }
        s.push_str(&format!("{:<24}{:>10.4}\n", "unpaired fraction", self.balance.unpaired_fraction));
        s.push_str(&format!("{:<24}{:>10.4}\n", "yes fraction", self.balance.yes_fraction));
        s
    }
}

/// Scores predictions against the corpus items.
pub fn evaluate(predictions: &Predictions, corpus: &Corpus) -> Result<EvalReport> {
    let missing: Vec<String> = corpus
        .items
        .iter()
        .filter(|i| !predictions.contains_key(&i.question_id))
        .map(|i| i.question_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let mut total = 0.0;
    let mut classes: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for item in &corpus.items {
        let score = vqa_accuracy(&predictions[&item.question_id], &item.human_answers).map_err(|_| {
            Error::AnswerCount {
                question_id: item.question_id.clone(),
                found: item.human_answers.len(),
            }
        })?;
        total += score;
        let e = classes.entry(item.majority_answer().as_str().to_string()).or_default();
        e.0 += 1;
        e.1 += score;
    }
    let n = corpus.items.len();
    let (pair_accuracy, qualifying_pairs) = pair_stats(predictions, corpus);
    Ok(EvalReport {
        items: n,
        accuracy: if n == 0 { 0.0 } else { 100.0 * total / n as f64 },
        per_answer: classes
            .into_iter()
            .map(|(k, (count, sum))| {
                (
                    k,
                    ClassStats {
                        items: count,
                        accuracy: 100.0 * sum / count as f64,
                    },
                )
            })
            .collect(),
        pair_accuracy,
        qualifying_pairs,
        balance: balance_audit(corpus),
    })
}

/// Linked pairs, each once, in corpus order of the first member.
fn linked_pairs(corpus: &Corpus) -> Vec<(&QaItem, &QaItem)> {
    let by_id: BTreeMap<&str, &QaItem> = corpus.items.iter().map(|i| (i.question_id.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for item in &corpus.items {
        let Some(other) = item.complement_of.as_deref().and_then(|id| by_id.get(id)) else {
            continue;
        };
        if seen.contains(item.question_id.as_str()) {
            continue;
        }
        seen.insert(item.question_id.as_str());
        seen.insert(other.question_id.as_str());
        pairs.push((item, *other));
    }
    pairs
}

fn pair_stats(predictions: &Predictions, corpus: &Corpus) -> (Option<f64>, usize) {
    let correct = |item: &QaItem| {
        predictions
            .get(&item.question_id)
            .is_some_and(|p| normalize_answer(p) == item.majority_answer().as_str())
    };
    let qualifying: Vec<_> = linked_pairs(corpus)
        .into_iter()
        .filter(|(a, b)| a.majority_answer() != b.majority_answer())
        .collect();
    if qualifying.is_empty() {
        return (None, 0);
    }
    let both = qualifying.iter().filter(|(a, b)| correct(a) && correct(b)).count();
    (Some(both as f64 / qualifying.len() as f64), qualifying.len())
}

/// Fraction of qualifying complementary pairs (opposite majority answers)
/// with both members predicted correctly. `None` without qualifying pairs.
pub fn pair_accuracy(predictions: &Predictions, corpus: &Corpus) -> Option<f64> {
    pair_stats(predictions, corpus).0
}

fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

pub fn balance_audit(corpus: &Corpus) -> BalanceStats {
    let n = corpus.items.len();
    let pairs = linked_pairs(corpus);
    let linked_items = corpus
        .items
        .iter()
        .filter(|i| {
            i.complement_of
                .as_deref()
                .is_some_and(|c| corpus.items.iter().any(|o| o.question_id == c))
        })
        .count();
    let non_opposite = pairs.iter().filter(|(a, b)| a.majority_answer() == b.majority_answer()).count();
    let yes = corpus.items.iter().filter(|i| i.majority_answer() == Answer::Yes).count();

    let mut prefixes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for item in &corpus.items {
        let e = prefixes.entry(question_prefix(&item.question_text, 4)).or_default();
        match item.majority_answer() {
            Answer::Yes => e.0 += 1,
            Answer::No => e.1 += 1,
        }
    }
    let frac = |a: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    BalanceStats {
        items: n,
        unpaired_fraction: frac(n - linked_items),
        linked_pairs: pairs.len(),
        non_opposite_fraction: (!pairs.is_empty()).then(|| non_opposite as f64 / pairs.len() as f64),
        yes_fraction: frac(yes),
        no_fraction: frac(n - yes),
        prefixes: prefixes
            .into_iter()
            .map(|(prefix, (y, no))| PrefixStats {
                prefix,
                items: y + no,
                yes: y,
                no,
                majority_share: y.max(no) as f64 / (y + no) as f64,
                entropy: entropy_bits(&[y, no]),
            })
            .collect(),
    }
}

pub fn read_predictions<R: BufRead>(reader: R, origin: &str) -> Result<Predictions> {
    let mut out = Predictions::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, answer) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(origin, n + 1, "expected question_id<TAB>answer"))?;
        out.insert(id.to_string(), answer.to_string());
    }
    Ok(out)
}

pub fn read_predictions_file(path: &Path) -> Result<Predictions> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn write_predictions<W: Write>(out: &mut W, predictions: &Predictions) -> std::io::Result<()> {
    for (id, answer) in predictions {
        writeln!(out, "{id}\t{answer}")?;
    }
    Ok(())
}
