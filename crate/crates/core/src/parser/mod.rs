//! Rule-based reduction of a binary question to a `<P, R, S>` tuple.
//!
//! The question is cleaned ([`preprocess`]), its dependency parse is cut down
//! to a [`Summary`] ([`summarize`]), and the summary is split into primary,
//! relation and secondary arguments ([`extract_tuple`]). Parses come from a
//! CoNLL-like sidecar file ([`conll`]); no statistical parser runs in-process.

pub mod conll;
mod lexicon;
mod negation;
mod preprocess;
mod summarize;
mod tuple;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use lexicon::Lexicons;
pub use negation::detect_negation;
pub use preprocess::{preprocess, question_tokens};
pub use summarize::summarize;
pub use tuple::{extract_tuple, fallback_tuple};

/// One token of a dependency-parsed question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: Option<String>,
    pub pos: String,
    /// Dependency label, disambiguated (`nsubj`, `nsubj-1`, ...).
    pub dep: String,
    /// 1-based index of the head token, 0 for the root.
    pub head: usize,
}

impl Token {
    pub fn new(surface: &str, pos: &str, dep: &str, head: usize) -> Self {
        Token {
            surface: surface.to_string(),
            lemma: None,
            pos: pos.to_string(),
            dep: dep.to_string(),
            head,
        }
    }

    /// Label without the duplicate suffix or subtype (`nmod:poss-1` -> `nmod`).
    pub fn base_label(&self) -> &str {
        base_label(&self.dep)
    }
}

pub(crate) fn base_label(label: &str) -> &str {
    let label = match label.rsplit_once('-') {
        Some((head, tail)) if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => label,
    };
    label.split(':').next().unwrap_or(label)
}

pub(crate) fn is_noun(pos: &str) -> bool {
    pos.starts_with("NN")
}

pub(crate) fn is_pronoun(pos: &str) -> bool {
    pos == "PRP"
}

pub(crate) fn is_adjective(pos: &str) -> bool {
    pos.starts_with("JJ")
}

/// Token sequence of one question with POS tags and dependency labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuestion {
    tokens: Vec<Token>,
}

impl ParsedQuestion {
    /// Builds a parse, renaming repeated labels to `label-1`, `label-2`, ...
    /// in token order. Exactly one token must be labeled `root`.
    pub fn new(mut tokens: Vec<Token>) -> Result<Self> {
        let roots = tokens.iter().filter(|t| t.base_label() == "root").count();
        if roots != 1 {
            return Err(Error::Format {
                path: "<parse>".into(),
                line: 0,
                message: format!("parse has {roots} root tokens, expected exactly one"),
            });
        }
        let mut seen: std::collections::HashMap<String, usize> = Default::default();
        for t in &mut tokens {
            let base = base_label(&t.dep).to_string();
            let full = t.dep.split('-').next().unwrap_or(&t.dep).to_string();
            let n = seen.entry(base).or_insert(0);
            if *n > 0 {
                t.dep = format!("{full}-{n}");
            } else {
                t.dep = full;
            }
            *n += 1;
        }
        Ok(ParsedQuestion { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The question text as the parser saw it.
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A summary word: a question token that survived summarization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    /// Position of the token in the parse (0-based).
    pub index: usize,
    /// Lowercased surface form.
    pub text: String,
    pub pos: String,
    /// Base dependency label.
    pub dep: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub words: Vec<Word>,
}

impl Summary {
    pub fn texts(&self) -> Vec<String> {
        self.words.iter().map(|w| w.text.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.texts().join(" "))
    }
}

/// `<P, R, S>` summary of a question. P is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tuple {
    pub p: Vec<String>,
    pub r: Vec<String>,
    pub s: Vec<String>,
    pub negated: bool,
}

impl Tuple {
    pub fn new(p: &[&str], r: &[&str], s: &[&str]) -> Self {
        let own = |v: &[&str]| v.iter().map(|w| w.to_string()).collect();
        Tuple {
            p: own(p),
            r: own(r),
            s: own(s),
            negated: false,
        }
    }

    pub fn p_text(&self) -> String {
        self.p.join(" ")
    }

    pub fn r_text(&self) -> String {
        self.r.join(" ")
    }

    pub fn s_text(&self) -> String {
        self.s.join(" ")
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.p_text(), self.r_text(), self.s_text())
    }
}

/// Everything the parser derives from one question.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub preprocessed: String,
    pub summary: Option<Summary>,
    pub tuple: Tuple,
    /// True when the tuple came from the never-fail fallback rule.
    pub fallback: bool,
}

/// Full parse of one question: summary and tuple, falling back to a
/// first-noun tuple when the rules cannot anchor the question.
pub fn parse_question(raw: &str, pq: &ParsedQuestion, lex: &Lexicons) -> Result<ParseOutcome> {
    let preprocessed = preprocess(raw, lex)?;
    let negated = detect_negation(raw, lex);
    let summary = summarize(pq, lex).ok();
    let (mut tuple, fallback) = match &summary {
        Some(s) => match extract_tuple(s, pq, lex) {
            Ok(t) => (t, false),
            Err(_) => (fallback_tuple(pq, Some(s), lex), true),
        },
        None => (fallback_tuple(pq, None, lex), true),
    };
    tuple.negated = negated;
    Ok(ParseOutcome {
        preprocessed,
        summary,
        tuple,
        fallback,
    })
}

/// `question_id<TAB>P<TAB>R<TAB>S<TAB>negated`, one tuple per line.
pub fn write_tuples<W: std::io::Write>(
    out: &mut W,
    rows: &[(String, Tuple)],
    provenance: Option<&crate::provenance::Provenance>,
) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    for (qid, t) in rows {
        writeln!(out, "{qid}\t{}\t{}\t{}\t{}", t.p_text(), t.r_text(), t.s_text(), t.negated)?;
    }
    Ok(())
}

pub fn read_tuples<R: std::io::BufRead>(reader: R, origin: &str) -> Result<Vec<(String, Tuple)>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [qid, p, r, s, neg] = f.as_slice() else {
            return Err(Error::format(origin, n + 1, "expected 5 tab-separated fields"));
        };
        let words = |x: &str| x.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let negated = neg
            .parse()
            .map_err(|_| Error::format(origin, n + 1, format!("bad negation flag `{neg}`")))?;
        let p = words(p);
        if p.is_empty() {
            return Err(Error::format(origin, n + 1, "empty primary argument"));
        }
        rows.push((
            qid.to_string(),
            Tuple {
                p,
                r: words(r),
                s: words(s),
                negated,
            },
        ));
    }
    Ok(rows)
}

pub fn load_tuples(path: &std::path::Path) -> Result<Vec<(String, Tuple)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tuples(std::io::BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Builds a parse from `word/POS/label/head` items separated by spaces.
    pub fn parse(spec: &str) -> ParsedQuestion {
        let tokens = spec
            .split_whitespace()
            .map(|item| {
                let f: Vec<&str> = item.split('/').collect();
                Token::new(f[0], f[1], f[2], f[3].parse().unwrap())
            })
            .collect();
        ParsedQuestion::new(tokens).unwrap()
    }
}
