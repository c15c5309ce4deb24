//! CoNLL-like parse sidecar.
//!
//! One question per block, blocks separated by blank lines. Each token line is
//! `index<TAB>surface<TAB>pos<TAB>dep<TAB>head[<TAB>lemma]`. A block may carry
//! a `# question_id = ID` comment; blocks without one are matched to
//! questions by position. Other `#` lines are ignored.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{ParsedQuestion, Token};
use crate::{Error, Result};

/// One parsed block of a sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseBlock {
    pub question_id: Option<String>,
    pub parse: ParsedQuestion,
}

pub fn read_parses_file(path: &Path) -> Result<Vec<ParseBlock>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_parses(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn read_parses<R: BufRead>(reader: R, origin: &str) -> Result<Vec<ParseBlock>> {
    let mut blocks = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut qid: Option<String> = None;
    let mut start_line = 0;

    let mut flush = |tokens: &mut Vec<Token>, qid: &mut Option<String>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            *qid = None;
            return Ok(());
        }
        let parse = ParsedQuestion::new(std::mem::take(tokens)).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(origin, line, message),
            other => other,
        })?;
        blocks.push(ParseBlock {
            question_id: qid.take(),
            parse,
        });
        Ok(())
    };

    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(Path::new(origin), e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            flush(&mut tokens, &mut qid, start_line)?;
            continue;
        }
        if tokens.is_empty() && qid.is_none() {
            start_line = lineno;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "question_id" {
                    if !tokens.is_empty() {
                        return Err(Error::format(origin, lineno, "question_id comment inside a token block"));
                    }
                    qid = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(Error::format(
                origin,
                lineno,
                format!("expected 5 or 6 tab-separated fields, found {}", fields.len()),
            ));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("bad token index {:?}", fields[0])))?;
        if index != tokens.len() + 1 {
            return Err(Error::format(
                origin,
                lineno,
                format!("token index {index}, expected {}", tokens.len() + 1),
            ));
        }
        let head: usize = fields[4]
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("bad head index {:?}", fields[4])))?;
        let lemma = fields
            .get(5)
            .filter(|l| !l.is_empty() && **l != "_")
            .map(|l| l.to_string());
        tokens.push(Token {
            surface: fields[1].to_string(),
            lemma,
            pos: fields[2].to_string(),
            dep: fields[3].to_string(),
            head,
        });
    }
    flush(&mut tokens, &mut qid, start_line)?;

    for b in &blocks {
        let len = b.parse.len();
        if let Some(t) = b.parse.tokens().iter().find(|t| t.head > len) {
            return Err(Error::format(
                origin,
                0,
                format!("head index {} out of range in parse of {:?}", t.head, b.parse.text()),
            ));
        }
    }
    Ok(blocks)
}

pub fn write_parses<W: Write>(out: &mut W, blocks: &[ParseBlock]) -> std::io::Result<()> {
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        if let Some(id) = &b.question_id {
            writeln!(out, "# question_id = {id}")?;
        }
        for (k, t) in b.parse.tokens().iter().enumerate() {
            write!(out, "{}\t{}\t{}\t{}\t{}", k + 1, t.surface, t.pos, t.dep, t.head)?;
            if let Some(lemma) = &t.lemma {
                write!(out, "\t{lemma}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
