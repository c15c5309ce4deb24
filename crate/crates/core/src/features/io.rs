use std::io::{BufRead, Write};
use std::path::Path;

use super::FeatureLayout;
use crate::provenance::Provenance;
use crate::{Error, Result};

const MAGIC: &str = "binvqa-features 1";

/// Feature rows keyed by question id, as stored in a features file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub mode: String,
    pub layout: FeatureLayout,
    pub question_ids: Vec<String>,
    /// Row-major, `question_ids.len() x layout.width()`.
    pub rows: Vec<Vec<f32>>,
}

impl FeatureMatrix {
    pub fn row(&self, question_id: &str) -> Option<&[f32]> {
        self.question_ids
            .iter()
            .position(|q| q == question_id)
            .map(|i| self.rows[i].as_slice())
    }
}

/// Text header (provenance, mode, block widths, row ids, `end`) followed
/// by the rows as little-endian f32.
pub fn write_features<W: Write>(out: &mut W, m: &FeatureMatrix, provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "mode {}", m.mode)?;
    for (name, w) in &m.layout.blocks {
        writeln!(out, "block {name} {w}")?;
    }
    for q in &m.question_ids {
        writeln!(out, "row {q}")?;
    }
    writeln!(out, "end")?;
    let mut buf = Vec::with_capacity(m.layout.width() * 4);
    for row in &m.rows {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_features<R: BufRead>(mut reader: R, origin: &str) -> Result<FeatureMatrix> {
    let mut mode = None;
    let mut blocks = Vec::new();
    let mut question_ids = Vec::new();
    let mut seen_magic = false;
    let mut lineno = 0;
    loop {
        let mut line = String::new();
        lineno += 1;
        if reader.read_line(&mut line).map_err(|e| Error::io(origin, e))? == 0 {
            return Err(Error::format(origin, lineno, "header not terminated by `end`"));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line.starts_with('#') {
            continue;
        }
        if !seen_magic {
            if line != MAGIC {
                return Err(Error::format(origin, lineno, "not a features file"));
            }
            seen_magic = true;
            continue;
        }
        if line == "end" {
            break;
        }
        let mut f = line.split(' ');
        match (f.next(), f.next(), f.next(), f.next()) {
            (Some("mode"), Some(m), None, _) => mode = Some(m.to_string()),
            (Some("block"), Some(name), Some(w), None) => {
                let w = w.parse().map_err(|_| Error::format(origin, lineno, "bad block width"))?;
                blocks.push((name.to_string(), w));
            }
            (Some("row"), Some(q), None, _) => question_ids.push(q.to_string()),
            _ => return Err(Error::format(origin, lineno, format!("unexpected header line `{line}`"))),
        }
    }
    let layout = FeatureLayout { blocks };
    let width = layout.width();
    let mut rows = Vec::with_capacity(question_ids.len());
    let mut buf = vec![0u8; width * 4];
    for q in &question_ids {
        reader
            .read_exact(&mut buf)
            .map_err(|_| Error::format(origin, lineno, format!("truncated data at row {q}")))?;
        rows.push(
            buf.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
    }
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| Error::io(origin, e))? != 0 {
        return Err(Error::format(origin, lineno, "trailing bytes after last row"));
    }
    Ok(FeatureMatrix {
        mode: mode.ok_or_else(|| Error::format(origin, lineno, "missing mode"))?,
        layout,
        question_ids,
        rows,
    })
}

pub fn read_features_file(path: &Path) -> Result<FeatureMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(std::io::BufReader::new(f), &path.display().to_string())
}
