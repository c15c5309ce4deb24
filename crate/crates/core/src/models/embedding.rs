use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::parser::Tuple;
use crate::{Error, Result};

/// Word vectors keyed by lowercased token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` rows. Tokens are case-folded;
    /// the first row of a duplicate wins.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        for (token, v) in rows {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "embedding for `{token}` has {} values, expected {dim}",
                    v.len()
                )));
            }
            let key = token.to_lowercase();
            if vectors.contains_key(&key) {
                log::warn!("duplicate embedding for `{key}`; keeping the first");
                continue;
            }
            vectors.insert(key, v);
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    /// One token per line followed by its values, space separated. The
    /// dimension is taken from the first line.
    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut dim = None;
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-empty line").to_string();
            let v: Vec<f64> = fields
                .map(|x| x.parse().map_err(|_| Error::format(origin, n + 1, format!("bad value `{x}`"))))
                .collect::<Result<_>>()?;
            let d = *dim.get_or_insert(v.len());
            if v.len() != d || d == 0 {
                return Err(Error::format(
                    origin,
                    n + 1,
                    format!("embedding has {} values, expected {d}", v.len()),
                ));
            }
            rows.push((token, v));
        }
        let Some(dim) = dim else {
            return Err(Error::format(origin, 0, "empty embeddings file"));
        };
        Self::from_rows(dim, rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), &path.display().to_string())
    }

    pub fn write<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (token, v) in &self.vectors {
            write!(out, "{token}")?;
            for x in v {
                write!(out, " {x:?}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Mean of the known words' vectors; zeros when none is known.
    pub fn mean(&self, words: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut n = 0;
        for v in words.iter().filter_map(|w| self.get(w)) {
            n += 1;
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        if n > 0 {
            out.iter_mut().for_each(|o| *o /= n as f64);
        }
        out
    }

    /// One vector per token; unknown tokens map to zeros.
    pub fn sequence(&self, tokens: &[String]) -> Vec<Vec<f64>> {
        tokens
            .iter()
            .map(|t| self.get(t).map_or_else(|| vec![0.0; self.dim], <[f64]>::to_vec))
            .collect()
    }
}

/// `mean(P) ++ mean(R) ++ mean(S)`.
pub fn embed_tuple(tuple: &Tuple, table: &EmbeddingTable) -> Vec<f64> {
    let mut v = table.mean(&tuple.p);
    v.extend(table.mean(&tuple.r));
    v.extend(table.mean(&tuple.s));
    v
}
