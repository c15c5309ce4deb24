use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use super::net::{FeatureMode, Variant, VerifierModel};
use crate::provenance::Provenance;
use crate::{Error, Result};

const MAGIC: &str = "binvqa-model 1";

/// Writes one model: a text header naming the variant, widths and tensor
/// shapes, `end`, then every tensor as little-endian f64 in header order.
/// Several models may follow each other in one file.
pub fn write_model<W: Write>(out: &mut W, model: &VerifierModel, provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "variant {}", model.variant.as_str())?;
    writeln!(out, "features {}", model.features.as_str())?;
    writeln!(out, "embed_dim {}", model.embed_dim)?;
    writeln!(out, "hidden {}", model.hidden)?;
    writeln!(out, "image_dim {}", model.image_dim)?;
    writeln!(out, "dropout {:?}", model.dropout)?;
    let tensors = model.params.tensors();
    for (name, t) in &tensors {
        writeln!(out, "tensor {name} {} {}", t.nrows(), t.ncols())?;
    }
    writeln!(out, "end")?;
    for (_, t) in tensors {
        let mut buf = Vec::with_capacity(t.len() * 8);
        for x in t.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_line<R: BufRead>(reader: &mut R, origin: &str, lineno: &mut usize) -> Result<Option<String>> {
    let mut line = String::new();
    *lineno += 1;
    if reader.read_line(&mut line).map_err(|e| Error::io(origin, e))? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
}

/// Reads every model in a checkpoint, in file order.
pub fn read_models<R: BufRead>(mut reader: R, origin: &str) -> Result<Vec<VerifierModel>> {
    let mut models = Vec::new();
    let mut lineno = 0;
    loop {
        let Some(first) = read_line(&mut reader, origin, &mut lineno)? else {
            break;
        };
        if first.starts_with('#') || first.is_empty() {
            continue;
        }
        if first != MAGIC {
            return Err(Error::format(origin, lineno, "not a model checkpoint"));
        }
        let mut fields = std::collections::BTreeMap::new();
        let mut shapes = Vec::new();
        loop {
            let line = read_line(&mut reader, origin, &mut lineno)?
                .ok_or_else(|| Error::format(origin, lineno, "header not terminated by `end`"))?;
            if line == "end" {
                break;
            }
            let f: Vec<&str> = line.split(' ').collect();
            match f.as_slice() {
                ["tensor", name, r, c] => {
                    let dim = |x: &str| x.parse::<usize>().map_err(|_| Error::format(origin, lineno, "bad tensor shape"));
                    shapes.push((name.to_string(), dim(r)?, dim(c)?));
                }
                [key, value] => {
                    fields.insert(key.to_string(), value.to_string());
                }
                _ => return Err(Error::format(origin, lineno, format!("unexpected header line `{line}`"))),
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::format(origin, lineno, format!("missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(origin, lineno, format!("bad `{k}`")))
        };
        let variant = Variant::parse(&get("variant")?).ok_or_else(|| Error::format(origin, lineno, "unknown variant"))?;
        let features =
            FeatureMode::parse(&get("features")?).ok_or_else(|| Error::format(origin, lineno, "unknown feature mode"))?;
        let mut model = VerifierModel::new(variant, features, num("embed_dim")?, num("hidden")?, num("image_dim")?, 0);
        model.dropout = get("dropout")?
            .parse()
            .map_err(|_| Error::format(origin, lineno, "bad `dropout`"))?;
        let mut tensors = model.params.tensors_mut();
        if tensors.len() != shapes.len() {
            return Err(Error::format(origin, lineno, "tensor list does not match the variant"));
        }
        for ((name, t), (sname, r, c)) in tensors.iter_mut().zip(&shapes) {
            if *name != sname || t.dim() != (*r, *c) {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!("tensor {sname} {r}x{c} does not match expected {name} {:?}", t.dim()),
                ));
            }
            let mut buf = vec![0u8; r * c * 8];
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::format(origin, lineno, format!("truncated tensor {sname}")))?;
            let vals: Vec<f64> = buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            **t = Array2::from_shape_vec((*r, *c), vals).expect("shape checked");
        }
        drop(tensors);
        models.push(model);
    }
    if models.is_empty() {
        return Err(Error::format(origin, lineno, "no models in checkpoint"));
    }
    Ok(models)
}

pub fn save_models(path: &Path, models: &[&VerifierModel], provenance: Option<&Provenance>) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for (i, m) in models.iter().enumerate() {
        write_model(&mut w, m, if i == 0 { provenance } else { None }).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_models(path: &Path) -> Result<Vec<VerifierModel>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_models(std::io::BufReader::new(f), &path.display().to_string())
}
