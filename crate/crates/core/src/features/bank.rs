use std::io::{BufRead, Write};
use std::path::Path;

use super::gmm::{fit_gmm, Gmm};
use super::kmeans::{kmeans_restarts, nearest};
use crate::alignment::Alignment;
use crate::provenance::Provenance;
use crate::scene::{Corpus, DEPTHS};
use crate::{seed, Error, Result};

pub const ABSOLUTE_COMPONENTS: usize = 9;
pub const RELATIVE_COMPONENTS: usize = 24;
pub const POSE_CLUSTERS: usize = 7;
const POSE_ITERATIONS: usize = 100;
const POSE_RESTARTS: usize = 3;

/// Absolute-location mixtures (one per depth) and the relative-location
/// mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmBank {
    pub absolute: Vec<Gmm>,
    pub relative: Gmm,
}

/// Fits the location mixtures. Relative offsets come from the aligned P/S
/// pairs when alignments are given, from all object pairs otherwise; each
/// pair contributes both orderings.
pub fn fit_gmms(corpus: &Corpus, alignments: Option<&[(String, Alignment)]>, master_seed: u64) -> Result<GmmBank> {
    let mut by_depth: Vec<Vec<[f64; 2]>> = vec![Vec::new(); DEPTHS];
    for scene in corpus.scenes.values() {
        for o in &scene.objects {
            by_depth[o.depth as usize].push([o.x, o.y]);
        }
    }
    let mut offsets = Vec::new();
    let mut push_pair = |a: &crate::scene::ClipartObject, b: &crate::scene::ClipartObject| {
        offsets.push([b.x - a.x, b.y - a.y]);
        offsets.push([a.x - b.x, a.y - b.y]);
    };
    match alignments {
        Some(rows) => {
            for (qid, al) in rows {
                let (Some(p), Some(s)) = (al.p_object, al.s_object) else {
                    continue;
                };
                let Some(item) = corpus.item(qid) else { continue };
                let scene = corpus.scene_of(item);
                push_pair(&scene.objects[p], &scene.objects[s]);
            }
        }
        None => {
            for scene in corpus.scenes.values() {
                for i in 0..scene.objects.len() {
                    for j in i + 1..scene.objects.len() {
                        push_pair(&scene.objects[i], &scene.objects[j]);
                    }
                }
            }
        }
    }

    let mut absolute = Vec::with_capacity(DEPTHS);
    for (d, points) in by_depth.iter().enumerate() {
        if points.len() < ABSOLUTE_COMPONENTS {
            return Err(Error::InsufficientSamples(format!(
                "{} objects at depth {d}, need {ABSOLUTE_COMPONENTS}",
                points.len()
            )));
        }
        let mut rng = seed::derived_rng(master_seed, &format!("gmm/absolute/{d}"));
        absolute.push(fit_gmm(points, ABSOLUTE_COMPONENTS, &mut rng)?.gmm);
    }
    if offsets.len() < RELATIVE_COMPONENTS {
        return Err(Error::InsufficientSamples(format!(
            "{} relative offsets, need {RELATIVE_COMPONENTS}",
            offsets.len()
        )));
    }
    let mut rng = seed::derived_rng(master_seed, "gmm/relative");
    let relative = fit_gmm(&offsets, RELATIVE_COMPONENTS, &mut rng)?.gmm;
    Ok(GmmBank { absolute, relative })
}

fn write_gmm<W: Write>(out: &mut W, header: &str, g: &Gmm) -> std::io::Result<()> {
    writeln!(out, "{header} {}", g.components())?;
    for k in 0..g.components() {
        writeln!(
            out,
            "{:?} {:?} {:?} {:?} {:?}",
            g.weights[k], g.means[k][0], g.means[k][1], g.variances[k][0], g.variances[k][1]
        )?;
    }
    Ok(())
}

impl GmmBank {
    /// Plain text: a `absolute <depth> <k>` or `relative <k>` header per
    /// mixture, then one `weight mean_x mean_y var_x var_y` line per component.
    pub fn write<W: Write>(&self, out: &mut W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        for (d, g) in self.absolute.iter().enumerate() {
            write_gmm(out, &format!("absolute {d}"), g)?;
        }
        write_gmm(out, "relative", &self.relative)
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(n, l)| l.map(|l| (n + 1, l)).map_err(|e| Error::io(origin, e)))
            .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty() || l.starts_with('#')));
        let mut absolute = Vec::new();
        let mut relative = None;
        while let Some(row) = lines.next() {
            let (lineno, header) = row?;
            let f: Vec<&str> = header.split_whitespace().collect();
            let bad = |m: &str| Error::format(origin, lineno, m);
            let k: usize = f.last().and_then(|k| k.parse().ok()).ok_or_else(|| bad("bad mixture header"))?;
            let mut g = Gmm {
                weights: Vec::with_capacity(k),
                means: Vec::with_capacity(k),
                variances: Vec::with_capacity(k),
            };
            for _ in 0..k {
                let (ln, line) = lines.next().ok_or_else(|| bad("truncated mixture"))??;
                let v: Vec<f64> = line
                    .split_whitespace()
                    .map(|x| x.parse().map_err(|_| Error::format(origin, ln, "bad number")))
                    .collect::<Result<_>>()?;
                if v.len() != 5 {
                    return Err(Error::format(origin, ln, "expected 5 values"));
                }
                g.weights.push(v[0]);
                g.means.push([v[1], v[2]]);
                g.variances.push([v[3], v[4]]);
            }
            match f.first() {
                Some(&"absolute") if f.len() == 3 => absolute.push(g),
                Some(&"relative") if f.len() == 2 => relative = Some(g),
                _ => return Err(bad("unknown mixture header")),
            }
        }
        if absolute.len() != DEPTHS {
            return Err(Error::format(origin, 0, format!("expected {DEPTHS} absolute mixtures")));
        }
        Ok(GmmBank {
            absolute,
            relative: relative.ok_or_else(|| Error::format(origin, 0, "missing relative mixture"))?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), &path.display().to_string())
    }
}

/// Centroids of human pose vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseClusterBank {
    pub centroids: Vec<Vec<f64>>,
}

/// k-means (k = 7) over every human pose vector in the corpus.
pub fn fit_pose_clusters(corpus: &Corpus, master_seed: u64) -> Result<PoseClusterBank> {
    let poses: Vec<Vec<f64>> = corpus
        .scenes
        .values()
        .flat_map(|s| s.objects.iter().filter_map(|o| o.pose_vector()))
        .collect();
    PoseClusterBank::fit(&poses, master_seed)
}

impl PoseClusterBank {
    pub fn fit(poses: &[Vec<f64>], master_seed: u64) -> Result<Self> {
        if poses.len() < POSE_CLUSTERS {
            return Err(Error::InsufficientSamples(format!(
                "{} human poses, need {POSE_CLUSTERS}",
                poses.len()
            )));
        }
        let mut rng = seed::derived_rng(master_seed, "pose-clusters");
        let fit = kmeans_restarts(poses, POSE_CLUSTERS, POSE_ITERATIONS, POSE_RESTARTS, &mut rng);
        if fit.degenerate {
            log::warn!("fewer than {POSE_CLUSTERS} distinct poses; duplicate centroids");
        }
        Ok(PoseClusterBank {
            centroids: fit.centroids,
        })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn nearest(&self, pose: &[f64]) -> usize {
        nearest(&self.centroids, pose)
    }

    pub fn write<W: Write>(&self, out: &mut W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        for c in &self.centroids {
            let row: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut centroids: Vec<Vec<f64>> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::format(origin, n + 1, "bad number")))
                .collect::<Result<_>>()?;
            if centroids.first().is_some_and(|c| c.len() != row.len()) {
                return Err(Error::format(origin, n + 1, "centroid dimensions differ"));
            }
            centroids.push(row);
        }
        if centroids.is_empty() {
            return Err(Error::format(origin, 0, "no centroids"));
        }
        Ok(PoseClusterBank { centroids })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), &path.display().to_string())
    }
}
