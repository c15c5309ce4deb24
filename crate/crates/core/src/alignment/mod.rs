//! Mutual-information association between P/S phrases and clipart
//! instances, and alignment of a tuple's arguments to scene objects.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::parser::{Lexicons, Tuple};
use crate::provenance::Provenance;
use crate::scene::{Corpus, Scene, SceneType, Vocabulary};
use crate::{seed, Error, Result};

/// Pseudo-count added to every cell of the 2x2 table.
pub const SMOOTHING: f64 = 0.5;
/// Phrases seen fewer times than this in a scene type are not tabulated.
pub const MIN_PHRASE_COUNT: usize = 2;
/// Scores at or below this count as no association.
pub const MIN_ALIGN_MI: f64 = 1e-3;

/// Smoothed mutual information in bits between a binary word indicator and
/// a binary object indicator, from the four joint counts.
pub fn mutual_information(n11: f64, n10: f64, n01: f64, n00: f64) -> Result<f64> {
    let n = n11 + n10 + n01 + n00;
    if n <= 0.0 || [n11, n10, n01, n00].iter().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::UndefinedMutualInformation);
    }
    let total = n + 4.0 * SMOOTHING;
    let p = [n11, n10, n01, n00].map(|c| (c + SMOOTHING) / total);
    let pw = [p[0] + p[1], p[2] + p[3]];
    let po = [p[0] + p[2], p[1] + p[3]];
    let mut mi = 0.0;
    for (k, joint) in p.iter().enumerate() {
        let (w, o) = (k / 2, k % 2);
        if *joint > 0.0 {
            mi += joint * (joint / (pw[w] * po[o])).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// True when the raw joint count exceeds its independence expectation.
/// Smoothed estimates would credit instances never seen with the phrase.
fn positively_correlated(n11: f64, n10: f64, n01: f64, n00: f64) -> bool {
    let n = n11 + n10 + n01 + n00;
    n11 * n > (n11 + n10) * (n11 + n01)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: usize,
    /// Gated MI: zero for negatively correlated pairs.
    pub mi: f64,
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

/// Per scene type, the MI of every tabulated phrase against every
/// admissible instance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentTable {
    pub phrases: BTreeMap<SceneType, BTreeMap<String, Vec<InstanceScore>>>,
    /// Items counted per scene type.
    pub totals: BTreeMap<SceneType, u64>,
}

impl AlignmentTable {
    pub fn scores(&self, scene_type: SceneType, phrase: &str) -> Option<&[InstanceScore]> {
        self.phrases.get(&scene_type)?.get(phrase).map(Vec::as_slice)
    }

    /// Highest-scoring instance for a phrase; ties go to the lowest id.
    pub fn best_instance(&self, scene_type: SceneType, phrase: &str) -> Option<&InstanceScore> {
        best(self.scores(scene_type, phrase)?.iter())
    }

    pub fn write<W: Write>(&self, out: &mut W, provenance: Option<&Provenance>) -> std::io::Result<()> {
        if let Some(p) = provenance {
            writeln!(out, "{}", p.comment_line())?;
        }
        for (st, total) in &self.totals {
            writeln!(out, "# total\t{st}\t{total}")?;
        }
        for (st, phrases) in &self.phrases {
            for (phrase, scores) in phrases {
                for s in scores {
                    writeln!(
                        out,
                        "{st}\t{phrase}\t{}\t{:?}\t{}\t{}\t{}\t{}",
                        s.instance_id, s.mi, s.n11, s.n10, s.n01, s.n00
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut table = AlignmentTable::default();
        for (n, line) in reader.lines().enumerate() {
            let lineno = n + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let bad = |m: &str| Error::format(origin, lineno, m);
            if let Some(rest) = line.strip_prefix("# total\t") {
                let (st, total) = rest.split_once('\t').ok_or_else(|| bad("bad total line"))?;
                let st = SceneType::parse(st).ok_or_else(|| bad("unknown scene type"))?;
                table
                    .totals
                    .insert(st, total.parse().map_err(|_| bad("bad total"))?);
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 8 {
                return Err(bad("expected 8 tab-separated fields"));
            }
            let st = SceneType::parse(f[0]).ok_or_else(|| bad("unknown scene type"))?;
            let num = |s: &str| s.parse::<u64>().map_err(|_| bad("bad count"));
            let score = InstanceScore {
                instance_id: f[2].parse().map_err(|_| bad("bad instance id"))?,
                mi: f[3].parse().map_err(|_| bad("bad mi"))?,
                n11: num(f[4])?,
                n10: num(f[5])?,
                n01: num(f[6])?,
                n00: num(f[7])?,
            };
            table
                .phrases
                .entry(st)
                .or_default()
                .entry(f[1].to_string())
                .or_default()
                .push(score);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f), &path.display().to_string())
    }
}

fn best<'a>(scores: impl Iterator<Item = &'a InstanceScore>) -> Option<&'a InstanceScore> {
    scores.fold(None, |acc: Option<&InstanceScore>, s| match acc {
        Some(a) if a.mi > s.mi || (a.mi == s.mi && a.instance_id <= s.instance_id) => Some(a),
        _ => Some(s),
    })
}

/// Lookup keys of an argument phrase, most specific first: the whole
/// phrase, then the words before the first preposition with location words
/// removed ("lady on couch" -> "lady").
pub fn phrase_keys(words: &[String], lex: &Lexicons) -> Vec<String> {
    if words.is_empty() {
        return Vec::new();
    }
    let whole = words.join(" ");
    let head: Vec<&str> = words
        .iter()
        .map(String::as_str)
        .take_while(|w| !lex.is_preposition(w))
        .filter(|w| !lex.is_location(w))
        .collect();
    let head = head.join(" ");
    if head.is_empty() || head == whole {
        vec![whole]
    } else {
        vec![whole, head]
    }
}

/// Keys mentioned by a tuple (P and S, deduplicated).
fn tuple_keys(t: &Tuple, lex: &Lexicons) -> BTreeSet<String> {
    phrase_keys(&t.p, lex)
        .into_iter()
        .chain(phrase_keys(&t.s, lex))
        .collect()
}

/// Tabulates MI between phrase keys and instance presence, per scene type.
/// The unit of observation is one (question, scene) item.
pub fn fit_alignment(corpus: &Corpus, tuples: &[(String, Tuple)], lex: &Lexicons) -> Result<AlignmentTable> {
    if tuples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let items: HashMap<&str, &crate::scene::QaItem> =
        corpus.items.iter().map(|i| (i.question_id.as_str(), i)).collect();

    struct Counts {
        total: u64,
        phrase: BTreeMap<String, u64>,
        instance: BTreeMap<usize, u64>,
        joint: BTreeMap<(String, usize), u64>,
    }
    let mut counts: BTreeMap<SceneType, Counts> = BTreeMap::new();

    for (qid, tuple) in tuples {
        let item = items.get(qid.as_str()).ok_or_else(|| Error::DanglingScene {
            question_id: qid.clone(),
            scene_id: String::from("<unknown question>"),
        })?;
        let scene = corpus.scene(&item.scene_id).ok_or_else(|| Error::DanglingScene {
            question_id: qid.clone(),
            scene_id: item.scene_id.clone(),
        })?;
        let c = counts.entry(scene.scene_type).or_insert_with(|| Counts {
            total: 0,
            phrase: BTreeMap::new(),
            instance: BTreeMap::new(),
            joint: BTreeMap::new(),
        });
        c.total += 1;
        let present: BTreeSet<usize> = scene.objects.iter().map(|o| o.instance_id).collect();
        for &i in &present {
            *c.instance.entry(i).or_default() += 1;
        }
        for key in tuple_keys(tuple, lex) {
            *c.phrase.entry(key.clone()).or_default() += 1;
            for &i in &present {
                *c.joint.entry((key.clone(), i)).or_default() += 1;
            }
        }
    }

    let mut table = AlignmentTable::default();
    for (st, c) in counts {
        let instances: Vec<usize> = corpus.vocab.instances_for(st).map(|e| e.instance_id).collect();
        let mut phrases = BTreeMap::new();
        for (key, &nw) in c.phrase.iter().filter(|(_, &n)| n as usize >= MIN_PHRASE_COUNT) {
            let scores = instances
                .iter()
                .map(|&i| {
                    let no = c.instance.get(&i).copied().unwrap_or(0);
                    let n11 = c.joint.get(&(key.clone(), i)).copied().unwrap_or(0);
                    let (n10, n01) = (nw - n11, no - n11);
                    let n00 = c.total + n11 - nw - no;
                    let f = [n11, n10, n01, n00].map(|v| v as f64);
                    let mi = if positively_correlated(f[0], f[1], f[2], f[3]) {
                        mutual_information(f[0], f[1], f[2], f[3])?
                    } else {
                        0.0
                    };
                    Ok(InstanceScore {
                        instance_id: i,
                        mi,
                        n11,
                        n10,
                        n01,
                        n00,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            phrases.insert(key.clone(), scores);
        }
        table.totals.insert(st, c.total);
        table.phrases.insert(st, phrases);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    MiMatch,
    LexicalFallback,
    RandomFallback,
    Absent,
}

impl Resolution {
    pub fn as_str(self) -> &'static str {
        match self {
            Resolution::MiMatch => "mi_match",
            Resolution::LexicalFallback => "lexical_fallback",
            Resolution::RandomFallback => "random_fallback",
            Resolution::Absent => "absent",
        }
    }

    pub fn parse(s: &str) -> Option<Resolution> {
        [
            Resolution::MiMatch,
            Resolution::LexicalFallback,
            Resolution::RandomFallback,
            Resolution::Absent,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

/// Objects of a scene referred to by a tuple's P and S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub p_object: Option<usize>,
    pub s_object: Option<usize>,
    pub p_resolved: Resolution,
    pub s_resolved: Resolution,
}

/// Aligns P and S to scene objects. For each argument the present instance
/// with the highest MI wins; without an association the vocabulary name is
/// matched, and failing that a seeded random object is used. S never takes
/// the object chosen for P.
pub fn align(
    tuple: &Tuple,
    scene: &Scene,
    table: &AlignmentTable,
    vocab: &Vocabulary,
    lex: &Lexicons,
    seed: u64,
) -> Result<Alignment> {
    if scene.objects.is_empty() {
        return Err(Error::NoObjects(scene.scene_id.clone()));
    }
    let mut rng = seed::rng(seed);
    let all: Vec<usize> = (0..scene.objects.len()).collect();
    let (p_object, p_resolved) = resolve(&tuple.p, scene, &all, table, vocab, lex, &mut rng);
    let (s_object, s_resolved) = if tuple.s.is_empty() {
        (None, Resolution::Absent)
    } else {
        let rest: Vec<usize> = all.into_iter().filter(|&i| Some(i) != p_object).collect();
        if rest.is_empty() {
            (None, Resolution::Absent)
        } else {
            resolve(&tuple.s, scene, &rest, table, vocab, lex, &mut rng)
        }
    };
    Ok(Alignment {
        p_object,
        s_object,
        p_resolved,
        s_resolved,
    })
}

fn resolve(
    words: &[String],
    scene: &Scene,
    candidates: &[usize],
    table: &AlignmentTable,
    vocab: &Vocabulary,
    lex: &Lexicons,
    rng: &mut impl Rng,
) -> (Option<usize>, Resolution) {
    let present: BTreeSet<usize> = candidates.iter().map(|&i| scene.objects[i].instance_id).collect();
    let objects_of = |instance: usize| -> Vec<usize> {
        candidates
            .iter()
            .copied()
            .filter(|&i| scene.objects[i].instance_id == instance)
            .collect()
    };
    let keys = phrase_keys(words, lex);

    for key in &keys {
        if let Some(scores) = table.scores(scene.scene_type, key) {
            let hit = best(scores.iter().filter(|s| present.contains(&s.instance_id)));
            if let Some(s) = hit.filter(|s| s.mi > MIN_ALIGN_MI) {
                let objs = objects_of(s.instance_id);
                return (Some(objs[rng.random_range(0..objs.len())]), Resolution::MiMatch);
            }
        }
    }
    for key in &keys {
        let named: Vec<usize> = vocab
            .find_by_name(key)
            .into_iter()
            .flat_map(&objects_of)
            .collect();
        if !named.is_empty() {
            return (Some(named[rng.random_range(0..named.len())]), Resolution::LexicalFallback);
        }
    }
    (
        Some(candidates[rng.random_range(0..candidates.len())]),
        Resolution::RandomFallback,
    )
}

/// `question_id<TAB>p_object<TAB>s_object<TAB>p_resolved<TAB>s_resolved`,
/// with `-` for an absent object.
pub fn write_alignments<W: Write>(
    out: &mut W,
    rows: &[(String, Alignment)],
    provenance: Option<&Provenance>,
) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.comment_line())?;
    }
    let obj = |o: Option<usize>| o.map_or("-".to_string(), |i| i.to_string());
    for (qid, a) in rows {
        writeln!(
            out,
            "{qid}\t{}\t{}\t{}\t{}",
            obj(a.p_object),
            obj(a.s_object),
            a.p_resolved.as_str(),
            a.s_resolved.as_str()
        )?;
    }
    Ok(())
}

pub fn read_alignments<R: BufRead>(reader: R, origin: &str) -> Result<Vec<(String, Alignment)>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| Error::format(origin, n + 1, m);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let obj = |s: &str| -> Result<Option<usize>> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("bad object index"))
            }
        };
        let res = |s: &str| Resolution::parse(s).ok_or_else(|| bad("unknown resolution"));
        rows.push((
            f[0].to_string(),
            Alignment {
                p_object: obj(f[1])?,
                s_object: obj(f[2])?,
                p_resolved: res(f[3])?,
                s_resolved: res(f[4])?,
            },
        ));
    }
    Ok(rows)
}

pub fn load_alignments(path: &Path) -> Result<Vec<(String, Alignment)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_alignments(std::io::BufReader::new(f), &path.display().to_string())
}
