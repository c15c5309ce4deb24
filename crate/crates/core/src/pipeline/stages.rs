use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::alignment::{align, fit_alignment, Alignment, AlignmentTable};
use crate::features::{
    attended_features, fit_gmms, fit_pose_clusters, holistic_features, AttendedLayout, FeatureMatrix, GmmBank,
    HolisticLayout, PoseClusterBank,
};
use crate::models::{
    embed_tuple, ensemble_predict, predict_answer, train, EmbeddingTable, Example, FeatureMode, ModelSpec,
    TrainConfig, TrainLog, Variant, VerifierModel,
};
use crate::parser::conll::ParseBlock;
use crate::parser::{parse_question, question_tokens, Lexicons, ParsedQuestion, Tuple};
use crate::scene::{Answer, Corpus};
use crate::{seed, Error, Result};

/// Train and validation shares; the rest is test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.7, val: 0.1 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.train > 0.0 && self.val > 0.0 && self.train + self.val < 1.0;
        if !ok {
            return Err(Error::Config(
                "split shares must be positive and leave room for a test part".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Part> {
        [Part::Train, Part::Val, Part::Test].into_iter().find(|p| p.as_str() == s)
    }
}

/// Question ids of each part, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn part(&self, part: Part) -> &[String] {
        match part {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }

    /// `(question_id, part)` in corpus order.
    pub fn assignments(&self, corpus: &Corpus) -> Vec<(String, Part)> {
        let lookup: HashMap<&str, Part> = [Part::Train, Part::Val, Part::Test]
            .into_iter()
            .flat_map(|p| self.part(p).iter().map(move |q| (q.as_str(), p)))
            .collect();
        corpus
            .items
            .iter()
            .filter_map(|i| lookup.get(i.question_id.as_str()).map(|&p| (i.question_id.clone(), p)))
            .collect()
    }

    pub fn from_assignments(corpus: &Corpus, rows: &[(String, Part)]) -> Split {
        let lookup: HashMap<&str, Part> = rows.iter().map(|(q, p)| (q.as_str(), *p)).collect();
        let mut split = Split::default();
        for item in &corpus.items {
            match lookup.get(item.question_id.as_str()) {
                Some(Part::Train) => split.train.push(item.question_id.clone()),
                Some(Part::Val) => split.val.push(item.question_id.clone()),
                Some(Part::Test) => split.test.push(item.question_id.clone()),
                None => {}
            }
        }
        split
    }
}

/// Seeded split, stratified by majority answer. Complementary pairs form
/// one unit so both members land in the same part.
pub fn split_items(corpus: &Corpus, cfg: &SplitConfig, master_seed: u64) -> Result<Split> {
    cfg.validate()?;
    let index: HashMap<&str, usize> = corpus
        .items
        .iter()
        .enumerate()
        .map(|(i, q)| (q.question_id.as_str(), i))
        .collect();
    let mut taken = vec![false; corpus.items.len()];
    let mut strata: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for (i, item) in corpus.items.iter().enumerate() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let mut group = vec![i];
        if let Some(&j) = item.complement_of.as_deref().and_then(|c| index.get(c)) {
            if !taken[j] {
                taken[j] = true;
                group.push(j);
            }
        }
        let mut key: Vec<&str> = group.iter().map(|&g| corpus.items[g].majority_answer().as_str()).collect();
        key.sort_unstable();
        strata.entry(key.join(",")).or_default().push(group);
    }
    let mut part = vec![Part::Test; corpus.items.len()];
    for (key, mut groups) in strata {
        groups.shuffle(&mut seed::derived_rng(master_seed, &format!("split/{key}")));
        let n = groups.len() as f64;
        let n_train = (n * cfg.train).round() as usize;
        let n_val = ((n * cfg.val).round() as usize).min(groups.len() - n_train);
        for (g, members) in groups.iter().enumerate() {
            let p = if g < n_train {
                Part::Train
            } else if g < n_train + n_val {
                Part::Val
            } else {
                Part::Test
            };
            for &m in members {
                part[m] = p;
            }
        }
    }
    let rows: Vec<(String, Part)> = corpus
        .items
        .iter()
        .zip(part)
        .map(|(i, p)| (i.question_id.clone(), p))
        .collect();
    let split = Split::from_assignments(corpus, &rows);
    for p in [Part::Train, Part::Val, Part::Test] {
        if split.part(p).is_empty() {
            return Err(Error::InsufficientSamples(format!(
                "{} items leave the {} part empty",
                corpus.items.len(),
                p.as_str()
            )));
        }
    }
    Ok(split)
}

/// Pairs parse blocks with corpus items: by question id when every block
/// names one, otherwise by position.
pub fn parses_by_question(blocks: Vec<ParseBlock>, corpus: &Corpus) -> Result<BTreeMap<String, ParsedQuestion>> {
    if blocks.iter().all(|b| b.question_id.is_some()) {
        return Ok(blocks
            .into_iter()
            .map(|b| (b.question_id.expect("checked"), b.parse))
            .collect());
    }
    if blocks.len() != corpus.items.len() {
        return Err(Error::Config(format!(
            "{} unnamed parse blocks for {} questions",
            blocks.len(),
            corpus.items.len()
        )));
    }
    Ok(corpus
        .items
        .iter()
        .zip(blocks)
        .map(|(i, b)| (i.question_id.clone(), b.parse))
        .collect())
}

/// Tuple of every corpus item, in corpus order.
pub fn parse_all(
    corpus: &Corpus,
    parses: &BTreeMap<String, ParsedQuestion>,
    lex: &Lexicons,
) -> Result<Vec<(String, Tuple)>> {
    corpus
        .items
        .iter()
        .map(|item| {
            let pq = parses
                .get(&item.question_id)
                .ok_or_else(|| Error::Config(format!("no parse for question {}", item.question_id)))?;
            let out = parse_question(&item.question_text, pq, lex)?;
            Ok((item.question_id.clone(), out.tuple))
        })
        .collect()
}

/// Fits the alignment table on the listed items only.
pub fn fit_alignment_on(
    corpus: &Corpus,
    tuples: &[(String, Tuple)],
    ids: &[String],
    lex: &Lexicons,
) -> Result<AlignmentTable> {
    let keep: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
    let rows: Vec<(String, Tuple)> = tuples
        .iter()
        .filter(|(q, _)| keep.contains(q.as_str()))
        .cloned()
        .collect();
    fit_alignment(corpus, &rows, lex)
}

/// Aligns every tuple to its scene, with a per-question derived seed.
pub fn align_all(
    corpus: &Corpus,
    tuples: &[(String, Tuple)],
    table: &AlignmentTable,
    lex: &Lexicons,
    master_seed: u64,
) -> Result<Vec<(String, Alignment)>> {
    tuples
        .iter()
        .map(|(qid, t)| {
            let item = corpus
                .item(qid)
                .ok_or_else(|| Error::Config(format!("tuple for unknown question {qid}")))?;
            let a = align(
                t,
                corpus.scene_of(item),
                table,
                &corpus.vocab,
                lex,
                seed::derive(master_seed, &format!("align/{qid}")),
            )?;
            Ok((qid.clone(), a))
        })
        .collect()
}

/// Absolute-location mixtures from the training scenes, relative-location
/// mixture from their aligned pairs.
pub fn fit_gmms_on(
    corpus: &Corpus,
    alignments: &[(String, Alignment)],
    ids: &[String],
    master_seed: u64,
) -> Result<GmmBank> {
    let sub = subset(corpus, ids);
    let rows: Vec<(String, Alignment)> = alignments
        .iter()
        .filter(|(q, _)| sub.item(q).is_some())
        .cloned()
        .collect();
    fit_gmms(&sub, Some(&rows), master_seed)
}

pub fn fit_pose_clusters_on(corpus: &Corpus, ids: &[String], master_seed: u64) -> Result<PoseClusterBank> {
    fit_pose_clusters(&subset(corpus, ids), master_seed)
}

fn subset(corpus: &Corpus, ids: &[String]) -> Corpus {
    corpus.subset(ids.iter().filter_map(|q| corpus.item(q)))
}

fn to_f32(v: Vec<f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

/// Attended features of every aligned question.
pub fn attended_matrix(corpus: &Corpus, alignments: &[(String, Alignment)], bank: &GmmBank) -> Result<FeatureMatrix> {
    let layout = AttendedLayout::new(&corpus.vocab);
    let mut m = FeatureMatrix {
        mode: FeatureMode::Attended.as_str().into(),
        layout: layout.layout(),
        question_ids: Vec::with_capacity(alignments.len()),
        rows: Vec::with_capacity(alignments.len()),
    };
    for (qid, a) in alignments {
        let item = corpus
            .item(qid)
            .ok_or_else(|| Error::Config(format!("alignment for unknown question {qid}")))?;
        m.question_ids.push(qid.clone());
        m.rows.push(to_f32(attended_features(corpus.scene_of(item), a, bank, &layout)?));
    }
    Ok(m)
}

/// Holistic features of every question's scene.
pub fn holistic_matrix(corpus: &Corpus, clusters: &PoseClusterBank) -> FeatureMatrix {
    let layout = HolisticLayout::new(&corpus.vocab, clusters.len());
    let mut by_scene: HashMap<&str, Vec<f32>> = HashMap::new();
    let mut m = FeatureMatrix {
        mode: FeatureMode::Holistic.as_str().into(),
        layout: layout.layout(),
        question_ids: Vec::with_capacity(corpus.items.len()),
        rows: Vec::with_capacity(corpus.items.len()),
    };
    for item in &corpus.items {
        let row = by_scene
            .entry(item.scene_id.as_str())
            .or_insert_with(|| to_f32(holistic_features(corpus.scene_of(item), clusters, &layout)));
        m.question_ids.push(item.question_id.clone());
        m.rows.push(row.clone());
    }
    m
}

/// Model inputs for the listed questions. Without a feature matrix the
/// image part is left empty, as blind models expect.
pub fn build_examples(
    corpus: &Corpus,
    ids: &[String],
    tuples: &BTreeMap<String, Tuple>,
    embeddings: &EmbeddingTable,
    features: Option<&FeatureMatrix>,
) -> Result<Vec<Example>> {
    let rows: HashMap<&str, &[f32]> = features
        .map(|m| {
            m.question_ids
                .iter()
                .zip(&m.rows)
                .map(|(q, r)| (q.as_str(), r.as_slice()))
                .collect()
        })
        .unwrap_or_default();
    ids.iter()
        .map(|qid| {
            let item = corpus
                .item(qid)
                .ok_or_else(|| Error::Config(format!("unknown question {qid}")))?;
            let tuple = tuples
                .get(qid)
                .ok_or_else(|| Error::Config(format!("no tuple for question {qid}")))?;
            let image = match features {
                Some(m) => rows
                    .get(qid.as_str())
                    .ok_or_else(|| Error::Config(format!("no {} features for question {qid}", m.mode)))?
                    .iter()
                    .map(|&x| f64::from(x))
                    .collect(),
                None => Vec::new(),
            };
            Ok(Example {
                tuple: embed_tuple(tuple, embeddings),
                tokens: embeddings.sequence(&question_tokens(&item.question_text)),
                image,
                label: item.majority_answer().label(),
            })
        })
        .collect()
}

/// A trainable system: one language branch or the product of both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Tuple,
    Q,
    Ensemble,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Tuple => "tuple",
            System::Q => "q",
            System::Ensemble => "ensemble",
        }
    }

    pub fn parse(s: &str) -> Option<System> {
        [System::Tuple, System::Q, System::Ensemble]
            .into_iter()
            .find(|v| v.as_str() == s)
    }

    /// Member variants, tuple first.
    pub fn variants(self) -> &'static [Variant] {
        match self {
            System::Tuple => &[Variant::Tuple],
            System::Q => &[Variant::Q],
            System::Ensemble => &[Variant::Tuple, Variant::Q],
        }
    }
}

/// Seed of one member model, derived from the run seed.
pub fn model_seed(master_seed: u64, variant: Variant, features: FeatureMode) -> u64 {
    seed::derive(master_seed, &format!("train/{}/{}", variant.as_str(), features.as_str()))
}

/// Trains one member model with its derived seed.
pub fn train_member(
    variant: Variant,
    features: FeatureMode,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<(VerifierModel, TrainLog)> {
    let embed_dim = train_set
        .first()
        .map(|e| e.tuple.len() / 3)
        .ok_or(Error::EmptyTrainingSet)?;
    let image_dim = if features.is_blind() {
        0
    } else {
        train_set[0].image.len()
    };
    let cfg = TrainConfig {
        seed: model_seed(master_seed, variant, features),
        ..cfg.clone()
    };
    let spec = ModelSpec {
        variant,
        features,
        embed_dim,
        image_dim,
    };
    train(spec, train_set, val_set, &cfg)
}

/// Answers of one model or, for two models, of their renormalized product.
pub fn predict_with(models: &[VerifierModel], items: &[Example]) -> Result<Vec<Answer>> {
    let probs: Vec<Vec<[f64; 2]>> = models.iter().map(|m| m.predict(items)).collect::<Result<_>>()?;
    Ok((0..items.len())
        .map(|i| {
            let p = probs[1..].iter().fold(probs[0][i], |acc, q| ensemble_predict(acc, q[i]));
            predict_answer(p)
        })
        .collect())
}

/// Everything the models need that does not depend on the model choice.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: Split,
    pub tuples: BTreeMap<String, Tuple>,
    pub alignments: Vec<(String, Alignment)>,
    pub table: AlignmentTable,
    pub bank: GmmBank,
    pub clusters: PoseClusterBank,
}

impl Prepared {
    /// Runs split, parsing, alignment and mixture fitting in memory.
    pub fn new(
        corpus: &Corpus,
        parses: &BTreeMap<String, ParsedQuestion>,
        lex: &Lexicons,
        split: &SplitConfig,
        master_seed: u64,
    ) -> Result<Self> {
        let split = split_items(corpus, split, master_seed)?;
        let tuples = parse_all(corpus, parses, lex)?;
        let table = fit_alignment_on(corpus, &tuples, &split.train, lex)?;
        let alignments = align_all(corpus, &tuples, &table, lex, master_seed)?;
        let bank = fit_gmms_on(corpus, &alignments, &split.train, master_seed)?;
        let clusters = fit_pose_clusters_on(corpus, &split.train, master_seed)?;
        Ok(Prepared {
            split,
            tuples: tuples.into_iter().collect(),
            alignments,
            table,
            bank,
            clusters,
        })
    }

    pub fn features(&self, corpus: &Corpus, mode: FeatureMode) -> Result<Option<FeatureMatrix>> {
        Ok(match mode {
            FeatureMode::Attended => Some(attended_matrix(corpus, &self.alignments, &self.bank)?),
            FeatureMode::Holistic => Some(holistic_matrix(corpus, &self.clusters)),
            FeatureMode::None => None,
        })
    }

    pub fn examples(
        &self,
        corpus: &Corpus,
        part: Part,
        embeddings: &EmbeddingTable,
        features: Option<&FeatureMatrix>,
    ) -> Result<Vec<Example>> {
        build_examples(corpus, self.split.part(part), &self.tuples, embeddings, features)
    }
}
