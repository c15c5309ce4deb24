//! End-to-end experiment runner.
//!
//! Stages run in order (split, parse, alignment, mixtures and pose clusters,
//! features, training, prediction, evaluation). Each stage writes one artifact
//! whose provenance header carries a key hashed from the stage's inputs; when
//! the header of an existing artifact matches, the stage is skipped and the
//! artifact is loaded instead. Computed artifacts are read back from disk
//! before use, so a cached rerun sees exactly the same values.

mod stages;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use stages::{
    align_all, attended_matrix, build_examples, fit_alignment_on, fit_gmms_on, fit_pose_clusters_on,
    holistic_matrix, model_seed, parse_all, parses_by_question, predict_with, split_items, train_member, Part,
    Prepared, Split, SplitConfig, System,
};

use crate::alignment::{load_alignments, write_alignments, Alignment, AlignmentTable};
use crate::baselines::{fit_ngram, prior_baseline, NgramTable, NGRAM_ORDER};
use crate::eval::{evaluate, read_predictions_file, write_predictions, EvalReport, Predictions};
use crate::features::{read_features_file, write_features, FeatureMatrix, GmmBank, PoseClusterBank};
use crate::models::{load_models, write_model, EmbeddingTable, FeatureMode, TrainConfig, Variant, VerifierModel};
use crate::parser::conll::read_parses_file;
use crate::parser::{load_tuples, write_tuples, Lexicons, Tuple};
use crate::provenance::{sha256_hex, Provenance};
use crate::scene::{load_corpus, Answer, Corpus};
use crate::{Error, Result};

fn default_system() -> System {
    System::Ensemble
}

fn default_features() -> FeatureMode {
    FeatureMode::Attended
}

/// Run configuration, read from a JSON file. Relative paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: PathBuf,
    pub parses: PathBuf,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Directory of lexicon files; built-in lists when absent.
    #[serde(default)]
    pub lexicons: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_system")]
    pub variant: System,
    #[serde(default = "default_features")]
    pub features: FeatureMode,
    /// Also evaluate the q-only, tuple-only and ensemble systems.
    #[serde(default)]
    pub ablation: bool,
    /// Also evaluate the prior, n-gram and blind systems.
    #[serde(default)]
    pub baselines: bool,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::format(origin, e.line(), e.to_string()))
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text, &path.display().to_string())?;
        Ok(cfg.resolved(path.parent().unwrap_or(Path::new("."))))
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.parses);
        fix(&mut self.output_dir);
        if let Some(p) = self.embeddings.as_mut() {
            fix(p);
        }
        if let Some(p) = self.lexicons.as_mut() {
            fix(p);
        }
        self
    }

    /// Systems to evaluate as `(name, system, features)`, main system first.
    pub fn systems(&self) -> Vec<(String, System, FeatureMode)> {
        let mut out = vec![(self.variant, self.features)];
        if self.ablation {
            out.extend([System::Q, System::Tuple, System::Ensemble].map(|s| (s, self.features)));
        }
        if self.baselines {
            out.extend([System::Q, System::Tuple, System::Ensemble].map(|s| (s, FeatureMode::None)));
        }
        let mut seen = std::collections::BTreeSet::new();
        out.into_iter()
            .filter(|k| seen.insert(*k))
            .map(|(s, f)| (system_name(s, f), s, f))
            .collect()
    }

    /// Checks everything that can fail before any computation starts.
    pub fn preflight(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate()?;
        if self.embeddings.is_none() {
            return Err(Error::Config(format!(
                "variant `{}` needs an embeddings path",
                self.variant.as_str()
            )));
        }
        let mut inputs = vec![("corpus", &self.corpus), ("parses", &self.parses)];
        inputs.extend(self.embeddings.iter().map(|p| ("embeddings", p)));
        for (what, p) in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("{what} file {} does not exist", p.display())));
            }
        }
        if let Some(d) = &self.lexicons {
            if !d.is_dir() {
                return Err(Error::Config(format!("lexicon directory {} does not exist", d.display())));
            }
        }
        Ok(())
    }
}

pub fn system_name(system: System, features: FeatureMode) -> String {
    if features.is_blind() {
        format!("blind-{}", system.as_str())
    } else {
        format!("{}-{}", system.as_str(), features.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub name: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Final evaluation of a run: test-part scores of every system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: String,
    pub split: SplitSizes,
    pub systems: Vec<SystemReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{}\nsplit: train={} val={} test={}\n",
            self.provenance, self.split.train, self.split.val, self.split.test
        );
        for sys in &self.systems {
            s.push_str(&format!("\n[{}]\n{}", sys.name, sys.report.table()));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: &'static str,
    pub artifact: PathBuf,
    pub cached: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: RunReport,
    pub stages: Vec<StageRecord>,
}

/// Hash of labelled parts; the labels keep fields from running together.
fn key(parts: &[(&str, &str)]) -> String {
    let mut s = String::new();
    for (k, v) in parts {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    sha256_hex(s.as_bytes())
}

fn file_hash(path: &Path) -> Result<String> {
    std::fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| Error::io(path, e))
}

fn first_line_is(path: &Path, expected: &str) -> bool {
    let Ok(f) = std::fs::File::open(path) else {
        return false;
    };
    let mut line = Vec::new();
    std::io::BufReader::new(f).read_until(b'\n', &mut line).is_ok() && line.strip_suffix(b"\n") == Some(expected.as_bytes())
}

struct Runner {
    dir: PathBuf,
    seed: u64,
    stages: Vec<StageRecord>,
}

impl Runner {
    fn stage<T>(
        &mut self,
        stage: &'static str,
        file: &str,
        key: &str,
        compute: impl FnOnce() -> Result<T>,
        write: impl FnOnce(&T, &mut Vec<u8>, &Provenance) -> std::io::Result<()>,
        load: impl Fn(&Path) -> Result<T>,
    ) -> Result<T> {
        let wrap = |e: Error| Error::Stage {
            stage,
            source: Box::new(e),
        };
        let path = self.dir.join(file);
        let prov = Provenance::new(key, self.seed);
        if first_line_is(&path, &prov.comment_line()) {
            if let Ok(v) = load(&path) {
                log::info!("{stage}: cached {}", path.display());
                self.stages.push(StageRecord {
                    stage,
                    artifact: path,
                    cached: true,
                });
                return Ok(v);
            }
        }
        log::info!("{stage}: computing {}", path.display());
        let value = compute().map_err(wrap)?;
        let tmp = self.dir.join(format!("{file}.partial"));
        let written = (|| {
            let mut buf = Vec::new();
            write(&value, &mut buf, &prov)?;
            std::fs::write(&tmp, &buf)?;
            std::fs::rename(&tmp, &path)
        })();
        written.map_err(|e| wrap(Error::io(&path, e)))?;
        let value = load(&path).map_err(wrap)?;
        self.stages.push(StageRecord {
            stage,
            artifact: path,
            cached: false,
        });
        Ok(value)
    }
}

fn write_split(out: &mut Vec<u8>, rows: &[(String, Part)], prov: &Provenance) -> std::io::Result<()> {
    writeln!(out, "{}", prov.comment_line())?;
    for (q, p) in rows {
        writeln!(out, "{q}\t{}", p.as_str())?;
    }
    Ok(())
}

fn load_split(path: &Path) -> Result<Vec<(String, Part)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.is_empty())
        .map(|(n, l)| {
            let (q, p) = l
                .split_once('\t')
                .ok_or_else(|| Error::format(&origin, n + 1, "expected question_id<TAB>part"))?;
            let p = Part::parse(p).ok_or_else(|| Error::format(&origin, n + 1, format!("unknown part `{p}`")))?;
            Ok((q.to_string(), p))
        })
        .collect()
}

fn load_answer(path: &Path) -> Result<Answer> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let line = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    Answer::parse(line.trim()).ok_or_else(|| Error::format(path.display().to_string(), 2, "expected yes or no"))
}

fn answers_to_predictions(ids: &[String], answers: impl IntoIterator<Item = Answer>) -> Predictions {
    ids.iter()
        .cloned()
        .zip(answers.into_iter().map(|a| a.as_str().to_string()))
        .collect()
}

/// Runs every stage of `cfg` and writes `report.json` and `report.txt` to
/// the output directory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.preflight()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let seed = cfg.seed;
    let seed_s = seed.to_string();
    let mut run = Runner {
        dir: dir.clone(),
        seed,
        stages: Vec::new(),
    };

    let load_stage = |stage: &'static str, e: Error| Error::Stage {
        stage,
        source: Box::new(e),
    };
    let corpus = load_corpus(&cfg.corpus).map_err(|e| load_stage("load", e))?;
    let lex = match &cfg.lexicons {
        Some(d) => Lexicons::load_dir(d).map_err(|e| load_stage("load", e))?,
        None => Lexicons::default(),
    };
    let emb_path = cfg.embeddings.as_ref().expect("checked in preflight");
    let corpus_h = file_hash(&cfg.corpus)?;
    let parses_h = file_hash(&cfg.parses)?;
    let emb_h = file_hash(emb_path)?;
    let lex_h = sha256_hex(format!("{lex:?}").as_bytes());

    let split_json = serde_json::to_string(&cfg.split).expect("serializes");
    let split_key = key(&[("stage", "split"), ("corpus", &corpus_h), ("split", &split_json), ("seed", &seed_s)]);
    let split_rows = run.stage(
        "split",
        "split.tsv",
        &split_key,
        || Ok(split_items(&corpus, &cfg.split, seed)?.assignments(&corpus)),
        |rows, out, prov| write_split(out, rows, prov),
        load_split,
    )?;
    let split = Split::from_assignments(&corpus, &split_rows);

    let parse_key = key(&[("stage", "parse"), ("corpus", &corpus_h), ("parses", &parses_h), ("lexicons", &lex_h)]);
    let tuples: Vec<(String, Tuple)> = run.stage(
        "parse",
        "tuples.tsv",
        &parse_key,
        || {
            let parses = parses_by_question(read_parses_file(&cfg.parses)?, &corpus)?;
            parse_all(&corpus, &parses, &lex)
        },
        |rows, out, prov| write_tuples(out, rows, Some(prov)),
        load_tuples,
    )?;

    let table_key = key(&[("stage", "fit-alignment"), ("split", &split_key), ("parse", &parse_key)]);
    let table: AlignmentTable = run.stage(
        "fit-alignment",
        "alignment_table.tsv",
        &table_key,
        || fit_alignment_on(&corpus, &tuples, &split.train, &lex),
        |t, out, prov| t.write(out, Some(prov)),
        AlignmentTable::load,
    )?;

    let align_key = key(&[("stage", "align"), ("table", &table_key), ("seed", &seed_s)]);
    let alignments: Vec<(String, Alignment)> = run.stage(
        "align",
        "alignments.tsv",
        &align_key,
        || align_all(&corpus, &tuples, &table, &lex, seed),
        |rows, out, prov| write_alignments(out, rows, Some(prov)),
        load_alignments,
    )?;

    let needs = |f: FeatureMode| cfg.systems().iter().any(|s| s.2 == f);
    let mut matrices: BTreeMap<FeatureMode, (String, FeatureMatrix)> = BTreeMap::new();
    if needs(FeatureMode::Attended) {
        let gmm_key = key(&[("stage", "fit-gmms"), ("align", &align_key), ("split", &split_key), ("seed", &seed_s)]);
        let bank: GmmBank = run.stage(
            "fit-gmms",
            "gmms.txt",
            &gmm_key,
            || fit_gmms_on(&corpus, &alignments, &split.train, seed),
            |b, out, prov| b.write(out, Some(prov)),
            GmmBank::load,
        )?;
        let fkey = key(&[("stage", "features/attended"), ("gmms", &gmm_key), ("align", &align_key)]);
        let m = run.stage(
            "features",
            "features-attended.bin",
            &fkey,
            || attended_matrix(&corpus, &alignments, &bank),
            |m, out, prov| write_features(out, m, Some(prov)),
            read_features_file,
        )?;
        matrices.insert(FeatureMode::Attended, (fkey, m));
    }
    if needs(FeatureMode::Holistic) {
        let pose_key = key(&[("stage", "pose-clusters"), ("split", &split_key), ("seed", &seed_s)]);
        let clusters: PoseClusterBank = run.stage(
            "pose-clusters",
            "pose_clusters.txt",
            &pose_key,
            || fit_pose_clusters_on(&corpus, &split.train, seed),
            |c, out, prov| c.write(out, Some(prov)),
            PoseClusterBank::load,
        )?;
        let fkey = key(&[("stage", "features/holistic"), ("clusters", &pose_key), ("corpus", &corpus_h)]);
        let m = run.stage(
            "features",
            "features-holistic.bin",
            &fkey,
            || Ok(holistic_matrix(&corpus, &clusters)),
            |m, out, prov| write_features(out, m, Some(prov)),
            read_features_file,
        )?;
        matrices.insert(FeatureMode::Holistic, (fkey, m));
    }

    let embeddings = EmbeddingTable::load(emb_path).map_err(|e| load_stage("load", e))?;
    let tuple_map: BTreeMap<String, Tuple> = tuples.iter().cloned().collect();
    let train_json = serde_json::to_string(&cfg.train).expect("serializes");
    let mut models: BTreeMap<(Variant, FeatureMode), (String, VerifierModel)> = BTreeMap::new();
    let mut reports = Vec::new();
    let mut pred_keys = Vec::new();

    for (name, system, features) in cfg.systems() {
        let (feat_key, matrix) = match matrices.get(&features) {
            Some((k, m)) => (k.clone(), Some(m)),
            None => ("none".to_string(), None),
        };
        let mut member_keys = Vec::new();
        for &variant in system.variants() {
            if let Some((k, _)) = models.get(&(variant, features)) {
                member_keys.push(k.clone());
                continue;
            }
            let file = format!("model-{}-{}.ckpt", variant.as_str(), features.as_str());
            let mkey = key(&[
                ("stage", "train"),
                ("variant", variant.as_str()),
                ("features", &feat_key),
                ("parse", &parse_key),
                ("split", &split_key),
                ("embeddings", &emb_h),
                ("train", &train_json),
                ("seed", &seed_s),
            ]);
            let log_path = dir.join(format!("train-{}-{}.tsv", variant.as_str(), features.as_str()));
            let model = run.stage(
                "train",
                &file,
                &mkey,
                || {
                    let tr = build_examples(&corpus, &split.train, &tuple_map, &embeddings, matrix)?;
                    let va = build_examples(&corpus, &split.val, &tuple_map, &embeddings, matrix)?;
                    let (model, log) = train_member(variant, features, &tr, &va, &cfg.train, seed)?;
                    let mut buf = format!("{}\n", Provenance::new(&mkey, seed).comment_line()).into_bytes();
                    log.write_tsv(&mut buf).map_err(|e| Error::io(&log_path, e))?;
                    std::fs::write(&log_path, buf).map_err(|e| Error::io(&log_path, e))?;
                    Ok(model)
                },
                |m, out, prov| write_model(out, m, Some(prov)),
                |p| Ok(load_models(p)?.swap_remove(0)),
            )?;
            member_keys.push(mkey.clone());
            models.insert((variant, features), (mkey, model));
        }
        let pkey = key(&[("stage", "predict"), ("system", &name), ("models", &member_keys.join(","))]);
        let preds = run.stage(
            "predict",
            &format!("predictions-{name}.tsv"),
            &pkey,
            || {
                let test = build_examples(&corpus, &split.test, &tuple_map, &embeddings, matrix)?;
                let members: Vec<VerifierModel> = system
                    .variants()
                    .iter()
                    .map(|v| models[&(*v, features)].1.clone())
                    .collect();
                Ok(answers_to_predictions(&split.test, predict_with(&members, &test)?))
            },
            |p, out, prov| {
                writeln!(out, "{}", prov.comment_line())?;
                write_predictions(out, p)
            },
            read_predictions_file,
        )?;
        pred_keys.push(pkey);
        reports.push((name, preds));
    }

    if cfg.baselines {
        let train_items: Vec<_> = split.train.iter().filter_map(|q| corpus.item(q)).cloned().collect();
        let base_key = key(&[("stage", "baseline"), ("split", &split_key)]);
        let prior = run.stage(
            "baseline",
            "prior.txt",
            &base_key,
            || prior_baseline(&train_items),
            |a, out, prov| writeln!(out, "{}\n{}", prov.comment_line(), a.as_str()),
            load_answer,
        )?;
        let table = run.stage(
            "baseline",
            "ngram.tsv",
            &base_key,
            || fit_ngram(&train_items, NGRAM_ORDER),
            |t, out, prov| t.write(out, Some(prov)),
            NgramTable::load,
        )?;
        pred_keys.push(base_key);
        reports.push(("prior".into(), answers_to_predictions(&split.test, split.test.iter().map(|_| prior))));
        let ngram = split
            .test
            .iter()
            .map(|q| table.predict(&corpus.item(q).expect("split ids come from the corpus").question_text));
        reports.push(("ngram".into(), answers_to_predictions(&split.test, ngram)));
    }

    // Locations do not enter the key; input contents already do.
    let mut located = cfg.clone();
    for p in [&mut located.corpus, &mut located.parses, &mut located.output_dir] {
        *p = PathBuf::new();
    }
    located.embeddings = None;
    located.lexicons = None;
    let config_json = serde_json::to_string(&located).expect("serializes");
    let report_key = key(&[
        ("stage", "eval"),
        ("config", &sha256_hex(config_json.as_bytes())),
        ("predictions", &pred_keys.join(",")),
    ]);
    let test_corpus: Corpus = corpus.subset(split.test.iter().filter_map(|q| corpus.item(q)));
    let sizes = SplitSizes {
        train: split.train.len(),
        val: split.val.len(),
        test: split.test.len(),
    };
    let systems = reports
        .iter()
        .map(|(name, p)| {
            Ok(SystemReport {
                name: name.clone(),
                report: evaluate(p, &test_corpus)?,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| load_stage("eval", e))?;
    let report = RunReport {
        provenance: Provenance::new(&report_key, seed).comment_line(),
        split: sizes,
        systems,
    };
    let json_path = dir.join("report.json");
    let json = report.to_json();
    let unchanged = std::fs::read(&json_path).is_ok_and(|old| old == json.as_bytes());
    if !unchanged {
        std::fs::write(&json_path, &json).map_err(|e| Error::io(&json_path, e))?;
    }
    run.stages.push(StageRecord {
        stage: "eval",
        artifact: json_path,
        cached: unchanged,
    });
    let txt = dir.join("report.txt");
    std::fs::write(&txt, report.table()).map_err(|e| Error::io(&txt, e))?;
    Ok(RunSummary {
        report,
        stages: run.stages,
    })
}
