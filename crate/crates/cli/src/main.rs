//! `binvqa`: command-line driver for the binary VQA verification pipeline.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use binvqa_core::alignment::{load_alignments, write_alignments, AlignmentTable};
use binvqa_core::baselines::{fit_ngram, prior_baseline, NGRAM_ORDER};
use binvqa_core::eval::{balance_audit, evaluate, read_predictions_file, write_predictions, Predictions};
use binvqa_core::features::{read_features_file, write_features, FeatureMatrix, GmmBank, PoseClusterBank};
use binvqa_core::models::{load_models, save_models, EmbeddingTable, FeatureMode, TrainConfig, VerifierModel};
use binvqa_core::parser::conll::read_parses_file;
use binvqa_core::parser::{load_tuples, write_tuples, Lexicons, Tuple};
use binvqa_core::pipeline::{
    align_all, attended_matrix, build_examples, fit_alignment_on, fit_gmms_on, fit_pose_clusters_on,
    holistic_matrix, parse_all, parses_by_question, predict_with, run_pipeline, split_items, train_member,
    ExperimentConfig, Part, Split, SplitConfig, System,
};
use binvqa_core::provenance::{sha256_hex, Provenance};
use binvqa_core::scene::synth::{generate_synthetic_corpus, GeneratorSpec};
use binvqa_core::scene::{load_corpus, load_corpus_with, Answer, Corpus, Vocabulary};

#[derive(Parser)]
#[command(name = "binvqa", version, about = "Binary visual question answering on abstract scenes")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce each question to a <P, R, S> tuple.
    Parse(ParseArgs),
    /// Tabulate phrase/instance mutual information.
    FitAlignment(FitAlignmentArgs),
    /// Align tuple arguments to scene objects.
    Align(AlignArgs),
    /// Fit location mixtures and, optionally, pose clusters.
    FitGmms(FitGmmsArgs),
    /// Extract attended or holistic scene features.
    Features(FeaturesArgs),
    /// Train a verifier (tuple, q, or both for the ensemble).
    Train(TrainArgs),
    /// Predict answers with a trained checkpoint.
    Predict(PredictArgs),
    /// Fit and apply a language-only baseline.
    Baseline(BaselineArgs),
    /// Score predictions with the consensus metric.
    Eval(EvalArgs),
    /// Report answer balance and prefix bias of a corpus.
    AuditBalance(AuditArgs),
    /// Generate a synthetic corpus with parses and embeddings.
    GenSynthetic(GenArgs),
    /// Run the whole protocol from a config file.
    Run(RunArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file (JSON lines).
    #[arg(long, alias = "questions")]
    corpus: PathBuf,
    /// Clipart vocabulary file; the built-in vocabulary when omitted.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        let c = match &self.vocab {
            Some(v) => load_corpus_with(&self.corpus, Vocabulary::load(v)?),
            None => load_corpus(&self.corpus),
        };
        c.with_context(|| format!("loading corpus {}", self.corpus.display()))
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    train_share: f64,
    #[arg(long, default_value_t = 0.1)]
    val_share: f64,
}

impl SplitArgs {
    fn split(&self, corpus: &Corpus, seed: u64) -> Result<Split> {
        let cfg = SplitConfig {
            train: self.train_share,
            val: self.val_share,
        };
        Ok(split_items(corpus, &cfg, seed)?)
    }
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// CoNLL-style parse file.
    #[arg(long)]
    parses: PathBuf,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitAlignmentArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Fit on the training part of a seeded split instead of every item.
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlignArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    lexicons: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitGmmsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Aligned pairs for the relative-location mixture.
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Also fit pose clusters and write them here.
    #[arg(long)]
    pose_clusters: Option<PathBuf>,
    /// Fit on the training part of the split seeded by --seed.
    #[arg(long)]
    train_only: bool,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageMode {
    Attended,
    Holistic,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    mode: ImageMode,
    /// Required for attended features.
    #[arg(long)]
    alignments: Option<PathBuf>,
    /// Required for attended features.
    #[arg(long)]
    gmms: Option<PathBuf>,
    /// Required for holistic features.
    #[arg(long)]
    pose_clusters: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Tuple,
    Q,
    Ensemble,
}

impl SystemArg {
    fn system(self) -> System {
        match self {
            SystemArg::Tuple => System::Tuple,
            SystemArg::Q => System::Q,
            SystemArg::Ensemble => System::Ensemble,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Attended,
    Holistic,
    None,
}

impl FeaturesArg {
    fn mode(self) -> FeatureMode {
        match self {
            FeaturesArg::Attended => FeatureMode::Attended,
            FeaturesArg::Holistic => FeatureMode::Holistic,
            FeaturesArg::None => FeatureMode::None,
        }
    }
}

#[derive(Args)]
struct ModelInputs {
    #[arg(long)]
    tuples: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Features file from `features`; omit for blind models.
    #[arg(long)]
    features_file: Option<PathBuf>,
}

struct LoadedInputs {
    tuples: BTreeMap<String, Tuple>,
    embeddings: EmbeddingTable,
    features: Option<FeatureMatrix>,
}

impl ModelInputs {
    fn load(&self, mode: FeatureMode) -> Result<LoadedInputs> {
        let features = match (&self.features_file, mode.is_blind()) {
            (Some(p), false) => {
                let m = read_features_file(p)?;
                if m.mode != mode.as_str() {
                    bail!("{} holds {} features, expected {}", p.display(), m.mode, mode.as_str());
                }
                Some(m)
            }
            (None, false) => bail!("--features-file is required for {} features", mode.as_str()),
            (_, true) => None,
        };
        Ok(LoadedInputs {
            tuples: load_tuples(&self.tuples)?.into_iter().collect(),
            embeddings: EmbeddingTable::load(&self.embeddings)?,
            features,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    variant: SystemArg,
    #[arg(long, value_enum)]
    features: FeaturesArg,
    #[command(flatten)]
    inputs: ModelInputs,
    /// Training settings (JSON); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds the split and every model.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training log (TSV).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    inputs: ModelInputs,
    /// Items to predict; split parts use the split seeded by --seed.
    #[arg(long, value_enum, default_value = "all")]
    part: PartArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
    /// Flip the answer of questions whose tuple is marked negated.
    #[arg(long)]
    flip_negated: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Prior,
    Ngram,
    BlindQ,
    BlindTuple,
    BlindEnsemble,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum)]
    kind: BaselineKind,
    /// Needed by the blind kinds.
    #[arg(long)]
    tuples: Option<PathBuf>,
    /// Needed by the blind kinds.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Training settings for the blind kinds (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
    /// Predictions for the test part.
    #[arg(long)]
    out: PathBuf,
    /// Also write the fitted n-gram table.
    #[arg(long)]
    table_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    preds: PathBuf,
    /// Print the complementary-pair accuracy line.
    #[arg(long)]
    pairs: bool,
    /// Score only the items that have predictions.
    #[arg(long)]
    only_predicted: bool,
    /// Also write the structured report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Print JSON instead of a summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    /// Generator settings (JSON); defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Output directory for corpus, parses and embeddings.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Provenance keyed by the full command line.
fn provenance(seed: u64) -> Provenance {
    let args: Vec<String> = std::env::args().skip(1).collect();
    Provenance::new(sha256_hex(args.join("\u{1f}").as_bytes()), seed)
}

fn write_file(path: &Path, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

fn lexicons(dir: &Option<PathBuf>) -> Result<Lexicons> {
    Ok(match dir {
        Some(d) => Lexicons::load_dir(d)?,
        None => Lexicons::default(),
    })
}

fn train_config(path: &Option<PathBuf>) -> Result<TrainConfig> {
    let Some(p) = path else {
        return Ok(TrainConfig::default());
    };
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let cfg: TrainConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn predictions(ids: &[String], answers: Vec<Answer>) -> Predictions {
    ids.iter().cloned().zip(answers.into_iter().map(|a| a.as_str().to_string())).collect()
}

fn write_preds(path: &Path, preds: &Predictions, prov: &Provenance) -> Result<()> {
    write_file(path, |b| {
        writeln!(b, "{}", prov.comment_line())?;
        write_predictions(b, preds)
    })
}

fn cmd_parse(a: ParseArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let lex = lexicons(&a.lexicons)?;
    let parses = parses_by_question(read_parses_file(&a.parses)?, &corpus)?;
    let tuples = parse_all(&corpus, &parses, &lex)?;
    write_file(&a.out, |b| write_tuples(b, &tuples, Some(&provenance(0))))
}

fn cmd_fit_alignment(a: FitAlignmentArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let lex = lexicons(&a.lexicons)?;
    let tuples = load_tuples(&a.tuples)?;
    let ids: Vec<String> = match a.split_seed {
        Some(s) => a.split.split(&corpus, s)?.train,
        None => tuples.iter().map(|(q, _)| q.clone()).collect(),
    };
    let table = fit_alignment_on(&corpus, &tuples, &ids, &lex)?;
    write_file(&a.out, |b| table.write(b, Some(&provenance(a.split_seed.unwrap_or(0)))))
}

fn cmd_align(a: AlignArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let lex = lexicons(&a.lexicons)?;
    let tuples = load_tuples(&a.tuples)?;
    let table = AlignmentTable::load(&a.table)?;
    let rows = align_all(&corpus, &tuples, &table, &lex, a.seed)?;
    write_file(&a.out, |b| write_alignments(b, &rows, Some(&provenance(a.seed))))
}

fn cmd_fit_gmms(a: FitGmmsArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let alignments = load_alignments(&a.alignments)?;
    let ids: Vec<String> = if a.train_only {
        a.split.split(&corpus, a.seed)?.train
    } else {
        corpus.items.iter().map(|i| i.question_id.clone()).collect()
    };
    let prov = provenance(a.seed);
    let bank = fit_gmms_on(&corpus, &alignments, &ids, a.seed)?;
    write_file(&a.out, |b| bank.write(b, Some(&prov)))?;
    if let Some(p) = &a.pose_clusters {
        let clusters = fit_pose_clusters_on(&corpus, &ids, a.seed)?;
        write_file(p, |b| clusters.write(b, Some(&prov)))?;
    }
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let matrix = match a.mode {
        ImageMode::Attended => {
            let (Some(al), Some(g)) = (&a.alignments, &a.gmms) else {
                bail!("attended features need --alignments and --gmms");
            };
            attended_matrix(&corpus, &load_alignments(al)?, &GmmBank::load(g)?)?
        }
        ImageMode::Holistic => {
            let Some(p) = &a.pose_clusters else {
                bail!("holistic features need --pose-clusters");
            };
            holistic_matrix(&corpus, &PoseClusterBank::load(p)?)
        }
    };
    write_file(&a.out, |b| write_features(b, &matrix, Some(&provenance(0))))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let cfg = train_config(&a.config)?;
    let mode = a.features.mode();
    let inputs = a.inputs.load(mode)?;
    let split = a.split.split(&corpus, a.seed)?;
    let examples = |ids: &[String]| {
        build_examples(&corpus, ids, &inputs.tuples, &inputs.embeddings, inputs.features.as_ref())
    };
    let (train_set, val_set) = (examples(&split.train)?, examples(&split.val)?);
    let prov = provenance(a.seed);
    let mut models = Vec::new();
    let mut logs = Vec::new();
    for &variant in a.variant.system().variants() {
        let (model, log) = train_member(variant, mode, &train_set, &val_set, &cfg, a.seed)?;
        log::info!(
            "{}: best epoch {} of {}",
            variant.as_str(),
            log.best_epoch,
            log.epochs.len()
        );
        models.push(model);
        logs.push((variant, log));
    }
    let refs: Vec<&VerifierModel> = models.iter().collect();
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_models(&a.out, &refs, Some(&prov))?;
    if let Some(p) = &a.log {
        write_file(p, |b| {
            writeln!(b, "{}", prov.comment_line())?;
            for (variant, log) in &logs {
                writeln!(b, "# variant={}", variant.as_str())?;
                log.write_tsv(b)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn part_ids(corpus: &Corpus, part: PartArg, split: &SplitArgs, seed: u64) -> Result<Vec<String>> {
    let p = match part {
        PartArg::All => return Ok(corpus.items.iter().map(|i| i.question_id.clone()).collect()),
        PartArg::Train => Part::Train,
        PartArg::Val => Part::Val,
        PartArg::Test => Part::Test,
    };
    Ok(split.split(corpus, seed)?.part(p).to_vec())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let models = load_models(&a.model)?;
    let mode = models[0].features;
    let inputs = a.inputs.load(mode)?;
    let ids = part_ids(&corpus, a.part, &a.split, a.seed)?;
    let items = build_examples(&corpus, &ids, &inputs.tuples, &inputs.embeddings, inputs.features.as_ref())?;
    let mut answers = predict_with(&models, &items)?;
    if a.flip_negated {
        for (ans, q) in answers.iter_mut().zip(&ids) {
            if inputs.tuples[q].negated {
                *ans = Answer::from_label(1 - ans.label());
            }
        }
    }
    let preds = predictions(&ids, answers);
    write_preds(&a.out, &preds, &provenance(a.seed))
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let split = a.split.split(&corpus, a.seed)?;
    let items = |ids: &[String]| -> Vec<_> { ids.iter().filter_map(|q| corpus.item(q)).cloned().collect() };
    let train_items = items(&split.train);
    let prov = provenance(a.seed);
    let answers: Vec<Answer> = match a.kind {
        BaselineKind::Prior => {
            let prior = prior_baseline(&train_items)?;
            vec![prior; split.test.len()]
        }
        BaselineKind::Ngram => {
            let table = fit_ngram(&train_items, NGRAM_ORDER)?;
            if let Some(p) = &a.table_out {
                write_file(p, |b| table.write(b, Some(&prov)))?;
            }
            items(&split.test).iter().map(|i| table.predict(&i.question_text)).collect()
        }
        BaselineKind::BlindQ | BaselineKind::BlindTuple | BaselineKind::BlindEnsemble => {
            let system = match a.kind {
                BaselineKind::BlindQ => System::Q,
                BaselineKind::BlindTuple => System::Tuple,
                _ => System::Ensemble,
            };
            let (Some(t), Some(e)) = (&a.tuples, &a.embeddings) else {
                bail!("blind baselines need --tuples and --embeddings");
            };
            let inputs = ModelInputs {
                tuples: t.clone(),
                embeddings: e.clone(),
                features_file: None,
            }
            .load(FeatureMode::None)?;
            let cfg = train_config(&a.config)?;
            let ex = |ids: &[String]| build_examples(&corpus, ids, &inputs.tuples, &inputs.embeddings, None);
            let (tr, va, te) = (ex(&split.train)?, ex(&split.val)?, ex(&split.test)?);
            let models = system
                .variants()
                .iter()
                .map(|&v| Ok(train_member(v, FeatureMode::None, &tr, &va, &cfg, a.seed)?.0))
                .collect::<Result<Vec<_>>>()?;
            predict_with(&models, &te)?
        }
    };
    write_preds(&a.out, &predictions(&split.test, answers), &prov)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let preds = read_predictions_file(&a.preds)?;
    let scored = if a.only_predicted {
        corpus.subset(corpus.items.iter().filter(|i| preds.contains_key(&i.question_id)))
    } else {
        corpus
    };
    let report = evaluate(&preds, &scored)?;
    let mut table = report.table();
    if !a.pairs {
        table = table
            .lines()
            .filter(|l| !l.starts_with("pair accuracy"))
            .map(|l| format!("{l}\n"))
            .collect();
    }
    emit(&table)?;
    if let Some(p) = &a.json {
        write_file(p, |b| b.write_all(report.to_json().as_bytes()))?;
    }
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let corpus = a.corpus.load()?;
    let stats = balance_audit(&corpus);
    if a.json {
        return emit(&(serde_json::to_string_pretty(&stats)? + "\n"));
    }
    let mut s = String::new();
    s += &format!("items                 {}\n", stats.items);
    s += &format!("unpaired fraction     {:.4}\n", stats.unpaired_fraction);
    s += &format!("linked pairs          {}\n", stats.linked_pairs);
    s += &match stats.non_opposite_fraction {
        Some(f) => format!("non-opposite pairs    {f:.4}\n"),
        None => "non-opposite pairs    n/a\n".to_string(),
    };
    s += &format!("yes / no              {:.4} / {:.4}\n", stats.yes_fraction, stats.no_fraction);
    s += &format!("\n{:<32}{:>6}{:>6}{:>6}{:>9}{:>9}\n", "prefix", "n", "yes", "no", "major", "entropy");
    for p in &stats.prefixes {
        s += &format!(
            "{:<32}{:>6}{:>6}{:>6}{:>9.3}{:>9.3}\n",
            p.prefix, p.items, p.yes, p.no, p.majority_share, p.entropy
        );
    }
    emit(&s)
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let spec: GeneratorSpec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => GeneratorSpec::default(),
    };
    let syn = generate_synthetic_corpus(&spec, a.seed)?;
    // Keyed by the settings rather than the command line, so the output
    // does not depend on where the files live.
    let key = sha256_hex(serde_json::to_string(&spec)?.as_bytes());
    syn.write_dir(&a.out, &Provenance::new(key, a.seed))?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let summary = run_pipeline(&cfg)?;
    for s in &summary.stages {
        log::info!(
            "{:<14} {:<6} {}",
            s.stage,
            if s.cached { "cached" } else { "ran" },
            s.artifact.display()
        );
    }
    emit(&summary.report.table())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::FitAlignment(a) => cmd_fit_alignment(a),
        Command::Align(a) => cmd_align(a),
        Command::FitGmms(a) => cmd_fit_gmms(a),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Eval(a) => cmd_eval(a),
        Command::AuditBalance(a) => cmd_audit(a),
        Command::GenSynthetic(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
