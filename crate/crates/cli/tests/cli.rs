use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 12] = [
    "parse",
    "fit-alignment",
    "align",
    "fit-gmms",
    "features",
    "train",
    "predict",
    "baseline",
    "eval",
    "audit-balance",
    "gen-synthetic",
    "run",
];

fn binvqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binvqa"))
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = binvqa(args);
    assert!(
        out.status.success(),
        "binvqa {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic-200")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_for_every_subcommand() {
    for cmd in SUBCOMMANDS {
        let out = ok(&[cmd, "--help"]);
        assert!(out.contains("Usage: binvqa"), "{cmd}: {out}");
    }
    assert!(ok(&["--help"]).contains("gen-synthetic"));
}

#[test]
fn unknown_flag_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in SUBCOMMANDS {
        let target = dir.path().join(format!("{cmd}.out"));
        let out = binvqa(&[cmd, "--no-such-flag", "--out", s(&target)]);
        assert!(!out.status.success(), "{cmd} accepted an unknown flag");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--no-such-flag"));
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn audit_matches_fixture_spec() {
    let corpus = fixture().join("corpus.jsonl");
    let json = ok(&["audit-balance", "--corpus", s(&corpus), "--json"]);
    let stats: serde_json::Value = serde_json::from_str(&json).unwrap();
    let spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture().join("spec.json")).unwrap()).unwrap();
    let scenes = spec["scenes"].as_u64().unwrap();
    assert!(spec["complementary"].as_bool().unwrap());
    // One question per scene, every question paired, pairs always opposite,
    // and pairing forces an even answer split.
    assert_eq!(stats["items"].as_u64().unwrap(), scenes);
    assert_eq!(stats["linked_pairs"].as_u64().unwrap(), scenes / 2);
    assert_eq!(stats["unpaired_fraction"].as_f64().unwrap(), 0.0);
    assert_eq!(stats["non_opposite_fraction"].as_f64().unwrap(), 0.0);
    assert_eq!(stats["yes_fraction"].as_f64().unwrap(), 0.5);
    for p in stats["prefixes"].as_array().unwrap() {
        assert_eq!(p["yes"], p["no"], "{p}");
    }
}

#[test]
fn generator_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = fixture().join("spec.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["gen-synthetic", "--spec", s(&spec), "--seed", "2017", "--out", s(&a)]);
    ok(&["gen-synthetic", "--spec", s(&spec), "--seed", "2017", "--out", s(&b)]);
    for f in ["corpus.jsonl", "parses.conll", "embeddings.txt"] {
        let x = std::fs::read_to_string(a.join(f)).unwrap();
        assert!(x == std::fs::read_to_string(b.join(f)).unwrap(), "{f} differs between runs");
        // The shipped fixture is this exact output.
        assert!(x == std::fs::read_to_string(fixture().join(f)).unwrap(), "{f} differs from the fixture");
    }
}

#[test]
fn stepwise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let fx = fixture();
    let corpus = fx.join("corpus.jsonl");
    let (c, e) = (s(&corpus), fx.join("embeddings.txt"));
    let cfg = d("train.json");
    std::fs::write(&cfg, r#"{"hidden": 8, "max_epochs": 3, "learning_rate": 0.1}"#).unwrap();

    ok(&["parse", "--questions", c, "--parses", s(&fx.join("parses.conll")), "--out", s(&d("tuples.tsv"))]);
    let tuples = std::fs::read_to_string(d("tuples.tsv")).unwrap();
    assert!(tuples.starts_with("# tool=binvqa/"));
    assert_eq!(tuples.lines().count(), 201);
    for line in tuples.lines().skip(1) {
        assert_eq!(line.split('\t').count(), 5, "{line}");
    }

    ok(&["fit-alignment", "--corpus", c, "--tuples", s(&d("tuples.tsv")), "--split-seed", "1", "--out", s(&d("table.tsv"))]);
    ok(&["align", "--corpus", c, "--tuples", s(&d("tuples.tsv")), "--table", s(&d("table.tsv")), "--seed", "1", "--out", s(&d("al.tsv"))]);
    ok(&[
        "fit-gmms", "--corpus", c, "--alignments", s(&d("al.tsv")), "--seed", "1", "--train-only",
        "--pose-clusters", s(&d("poses.txt")), "--out", s(&d("gmms.txt")),
    ]);
    ok(&[
        "features", "--corpus", c, "--mode", "attended", "--alignments", s(&d("al.tsv")), "--gmms",
        s(&d("gmms.txt")), "--out", s(&d("att.bin")),
    ]);
    ok(&["features", "--corpus", c, "--mode", "holistic", "--pose-clusters", s(&d("poses.txt")), "--out", s(&d("hol.bin"))]);
    let att = std::fs::read(d("att.bin")).unwrap();
    let header = String::from_utf8_lossy(&att[..200]).to_string();
    assert!(header.starts_with("# tool=binvqa/"));
    assert!(header.contains("binvqa-features 1\nmode attended\nblock p_object 563\n"));

    ok(&[
        "train", "--corpus", c, "--variant", "ensemble", "--features", "attended", "--tuples",
        s(&d("tuples.tsv")), "--embeddings", s(&e), "--features-file", s(&d("att.bin")), "--config",
        s(&cfg), "--seed", "1", "--out", s(&d("model.ckpt")), "--log", s(&d("train.tsv")),
    ]);
    ok(&[
        "predict", "--corpus", c, "--model", s(&d("model.ckpt")), "--tuples", s(&d("tuples.tsv")),
        "--embeddings", s(&e), "--features-file", s(&d("att.bin")), "--part", "test", "--seed", "1",
        "--out", s(&d("preds.tsv")),
    ]);
    let preds = std::fs::read_to_string(d("preds.tsv")).unwrap();
    assert_eq!(preds.lines().filter(|l| !l.starts_with('#')).count(), 40);

    // Marking every tuple negated and asking for flips inverts each answer.
    let negated = tuples.replace("\tfalse\n", "\ttrue\n");
    std::fs::write(d("neg.tsv"), negated).unwrap();
    ok(&[
        "predict", "--corpus", c, "--model", s(&d("model.ckpt")), "--tuples", s(&d("neg.tsv")),
        "--embeddings", s(&e), "--features-file", s(&d("att.bin")), "--part", "test", "--seed", "1",
        "--flip-negated", "--out", s(&d("flipped.tsv")),
    ]);
    let answers = |text: &str| -> Vec<String> {
        text.lines().filter(|l| !l.starts_with('#')).map(|l| l.to_string()).collect()
    };
    let flipped = answers(&std::fs::read_to_string(d("flipped.tsv")).unwrap());
    for (a, b) in answers(&preds).iter().zip(&flipped) {
        let (qa, xa) = a.split_once('\t').unwrap();
        let (qb, xb) = b.split_once('\t').unwrap();
        assert_eq!(qa, qb);
        assert_ne!(xa, xb, "{qa}");
    }

    let missing = binvqa(&["eval", "--corpus", c, "--preds", s(&d("preds.tsv"))]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing predictions"));
    let table = ok(&["eval", "--corpus", c, "--preds", s(&d("preds.tsv")), "--only-predicted", "--pairs", "--json", s(&d("r.json"))]);
    assert!(table.contains("vqa accuracy") && table.contains("pair accuracy"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("r.json")).unwrap()).unwrap();
    assert_eq!(report["items"], 40);

    for kind in ["prior", "ngram", "blind-q", "blind-tuple", "blind-ensemble"] {
        let out = d(&format!("{kind}.tsv"));
        ok(&[
            "baseline", "--corpus", c, "--kind", kind, "--tuples", s(&d("tuples.tsv")), "--embeddings",
            s(&e), "--config", s(&cfg), "--seed", "1", "--out", s(&out),
        ]);
        ok(&["eval", "--corpus", c, "--preds", s(&out), "--only-predicted", "--json", s(&d("b.json"))]);
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("b.json")).unwrap()).unwrap();
        if kind.starts_with("blind") {
            // Scene-blind answers can only get one member of each pair right.
            assert_eq!(r["accuracy"], 50.0, "{kind}");
            assert_eq!(r["pair_accuracy"], 0.0, "{kind}");
        }
    }
}

#[test]
fn run_twice_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture().canonicalize().unwrap();
    let cfg = dir.path().join("config.json");
    let out = dir.path().join("out");
    let json = format!(
        r#"{{"seed": 5, "corpus": "{}", "parses": "{}", "embeddings": "{}", "output_dir": "{}",
            "baselines": true, "train": {{"hidden": 8, "max_epochs": 3}}}}"#,
        s(&fx.join("corpus.jsonl")),
        s(&fx.join("parses.conll")),
        s(&fx.join("embeddings.txt")),
        s(&out)
    );
    std::fs::write(&cfg, json).unwrap();
    let first = ok(&["run", "--config", s(&cfg)]);
    let report = std::fs::read(out.join("report.json")).unwrap();
    let second = ok(&["run", "--config", s(&cfg)]);
    assert_eq!(first, second);
    assert_eq!(std::fs::read(out.join("report.json")).unwrap(), report);
}

#[test]
fn run_without_embeddings_fails_early() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixture().canonicalize().unwrap();
    let cfg = dir.path().join("config.json");
    let out = dir.path().join("out");
    let json = format!(
        r#"{{"seed": 5, "corpus": "{}", "parses": "{}", "output_dir": "{}", "variant": "tuple"}}"#,
        s(&fx.join("corpus.jsonl")),
        s(&fx.join("parses.conll")),
        s(&out)
    );
    std::fs::write(&cfg, json).unwrap();
    let res = binvqa(&["run", "--config", s(&cfg)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("embeddings"));
    assert!(!out.exists());
}
