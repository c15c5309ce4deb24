use rand::Rng;

use super::*;
use crate::parser::Tuple;
use crate::scene::Answer;
use crate::{seed, Error};

fn random_example(rng: &mut impl Rng, e: usize, d: usize, len: usize) -> Example {
    let mut v = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    Example {
        tuple: v(3 * e),
        tokens: (0..len).map(|_| v(e)).collect(),
        image: v(d),
        label: 0,
    }
}

fn batch(seed_value: u64, n: usize, e: usize, d: usize) -> Vec<Example> {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|i| {
            let len = 1 + i % 4;
            let mut ex = random_example(&mut rng, e, d, len);
            ex.label = rng.random_range(0..2);
            ex
        })
        .collect()
}

#[test]
fn embeddings_load_and_fold_case() {
    let mut text = String::new();
    for w in ["cat", "Dog", "couch"] {
        text.push_str(w);
        for i in 0..300 {
            text.push_str(&format!(" {}", i as f64 / 1000.0));
        }
        text.push('\n');
    }
    let t = EmbeddingTable::read(text.as_bytes(), "mem").unwrap();
    assert_eq!((t.len(), t.dim()), (3, 300));
    assert_eq!(t.get("CAT"), t.get("cat"));
    assert!(t.get("dog").is_some());

    let short = format!("{text}bird{}\n", " 0.5".repeat(299));
    match EmbeddingTable::read(short.as_bytes(), "mem") {
        Err(Error::Format { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected format error, got {other:?}"),
    }
    assert!(EmbeddingTable::read("".as_bytes(), "mem").is_err());

    let dup = EmbeddingTable::read("cat 1 2\nCat 3 4\n".as_bytes(), "mem").unwrap();
    assert_eq!(dup.get("cat"), Some(&[1.0, 2.0][..]));
    let mut out = Vec::new();
    dup.write(&mut out).unwrap();
    assert_eq!(EmbeddingTable::read(out.as_slice(), "mem").unwrap(), dup);
}

#[test]
fn tuple_embedding_blocks() {
    let t = EmbeddingTable::from_rows(
        2,
        vec![
            ("woman".into(), vec![1.0, 0.0]),
            ("on".into(), vec![0.0, 3.0]),
            ("couch".into(), vec![2.0, 0.0]),
            ("petting".into(), vec![5.0, 5.0]),
            ("dog".into(), vec![-1.0, 1.0]),
            ("asleep".into(), vec![0.5, 0.5]),
        ],
    )
    .unwrap();
    let v = embed_tuple(&Tuple::new(&["woman", "on", "couch"], &["petting"], &["dog"]), &t);
    assert_eq!(v, vec![1.0, 1.0, 5.0, 5.0, -1.0, 1.0]);
    let v = embed_tuple(&Tuple::new(&["dog"], &["asleep"], &[]), &t);
    assert_eq!(v, vec![-1.0, 1.0, 0.5, 0.5, 0.0, 0.0]);
    let v = embed_tuple(&Tuple::new(&["zorp", "blick"], &["asleep"], &["dog"]), &t);
    assert_eq!(&v[..2], &[0.0, 0.0]);
}

fn all_models(e: usize, h: usize, d: usize, s: u64) -> Vec<VerifierModel> {
    let mut out = Vec::new();
    for v in [Variant::Tuple, Variant::Q] {
        for f in [FeatureMode::Attended, FeatureMode::None] {
            out.push(VerifierModel::new(v, f, e, h, d, s));
        }
    }
    out
}

#[test]
fn forward_is_normalized_and_seeded() {
    let items = batch(1, 6, 4, 5);
    for m in all_models(4, 6, 5, 2) {
        for ex in &items {
            let p = m.forward(ex, false, 0).unwrap();
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
            assert_eq!(m.forward(ex, true, 1).unwrap(), m.forward(ex, true, 1).unwrap());
        }
    }
}

#[test]
fn zero_image_branch_is_finite() {
    let mut m = VerifierModel::new(Variant::Tuple, FeatureMode::Attended, 4, 6, 5, 3);
    m.params.image.as_mut().unwrap().b.fill(0.0);
    let mut ex = batch(2, 1, 4, 5).remove(0);
    ex.image = vec![0.0; 5];
    let p = m.forward(&ex, false, 0).unwrap();
    assert!(p.iter().all(|x| x.is_finite()));
    // tanh(0) zeroes the image embedding, so the fused vector is zero and
    // only the head biases matter: the output is uniform.
    assert!((p[0] - 0.5).abs() < 1e-12);
}

#[test]
fn dimension_mismatch() {
    let m = VerifierModel::new(Variant::Tuple, FeatureMode::Attended, 4, 6, 5, 3);
    let mut ex = batch(2, 1, 4, 5).remove(0);
    ex.image.pop();
    assert!(matches!(m.forward(&ex, false, 0), Err(Error::Dimension(_))));
    let q = VerifierModel::new(Variant::Q, FeatureMode::None, 4, 6, 0, 3);
    let mut ex = batch(2, 1, 4, 5).remove(0);
    ex.tokens[0].push(1.0);
    assert!(matches!(q.forward(&ex, false, 0), Err(Error::Dimension(_))));
}

#[test]
fn analytic_losses() {
    let mut m = VerifierModel::new(Variant::Tuple, FeatureMode::Attended, 4, 6, 5, 3);
    m.params.out.w.fill(0.0);
    let items = batch(3, 4, 4, 5);
    let refs: Vec<&Example> = items.iter().collect();
    let (l, _) = m.loss_and_gradients(&refs, false, 0).unwrap();
    assert!((l - 2f64.ln()).abs() < 1e-12);

    let yes: Vec<Example> = items.iter().cloned().map(|e| Example { label: 0, ..e }).collect();
    m.params.out.b[[0, 0]] = 1000.0;
    m.params.out.b[[0, 1]] = -1000.0;
    let refs: Vec<&Example> = yes.iter().collect();
    assert_eq!(m.loss(&refs, false, 0).unwrap(), 0.0);
}

/// Largest relative gap between analytic gradients and central finite
/// differences of the loss, over every parameter.
fn max_gradient_error(m: &VerifierModel, items: &[Example], dropout_seed: u64) -> (f64, String) {
    const EPS: f64 = 1e-5;
    let refs: Vec<&Example> = items.iter().collect();
    let (_, grads) = m.loss_and_gradients(&refs, true, dropout_seed).unwrap();
    let mut worst = (0.0, String::new());
    let mut probe = m.clone();
    for (ti, (name, g)) in grads.tensors().into_iter().enumerate() {
        for idx in 0..g.len() {
            let (r, c) = (idx / g.ncols(), idx % g.ncols());
            let orig = probe.params.tensors()[ti].1[[r, c]];
            probe.params.tensors_mut()[ti].1[[r, c]] = orig + EPS;
            let up = probe.loss(&refs, true, dropout_seed).unwrap();
            probe.params.tensors_mut()[ti].1[[r, c]] = orig - EPS;
            let down = probe.loss(&refs, true, dropout_seed).unwrap();
            probe.params.tensors_mut()[ti].1[[r, c]] = orig;
            let numeric = (up - down) / (2.0 * EPS);
            let analytic = g[[r, c]];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{r},{c}]: analytic {analytic} numeric {numeric}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for s in 0..5 {
        let items = batch(100 + s, 5, 3, 4);
        for mut m in all_models(3, 4, 4, s) {
            // Nonzero biases so their gradients are exercised off the origin.
            let mut rng = seed::rng(s);
            for (_, t) in m.params.tensors_mut() {
                t.mapv_inplace(|x| x + rng.random_range(-0.1..0.1));
            }
            let (err, at) = max_gradient_error(&m, &items, 7 + s);
            assert!(err < 1e-4, "{:?}/{:?}: {err} at {at}", m.variant, m.features);
        }
    }
}

#[test]
fn ensemble_rules() {
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15;
    assert!(close(ensemble_predict([0.8, 0.2], [0.5, 0.5]), [0.8, 0.2]));
    assert!(close(ensemble_predict([0.9, 0.1], [0.1, 0.9]), [0.5, 0.5]));
    assert_eq!(ensemble_predict([1.0, 0.0], [0.0, 1.0]), [0.5, 0.5]);
    assert_eq!(predict_answer([0.7, 0.3]), Answer::Yes);
    assert_eq!(predict_answer([0.3, 0.7]), Answer::No);
    assert_eq!(predict_answer([0.5, 0.5]), Answer::Yes);
}

#[test]
fn dropout_matches_expectation() {
    let m = VerifierModel::new(Variant::Tuple, FeatureMode::Attended, 4, 16, 5, 9);
    let ex = batch(4, 1, 4, 5).remove(0);
    let eval = m.forward(&ex, false, 0).unwrap();
    let n = 10_000;
    let mut mean = [0.0; 2];
    for s in 0..n {
        let p = m.forward(&ex, true, s).unwrap();
        mean[0] += p[0] / n as f64;
        mean[1] += p[1] / n as f64;
    }
    for k in 0..2 {
        assert!((mean[k] - eval[k]).abs() / eval[k] < 0.02, "{mean:?} vs {eval:?}");
    }
}

#[test]
fn blind_models_ignore_the_scene() {
    let items = batch(5, 2, 4, 5);
    let mut other = items[0].clone();
    other.image = items[1].image.clone();
    for v in [Variant::Tuple, Variant::Q] {
        let m = VerifierModel::new(v, FeatureMode::None, 4, 6, 5, 1);
        assert_eq!(m.image_dim, 0);
        assert_eq!(m.forward(&items[0], false, 0).unwrap(), m.forward(&other, false, 0).unwrap());
    }
}

fn small_config() -> TrainConfig {
    TrainConfig {
        batch_size: 10,
        learning_rate: 0.5,
        max_epochs: 400,
        patience: 400,
        decay_every: 1000,
        dropout: 0.0,
        hidden: 32,
        seed: 3,
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_small_set() {
    let items = batch(6, 50, 4, 6);
    for variant in [Variant::Tuple, Variant::Q] {
        let spec = ModelSpec {
            variant,
            features: FeatureMode::Attended,
            embed_dim: 4,
            image_dim: 6,
        };
        let (m, log) = train(spec, &items, &items, &small_config()).unwrap();
        let (_, acc) = evaluate_split(&m, &items).unwrap();
        assert!(acc >= 0.95, "{variant:?}: {acc} after {} epochs", log.epochs.len());
    }
}

#[test]
fn training_is_deterministic_and_stops() {
    let items = batch(7, 40, 4, 6);
    let (train_set, val) = items.split_at(30);
    let spec = ModelSpec {
        variant: Variant::Tuple,
        features: FeatureMode::Attended,
        embed_dim: 4,
        image_dim: 6,
    };
    let cfg = TrainConfig {
        max_epochs: 30,
        dropout: 0.5,
        ..small_config()
    };
    let (a, la) = train(spec, train_set, val, &cfg).unwrap();
    let (b, lb) = train(spec, train_set, val, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);

    let cfg0 = TrainConfig { patience: 0, ..cfg };
    let (_, log) = train(spec, train_set, val, &cfg0).unwrap();
    let first_stale = log
        .epochs
        .windows(2)
        .position(|w| {
            let best = w[0].val_loss;
            w[1].val_loss >= best
        })
        .map(|i| i + 2);
    // Validation losses improve monotonically until the first stale epoch.
    if let Some(stop) = first_stale {
        assert_eq!(log.epochs.len(), stop);
        assert_eq!(log.best_epoch, stop - 1);
    } else {
        assert_eq!(log.epochs.len(), cfg0.max_epochs);
    }
}

#[test]
fn divergence_is_reported() {
    let items = batch(8, 20, 4, 6);
    let spec = ModelSpec {
        variant: Variant::Tuple,
        features: FeatureMode::Attended,
        embed_dim: 4,
        image_dim: 6,
    };
    let mut poisoned = items.clone();
    poisoned[0].image[0] = f64::NAN;
    let err = train(spec, &poisoned, &items, &small_config()).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch: 1, .. }), "{err}");
}

#[test]
fn checkpoint_round_trip() {
    let models = all_models(3, 4, 5, 11);
    let mut buf = Vec::new();
    for m in &models {
        write_model(&mut buf, m, Some(&crate::provenance::Provenance::adhoc(1))).unwrap();
    }
    assert_eq!(read_models(buf.as_slice(), "mem").unwrap(), models);
    buf.truncate(buf.len() - 3);
    assert!(read_models(buf.as_slice(), "mem").is_err());
}
