use proptest::prelude::*;
use rand::Rng;

use super::gmm::Gmm;
use super::*;
use crate::alignment::Resolution;
use crate::scene::{generate_synthetic_corpus, ClipartObject, GeneratorSpec, SceneType, Vocabulary, POSE_PARTS};
use crate::seed;

fn grid_gmm(k: usize, lo: f64, hi: f64) -> Gmm {
    let side = (k as f64).sqrt().ceil() as usize;
    let step = (hi - lo) / side as f64;
    Gmm {
        weights: vec![1.0 / k as f64; k],
        means: (0..k)
            .map(|i| [lo + step * (0.5 + (i % side) as f64), lo + step * (0.5 + (i / side) as f64)])
            .collect(),
        variances: vec![[0.02, 0.03]; k],
    }
}

fn toy_bank() -> GmmBank {
    GmmBank {
        absolute: (0..5).map(|_| grid_gmm(9, 0.0, 1.0)).collect(),
        relative: grid_gmm(24, -1.0, 1.0),
    }
}

fn pose(seed_value: u64) -> Vec<[f64; 3]> {
    let mut rng = seed::rng(seed_value);
    (0..POSE_PARTS)
        .map(|_| [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-3.0..3.0)])
        .collect()
}

fn scene(objects: Vec<ClipartObject>) -> Scene {
    Scene {
        scene_id: "s".into(),
        scene_type: SceneType::Indoor,
        objects,
    }
}

fn sample_scene() -> Scene {
    let v = Vocabulary::default();
    let id = |n: &str| v.find_by_name(n)[0];
    scene(vec![
        ClipartObject::human(id("lady"), 0.3, 0.6, 1, pose(1)),
        ClipartObject::animal(id("cat"), 0.7, 0.4, 2, 3),
        ClipartObject::object(Category::LargeObject, id("couch"), 0.5, 0.5, 0),
        ClipartObject::object(Category::SmallObject, id("cup"), 0.8, 0.9, 4),
    ])
}

fn aligned(p: Option<usize>, s: Option<usize>) -> Alignment {
    Alignment {
        p_object: p,
        s_object: s,
        p_resolved: Resolution::MiMatch,
        s_resolved: if s.is_some() { Resolution::MiMatch } else { Resolution::Absent },
    }
}

#[test]
fn default_widths() {
    let v = Vocabulary::default();
    let a = AttendedLayout::new(&v);
    assert_eq!(a.object_width(), 563);
    assert_eq!(a.absolute_width(), 50);
    assert_eq!(a.human_width(), 244);
    assert_eq!(a.relative_width, 48);
    assert_eq!(a.context_width(), 258);
    assert_eq!(a.total(), 1432);
    assert_eq!(a.layout().width(), 1432);
    assert_eq!(a.object_layout().width(), 563);
    assert_eq!(a.layout().offset("relative_location"), Some(1126));

    let h = HolisticLayout::new(&v, 7);
    assert_eq!(h.bag_width, 150);
    assert_eq!(h.region_width(), 165);
    assert_eq!(h.total(), 825);
    assert_eq!(h.layout().width(), 825);
}

#[test]
fn animal_object_blocks() {
    let v = Vocabulary::default();
    let layout = AttendedLayout::new(&v);
    let s = sample_scene();
    let f = object_features(&s, 1, &toy_bank(), &layout).unwrap();
    assert_eq!(f.len(), 563);
    let ol = layout.object_layout();
    let human = ol.offset("age").unwrap()..ol.offset("animal_pose").unwrap();
    assert!(f[human].iter().all(|&x| x == 0.0));
    let animal = &f[ol.offset("animal_pose").unwrap()..];
    assert_eq!(animal.iter().filter(|&&x| x != 0.0).count(), 1);
    assert_eq!(animal[3], 1.0);
    assert_eq!(f[Category::Animal.index()], 1.0);
    assert_eq!(f[4 + v.find_by_name("cat")[0]], 1.0);
}

#[test]
fn depth_segment_encoding() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let s = sample_scene();
    let f = object_features(&s, 1, &toy_bank(), &layout).unwrap();
    let abs = &f[layout.object_layout().offset("absolute_location").unwrap()..][..50];
    for d in 0..5 {
        let seg = &abs[d * 10..d * 10 + 10];
        if d == 2 {
            assert!((seg[..9].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(seg[9], 1.0);
        } else {
            assert!(seg.iter().all(|&x| x == 0.0));
        }
    }
}

#[test]
fn human_pose_sub_layout() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let s = sample_scene();
    let f = object_features(&s, 0, &toy_bank(), &layout).unwrap();
    let ol = layout.object_layout();
    let parts = s.objects[0].pose.as_ref().unwrap();
    let block = &f[ol.offset("pose").unwrap()..][..224];
    assert_eq!(&block[..45], s.objects[0].pose_vector().unwrap().as_slice());
    for (k, p) in parts.iter().enumerate() {
        let b = &block[45 + 4 * k..49 + 4 * k];
        assert_eq!(b, &[p[0], p[1], p[2].cos(), p[2].sin()]);
    }
    assert!(block[105..].iter().all(|&x| x == 0.0));
    assert_eq!(f[ol.offset("age").unwrap()], 1.0);
    assert_eq!(f[ol.offset("expression").unwrap()], 1.0);
}

#[test]
fn out_of_vocabulary_instance() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let s = scene(vec![ClipartObject::object(Category::SmallObject, 300, 0.5, 0.5, 0)]);
    assert!(matches!(
        object_features(&s, 0, &toy_bank(), &layout),
        Err(Error::InstanceOutOfVocabulary { instance_id: 300, .. })
    ));
}

#[test]
fn relative_block() {
    let s = sample_scene();
    let bank = toy_bank();
    assert_eq!(relative_features(&s, 0, None, &bank), vec![0.0; 48]);
    let ab = relative_features(&s, 0, Some(1), &bank);
    let ba = relative_features(&s, 1, Some(0), &bank);
    assert!((ab[..24].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((ab[24..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(&ab[..24], &ba[24..]);
    assert_eq!(&ab[24..], &ba[..24]);
}

#[test]
fn context_block() {
    let v = Vocabulary::default();
    let layout = AttendedLayout::new(&v);
    let table = v.find_by_name("dining table")[0];
    let cat = ClipartObject::animal(v.find_by_name("cat")[0], 0.2, 0.2, 0, 0);
    let only_p = scene(vec![cat.clone()]);
    assert!(scene_context_features(&only_p, Some(0), None, &layout).iter().all(|&x| x == 0.0));

    let t = ClipartObject::object(Category::LargeObject, table, 0.6, 0.6, 1);
    let one = scene(vec![cat.clone(), t.clone()]);
    let f = scene_context_features(&one, Some(0), None, &layout);
    assert_eq!(f.iter().filter(|&&x| x != 0.0).count(), 2);
    assert_eq!(f[Category::LargeObject.index()], 1.0);
    assert_eq!(f[4 + table], 1.0);

    // Indicator semantics: a second table changes nothing.
    let two = scene(vec![cat, t.clone(), ClipartObject { x: 0.9, ..t }]);
    assert_eq!(scene_context_features(&two, Some(0), None, &layout), f);
}

#[test]
fn attended_vector() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let bank = toy_bank();
    let s = sample_scene();
    let full = attended_features(&s, &aligned(Some(0), Some(2)), &bank, &layout).unwrap();
    assert_eq!(full.len(), 1432);
    assert_eq!(&full[..563], object_features(&s, 0, &bank, &layout).unwrap().as_slice());
    assert_eq!(&full[563..1126], object_features(&s, 2, &bank, &layout).unwrap().as_slice());

    let no_s = attended_features(&s, &aligned(Some(0), None), &bank, &layout).unwrap();
    assert!(no_s[563..1174].iter().all(|&x| x == 0.0));
    assert_eq!(no_s, attended_features(&s, &aligned(Some(0), None), &bank, &layout).unwrap());
}

#[test]
fn flip_changes_one_coordinate() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let bank = toy_bank();
    let a = sample_scene();
    let mut b = a.clone();
    b.objects[0].flip = true;
    let al = aligned(Some(0), Some(1));
    let fa = attended_features(&a, &al, &bank, &layout).unwrap();
    let fb = attended_features(&b, &al, &bank, &layout).unwrap();
    let diff: Vec<usize> = (0..fa.len()).filter(|&i| fa[i] != fb[i]).collect();
    assert_eq!(diff, vec![4 + 254]);
}

fn clusters() -> PoseClusterBank {
    PoseClusterBank {
        centroids: (0..7).map(|i| crate::scene::pose_vector(&pose(100 + i))).collect(),
    }
}

#[test]
fn holistic_basics() {
    let v = Vocabulary::default();
    let layout = HolisticLayout::new(&v, 7);
    let c = clusters();
    assert_eq!(holistic_features(&scene(vec![]), &c, &layout), vec![0.0; 825]);

    let h = scene(vec![ClipartObject::human(v.find_by_name("lady")[0], 0.1, 0.1, 0, pose(103))]);
    let f = holistic_features(&h, &c, &layout);
    assert_eq!(f.len(), 825);
    let cl = 150 + 8 + 3;
    assert_eq!(f[cl], 1.0);
    assert_eq!(f[150], 1.0);
    // Top-left quadrant is region 1; no other quadrant sees the human.
    assert_eq!(f[165 + cl], 1.0);
    for r in 2..5 {
        assert!(f[r * 165..(r + 1) * 165].iter().all(|&x| x == 0.0));
    }
    assert!(f[..150].iter().all(|&x| x == 0.0));
}

#[test]
fn quadrant_boundaries() {
    assert_eq!(quadrant(0.5, 0.5), 0);
    assert_eq!(quadrant(0.51, 0.5), 1);
    assert_eq!(quadrant(0.5, 0.51), 2);
    assert_eq!(quadrant(0.9, 0.9), 3);
}

fn arb_object() -> impl Strategy<Value = ClipartObject> {
    (0usize..165, 0.0f64..=1.0, 0.0f64..=1.0, 0u8..5, 0u64..1000).prop_map(|(id, x, y, d, ps)| {
        let v = Vocabulary::default();
        match v.get(id).unwrap().category {
            Category::Human => ClipartObject::human(id, x, y, d, pose(ps)),
            Category::Animal => ClipartObject::animal(id, x, y, d, (ps % 10) as usize),
            c => ClipartObject::object(c, id, x, y, d),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrants_partition_full_scene(objects in prop::collection::vec(arb_object(), 0..12)) {
        let layout = HolisticLayout::new(&Vocabulary::default(), 7);
        let f = holistic_features(&scene(objects), &clusters(), &layout);
        for i in 0..165 {
            let q: f64 = (1..5).map(|r| f[r * 165 + i]).sum();
            prop_assert_eq!(q, f[i]);
        }
    }

    #[test]
    fn absolute_segments_normalize(objects in prop::collection::vec(arb_object(), 1..6)) {
        let layout = AttendedLayout::new(&Vocabulary::default());
        let s = scene(objects);
        let off = layout.object_layout().offset("absolute_location").unwrap();
        for (i, o) in s.objects.iter().enumerate() {
            let f = object_features(&s, i, &toy_bank(), &layout).unwrap();
            for d in 0..5 {
                let seg = &f[off + d * 10..off + d * 10 + 9];
                let expect = if d == o.depth as usize { 1.0 } else { 0.0 };
                prop_assert!((seg.iter().sum::<f64>() - expect).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn pose_clusters_recover_distinct_poses() {
    let protos: Vec<Vec<f64>> = (0..7).map(|i| crate::scene::pose_vector(&pose(200 + i))).collect();
    let data: Vec<Vec<f64>> = (0..70).map(|i| protos[i % 7].clone()).collect();
    let bank = PoseClusterBank::fit(&data, 5).unwrap();
    assert_eq!(bank.len(), 7);
    for p in &protos {
        assert!(bank.centroids.contains(p));
    }
    assert_eq!(bank, PoseClusterBank::fit(&data, 5).unwrap());
}

#[test]
fn pose_clusters_on_blobs() {
    let protos: Vec<Vec<f64>> = (0..7).map(|i| crate::scene::pose_vector(&pose(300 + i))).collect();
    let mut rng = seed::rng(9);
    let labels: Vec<usize> = (0..700).map(|i| i % 7).collect();
    let data: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| protos[l].iter().map(|v| v + rng.random_range(-0.05..0.05)).collect())
        .collect();
    let bank = PoseClusterBank::fit(&data, 1).unwrap();
    // Map each cluster to the planted label it sees most, then score.
    let assigned: Vec<usize> = data.iter().map(|x| bank.nearest(x)).collect();
    let mut correct = 0;
    for c in 0..7 {
        let mut votes = [0usize; 7];
        for (a, &l) in assigned.iter().zip(&labels) {
            if *a == c {
                votes[l] += 1;
            }
        }
        correct += votes.iter().max().unwrap();
    }
    assert!(correct as f64 / data.len() as f64 >= 0.95);
}

#[test]
fn too_few_poses() {
    assert!(matches!(
        PoseClusterBank::fit(&vec![vec![0.0; 45]; 6], 0),
        Err(Error::InsufficientSamples(_))
    ));
}

#[test]
fn fit_on_synthetic_corpus_and_round_trip() {
    let spec = GeneratorSpec {
        scenes: 60,
        ..GeneratorSpec::default()
    };
    let syn = generate_synthetic_corpus(&spec, 4).unwrap();
    let bank = fit_gmms(&syn.corpus, None, 7).unwrap();
    assert_eq!(bank, fit_gmms(&syn.corpus, None, 7).unwrap());
    for g in bank.absolute.iter().chain([&bank.relative]) {
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(g.variances.iter().all(|v| v[0] > 0.0 && v[1] > 0.0));
    }
    assert_eq!(bank.relative.components(), 24);

    let mut buf = Vec::new();
    bank.write(&mut buf, Some(&crate::provenance::Provenance::adhoc(7))).unwrap();
    assert_eq!(GmmBank::read(buf.as_slice(), "mem").unwrap(), bank);

    let clusters = fit_pose_clusters(&syn.corpus, 3).unwrap();
    let mut buf = Vec::new();
    clusters.write(&mut buf, None).unwrap();
    assert_eq!(PoseClusterBank::read(buf.as_slice(), "mem").unwrap(), clusters);
}

#[test]
fn features_file_round_trip() {
    let layout = AttendedLayout::new(&Vocabulary::default());
    let m = FeatureMatrix {
        mode: "attended".into(),
        layout: layout.layout(),
        question_ids: vec!["q1".into(), "q2".into()],
        rows: vec![vec![0.5; 1432], (0..1432).map(|i| i as f32).collect()],
    };
    let mut buf = Vec::new();
    write_features(&mut buf, &m, Some(&crate::provenance::Provenance::adhoc(1))).unwrap();
    let back = read_features(buf.as_slice(), "mem").unwrap();
    assert_eq!(back, m);
    assert_eq!(back.row("q2").unwrap()[7], 7.0);

    buf.pop();
    assert!(read_features(buf.as_slice(), "mem").is_err());
}
