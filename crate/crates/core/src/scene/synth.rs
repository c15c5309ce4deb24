//! Seeded synthetic corpora with template questions whose answers are
//! computed from scene contents. Used as the oracle substrate for tests and
//! the reproduction experiments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    Answer, Category, ClipartObject, Corpus, QaItem, Scene, SceneType, Vocabulary, AGES, ANIMAL_POSES,
    ANSWERS_PER_QUESTION, DEPTHS, GENDERS, POSE_PARTS, SKINS,
};
use crate::models::EmbeddingTable;
use crate::parser::conll::{write_parses, ParseBlock};
use crate::provenance::Provenance;
use super::io::write_corpus_file;
use crate::parser::{ParsedQuestion, Token};
use crate::seed;
use crate::{Error, Result};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const PARSES_FILE: &str = "parses.conll";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";

/// Number of pose prototypes human poses are drawn around.
pub const POSE_PROTOTYPES: usize = 7;

/// Minimum coordinate gap for left/right/above relations.
const RELATION_GAP: f64 = 0.15;
const NEAR_MAX: f64 = 0.2;
const FAR_MIN: f64 = 0.4;
const NEAR_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// "Is there a {p}?"
    Exists,
    /// "Is the {p} left of the {s}?"
    LeftOf,
    /// "Is the {p} right of the {s}?"
    RightOf,
    /// "Is the {p} above the {s}?"
    Above,
    /// "Is the {p} near the {s}?"
    Near,
    /// "Is the {p} facing the {s}?"
    Facing,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::Exists,
        Template::LeftOf,
        Template::RightOf,
        Template::Above,
        Template::Near,
        Template::Facing,
    ];

    pub fn relational(self) -> bool {
        self != Template::Exists
    }

    fn words(self) -> &'static [&'static str] {
        match self {
            Template::Exists => &["is", "there", "a", "an"],
            Template::LeftOf => &["is", "the", "left", "of"],
            Template::RightOf => &["is", "the", "right", "of"],
            Template::Above => &["is", "the", "above"],
            Template::Near => &["is", "the", "near"],
            Template::Facing => &["is", "the", "facing"],
        }
    }
}

/// A phrase forced to refer to a given clipart instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub phrase: String,
    pub instance_id: usize,
    /// Probability that a relational "no" keeps the referent in the scene.
    #[serde(default = "one")]
    pub correlation: f64,
}

fn one() -> f64 {
    1.0
}

/// Generator settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Number of scenes; each scene carries one question.
    pub scenes: usize,
    pub indoor_fraction: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub templates: Vec<Template>,
    /// Target fraction of "yes" answers, allocated exactly per template.
    pub yes_fraction: f64,
    /// Round to the nearest feasible count instead of failing.
    pub allow_nearest: bool,
    /// Probability that each simulated annotator flips the true answer.
    pub disagreement: f64,
    /// Like `Plant::correlation`, for vocabulary-name phrases.
    pub correlation: f64,
    pub plants: Vec<Plant>,
    /// Probability that P is drawn from the planted phrases.
    pub plant_rate: f64,
    /// Cap on the number of vocabulary-name phrases per scene type.
    pub max_phrases: Option<usize>,
    /// Emit complementary pairs: two scenes, one question, opposite answers.
    pub complementary: bool,
    /// When set, each question prefix prefers one answer, taken by this
    /// share of its items; `yes_fraction` then sets the global rate.
    pub prefix_bias: Option<f64>,
    /// Rate of appending "in the picture" to the question text.
    pub drop_phrase_rate: f64,
    pub embedding_dim: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            scenes: 200,
            indoor_fraction: 0.5,
            min_objects: 3,
            max_objects: 7,
            templates: Template::ALL.to_vec(),
            yes_fraction: 0.5,
            allow_nearest: false,
            disagreement: 0.0,
            correlation: 1.0,
            plants: Vec::new(),
            plant_rate: 0.5,
            max_phrases: None,
            complementary: false,
            prefix_bias: None,
            drop_phrase_rate: 0.0,
            embedding_dim: 300,
        }
    }
}

/// A generated corpus with its parses and word embeddings.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Parse of each question, keyed by question id.
    pub parses: BTreeMap<String, ParsedQuestion>,
    pub embeddings: EmbeddingTable,
    /// Template of each question, keyed by question id.
    pub templates: BTreeMap<String, Template>,
    /// The instance each question's P (and S) phrase refers to.
    pub referents: BTreeMap<String, (usize, Option<usize>)>,
}

impl SyntheticCorpus {
    /// Parse blocks in corpus item order.
    pub fn parse_blocks(&self) -> Vec<ParseBlock> {
        self.corpus
            .items
            .iter()
            .map(|i| ParseBlock {
                question_id: Some(i.question_id.clone()),
                parse: self.parses[&i.question_id].clone(),
            })
            .collect()
    }

    /// Writes `corpus.jsonl`, `parses.conll` and `embeddings.txt` to `dir`,
    /// each headed by the provenance line.
    pub fn write_dir(&self, dir: &Path, provenance: &Provenance) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus_file(&self.corpus, dir.join(CORPUS_FILE), Some(provenance))?;
        let write = |name: &str, body: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut buf = format!("{}\n", provenance.comment_line()).into_bytes();
            body(&mut buf).map_err(|e| Error::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
        };
        write(PARSES_FILE, &|b| write_parses(b, &self.parse_blocks()))?;
        write(EMBEDDINGS_FILE, &|b| self.embeddings.write(b))
    }
}

#[derive(Debug, Clone)]
struct Phrase {
    text: String,
    instance: usize,
    correlation: f64,
}

#[derive(Debug, Clone)]
struct Plan {
    template: Template,
    scene_type: SceneType,
    p: Phrase,
    s: Option<Phrase>,
    answer: Answer,
}

impl Plan {
    fn prefix(&self) -> (Template, String) {
        (self.template, self.p.text.clone())
    }
}

struct Generator<'a> {
    spec: &'a GeneratorSpec,
    vocab: Vocabulary,
    rng: ChaCha8Rng,
    prototypes: Vec<Vec<[f64; 3]>>,
    pools: BTreeMap<SceneType, (Vec<Phrase>, Vec<Phrase>)>,
}

/// Generates a corpus from `spec`; a pure function of `(spec, seed)`.
pub fn generate_synthetic_corpus(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticCorpus> {
    check_spec(spec)?;
    let vocab = Vocabulary::default();
    let mut g = Generator {
        spec,
        prototypes: pose_prototypes(&mut seed::derived_rng(seed, "synth/poses")),
        pools: BTreeMap::new(),
        vocab,
        rng: seed::derived_rng(seed, "synth/plan"),
    };
    for st in SceneType::ALL {
        let pools = g.phrase_pools(st)?;
        g.pools.insert(st, pools);
    }
    let plans = g.plan()?;
    let mut scene_rng = seed::derived_rng(seed, "synth/scenes");
    g.rng = std::mem::replace(&mut scene_rng, seed::rng(0));

    let mut scenes = BTreeMap::new();
    let mut items = Vec::new();
    let mut parses = BTreeMap::new();
    let mut templates = BTreeMap::new();
    let mut referents = BTreeMap::new();
    let width = digits(plans.len());
    let mut push = |g: &mut Generator, plan: &Plan, scene: Scene, qid: String, complement: Option<String>| {
        let truth = template_truth(plan.template, plan.p.instance, plan.s.as_ref().map(|s| s.instance), &scene);
        let (text, parse) = question(plan, g.spec.drop_phrase_rate > 0.0 && g.rng.random_bool(g.spec.drop_phrase_rate));
        let answers = g.annotate(truth);
        parses.insert(qid.clone(), parse);
        templates.insert(qid.clone(), plan.template);
        referents.insert(qid.clone(), (plan.p.instance, plan.s.as_ref().map(|s| s.instance)));
        items.push(QaItem {
            question_id: qid,
            scene_id: scene.scene_id.clone(),
            question_text: text,
            human_answers: answers,
            complement_of: complement,
        });
        scenes.insert(scene.scene_id.clone(), scene);
    };

    if spec.complementary {
        for (k, plan) in plans.iter().enumerate() {
            let (a, b) = (format!("{:0width$}", 2 * k), format!("{:0width$}", 2 * k + 1));
            let first = g.realize(plan, format!("s{a}"));
            let second = g.complement(plan, &first, format!("s{b}"));
            let mut flipped = plan.clone();
            flipped.answer = plan.answer.flipped();
            push(&mut g, plan, first, format!("q{a}"), Some(format!("q{b}")));
            push(&mut g, &flipped, second, format!("q{b}"), Some(format!("q{a}")));
        }
    } else {
        for (k, plan) in plans.iter().enumerate() {
            let id = format!("{k:0width$}");
            let scene = g.realize(plan, format!("s{id}"));
            push(&mut g, plan, scene, format!("q{id}"), None);
        }
    }

    let embeddings = g.embeddings(seed);
    Ok(SyntheticCorpus {
        corpus: Corpus {
            scenes,
            items,
            vocab: g.vocab,
        },
        parses,
        embeddings,
        templates,
        referents,
    })
}

fn digits(n: usize) -> usize {
    (2 * n.max(1)).to_string().len().max(5)
}

fn check_spec(spec: &GeneratorSpec) -> Result<()> {
    let bad = |m: &str| Err(Error::InfeasibleSpec(m.to_string()));
    if spec.scenes == 0 {
        return bad("scenes must be positive");
    }
    if spec.templates.is_empty() {
        return bad("no templates");
    }
    if spec.min_objects < 2 || spec.min_objects > spec.max_objects {
        return bad("need 2 <= min_objects <= max_objects");
    }
    for (name, v) in [
        ("indoor_fraction", spec.indoor_fraction),
        ("yes_fraction", spec.yes_fraction),
        ("disagreement", spec.disagreement),
        ("correlation", spec.correlation),
        ("plant_rate", spec.plant_rate),
        ("drop_phrase_rate", spec.drop_phrase_rate),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InfeasibleSpec(format!("{name} must lie in [0, 1]")));
        }
    }
    if spec.complementary {
        if !spec.scenes.is_multiple_of(2) {
            return bad("complementary corpora need an even number of scenes");
        }
        if spec.yes_fraction != 0.5 || spec.prefix_bias.is_some() {
            return bad("complementary corpora are balanced by construction");
        }
    }
    if let Some(b) = spec.prefix_bias {
        if !(0.5..=1.0).contains(&b) || b == 0.5 {
            return bad("prefix_bias must lie in (0.5, 1]");
        }
        let q = (spec.yes_fraction - (1.0 - b)) / (2.0 * b - 1.0);
        if !(0.0..=1.0).contains(&q) {
            return bad("yes_fraction unreachable under this prefix_bias");
        }
    }
    for p in &spec.plants {
        if p.phrase.split_whitespace().count() != 1 {
            return Err(Error::InfeasibleSpec(format!("planted phrase {:?} must be one word", p.phrase)));
        }
    }
    if spec.embedding_dim == 0 {
        return bad("embedding_dim must be positive");
    }
    Ok(())
}

fn pose_prototypes(rng: &mut ChaCha8Rng) -> Vec<Vec<[f64; 3]>> {
    (0..POSE_PROTOTYPES)
        .map(|_| {
            (0..POSE_PARTS)
                .map(|_| {
                    [
                        rng.random_range(-0.08..0.08),
                        rng.random_range(-0.15..0.15),
                        rng.random_range(-PI..PI),
                    ]
                })
                .collect()
        })
        .collect()
}

/// Even split of `n` into `k` parts, remainder to the first parts.
fn split_counts(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

impl Generator<'_> {
    /// Planted and vocabulary-name phrases admissible for a scene type.
    fn phrase_pools(&mut self, st: SceneType) -> Result<(Vec<Phrase>, Vec<Phrase>)> {
        let mut planted = Vec::new();
        for p in &self.spec.plants {
            if p.instance_id >= self.vocab.len() {
                return Err(Error::InstanceOutOfVocabulary {
                    instance_id: p.instance_id,
                    size: self.vocab.len(),
                });
            }
            if self.vocab.admissible(p.instance_id, st) {
                planted.push(Phrase {
                    text: p.phrase.to_lowercase(),
                    instance: p.instance_id,
                    correlation: p.correlation,
                });
            }
        }
        let taken_phrases: Vec<String> = self.spec.plants.iter().map(|p| p.phrase.to_lowercase()).collect();
        let taken_ids: Vec<usize> = self.spec.plants.iter().map(|p| p.instance_id).collect();
        let mut names: Vec<Phrase> = self
            .vocab
            .instances_for(st)
            .filter(|e| !e.name.contains(' '))
            .filter(|e| !taken_ids.contains(&e.instance_id) && !taken_phrases.contains(&e.name))
            .map(|e| Phrase {
                text: e.name.clone(),
                instance: e.instance_id,
                correlation: self.spec.correlation,
            })
            .collect();
        if let Some(k) = self.spec.max_phrases {
            names.shuffle(&mut self.rng);
            names.truncate(k.max(2));
            names.sort_by_key(|p| p.instance);
        }
        if names.len() < 2 {
            return Err(Error::InfeasibleSpec(format!("fewer than two {st} phrases")));
        }
        Ok((planted, names))
    }

    fn scene_types(&mut self, n: usize) -> Vec<SceneType> {
        let indoor = (self.spec.indoor_fraction * n as f64).round() as usize;
        let mut types: Vec<SceneType> = (0..n)
            .map(|i| if i < indoor { SceneType::Indoor } else { SceneType::Outdoor })
            .collect();
        types.shuffle(&mut self.rng);
        types
    }

    fn pick_phrases(&mut self, template: Template, st: SceneType) -> (Phrase, Option<Phrase>) {
        let (planted, names) = &self.pools[&st];
        let p = if !planted.is_empty() && self.rng.random_bool(self.spec.plant_rate) {
            planted[self.rng.random_range(0..planted.len())].clone()
        } else {
            names[self.rng.random_range(0..names.len())].clone()
        };
        let s = template.relational().then(|| loop {
            let s = &names[self.rng.random_range(0..names.len())];
            if s.instance != p.instance {
                break s.clone();
            }
        });
        (p, s)
    }

    /// Decides template, scene type, phrases and answer of every question
    /// (every pair, in complementary mode).
    fn plan(&mut self) -> Result<Vec<Plan>> {
        let spec = self.spec;
        let n = if spec.complementary { spec.scenes / 2 } else { spec.scenes };
        let counts = split_counts(n, spec.templates.len());
        let types = self.scene_types(n);
        let mut plans = Vec::with_capacity(n);
        let mut next_type = types.into_iter();
        for (&template, &count) in spec.templates.iter().zip(&counts) {
            let yes = if spec.complementary {
                count.div_ceil(2)
            } else {
                let exact = spec.yes_fraction * count as f64;
                if (exact - exact.round()).abs() > 1e-9 && !spec.allow_nearest && spec.prefix_bias.is_none() {
                    return Err(Error::InfeasibleSpec(format!(
                        "yes_fraction {} of {count} {template:?} questions is not an integer",
                        spec.yes_fraction
                    )));
                }
                exact.round() as usize
            };
            let mut answers: Vec<Answer> = (0..count)
                .map(|i| if i < yes { Answer::Yes } else { Answer::No })
                .collect();
            answers.shuffle(&mut self.rng);
            for answer in answers {
                let st = next_type.next().expect("one scene type per plan");
                let (p, s) = self.pick_phrases(template, st);
                plans.push(Plan {
                    template,
                    scene_type: st,
                    p,
                    s,
                    answer,
                });
            }
        }
        if let Some(b) = spec.prefix_bias {
            self.bias_by_prefix(&mut plans, b);
        }
        plans.shuffle(&mut self.rng);
        Ok(plans)
    }

    /// Reassigns answers so that each prefix group takes its preferred
    /// answer in `round(b * n)` of its `n` items.
    fn bias_by_prefix(&mut self, plans: &mut [Plan], b: f64) {
        let mut groups: BTreeMap<(Template, String), Vec<usize>> = BTreeMap::new();
        for (i, p) in plans.iter().enumerate() {
            groups.entry(p.prefix()).or_default().push(i);
        }
        let q = (self.spec.yes_fraction - (1.0 - b)) / (2.0 * b - 1.0);
        let mut keys: Vec<_> = groups.keys().cloned().collect();
        keys.shuffle(&mut self.rng);
        // Weight the preference split by items so the global rate lands on target.
        let total = plans.len() as f64;
        let mut yes_items = 0.0;
        for key in keys {
            let members = &groups[&key];
            let prefer_yes = yes_items < q * total;
            if prefer_yes {
                yes_items += members.len() as f64;
            }
            let preferred = if prefer_yes { Answer::Yes } else { Answer::No };
            let keep = (b * members.len() as f64).round() as usize;
            let mut order = members.clone();
            order.shuffle(&mut self.rng);
            for (j, &i) in order.iter().enumerate() {
                plans[i].answer = if j < keep { preferred } else { preferred.flipped() };
            }
        }
    }

    fn annotate(&mut self, truth: Answer) -> Vec<String> {
        (0..ANSWERS_PER_QUESTION)
            .map(|_| {
                let a = if self.spec.disagreement > 0.0 && self.rng.random_bool(self.spec.disagreement) {
                    truth.flipped()
                } else {
                    truth
                };
                a.as_str().to_string()
            })
            .collect()
    }

    fn make_object(&mut self, instance: usize, x: f64, y: f64) -> ClipartObject {
        let entry = self.vocab.get(instance).expect("instance in vocabulary");
        let depth = self.rng.random_range(0..DEPTHS) as u8;
        let mut obj = match entry.category {
            Category::Human => {
                let proto = &self.prototypes[self.rng.random_range(0..POSE_PROTOTYPES)];
                let off = Normal::new(0.0, 0.005).expect("valid normal");
                let ang = Normal::new(0.0, 0.05).expect("valid normal");
                let pose = proto
                    .iter()
                    .map(|p| {
                        [
                            p[0] + off.sample(&mut self.rng),
                            p[1] + off.sample(&mut self.rng),
                            p[2] + ang.sample(&mut self.rng),
                        ]
                    })
                    .collect();
                let mut h = ClipartObject::human(instance, x, y, depth, pose);
                h.expression_id = Some(self.rng.random_range(0..self.vocab.expressions()));
                h.age_id = Some(self.rng.random_range(0..AGES));
                h.gender_id = Some(self.rng.random_range(0..GENDERS));
                h.skin_id = Some(self.rng.random_range(0..SKINS));
                h
            }
            Category::Animal => {
                let pose = self.rng.random_range(0..ANIMAL_POSES);
                ClipartObject::animal(instance, x, y, depth, pose)
            }
            c => ClipartObject::object(c, instance, x, y, depth),
        };
        obj.flip = self.rng.random_bool(0.5);
        obj
    }

    fn coord(&mut self) -> f64 {
        self.rng.random_range(0.05..0.95)
    }

    /// Two coordinates with `a + RELATION_GAP <= b`.
    fn ordered_pair(&mut self) -> (f64, f64) {
        let a = self.rng.random_range(0.05..0.95 - RELATION_GAP);
        let b = self.rng.random_range(a + RELATION_GAP..0.95);
        (a, b)
    }

    /// A point at distance within `[lo, hi]` of `(x, y)`, inside the canvas.
    fn point_at_distance(&mut self, x: f64, y: f64, lo: f64, hi: f64) -> (f64, f64) {
        for _ in 0..1000 {
            let d = self.rng.random_range(lo..hi);
            let t = self.rng.random_range(0.0..2.0 * PI);
            let (px, py) = (x + d * t.cos(), y + d * t.sin());
            if (0.0..=1.0).contains(&px) && (0.0..=1.0).contains(&py) {
                return (px, py);
            }
        }
        // Far from every corner there is always room; fall back to the
        // opposite corner, which is at least 0.5 away.
        let (cx, cy) = (if x < 0.5 { 1.0 } else { 0.0 }, if y < 0.5 { 1.0 } else { 0.0 });
        (cx, cy)
    }

    /// Positions (and the p flip) for a relational template.
    fn arrange(&mut self, template: Template, answer: Answer) -> ((f64, f64), (f64, f64), bool) {
        let yes = answer == Answer::Yes;
        let flip = self.rng.random_bool(0.5);
        match template {
            Template::LeftOf | Template::RightOf => {
                let (lo, hi) = self.ordered_pair();
                let p_left = yes == (template == Template::LeftOf);
                let (xp, xs) = if p_left { (lo, hi) } else { (hi, lo) };
                ((xp, self.coord()), (xs, self.coord()), flip)
            }
            Template::Above => {
                let (lo, hi) = self.ordered_pair();
                let (yp, ys) = if yes { (lo, hi) } else { (hi, lo) };
                ((self.coord(), yp), (self.coord(), ys), flip)
            }
            Template::Near => {
                let p = (self.coord(), self.coord());
                let s = if yes {
                    self.point_at_distance(p.0, p.1, 0.05, NEAR_MAX)
                } else {
                    self.point_at_distance(p.0, p.1, FAR_MIN, 0.8)
                };
                (p, s, flip)
            }
            Template::Facing => {
                let (lo, hi) = self.ordered_pair();
                let p_left = self.rng.random_bool(0.5);
                let (xp, xs) = if p_left { (lo, hi) } else { (hi, lo) };
                // Facing left means flip; p faces s when s lies on that side.
                let flip = (xs < xp) == yes;
                ((xp, self.coord()), (xs, self.coord()), flip)
            }
            Template::Exists => unreachable!("exists has no arrangement"),
        }
    }

    fn distractors(&mut self, st: SceneType, exclude: &[usize], k: usize) -> Vec<ClipartObject> {
        let mut ids: Vec<usize> = self
            .vocab
            .instances_for(st)
            .map(|e| e.instance_id)
            .filter(|id| !exclude.contains(id))
            .collect();
        ids.shuffle(&mut self.rng);
        ids.truncate(k);
        ids.into_iter()
            .map(|id| {
                let (x, y) = (self.coord(), self.coord());
                self.make_object(id, x, y)
            })
            .collect()
    }

    fn realize(&mut self, plan: &Plan, scene_id: String) -> Scene {
        let st = plan.scene_type;
        let total = self.rng.random_range(self.spec.min_objects..=self.spec.max_objects);
        let p_id = plan.p.instance;
        let s_id = plan.s.as_ref().map(|s| s.instance);
        let exclude: Vec<usize> = std::iter::once(p_id).chain(s_id).collect();
        let mut objects = Vec::new();
        match plan.template {
            Template::Exists => {
                if plan.answer == Answer::Yes {
                    let (x, y) = (self.coord(), self.coord());
                    objects.push(self.make_object(p_id, x, y));
                }
            }
            t => {
                let s_id = s_id.expect("relational plan has S");
                let keep_referents = plan.answer == Answer::Yes
                    || self.spec.complementary
                    || self.rng.random_bool(plan.p.correlation.min(plan.s.as_ref().map_or(1.0, |s| s.correlation)));
                if keep_referents {
                    let (pp, sp, flip) = self.arrange(t, plan.answer);
                    let mut p = self.make_object(p_id, pp.0, pp.1);
                    p.flip = flip;
                    objects.push(p);
                    objects.push(self.make_object(s_id, sp.0, sp.1));
                } else {
                    // The "no" comes from a missing referent.
                    let keep = if self.rng.random_bool(0.5) { p_id } else { s_id };
                    let (x, y) = (self.coord(), self.coord());
                    objects.push(self.make_object(keep, x, y));
                }
            }
        }
        let extra = total.saturating_sub(objects.len());
        objects.extend(self.distractors(st, &exclude, extra));
        objects.shuffle(&mut self.rng);
        Scene {
            scene_id,
            scene_type: st,
            objects,
        }
    }

    /// Minimal edit of `scene` that flips the answer of `plan`.
    fn complement(&mut self, plan: &Plan, scene: &Scene, scene_id: String) -> Scene {
        let mut objects = scene.objects.clone();
        let p_id = plan.p.instance;
        let s_id = plan.s.as_ref().map(|s| s.instance);
        let find = |objs: &[ClipartObject], id: usize| objs.iter().position(|o| o.instance_id == id);
        match plan.template {
            Template::Exists => {
                let exclude: Vec<usize> = objects.iter().map(|o| o.instance_id).collect();
                match find(&objects, p_id) {
                    Some(i) => {
                        // Swap the referent for an unrelated object at the same spot.
                        let (x, y) = (objects[i].x, objects[i].y);
                        let ids: Vec<usize> = self
                            .vocab
                            .instances_for(scene.scene_type)
                            .map(|e| e.instance_id)
                            .filter(|id| *id != p_id && !exclude.contains(id))
                            .collect();
                        let id = ids[self.rng.random_range(0..ids.len())];
                        objects[i] = self.make_object(id, x, y);
                    }
                    None => {
                        let i = self.rng.random_range(0..objects.len());
                        let (x, y) = (objects[i].x, objects[i].y);
                        objects[i] = self.make_object(p_id, x, y);
                    }
                }
            }
            Template::LeftOf | Template::RightOf | Template::Above => {
                let (i, j) = (
                    find(&objects, p_id).expect("p present"),
                    find(&objects, s_id.expect("relational")).expect("s present"),
                );
                if plan.template == Template::Above {
                    let (a, b) = (objects[i].y, objects[j].y);
                    objects[i].y = b;
                    objects[j].y = a;
                } else {
                    let (a, b) = (objects[i].x, objects[j].x);
                    objects[i].x = b;
                    objects[j].x = a;
                }
            }
            Template::Near => {
                let (i, j) = (
                    find(&objects, p_id).expect("p present"),
                    find(&objects, s_id.expect("relational")).expect("s present"),
                );
                let (x, y) = (objects[i].x, objects[i].y);
                let (nx, ny) = if plan.answer == Answer::Yes {
                    self.point_at_distance(x, y, FAR_MIN, 0.8)
                } else {
                    self.point_at_distance(x, y, 0.05, NEAR_MAX)
                };
                objects[j].x = nx;
                objects[j].y = ny;
            }
            Template::Facing => {
                let i = find(&objects, p_id).expect("p present");
                objects[i].flip = !objects[i].flip;
            }
        }
        Scene {
            scene_id,
            scene_type: scene.scene_type,
            objects,
        }
    }

    /// Random vectors for every word the templates and phrases can produce.
    fn embeddings(&self, seed: u64) -> EmbeddingTable {
        let mut words: Vec<String> = Template::ALL
            .iter()
            .flat_map(|t| t.words().iter().map(|w| w.to_string()))
            .collect();
        for (planted, names) in self.pools.values() {
            words.extend(planted.iter().chain(names).map(|p| p.text.clone()));
        }
        words.sort();
        words.dedup();
        let dim = self.spec.embedding_dim;
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt() * 3.0).expect("valid normal");
        let mut rng = seed::derived_rng(seed, "synth/embeddings");
        let rows = words
            .into_iter()
            .map(|w| {
                let v = (0..dim).map(|_| normal.sample(&mut rng)).collect();
                (w, v)
            })
            .collect();
        EmbeddingTable::from_rows(dim, rows).expect("generated rows share one dimension")
    }
}

/// First object of an instance in the scene.
fn referent(scene: &Scene, instance: usize) -> Option<&ClipartObject> {
    scene.objects.iter().find(|o| o.instance_id == instance)
}

/// The answer a template question has on `scene`.
pub fn template_truth(template: Template, p: usize, s: Option<usize>, scene: &Scene) -> Answer {
    let yes = |b: bool| if b { Answer::Yes } else { Answer::No };
    let Some(po) = referent(scene, p) else {
        return Answer::No;
    };
    if template == Template::Exists {
        return Answer::Yes;
    }
    let Some(so) = s.and_then(|s| referent(scene, s)) else {
        return Answer::No;
    };
    yes(match template {
        Template::Exists => true,
        Template::LeftOf => po.x < so.x,
        Template::RightOf => po.x > so.x,
        Template::Above => po.y < so.y,
        Template::Near => ((po.x - so.x).powi(2) + (po.y - so.y).powi(2)).sqrt() < NEAR_THRESHOLD,
        Template::Facing => po.flip == (so.x < po.x),
    })
}

fn article(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

/// Question text and its parse. The parse covers the preprocessed question,
/// so a decorated text still maps onto the same tokens.
fn question(plan: &Plan, decorate: bool) -> (String, ParsedQuestion) {
    let p = plan.p.text.as_str();
    let tok = |w: &str, pos: &str, dep: &str, head: usize| Token::new(w, pos, dep, head);
    let (mut text, tokens) = match plan.template {
        Template::Exists => {
            let a = article(p);
            (
                format!("Is there {a} {p}"),
                vec![
                    tok("Is", "VBZ", "root", 0),
                    tok("there", "EX", "expl", 1),
                    tok(a, "DT", "det", 4),
                    tok(p, "NN", "nsubj", 1),
                ],
            )
        }
        t => {
            let s = plan.s.as_ref().expect("relational plan has S").text.as_str();
            match t {
                Template::LeftOf | Template::RightOf => {
                    let side = if t == Template::LeftOf { "left" } else { "right" };
                    (
                        format!("Is the {p} {side} of the {s}"),
                        vec![
                            tok("Is", "VBZ", "cop", 4),
                            tok("the", "DT", "det", 3),
                            tok(p, "NN", "nsubj", 4),
                            tok(side, "RB", "root", 0),
                            tok("of", "IN", "case", 7),
                            tok("the", "DT", "det", 7),
                            tok(s, "NN", "nmod", 4),
                        ],
                    )
                }
                Template::Above | Template::Near => {
                    let prep = if t == Template::Above { "above" } else { "near" };
                    (
                        format!("Is the {p} {prep} the {s}"),
                        vec![
                            tok("Is", "VBZ", "cop", 6),
                            tok("the", "DT", "det", 3),
                            tok(p, "NN", "nsubj", 6),
                            tok(prep, "IN", "case", 6),
                            tok("the", "DT", "det", 6),
                            tok(s, "NN", "root", 0),
                        ],
                    )
                }
                _ => (
                    format!("Is the {p} facing the {s}"),
                    vec![
                        tok("Is", "VBZ", "aux", 4),
                        tok("the", "DT", "det", 3),
                        tok(p, "NN", "nsubj", 4),
                        tok("facing", "VBG", "root", 0),
                        tok("the", "DT", "det", 6),
                        tok(s, "NN", "dobj", 4),
                    ],
                ),
            }
        }
    };
    if decorate {
        text.push_str(" in the picture");
    }
    text.push('?');
    let parse = ParsedQuestion::new(tokens).expect("template parses have one root");
    (text, parse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{validate_scene, write_corpus};

    fn spec(scenes: usize) -> GeneratorSpec {
        GeneratorSpec {
            scenes,
            templates: vec![Template::Exists, Template::LeftOf],
            ..GeneratorSpec::default()
        }
    }

    fn bytes(c: &Corpus) -> Vec<u8> {
        let mut buf = Vec::new();
        write_corpus(c, &mut buf, None).unwrap();
        buf
    }

    #[test]
    fn deterministic() {
        let s = GeneratorSpec {
            scenes: 100,
            templates: vec![Template::Exists, Template::Near],
            ..GeneratorSpec::default()
        };
        let a = generate_synthetic_corpus(&s, 7).unwrap();
        let b = generate_synthetic_corpus(&s, 7).unwrap();
        assert_eq!(bytes(&a.corpus), bytes(&b.corpus));
        assert_eq!(a.parses, b.parses);
        assert_eq!(a.embeddings, b.embeddings);
        let c = generate_synthetic_corpus(&s, 8).unwrap();
        assert_ne!(bytes(&a.corpus), bytes(&c.corpus));
    }

    #[test]
    fn scenes_are_valid_and_answers_match_truth() {
        let s = GeneratorSpec {
            scenes: 300,
            ..GeneratorSpec::default()
        };
        let g = generate_synthetic_corpus(&s, 3).unwrap();
        for item in &g.corpus.items {
            let scene = g.corpus.scene_of(item);
            assert!(validate_scene(scene, &g.corpus.vocab).is_empty());
            let (p, s) = g.referents[&item.question_id];
            let truth = template_truth(g.templates[&item.question_id], p, s, scene);
            assert_eq!(item.majority_answer(), truth, "{}", item.question_text);
        }
    }

    #[test]
    fn planted_phrase_has_its_instance() {
        let s = GeneratorSpec {
            scenes: 400,
            indoor_fraction: 0.0,
            plants: vec![Plant {
                phrase: "cat".into(),
                instance_id: 32,
                correlation: 1.0,
            }],
            allow_nearest: true,
            ..GeneratorSpec::default()
        };
        let g = generate_synthetic_corpus(&s, 5).unwrap();
        let mut mentioned = 0;
        for item in &g.corpus.items {
            let words: Vec<String> = crate::parser::question_tokens(&item.question_text);
            if words.iter().any(|w| w == "cat") && item.majority_answer() == Answer::Yes {
                mentioned += 1;
                assert!(g.corpus.scene_of(item).objects.iter().any(|o| o.instance_id == 32));
            }
        }
        assert!(mentioned > 20);
    }

    #[test]
    fn balance_is_exact_per_template() {
        let g = generate_synthetic_corpus(&spec(1000), 1).unwrap();
        let yes = g
            .corpus
            .items
            .iter()
            .filter(|i| i.majority_answer() == Answer::Yes)
            .count();
        let frac = yes as f64 / 1000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }

    #[test]
    fn odd_counts_are_infeasible_unless_allowed() {
        let err = generate_synthetic_corpus(&spec(202), 1).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSpec(_)));
        let ok = GeneratorSpec {
            allow_nearest: true,
            ..spec(202)
        };
        assert!(generate_synthetic_corpus(&ok, 1).is_ok());
    }

    #[test]
    fn complementary_pairs_flip() {
        let s = GeneratorSpec {
            scenes: 240,
            complementary: true,
            ..GeneratorSpec::default()
        };
        let g = generate_synthetic_corpus(&s, 9).unwrap();
        let c = &g.corpus;
        for item in &c.items {
            let other = c.item(item.complement_of.as_deref().unwrap()).unwrap();
            assert_eq!(other.question_text, item.question_text);
            assert_ne!(other.majority_answer(), item.majority_answer());
            assert_eq!(other.complement_of.as_deref(), Some(item.question_id.as_str()));
        }
    }

    #[test]
    fn prefix_bias_is_planted() {
        let s = GeneratorSpec {
            scenes: 1200,
            templates: vec![Template::Exists, Template::Above],
            max_phrases: Some(5),
            prefix_bias: Some(0.8),
            yes_fraction: 0.7,
            ..GeneratorSpec::default()
        };
        let g = generate_synthetic_corpus(&s, 2).unwrap();
        let audit = crate::eval::balance_audit(&g.corpus);
        assert!((audit.yes_fraction - 0.7).abs() < 0.06, "{}", audit.yes_fraction);
        for p in audit.prefixes.iter().filter(|p| p.items >= 20) {
            assert!((p.majority_share - 0.8).abs() < 0.03, "{p:?}");
        }
    }

    #[test]
    fn disagreement_zero_gives_unanimous_answers() {
        let g = generate_synthetic_corpus(&spec(100), 4).unwrap();
        for item in &g.corpus.items {
            assert!(item.human_answers.iter().all(|a| a == &item.human_answers[0]));
        }
        let noisy = GeneratorSpec {
            disagreement: 0.2,
            ..spec(100)
        };
        let g = generate_synthetic_corpus(&noisy, 4).unwrap();
        assert!(g
            .corpus
            .items
            .iter()
            .any(|i| i.human_answers.iter().any(|a| a != &i.human_answers[0])));
    }

    #[test]
    fn spec_fields_are_optional() {
        let s: GeneratorSpec = serde_json::from_str(r#"{"scenes": 10}"#).unwrap();
        assert_eq!(s.scenes, 10);
        assert_eq!(s.yes_fraction, 0.5);
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"scene": 10}"#).is_err());
    }
}
