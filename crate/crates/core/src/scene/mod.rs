//! Abstract scenes, question/answer annotations and corpus I/O.

mod io;
pub mod synth;
mod validate;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use io::{load_corpus, load_corpus_with, read_corpus, write_corpus, write_corpus_file};
pub use synth::{generate_synthetic_corpus, GeneratorSpec, SyntheticCorpus};
pub use validate::{validate_scene, Violation};
pub use vocab::{Availability, VocabEntry, Vocabulary};

/// Number of deformable body parts in a human pose.
pub const POSE_PARTS: usize = 15;
/// Discrete depth levels.
pub const DEPTHS: usize = 5;
pub const AGES: usize = 5;
pub const GENDERS: usize = 2;
pub const SKINS: usize = 3;
pub const ANIMAL_POSES: usize = 10;
/// Human answers per question.
pub const ANSWERS_PER_QUESTION: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Human,
    Animal,
    LargeObject,
    SmallObject,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Human,
        Category::Animal,
        Category::LargeObject,
        Category::SmallObject,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Human => "human",
            Category::Animal => "animal",
            Category::LargeObject => "large_object",
            Category::SmallObject => "small_object",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneType {
    Indoor,
    Outdoor,
}

impl SceneType {
    pub const ALL: [SceneType; 2] = [SceneType::Indoor, SceneType::Outdoor];

    pub fn as_str(self) -> &'static str {
        match self {
            SceneType::Indoor => "indoor",
            SceneType::Outdoor => "outdoor",
        }
    }

    pub fn parse(s: &str) -> Option<SceneType> {
        match s {
            "indoor" => Some(SceneType::Indoor),
            "outdoor" => Some(SceneType::Outdoor),
            _ => None,
        }
    }
}

impl fmt::Display for SceneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One clipart piece placed in a scene. Positions are normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipartObject {
    pub category: Category,
    pub instance_id: usize,
    pub flip: bool,
    pub x: f64,
    pub y: f64,
    pub depth: u8,
    /// Per body part `(x-offset, y-offset, global angle)`; humans only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skin_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub animal_pose_id: Option<usize>,
}

impl ClipartObject {
    /// A non-human, non-animal object.
    pub fn object(category: Category, instance_id: usize, x: f64, y: f64, depth: u8) -> Self {
        ClipartObject {
            category,
            instance_id,
            flip: false,
            x,
            y,
            depth,
            pose: None,
            expression_id: None,
            age_id: None,
            gender_id: None,
            skin_id: None,
            animal_pose_id: None,
        }
    }

    pub fn animal(instance_id: usize, x: f64, y: f64, depth: u8, pose_id: usize) -> Self {
        ClipartObject {
            animal_pose_id: Some(pose_id),
            ..ClipartObject::object(Category::Animal, instance_id, x, y, depth)
        }
    }

    pub fn human(instance_id: usize, x: f64, y: f64, depth: u8, pose: Vec<[f64; 3]>) -> Self {
        ClipartObject {
            pose: Some(pose),
            expression_id: Some(0),
            age_id: Some(0),
            gender_id: Some(0),
            skin_id: Some(0),
            ..ClipartObject::object(Category::Human, instance_id, x, y, depth)
        }
    }

    /// Raw pose vector: the 15 `(x, y)` offsets followed by the 15 angles.
    pub fn pose_vector(&self) -> Option<Vec<f64>> {
        self.pose.as_ref().map(|parts| pose_vector(parts))
    }
}

pub fn pose_vector(parts: &[[f64; 3]]) -> Vec<f64> {
    let mut v = Vec::with_capacity(parts.len() * 3);
    for p in parts {
        v.push(p[0]);
        v.push(p[1]);
    }
    v.extend(parts.iter().map(|p| p[2]));
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub scene_type: SceneType,
    pub objects: Vec<ClipartObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    /// Class index used by the verifier: 0 = yes, 1 = no.
    pub fn label(self) -> usize {
        match self {
            Answer::Yes => 0,
            Answer::No => 1,
        }
    }

    pub fn from_label(label: usize) -> Answer {
        if label == 0 {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        }
    }

    pub fn flipped(self) -> Answer {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
        }
    }

    /// Parses a normalized answer string.
    pub fn parse(s: &str) -> Option<Answer> {
        match crate::eval::normalize_answer(s).as_str() {
            "yes" => Some(Answer::Yes),
            "no" => Some(Answer::No),
            _ => None,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub question_id: String,
    pub scene_id: String,
    pub question_text: String,
    pub human_answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complement_of: Option<String>,
}

impl QaItem {
    /// Majority yes/no among the human answers; ties go to "yes".
    pub fn majority_answer(&self) -> Answer {
        let (mut yes, mut no) = (0usize, 0usize);
        for a in &self.human_answers {
            match Answer::parse(a) {
                Some(Answer::Yes) => yes += 1,
                Some(Answer::No) => no += 1,
                None => {}
            }
        }
        if no > yes {
            Answer::No
        } else {
            Answer::Yes
        }
    }
}

/// Scenes, annotations and the clipart vocabulary they draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub scenes: BTreeMap<String, Scene>,
    pub items: Vec<QaItem>,
    pub vocab: Vocabulary,
}

impl Corpus {
    pub fn scene(&self, scene_id: &str) -> Option<&Scene> {
        self.scenes.get(scene_id)
    }

    pub fn item(&self, question_id: &str) -> Option<&QaItem> {
        self.items.iter().find(|i| i.question_id == question_id)
    }

    /// Scene of an item. Panics only if the corpus invariant is broken.
    pub fn scene_of(&self, item: &QaItem) -> &Scene {
        &self.scenes[&item.scene_id]
    }

    /// A corpus restricted to the given items and the scenes they use.
    pub fn subset<'a>(&self, items: impl IntoIterator<Item = &'a QaItem>) -> Corpus {
        let items: Vec<QaItem> = items.into_iter().cloned().collect();
        let scenes = items
            .iter()
            .map(|i| (i.scene_id.clone(), self.scenes[&i.scene_id].clone()))
            .collect();
        Corpus {
            scenes,
            items,
            vocab: self.vocab.clone(),
        }
    }
}
