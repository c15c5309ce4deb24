use std::path::Path;

use super::{Category, SceneType};
use crate::{Error, Result};

const DEFAULT_VOCAB: &str = include_str!("../../data/vocab.tsv");
/// Expressions available to human models unless the vocabulary file says otherwise.
pub const DEFAULT_EXPRESSIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Availability {
    Indoor,
    Outdoor,
    Both,
}

impl Availability {
    pub fn admits(self, scene_type: SceneType) -> bool {
        matches!(
            (self, scene_type),
            (Availability::Both, _)
                | (Availability::Indoor, SceneType::Indoor)
                | (Availability::Outdoor, SceneType::Outdoor)
        )
    }

    fn as_str(self) -> &'static str {
        match self {
            Availability::Indoor => "indoor",
            Availability::Outdoor => "outdoor",
            Availability::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub instance_id: usize,
    pub name: String,
    pub category: Category,
    pub availability: Availability,
}

/// Clipart vocabulary: instance names, categories and scene-type admissibility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    expressions: usize,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::parse(DEFAULT_VOCAB, "<default vocabulary>").expect("bundled vocabulary is valid")
    }
}

impl Vocabulary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::parse(&text, &path.display().to_string())
    }

    /// Parses `instance_id<TAB>name<TAB>category<TAB>indoor|outdoor|both` lines.
    /// A `# expressions: N` comment sets the expression count.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut expressions = DEFAULT_EXPRESSIONS;
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("expressions:") {
                    expressions = n.trim().parse().map_err(|_| {
                        Error::format(origin, lineno, "expression count is not an integer")
                    })?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::format(origin, lineno, "expected 4 tab-separated fields"));
            }
            let instance_id: usize = fields[0]
                .parse()
                .map_err(|_| Error::format(origin, lineno, "instance id is not an integer"))?;
            if instance_id != entries.len() {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!("instance ids must be contiguous from 0, expected {}", entries.len()),
                ));
            }
            let category = Category::parse(fields[2])
                .ok_or_else(|| Error::format(origin, lineno, format!("unknown category {:?}", fields[2])))?;
            let availability = match fields[3] {
                "indoor" => Availability::Indoor,
                "outdoor" => Availability::Outdoor,
                "both" => Availability::Both,
                other => {
                    return Err(Error::format(origin, lineno, format!("unknown scene type {other:?}")))
                }
            };
            entries.push(VocabEntry {
                instance_id,
                name: fields[1].to_string(),
                category,
                availability,
            });
        }
        if entries.is_empty() {
            return Err(Error::format(origin, 0, "vocabulary is empty"));
        }
        Ok(Vocabulary {
            entries,
            expressions,
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("# expressions: {}\n", self.expressions);
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.instance_id,
                e.name,
                e.category.as_str(),
                e.availability.as_str()
            ));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn expressions(&self) -> usize {
        self.expressions
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn get(&self, instance_id: usize) -> Option<&VocabEntry> {
        self.entries.get(instance_id)
    }

    pub fn name(&self, instance_id: usize) -> Option<&str> {
        self.get(instance_id).map(|e| e.name.as_str())
    }

    pub fn admissible(&self, instance_id: usize, scene_type: SceneType) -> bool {
        self.get(instance_id)
            .is_some_and(|e| e.availability.admits(scene_type))
    }

    /// Instances usable in a scene type, in id order.
    pub fn instances_for(&self, scene_type: SceneType) -> impl Iterator<Item = &VocabEntry> + '_ {
        self.entries
            .iter()
            .filter(move |e| e.availability.admits(scene_type))
    }

    /// Instance ids whose name equals `name` (case-insensitive).
    pub fn find_by_name(&self, name: &str) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.name.eq_ignore_ascii_case(name))
            .map(|e| e.instance_id)
            .collect()
    }

    /// Ids of all non-human instances, in id order.
    pub fn non_human_ids(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.category != Category::Human)
            .map(|e| e.instance_id)
            .collect()
    }
}
