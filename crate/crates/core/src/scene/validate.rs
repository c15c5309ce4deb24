use std::fmt;

use super::{Category, Scene, Vocabulary, AGES, ANIMAL_POSES, DEPTHS, GENDERS, POSE_PARTS, SKINS};

/// A broken invariant in a scene. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub object: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object {
            Some(i) => write!(f, "object {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub fn validate_scene(scene: &Scene, vocab: &Vocabulary) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |i: usize, message: String| {
        out.push(Violation {
            object: Some(i),
            message,
        })
    };

    for (i, obj) in scene.objects.iter().enumerate() {
        match vocab.get(obj.instance_id) {
            None => flag(
                i,
                format!("instance {} outside vocabulary of {}", obj.instance_id, vocab.len()),
            ),
            Some(entry) => {
                if entry.category != obj.category {
                    flag(
                        i,
                        format!(
                            "instance {} ({}) is a {}, object says {}",
                            obj.instance_id,
                            entry.name,
                            entry.category.as_str(),
                            obj.category.as_str()
                        ),
                    );
                }
                if !entry.availability.admits(scene.scene_type) {
                    flag(
                        i,
                        format!("{} is not available in {} scenes", entry.name, scene.scene_type),
                    );
                }
            }
        }

        if !(0.0..=1.0).contains(&obj.x) || !(0.0..=1.0).contains(&obj.y) {
            flag(i, format!("position ({}, {}) outside [0, 1]", obj.x, obj.y));
        }
        if obj.depth as usize >= DEPTHS {
            flag(i, format!("depth {} outside 0..{}", obj.depth, DEPTHS - 1));
        }

        let human = obj.category == Category::Human;
        match (&obj.pose, human) {
            (None, true) => flag(i, "human without pose".into()),
            (Some(_), false) => flag(i, "pose on a non-human".into()),
            (Some(p), true) if p.len() != POSE_PARTS => {
                flag(i, format!("pose has {} parts, expected {POSE_PARTS}", p.len()))
            }
            (Some(p), true) if p.iter().flatten().any(|v| !v.is_finite()) => {
                flag(i, "pose contains non-finite values".into())
            }
            _ => {}
        }

        let attrs = [
            ("expression", obj.expression_id, vocab.expressions()),
            ("age", obj.age_id, AGES),
            ("gender", obj.gender_id, GENDERS),
            ("skin", obj.skin_id, SKINS),
        ];
        for (name, value, limit) in attrs {
            match (value, human) {
                (None, true) => flag(i, format!("human without {name}")),
                (Some(_), false) => flag(i, format!("{name} on a non-human")),
                (Some(v), true) if v >= limit => flag(i, format!("{name} {v} outside 0..{}", limit - 1)),
                _ => {}
            }
        }

        let animal = obj.category == Category::Animal;
        match (obj.animal_pose_id, animal) {
            (None, true) => flag(i, "animal without discrete pose".into()),
            (Some(_), false) => flag(i, "animal pose on a non-animal".into()),
            (Some(p), true) if p >= ANIMAL_POSES => {
                flag(i, format!("animal pose {p} outside 0..{}", ANIMAL_POSES - 1))
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ClipartObject, SceneType};

    fn pose() -> Vec<[f64; 3]> {
        vec![[0.0, 0.0, 0.0]; POSE_PARTS]
    }

    #[test]
    fn valid_scene_has_no_violations() {
        let v = Vocabulary::default();
        let cat = v.find_by_name("cat")[0];
        let couch = v.find_by_name("couch")[0];
        let girl = v.find_by_name("girl")[0];
        let scene = Scene {
            scene_id: "s".into(),
            scene_type: SceneType::Indoor,
            objects: vec![
                ClipartObject::animal(cat, 0.2, 0.5, 1, 3),
                ClipartObject::object(Category::LargeObject, couch, 0.6, 0.5, 2),
                ClipartObject::human(girl, 0.4, 0.4, 0, pose()),
            ],
        };
        assert!(validate_scene(&scene, &v).is_empty());
    }

    #[test]
    fn deer_indoors_is_flagged() {
        let v = Vocabulary::default();
        let deer = v.find_by_name("deer")[0];
        let scene = Scene {
            scene_id: "s".into(),
            scene_type: SceneType::Indoor,
            objects: vec![ClipartObject::animal(deer, 0.5, 0.5, 0, 0)],
        };
        let violations = validate_scene(&scene, &v);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].message.contains("deer"));
    }

    #[test]
    fn human_without_pose_is_flagged() {
        let v = Vocabulary::default();
        let girl = v.find_by_name("girl")[0];
        let mut obj = ClipartObject::human(girl, 0.5, 0.5, 0, pose());
        obj.pose = None;
        let scene = Scene {
            scene_id: "s".into(),
            scene_type: SceneType::Outdoor,
            objects: vec![obj],
        };
        let violations = validate_scene(&scene, &v);
        assert!(violations.iter().any(|v| v.message == "human without pose"));
    }

    #[test]
    fn range_checks() {
        let v = Vocabulary::default();
        let cat = v.find_by_name("cat")[0];
        let mut obj = ClipartObject::animal(cat, 1.5, 0.5, 7, 12);
        obj.expression_id = Some(1);
        let scene = Scene {
            scene_id: "s".into(),
            scene_type: SceneType::Outdoor,
            objects: vec![obj],
        };
        let msgs: Vec<String> = validate_scene(&scene, &v).into_iter().map(|v| v.message).collect();
        assert_eq!(msgs.len(), 4, "{msgs:?}");
    }
}
