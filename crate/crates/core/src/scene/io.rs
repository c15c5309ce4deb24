//! Line-delimited JSON corpus files. Each line is one record discriminated by
//! `kind`: `scene`, `qa`, or an optional leading `provenance` record.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_scene, ClipartObject, Corpus, QaItem, Scene, SceneType, Vocabulary, ANSWERS_PER_QUESTION};
use crate::provenance::Provenance;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Provenance(Provenance),
    Scene(SceneRecord),
    Qa(QaItem),
}

#[derive(Serialize, Deserialize)]
struct SceneRecord {
    scene_id: String,
    scene_type: SceneType,
    objects: Vec<ClipartObject>,
    /// When present, object positions are in pixels and get normalized on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canvas_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canvas_height: Option<f64>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    load_corpus_with(path, Vocabulary::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, vocab: Vocabulary) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), &path.display().to_string(), vocab)
}

pub fn read_corpus(reader: impl BufRead, origin: &str, vocab: Vocabulary) -> Result<Corpus> {
    let mut scenes = BTreeMap::new();
    let mut items: Vec<QaItem> = Vec::new();
    let mut item_lines = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::format(origin, lineno, format!("malformed record: {e}")))?;
        match record {
            Record::Provenance(_) => {}
            Record::Scene(rec) => {
                let scene = normalize(rec).map_err(|m| Error::format(origin, lineno, m))?;
                if let Some(v) = validate_scene(&scene, &vocab).into_iter().next() {
                    return Err(Error::format(
                        origin,
                        lineno,
                        format!("scene {}: {v}", scene.scene_id),
                    ));
                }
                if scenes.contains_key(&scene.scene_id) {
                    return Err(Error::format(
                        origin,
                        lineno,
                        format!("duplicate scene id {}", scene.scene_id),
                    ));
                }
                scenes.insert(scene.scene_id.clone(), scene);
            }
            Record::Qa(item) => {
                if item.human_answers.len() != ANSWERS_PER_QUESTION {
                    return Err(Error::AnswerCount {
                        question_id: item.question_id,
                        found: item.human_answers.len(),
                    });
                }
                items.push(item);
                item_lines.push(lineno);
            }
        }
    }

    let mut by_id: HashMap<&str, &QaItem> = HashMap::new();
    for (item, &lineno) in items.iter().zip(&item_lines) {
        if by_id.insert(&item.question_id, item).is_some() {
            return Err(Error::format(
                origin,
                lineno,
                format!("duplicate question id {}", item.question_id),
            ));
        }
        if !scenes.contains_key(&item.scene_id) {
            return Err(Error::DanglingScene {
                question_id: item.question_id.clone(),
                scene_id: item.scene_id.clone(),
            });
        }
    }
    for (item, &lineno) in items.iter().zip(&item_lines) {
        if let Some(other) = &item.complement_of {
            let symmetric = by_id
                .get(other.as_str())
                .is_some_and(|o| o.complement_of.as_deref() == Some(item.question_id.as_str()));
            if !symmetric {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!(
                        "complement link {} -> {} is not symmetric",
                        item.question_id, other
                    ),
                ));
            }
        }
    }

    Ok(Corpus {
        scenes,
        items,
        vocab,
    })
}

fn normalize(rec: SceneRecord) -> std::result::Result<Scene, String> {
    let mut objects = rec.objects;
    match (rec.canvas_width, rec.canvas_height) {
        (None, None) => {}
        (Some(w), Some(h)) if w > 0.0 && h > 0.0 => {
            for o in &mut objects {
                o.x /= w;
                o.y /= h;
            }
        }
        _ => return Err("canvas_width and canvas_height must both be positive when given".into()),
    }
    Ok(Scene {
        scene_id: rec.scene_id,
        scene_type: rec.scene_type,
        objects,
    })
}

/// Writes scenes (in id order) and then items (in corpus order).
pub fn write_corpus(corpus: &Corpus, mut out: impl Write, provenance: Option<&Provenance>) -> std::io::Result<()> {
    if let Some(p) = provenance {
        serde_json::to_writer(&mut out, &Record::Provenance(p.clone()))?;
        out.write_all(b"\n")?;
    }
    for scene in corpus.scenes.values() {
        let rec = Record::Scene(SceneRecord {
            scene_id: scene.scene_id.clone(),
            scene_type: scene.scene_type,
            objects: scene.objects.clone(),
            canvas_width: None,
            canvas_height: None,
        });
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    for item in &corpus.items {
        serde_json::to_writer(&mut out, &Record::Qa(item.clone()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_corpus_file(corpus: &Corpus, path: impl AsRef<Path>, provenance: Option<&Provenance>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus(corpus, &mut w, provenance).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Category;

    fn answers(yes: usize) -> String {
        let v: Vec<String> = (0..10)
            .map(|i| if i < yes { "\"yes\"".into() } else { "\"no\"".into() })
            .collect();
        format!("[{}]", v.join(","))
    }

    fn two_scene_file() -> String {
        let v = Vocabulary::default();
        let cat = v.find_by_name("cat")[0];
        let tree = v.find_by_name("tree")[0];
        format!(
            concat!(
                r#"{{"kind":"scene","scene_id":"s1","scene_type":"indoor","objects":[{{"category":"animal","instance_id":{cat},"flip":false,"x":0.2,"y":0.3,"depth":1,"animal_pose_id":2}}]}}"#,
                "\n",
                r#"{{"kind":"scene","scene_id":"s2","scene_type":"outdoor","objects":[{{"category":"large_object","instance_id":{tree},"flip":true,"x":0.7,"y":0.1,"depth":4}}]}}"#,
                "\n",
                r#"{{"kind":"qa","question_id":"q1","scene_id":"s1","question_text":"Is there a cat?","human_answers":{a}}}"#,
                "\n"
            ),
            cat = cat,
            tree = tree,
            a = answers(8)
        )
    }

    fn read(text: &str) -> Result<Corpus> {
        read_corpus(text.as_bytes(), "mem", Vocabulary::default())
    }

    #[test]
    fn loads_two_scenes() {
        let c = read(&two_scene_file()).unwrap();
        assert_eq!(c.scenes.len(), 2);
        assert_eq!(c.items.len(), 1);
        assert_eq!(c.scenes["s2"].objects[0].category, Category::LargeObject);
    }

    #[test]
    fn dangling_scene_is_rejected() {
        let text = two_scene_file().replace(r#""scene_id":"s1","question_text""#, r#""scene_id":"s9","question_text""#);
        match read(&text) {
            Err(Error::DanglingScene { scene_id, .. }) => assert_eq!(scene_id, "s9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nine_answers_are_rejected() {
        let text = two_scene_file().replace(&answers(8), r#"["yes","yes","yes","yes","yes","yes","yes","yes","no"]"#);
        match read(&text) {
            Err(Error::AnswerCount { question_id, found }) => {
                assert_eq!(question_id, "q1");
                assert_eq!(found, 9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{}{{\"kind\":\"scene\",\n", two_scene_file());
        let err = read(&text).unwrap_err();
        assert!(err.to_string().starts_with("mem:4:"), "{err}");
    }

    #[test]
    fn canvas_positions_are_normalized() {
        let v = Vocabulary::default();
        let tree = v.find_by_name("tree")[0];
        let text = format!(
            r#"{{"kind":"scene","scene_id":"s","scene_type":"outdoor","canvas_width":700,"canvas_height":400,"objects":[{{"category":"large_object","instance_id":{tree},"flip":false,"x":350,"y":100,"depth":0}}]}}"#
        );
        let c = read(&text).unwrap();
        let o = &c.scenes["s"].objects[0];
        assert_eq!((o.x, o.y), (0.5, 0.25));
    }

    #[test]
    fn asymmetric_complement_is_rejected() {
        let mut text = two_scene_file();
        text = text.replace(
            r#""question_text":"Is there a cat?","#,
            r#""question_text":"Is there a cat?","complement_of":"q1","#,
        );
        // q1 -> q1 is symmetric with itself; point at a missing id instead.
        let bad = text.replace(r#""complement_of":"q1""#, r#""complement_of":"q2""#);
        assert!(read(&bad).is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let c = read(&two_scene_file()).unwrap();
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf, Some(&Provenance::adhoc(1))).unwrap();
        let back = read_corpus(buf.as_slice(), "buf", Vocabulary::default()).unwrap();
        assert_eq!(back, c);
    }
}
