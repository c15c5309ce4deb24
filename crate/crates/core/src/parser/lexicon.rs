use std::path::Path;

use crate::{Error, Result};

const DROP_PHRASES: &str = include_str!("../../data/lexicons/drop_phrases.txt");
const ENTITY_KEEP_LIST: &str = include_str!("../../data/lexicons/entity_keep_list.txt");
const PRONOUN_STOP_LIST: &str = include_str!("../../data/lexicons/pronoun_stop_list.txt");
const REAL_OBJECT_LIST: &str = include_str!("../../data/lexicons/real_object_list.txt");
const LOCATION_LIST: &str = include_str!("../../data/lexicons/location_list.txt");
const SPECIAL_SKIP_PHRASES: &str = include_str!("../../data/lexicons/special_skip_phrases.txt");
const NEGATION_MARKERS: &str = include_str!("../../data/lexicons/negation_markers.txt");
const PREPOSITIONS: &str = include_str!("../../data/lexicons/prepositions.txt");

/// Word lists driving the parsing rules. Multi-word entries are stored as
/// lowercase word sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub drop_phrases: Vec<Vec<String>>,
    pub entity_keep_list: Vec<String>,
    pub pronoun_stop_list: Vec<String>,
    pub real_object_list: Vec<Vec<String>>,
    pub location_list: Vec<Vec<String>>,
    pub special_skip_phrases: Vec<Vec<String>>,
    pub negation_markers: Vec<String>,
    pub prepositions: Vec<String>,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            drop_phrases: phrases(DROP_PHRASES),
            entity_keep_list: entries(ENTITY_KEEP_LIST),
            pronoun_stop_list: entries(PRONOUN_STOP_LIST),
            real_object_list: phrases(REAL_OBJECT_LIST),
            location_list: phrases(LOCATION_LIST),
            special_skip_phrases: phrases(SPECIAL_SKIP_PHRASES),
            negation_markers: entries(NEGATION_MARKERS),
            prepositions: entries(PREPOSITIONS),
        }
    }
}

/// One entry per non-empty line; `#` starts a comment line.
fn entries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Entries split into words, longest first (stable for equal lengths).
fn phrases(text: &str) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = entries(text)
        .into_iter()
        .map(|e| e.split_whitespace().map(str::to_string).collect())
        .collect();
    out.sort_by_key(|p: &Vec<String>| std::cmp::Reverse(p.len()));
    out
}

impl Lexicons {
    /// Loads lexicons from `dir`, one `<field>.txt` file per list. Missing
    /// files fall back to the bundled defaults.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str, default: &'static str| -> Result<String> {
            let path = dir.join(format!("{name}.txt"));
            match std::fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(default.to_string()),
                Err(e) => Err(Error::io(path, e)),
            }
        };
        Ok(Lexicons {
            drop_phrases: phrases(&read("drop_phrases", DROP_PHRASES)?),
            entity_keep_list: entries(&read("entity_keep_list", ENTITY_KEEP_LIST)?),
            pronoun_stop_list: entries(&read("pronoun_stop_list", PRONOUN_STOP_LIST)?),
            real_object_list: phrases(&read("real_object_list", REAL_OBJECT_LIST)?),
            location_list: phrases(&read("location_list", LOCATION_LIST)?),
            special_skip_phrases: phrases(&read("special_skip_phrases", SPECIAL_SKIP_PHRASES)?),
            negation_markers: entries(&read("negation_markers", NEGATION_MARKERS)?),
            prepositions: entries(&read("prepositions", PREPOSITIONS)?),
        })
    }

    /// Writes every list to `dir` in the format `load_dir` reads.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let join = |v: &[Vec<String>]| v.iter().map(|p| p.join(" ")).collect::<Vec<_>>();
        let lists: [(&str, Vec<String>); 8] = [
            ("drop_phrases", join(&self.drop_phrases)),
            ("entity_keep_list", self.entity_keep_list.clone()),
            ("pronoun_stop_list", self.pronoun_stop_list.clone()),
            ("real_object_list", join(&self.real_object_list)),
            ("location_list", join(&self.location_list)),
            ("special_skip_phrases", join(&self.special_skip_phrases)),
            ("negation_markers", self.negation_markers.clone()),
            ("prepositions", self.prepositions.clone()),
        ];
        for (name, list) in lists {
            let path = dir.join(format!("{name}.txt"));
            let mut text = list.join("\n");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn keeps_label(&self, base_label: &str) -> bool {
        self.entity_keep_list.iter().any(|l| l == base_label)
    }

    pub fn is_stop_pronoun(&self, word: &str) -> bool {
        self.pronoun_stop_list.iter().any(|w| w.eq_ignore_ascii_case(word))
    }

    pub fn is_preposition(&self, word: &str) -> bool {
        self.prepositions.iter().any(|w| w == word)
    }

    pub fn is_location(&self, word: &str) -> bool {
        self.location_list.iter().any(|p| p.len() == 1 && p[0] == word)
    }

    /// Length of the longest real-object or location entry starting at
    /// `words[0]`, allowing a plural on the entry's last word.
    pub fn object_or_location_match(&self, words: &[&str]) -> Option<usize> {
        self.real_object_list
            .iter()
            .chain(&self.location_list)
            .filter(|entry| entry_matches(entry, words))
            .map(|entry| entry.len())
            .max()
    }

    /// Length of a special skip phrase starting at `words[0]`, if any.
    pub fn skip_phrase_at(&self, words: &[&str]) -> Option<usize> {
        self.special_skip_phrases
            .iter()
            .find(|p| p.len() <= words.len() && p.iter().zip(words).all(|(a, b)| a == b))
            .map(Vec::len)
    }
}

fn entry_matches(entry: &[String], words: &[&str]) -> bool {
    if entry.is_empty() || entry.len() > words.len() {
        return false;
    }
    let last = entry.len() - 1;
    entry.iter().zip(words).enumerate().all(|(i, (e, w))| {
        if i == last {
            singular_matches(e, w)
        } else {
            e == w
        }
    })
}

fn singular_matches(entry: &str, word: &str) -> bool {
    word == entry
        || word.strip_suffix('s') == Some(entry)
        || word.strip_suffix("es") == Some(entry)
}
