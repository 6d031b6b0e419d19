//! Manifest-based corpus handling.
//!
//! A manifest is a UTF-8 TSV file with the header
//! `id\taudio\tduration_sec\tsrc_lang\ttgt_lang\tsrc_text\ttgt_text`.
//! Fields may not contain tabs or newlines, so no quoting is needed.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 7] = [
    "id",
    "audio",
    "duration_sec",
    "src_lang",
    "tgt_lang",
    "src_text",
    "tgt_text",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    /// Guesses the split from a file name: `dev` or `test` anywhere in the
    /// stem selects that split, anything else is treated as training data.
    pub fn from_file_name(path: &Path) -> Split {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_lowercase())
            .unwrap_or_default();
        if stem.contains("dev") {
            Split::Dev
        } else if stem.contains("test") {
            Split::Test
        } else {
            Split::Train
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub audio_path: String,
    pub duration_sec: f64,
    pub src_lang: String,
    pub tgt_lang: String,
    pub src_text: String,
    pub tgt_text: String,
}

impl Utterance {
    pub fn pair(&self) -> LanguagePair {
        LanguagePair {
            src: self.src_lang.clone(),
            tgt: self.tgt_lang.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub src: String,
    pub tgt: String,
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.tgt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub split: Split,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairStats {
    pub n_utterances: usize,
    pub total_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_utterances: usize,
    pub total_hours: f64,
    pub mean_duration_sec: f64,
    pub per_language_pair: BTreeMap<String, PairStats>,
}

fn check_field(value: &str, column: &str, line: usize) -> Result<()> {
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}` contains a tab or newline"),
        });
    }
    Ok(())
}

impl Manifest {
    pub fn new(split: Split, utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(utterances.len());
        for u in &utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
        }
        Ok(Manifest { split, utterances })
    }

    pub fn empty(split: Split) -> Self {
        Manifest {
            split,
            utterances: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn from_tsv(text: &str, split: Split) -> Result<Self> {
        let mut lines = text.split('\n').enumerate();
        let header = match lines.next() {
            Some((_, h)) if !h.trim().is_empty() => h.strip_suffix('\r').unwrap_or(h),
            _ => {
                return Err(Error::Schema {
                    column: COLUMNS[0].to_string(),
                })
            }
        };
        let names: Vec<&str> = header.split('\t').collect();
        let mut index = [0usize; 7];
        for (slot, column) in index.iter_mut().zip(COLUMNS) {
            *slot = names
                .iter()
                .position(|n| *n == column)
                .ok_or_else(|| Error::Schema {
                    column: column.to_string(),
                })?;
        }

        let mut utterances = Vec::new();
        for (i, raw) in lines {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            let get = |k: usize| fields[index[k]];
            let duration_sec: f64 = get(2).trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("duration_sec `{}` is not a number", get(2)),
            })?;
            if !(duration_sec.is_finite() && duration_sec > 0.0) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duration_sec must be positive, got {duration_sec}"),
                });
            }
            if get(0).is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty id".into(),
                });
            }
            if get(6).trim().is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty tgt_text".into(),
                });
            }
            utterances.push(Utterance {
                id: get(0).to_string(),
                audio_path: get(1).to_string(),
                duration_sec,
                src_lang: get(3).to_string(),
                tgt_lang: get(4).to_string(),
                src_text: get(5).to_string(),
                tgt_text: get(6).to_string(),
            });
        }
        Manifest::new(split, utterances)
    }

    pub fn to_tsv(&self) -> Result<String> {
        let mut out = COLUMNS.join("\t");
        out.push('\n');
        for (i, u) in self.utterances.iter().enumerate() {
            let line = i + 2;
            for (value, column) in [
                (&u.id, "id"),
                (&u.audio_path, "audio"),
                (&u.src_lang, "src_lang"),
                (&u.tgt_lang, "tgt_lang"),
                (&u.src_text, "src_text"),
                (&u.tgt_text, "tgt_text"),
            ] {
                check_field(value, column, line)?;
            }
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                u.id, u.audio_path, u.duration_sec, u.src_lang, u.tgt_lang, u.src_text, u.tgt_text
            ));
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()?).map_err(|e| Error::io(path, e))
    }
}

/// Reads a manifest file. The split is inferred from the file name.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::from_tsv(&text, Split::from_file_name(path))
}

pub fn stats(m: &Manifest) -> Result<CorpusStats> {
    if m.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total_sec = 0.0;
    let mut per_pair: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for u in &m.utterances {
        total_sec += u.duration_sec;
        let entry = per_pair.entry(u.pair().to_string()).or_default();
        entry.0 += 1;
        entry.1 += u.duration_sec;
    }
    let n = m.len();
    Ok(CorpusStats {
        n_utterances: n,
        total_hours: total_sec / 3600.0,
        mean_duration_sec: total_sec / n as f64,
        per_language_pair: per_pair
            .into_iter()
            .map(|(k, (n, sec))| {
                (
                    k,
                    PairStats {
                        n_utterances: n,
                        total_hours: sec / 3600.0,
                    },
                )
            })
            .collect(),
    })
}

/// Concatenates two training manifests and shuffles the result with `seed`.
///
/// If the id sets collide, every id is prefixed with its language-pair tag
/// (`bho-hi:utt1`).
pub fn mix(a: &Manifest, b: &Manifest, seed: u64) -> Result<Manifest> {
    if a.split != Split::Train || b.split != Split::Train {
        return Err(Error::SplitMismatch(a.split.to_string(), b.split.to_string()));
    }
    let ids_a: HashSet<&str> = a.utterances.iter().map(|u| u.id.as_str()).collect();
    let collide = b.utterances.iter().any(|u| ids_a.contains(u.id.as_str()));

    let mut all: Vec<Utterance> = a.utterances.iter().chain(&b.utterances).cloned().collect();
    if collide {
        for u in &mut all {
            u.id = format!("{}:{}", u.pair(), u.id);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    Manifest::new(Split::Train, all)
}

pub fn filter_pair(m: &Manifest, src: &str) -> Manifest {
    Manifest {
        split: m.split,
        utterances: m
            .utterances
            .iter()
            .filter(|u| u.src_lang == src)
            .cloned()
            .collect(),
    }
}
