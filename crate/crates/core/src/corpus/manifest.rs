//! Samples, split-annotated manifests and their JSONL / MRVF1 encodings.
//!
//! Manifest lines carry exactly these fields: `id`, `speaker_id`, `dialect`,
//! `gender`, `age`, `duration_seconds` and, optionally, `split`,
//! `transcript` and `features_path`. Feature paths are resolved relative to
//! the manifest's directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attr::{AgeBucket, Attribute, Dialect, Gender};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

/// One utterance: metadata, labels and (once loaded) its feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub speaker_id: String,
    pub dialect: Option<Dialect>,
    pub gender: Option<Gender>,
    pub age: Option<AgeBucket>,
    pub duration_seconds: f64,
    pub transcript: Option<String>,
    pub features_path: Option<String>,
    /// `[T×D_in]` frames; not part of the JSONL line.
    pub frames: Option<Tensor>,
}

impl Sample {
    /// Class index of this sample for `attr`, if labelled.
    pub fn label(&self, attr: Attribute) -> Option<usize> {
        match attr {
            Attribute::Dialect => self.dialect.map(Dialect::index),
            Attribute::Gender => self.gender.map(Gender::index),
            Attribute::Age => self.age.map(AgeBucket::index),
        }
    }

    pub fn require_label(&self, attr: Attribute) -> Result<usize> {
        self.label(attr)
            .ok_or_else(|| Error::Data(format!("sample '{}' has no {attr} label", self.id)))
    }

    pub fn frames(&self) -> Result<&Tensor> {
        self.frames
            .as_ref()
            .ok_or_else(|| Error::Data(format!("sample '{}' has no feature frames loaded", self.id)))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusManifest {
    pub samples: Vec<Sample>,
    pub split_assignment: Option<BTreeMap<String, Split>>,
}

impl CorpusManifest {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let m = Self {
            samples,
            split_assignment: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Unique ids, complete split coverage and speaker-disjoint splits.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate sample id '{}'", s.id)));
            }
        }
        if let Some(assignment) = &self.split_assignment {
            let mut speaker_split: HashMap<&str, Split> = HashMap::new();
            for s in &self.samples {
                let split = *assignment.get(&s.id).ok_or_else(|| {
                    Error::Integrity(format!("sample '{}' has no split assignment", s.id))
                })?;
                match speaker_split.insert(s.speaker_id.as_str(), split) {
                    Some(prev) if prev != split => {
                        return Err(Error::Integrity(format!(
                            "speaker '{}' appears in both {prev} and {split}",
                            s.speaker_id
                        )))
                    }
                    _ => {}
                }
            }
            if assignment.len() != self.samples.len() {
                return Err(Error::Integrity(
                    "split assignment names unknown sample ids".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split_assignment.as_ref()?.get(id).copied()
    }

    /// Samples of one split, in manifest order.
    pub fn split(&self, split: Split) -> Result<Vec<&Sample>> {
        let assignment = self
            .split_assignment
            .as_ref()
            .ok_or_else(|| Error::Data("manifest has no split assignment".into()))?;
        Ok(self
            .samples
            .iter()
            .filter(|s| assignment.get(&s.id) == Some(&split))
            .collect())
    }

    /// Loads MRVF1 features for every sample with a `features_path`.
    pub fn load_features(&mut self, base_dir: &Path) -> Result<()> {
        for s in &mut self.samples {
            if let Some(rel) = &s.features_path {
                s.frames = Some(read_features(&base_dir.join(rel))?);
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    speaker_id: String,
    dialect: Option<Dialect>,
    gender: Option<Gender>,
    age: Option<AgeBucket>,
    duration_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features_path: Option<String>,
}

pub fn manifest_to_jsonl(manifest: &CorpusManifest) -> Result<String> {
    manifest.validate()?;
    let mut out = String::new();
    for s in &manifest.samples {
        let rec = Record {
            id: s.id.clone(),
            speaker_id: s.speaker_id.clone(),
            dialect: s.dialect,
            gender: s.gender,
            age: s.age,
            duration_seconds: s.duration_seconds,
            split: manifest.split_of(&s.id),
            transcript: s.transcript.clone(),
            features_path: s.features_path.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn manifest_from_jsonl(text: &str) -> Result<CorpusManifest> {
    let mut samples = Vec::new();
    let mut splits = BTreeMap::new();
    let mut ids = BTreeSet::new();
    let mut unsplit = 0usize;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !(rec.duration_seconds.is_finite() && rec.duration_seconds > 0.0) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duration_seconds must be positive, got {}", rec.duration_seconds),
            });
        }
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Integrity(format!(
                "duplicate sample id '{}' at line {line_no}",
                rec.id
            )));
        }
        match rec.split {
            Some(split) => {
                splits.insert(rec.id.clone(), split);
            }
            None => unsplit += 1,
        }
        samples.push(Sample {
            id: rec.id,
            speaker_id: rec.speaker_id,
            dialect: rec.dialect,
            gender: rec.gender,
            age: rec.age,
            duration_seconds: rec.duration_seconds,
            transcript: rec.transcript,
            features_path: rec.features_path,
            frames: None,
        });
    }
    if !splits.is_empty() && unsplit > 0 {
        return Err(Error::Integrity(format!(
            "{unsplit} samples lack a split while others have one"
        )));
    }
    let manifest = CorpusManifest {
        samples,
        split_assignment: (!splits.is_empty()).then_some(splits),
    };
    manifest.validate()?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    manifest_from_jsonl(&fsutil::read_to_string(path)?)
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    fsutil::write_atomic(path, manifest_to_jsonl(manifest)?.as_bytes())
}

pub const FEATURE_MAGIC: &[u8; 5] = b"MRVF1";

/// MRVF1 container: magic, `T` and `D` as u32 LE, then `T×D` f32 LE values.
pub fn encode_features(frames: &Tensor) -> Result<Vec<u8>> {
    let (t, d) = match frames.shape() {
        [t, d] => (*t, *d),
        [n] => (*n, 1),
        other => {
            return Err(Error::Data(format!(
                "feature tensors must be [T×D], got {other:?}"
            )))
        }
    };
    let t32 = u32::try_from(t).map_err(|_| Error::Data("too many frames".into()))?;
    let d32 = u32::try_from(d).map_err(|_| Error::Data("feature width too large".into()))?;
    let mut out = Vec::with_capacity(13 + 4 * frames.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&t32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for &v in frames.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<Tensor> {
    let bad = |m: &str| Error::Data(format!("malformed feature file: {m}"));
    if bytes.len() < 13 || &bytes[..5] != FEATURE_MAGIC {
        return Err(bad("missing MRVF1 header"));
    }
    let t = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let d = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = &bytes[13..];
    if t == 0 || d == 0 || body.len() != t * d * 4 {
        return Err(bad(&format!("header says {t}×{d} but body has {} bytes", body.len())));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Tensor::matrix(t, d, values)?)
}

pub fn read_features(path: &Path) -> Result<Tensor> {
    decode_features(&fsutil::read(path)?).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_features(path: &Path, frames: &Tensor) -> Result<()> {
    fsutil::write_atomic(path, &encode_features(frames)?)
}

/// Single-channel waveform stored as an MRVF1 file with `D = 1`.
pub fn read_waveform(path: &Path) -> Result<Vec<f64>> {
    let t = read_features(path)?;
    if t.cols() != 1 {
        return Err(Error::Data(format!(
            "{}: waveform must have D_in = 1, got {}",
            path.display(),
            t.cols()
        )));
    }
    Ok(t.into_values())
}

pub fn write_waveform(path: &Path, samples: &[f64]) -> Result<()> {
    let t = Tensor::matrix(samples.len(), 1, samples.to_vec())?;
    write_features(path, &t)
}
