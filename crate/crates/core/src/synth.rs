//! Seeded synthetic corpus with controllable attribute leakage.
//!
//! Every speaker draws a dialect, gender and age bucket once. Each frame of
//! each utterance is `Σ_attr leak_attr · W_attr[:, class] + ε` with
//! `ε ~ N(0, noise_std²)` and `W_attr` fixed random projections with
//! unit-norm columns. Frame values are rounded to `f32` so that writing
//! them to MRVF1 files is lossless.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::attr::{AgeBucket, Attribute, Dialect, Gender, PerAttribute};
use crate::corpus::{CorpusManifest, Sample, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Nominal feature frame rate used to derive durations.
pub const FRAMES_PER_SECOND: f64 = 50.0;

/// Share of speakers per age bucket in the reference corpus (30-40,
/// 40-50, 50-60, 60-70, other).
pub const REFERENCE_AGE_WEIGHTS: [f64; 5] = [15.2, 37.9, 38.5, 7.8, 0.6];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_speakers: usize,
    pub samples_per_speaker: usize,
    pub frames_min: usize,
    pub frames_max: usize,
    pub input_dim: usize,
    pub leak: PerAttribute<f64>,
    pub noise_std: f64,
    pub age_weights: [f64; 5],
    /// Emit toy transcripts with a few dialect-specific words.
    pub transcripts: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_speakers: 100,
            samples_per_speaker: 20,
            frames_min: 20,
            frames_max: 40,
            input_dim: 16,
            leak: PerAttribute([1.0, 1.0, 0.0]),
            noise_std: 1.0,
            age_weights: REFERENCE_AGE_WEIGHTS,
            transcripts: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_speakers == 0 || self.samples_per_speaker == 0 || self.input_dim == 0 {
            return Err(Error::Config(
                "num_speakers, samples_per_speaker and input_dim must be >= 1".into(),
            ));
        }
        if self.frames_min == 0 || self.frames_max < self.frames_min {
            return Err(Error::Config(format!(
                "frame range [{}, {}] is invalid",
                self.frames_min, self.frames_max
            )));
        }
        if self.leak.0.iter().any(|l| !(l.is_finite() && *l >= 0.0))
            || !(self.noise_std.is_finite() && self.noise_std >= 0.0)
        {
            return Err(Error::Config(
                "leak strengths and noise_std must be finite and >= 0".into(),
            ));
        }
        if self.age_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.age_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config("age weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }
}

const SHARED_WORDS: &[&str] = &[
    "domnule", "președinte", "stimați", "colegi", "lege", "proiect", "vot", "guvern", "buget",
    "comisia", "articolul", "amendament", "propunere", "cetățeni", "ministerul", "sănătate",
    "educație", "economie", "fonduri", "sesiune",
];
const MOLDAVIAN_WORDS: &[&str] = &["senator", "punctul", "românia", "privind", "zi"];
const ROMANIAN_WORDS: &[&str] = &["moldova", "parte", "dumneavoastră", "cadrul", "fapt"];

fn projection(rng: &mut ChaCha8Rng, dim: usize, classes: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|_| {
            let col: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            col.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

fn transcript(rng: &mut ChaCha8Rng, dialect: Dialect) -> String {
    let distinctive = match dialect {
        Dialect::Moldavian => MOLDAVIAN_WORDS,
        Dialect::StandardRomanian => ROMANIAN_WORDS,
    };
    let n = rng.random_range(5..=15);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                distinctive[rng.random_range(0..distinctive.len())]
            } else {
                SHARED_WORDS[rng.random_range(0..SHARED_WORDS.len())]
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic given `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<CorpusManifest> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let proj = PerAttribute::from_fn(|a| projection(&mut rng, config.input_dim, a.num_classes()));
    let ages = WeightedIndex::new(config.age_weights).map_err(|e| Error::Config(e.to_string()))?;

    let mut samples = Vec::with_capacity(config.num_speakers * config.samples_per_speaker);
    for spk in 0..config.num_speakers {
        let dialect = Dialect::ALL[rng.random_range(0..Dialect::ALL.len())];
        let gender = Gender::ALL[rng.random_range(0..Gender::ALL.len())];
        let age = AgeBucket::ALL[ages.sample(&mut rng)];
        let classes = PerAttribute([dialect.index(), gender.index(), age.index()]);
        let mut center = vec![0.0; config.input_dim];
        for attr in Attribute::ALL {
            let col = &proj[attr][classes[attr]];
            for (c, w) in center.iter_mut().zip(col) {
                *c += config.leak[attr] * w;
            }
        }
        let speaker_id = format!("spk{spk:04}");
        for utt in 0..config.samples_per_speaker {
            let t = rng.random_range(config.frames_min..=config.frames_max);
            let mut values = Vec::with_capacity(t * config.input_dim);
            for _ in 0..t {
                for &c in &center {
                    let noise: f64 = rng.sample(StandardNormal);
                    values.push((c + config.noise_std * noise) as f32 as f64);
                }
            }
            let transcript = config.transcripts.then(|| transcript(&mut rng, dialect));
            samples.push(Sample {
                id: format!("{speaker_id}_utt{utt:03}"),
                speaker_id: speaker_id.clone(),
                dialect: Some(dialect),
                gender: Some(gender),
                age: Some(age),
                duration_seconds: t as f64 / FRAMES_PER_SECOND,
                transcript,
                features_path: None,
                frames: Some(Tensor::matrix(t, config.input_dim, values)?),
            });
        }
    }
    CorpusManifest::new(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialectRow {
    pub dialect: Option<Dialect>,
    pub count: usize,
    /// Train / val / test sample counts (zero without an assignment).
    pub split_counts: [usize; 3],
    pub seconds: f64,
}

impl DialectRow {
    pub fn hours(&self) -> f64 {
        self.seconds / 3600.0
    }
}

/// Table-1 style corpus summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub rows: Vec<DialectRow>,
    pub overall: DialectRow,
    pub has_splits: bool,
}

impl CorpusStats {
    pub fn total_hours(&self) -> f64 {
        self.overall.hours()
    }

    pub fn render(&self) -> String {
        let mut out = String::from("| Dialect | Train/Val/Test | # hours |\n|---|---|---|\n");
        let fmt_row = |r: &DialectRow| {
            let splits = if self.has_splits {
                format!("{}/{}/{}", r.split_counts[0], r.split_counts[1], r.split_counts[2])
            } else {
                format!("{}/-/-", r.count)
            };
            (splits, format!("{:.2}", r.hours()))
        };
        for r in &self.rows {
            let name = r.dialect.map_or("unlabelled", Dialect::name);
            let (s, h) = fmt_row(r);
            writeln!(out, "| {name} | {s} | {h} |").expect("string write");
        }
        let (s, h) = fmt_row(&self.overall);
        writeln!(out, "| Overall | {s} | {h} |").expect("string write");
        out
    }
}

pub fn stats(manifest: &CorpusManifest) -> CorpusStats {
    let empty = |dialect| DialectRow {
        dialect,
        count: 0,
        split_counts: [0; 3],
        seconds: 0.0,
    };
    let mut rows: Vec<DialectRow> = Dialect::ALL.iter().map(|&d| empty(Some(d))).collect();
    let mut unlabelled = empty(None);
    let mut overall = empty(None);
    for s in &manifest.samples {
        let row = match s.dialect {
            Some(d) => &mut rows[d.index()],
            None => &mut unlabelled,
        };
        for r in [row, &mut overall] {
            r.count += 1;
            r.seconds += s.duration_seconds;
            if let Some(split) = manifest.split_of(&s.id) {
                r.split_counts[Split::ALL.iter().position(|&x| x == split).expect("split")] += 1;
            }
        }
    }
    if unlabelled.count > 0 {
        rows.push(unlabelled);
    }
    CorpusStats {
        rows,
        overall,
        has_splits: manifest.split_assignment.is_some(),
    }
}
