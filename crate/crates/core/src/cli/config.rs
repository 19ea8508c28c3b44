//! Run configuration file: TOML `key = value` pairs grouped in sections.
//!
//! ```toml
//! seed = 7
//! mode = "meta"
//!
//! [paths]
//! manifest = "corpus/manifest.split.jsonl"
//! out = "runs/meta"
//!
//! [task]
//! primary = "dialect"
//! adversarial = ["gender"]
//! gamma_init = 1.0
//! ```
//!
//! Every key is optional; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adversarial::TaskConfig;
use crate::attr::{Attribute, PerAttribute, Role};
use crate::corpus::SplitRatios;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::meta::MetaConfig;
use crate::model::EncoderConfig;
use crate::pipeline::{FitConfig, TrainMode};
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub mode: Option<String>,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub meta: MetaSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub num_speakers: Option<usize>,
    pub samples_per_speaker: Option<usize>,
    pub frames_min: Option<usize>,
    pub frames_max: Option<usize>,
    pub input_dim: Option<usize>,
    pub leak_dialect: Option<f64>,
    pub leak_gender: Option<f64>,
    pub leak_age: Option<f64>,
    pub noise_std: Option<f64>,
    pub transcripts: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSection {
    pub input_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub num_layers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub primary: Option<String>,
    pub adversarial: Option<Vec<String>>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    /// One coefficient for every adversarial attribute.
    pub gamma_init: Option<f64>,
    pub gamma_max: Option<f64>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub meta_learning_rate: Option<f64>,
    pub val_batch_size: Option<usize>,
    pub meta_every: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::parse(&fsutil::read_to_string(p).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::Config(format!("cannot read config {}: {source}", path.display()))
                }
                other => other,
            })?),
            None => Ok(Self::default()),
        }
    }

    pub fn synth_config(&self, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        let s = &self.synth;
        SynthConfig {
            num_speakers: s.num_speakers.unwrap_or(d.num_speakers),
            samples_per_speaker: s.samples_per_speaker.unwrap_or(d.samples_per_speaker),
            frames_min: s.frames_min.unwrap_or(d.frames_min),
            frames_max: s.frames_max.unwrap_or(d.frames_max),
            input_dim: s.input_dim.unwrap_or(d.input_dim),
            leak: PerAttribute([
                s.leak_dialect.unwrap_or(d.leak[Attribute::Dialect]),
                s.leak_gender.unwrap_or(d.leak[Attribute::Gender]),
                s.leak_age.unwrap_or(d.leak[Attribute::Age]),
            ]),
            noise_std: s.noise_std.unwrap_or(d.noise_std),
            age_weights: d.age_weights,
            transcripts: s.transcripts.unwrap_or(d.transcripts),
            seed,
        }
    }

    pub fn split_ratios(&self) -> SplitRatios {
        let d = SplitRatios::default().0;
        SplitRatios([
            self.split.train.unwrap_or(d[0]),
            self.split.val.unwrap_or(d[1]),
            self.split.test.unwrap_or(d[2]),
        ])
    }

    pub fn fit_config(&self, seed: u64) -> Result<FitConfig> {
        let d = EncoderConfig::default();
        let encoder = EncoderConfig {
            input_dim: self.encoder.input_dim.unwrap_or(d.input_dim),
            hidden_dim: self.encoder.hidden_dim.unwrap_or(d.hidden_dim),
            num_layers: self.encoder.num_layers.unwrap_or(d.num_layers),
        };
        let t = &self.task;
        let primary: Attribute = t.primary.as_deref().unwrap_or("dialect").parse()?;
        let adversarial = t
            .adversarial
            .iter()
            .flatten()
            .map(|a| a.parse::<Attribute>())
            .collect::<Result<Vec<_>>>()?;
        let task = build_task(primary, &adversarial, t, seed)?;
        let dm = MetaConfig::default();
        let meta = MetaConfig {
            meta_learning_rate: self.meta.meta_learning_rate.unwrap_or(dm.meta_learning_rate),
            val_batch_size: self.meta.val_batch_size.unwrap_or(dm.val_batch_size),
            meta_every: self.meta.meta_every.unwrap_or(dm.meta_every),
        };
        let mode: TrainMode = self.mode.as_deref().unwrap_or("fixed-gamma").parse()?;
        Ok(FitConfig {
            encoder,
            task,
            meta,
            mode,
        })
    }
}

fn build_task(primary: Attribute, adversarial: &[Attribute], t: &TaskSection, seed: u64) -> Result<TaskConfig> {
    if adversarial.contains(&primary) {
        return Err(Error::Config(format!(
            "{primary} cannot be both primary and adversarial"
        )));
    }
    let roles = PerAttribute::from_fn(|a| {
        if a == primary {
            Role::Primary
        } else if adversarial.contains(&a) {
            Role::Adversarial
        } else {
            Role::Off
        }
    });
    let mut task = TaskConfig::new(roles);
    task.learning_rate = t.learning_rate.unwrap_or(task.learning_rate);
    task.epochs = t.epochs.unwrap_or(task.epochs);
    task.batch_size = t.batch_size.unwrap_or(task.batch_size);
    task.gamma_max = t.gamma_max.unwrap_or(task.gamma_max);
    if let Some(g) = t.gamma_init {
        task.gamma_init = adversarial.iter().map(|&a| (a, g)).collect::<BTreeMap<_, _>>();
    }
    task.seed = seed;
    Ok(task)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse_and_fill_defaults() {
        let cfg = RunConfig::parse(
            "seed = 3\nmode = \"meta\"\n[task]\nprimary = \"gender\"\nadversarial = [\"dialect\", \"age\"]\ngamma_init = 0.5\n[meta]\nmeta_learning_rate = 0.0\n",
        )
        .unwrap();
        let fit = cfg.fit_config(3).unwrap();
        assert_eq!(fit.mode, TrainMode::Meta);
        assert_eq!(fit.task.primary().unwrap(), Attribute::Gender);
        assert_eq!(fit.task.initial_gamma()[&Attribute::Age], 0.5);
        assert_eq!(fit.meta.meta_learning_rate, 0.0);
        assert_eq!(fit.encoder, EncoderConfig::default());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(RunConfig::parse("[task]\nlr = 1\n"), Err(Error::Config(_))));
        let cfg = RunConfig::parse("[task]\nprimary = \"accent\"\n").unwrap();
        assert!(cfg.fit_config(0).is_err());
        let cfg = RunConfig::parse("[task]\nadversarial = [\"dialect\"]\n").unwrap();
        assert!(cfg.fit_config(0).is_err());
    }
}
