//! Train-then-evaluate runs over a split manifest.

use std::fmt;
use std::str::FromStr;

use crate::adversarial::{train_epoch, StepRecord, TaskConfig};
use crate::attr::Attribute;
use crate::corpus::{CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate_head, EvalReport};
use crate::meta::{meta_train_epoch, MetaConfig};
use crate::model::{EncoderConfig, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    #[default]
    FixedGamma,
    Meta,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::FixedGamma => "fixed-gamma",
            TrainMode::Meta => "meta",
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-gamma" | "fixed" => Ok(TrainMode::FixedGamma),
            "meta" => Ok(TrainMode::Meta),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected fixed-gamma or meta)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitConfig {
    pub encoder: EncoderConfig,
    pub task: TaskConfig,
    pub meta: MetaConfig,
    pub mode: TrainMode,
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.task.validate()?;
        self.meta.validate()
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub state: ModelState,
    pub trace: Vec<StepRecord>,
}

/// Trains from a fresh initialization seeded by `config.task.seed` on the
/// train split; meta mode also draws on the validation split.
pub fn fit(manifest: &CorpusManifest, config: &FitConfig) -> Result<FitOutcome> {
    config.validate()?;
    let train = manifest.split(Split::Train)?;
    let val = manifest.split(Split::Val)?;
    let mut state = ModelState::init(config.encoder, config.task.initial_gamma(), config.task.seed)?;
    let mut trace = Vec::new();
    for _ in 0..config.task.epochs {
        let (next, epoch) = match config.mode {
            TrainMode::FixedGamma => train_epoch(&train, state, &config.task)?,
            TrainMode::Meta => meta_train_epoch(&train, &val, state, &config.task, &config.meta)?,
        };
        state = next;
        trace.extend(epoch.steps);
    }
    Ok(FitOutcome { state, trace })
}

/// Reports for the given heads on one split.
pub fn evaluate_split(
    manifest: &CorpusManifest,
    state: &ModelState,
    split: Split,
    attributes: &[Attribute],
) -> Result<Vec<(Attribute, EvalReport)>> {
    let samples = manifest.split(split)?;
    if samples.is_empty() {
        return Err(Error::Data(format!("the {split} split is empty")));
    }
    attributes
        .iter()
        .map(|&a| Ok((a, evaluate_head(&samples, state, a)?)))
        .collect()
}
