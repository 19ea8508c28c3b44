//! Outer loop that adapts the adversarial coefficients.
//!
//! A lookahead step `θ′ = θ − α(∇L_task − Σ γ_i ∇L_adv_i)` is taken on a
//! training batch; the meta-loss is the primary-task loss of `θ′` on a
//! validation batch. Since the inner gradients at `θ` do not depend on `γ`,
//! `∂L_meta/∂γ_i = α ⟨∇θ_enc L_adv_i(θ), ∇θ′_enc L_task(θ′)⟩` holds
//! exactly for a single inner step.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversarial::{
    batch_gradients, compute_losses, epoch_batches, train_step, EpochTrace, LossBundle,
    StepRecord, TaskConfig,
};
use crate::attr::{Attribute, PerAttribute, Role};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::model::ModelState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    pub meta_learning_rate: f64,
    pub val_batch_size: usize,
    /// One meta-update every `meta_every` inner steps.
    pub meta_every: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            meta_learning_rate: 0.01,
            val_batch_size: 32,
            meta_every: 1,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.meta_learning_rate >= 0.0 && self.meta_learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "meta learning rate must be finite and >= 0, got {}",
                self.meta_learning_rate
            )));
        }
        if self.val_batch_size == 0 || self.meta_every == 0 {
            return Err(Error::Config(
                "val_batch_size and meta_every must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Parameters after one inner step plus what the hypergradient needs.
#[derive(Debug, Clone)]
pub struct LookaheadState {
    pub theta_prime: ModelState,
    pub inner_losses: LossBundle,
    /// Flattened `∇θ_enc L_adv_i` on the training batch at `θ`.
    pub adv_encoder_grads: BTreeMap<Attribute, Vec<f64>>,
    pub learning_rate: f64,
    pub primary: Attribute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergradient(pub BTreeMap<Attribute, f64>);

impl Hypergradient {
    pub fn get(&self, attr: Attribute) -> Option<f64> {
        self.0.get(&attr).copied()
    }
}

fn only(attr: Attribute) -> PerAttribute<Role> {
    PerAttribute::from_fn(|a| if a == attr { Role::Primary } else { Role::Off })
}

/// Plain (unreversed) encoder gradient of one head's cross-entropy.
pub fn encoder_gradient(batch: &[&Sample], state: &ModelState, attr: Attribute) -> Result<Vec<f64>> {
    Ok(batch_gradients(batch, state, &only(attr))?.1.encoder_flat())
}

/// Takes the inner step on a copy of `state`; `state` itself is untouched.
pub fn inner_step(train_batch: &[&Sample], state: &ModelState, config: &TaskConfig) -> Result<LookaheadState> {
    let primary = config.primary()?;
    for (&attr, &g) in &state.gamma {
        if !(0.0..=config.gamma_max).contains(&g) {
            return Err(Error::State(format!(
                "gamma for {attr} is {g}, outside [0, {}]",
                config.gamma_max
            )));
        }
    }
    let (theta_prime, inner_losses) = train_step(train_batch, state, config, 0)?;
    let adv_encoder_grads = config
        .adversarial()
        .into_iter()
        .map(|a| Ok((a, encoder_gradient(train_batch, state, a)?)))
        .collect::<Result<_>>()?;
    Ok(LookaheadState {
        theta_prime,
        inner_losses,
        adv_encoder_grads,
        learning_rate: config.learning_rate,
        primary,
    })
}

/// Primary-task loss of `θ′` on the validation batch.
pub fn meta_loss(val_batch: &[&Sample], lookahead: &LookaheadState) -> Result<f64> {
    if val_batch.is_empty() {
        return Err(Error::Data("empty validation batch".into()));
    }
    let cfg = TaskConfig::new(only(lookahead.primary));
    Ok(compute_losses(val_batch, &lookahead.theta_prime, &cfg)?.task_loss)
}

pub fn hypergradient(lookahead: &LookaheadState, val_batch: &[&Sample]) -> Result<Hypergradient> {
    if val_batch.is_empty() {
        return Err(Error::Data("empty validation batch".into()));
    }
    let missing: Vec<_> = lookahead
        .theta_prime
        .gamma
        .keys()
        .filter(|a| !lookahead.adv_encoder_grads.contains_key(a))
        .collect();
    if !missing.is_empty() {
        return Err(Error::State(format!(
            "lookahead has no retained inner gradients for {missing:?}"
        )));
    }
    let outer = encoder_gradient(val_batch, &lookahead.theta_prime, lookahead.primary)?;
    let hg = lookahead
        .adv_encoder_grads
        .iter()
        .map(|(&a, inner)| {
            let dot: f64 = inner.iter().zip(&outer).map(|(x, y)| x * y).sum();
            (a, lookahead.learning_rate * dot)
        })
        .collect();
    Ok(Hypergradient(hg))
}

/// `γ_i ← clamp(γ_i − η·h_i, 0, γ_max)`; `step` is error context only.
pub fn meta_update(
    state: &ModelState,
    hypergrad: &Hypergradient,
    meta: &MetaConfig,
    gamma_max: f64,
    step: usize,
) -> Result<ModelState> {
    if let Some((a, h)) = hypergrad.0.iter().find(|(_, h)| !h.is_finite()) {
        return Err(Error::Divergence {
            step,
            message: format!("non-finite hypergradient {h} for {a}"),
        });
    }
    let mut next = state.clone();
    for (attr, gamma) in next.gamma.iter_mut() {
        if let Some(h) = hypergrad.get(*attr) {
            let proposed = *gamma - meta.meta_learning_rate * h;
            *gamma = proposed.clamp(0.0, gamma_max);
        }
    }
    Ok(next)
}

/// Validation batch for update number `k`: consecutive, wrapping windows
/// over a seeded permutation of the validation split.
pub fn validation_batch<'a>(val: &[&'a Sample], seed: u64, k: u64, size: usize) -> Vec<&'a Sample> {
    if val.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..val.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    order.shuffle(&mut rng);
    let size = size.min(val.len());
    let start = ((k as u128 * size as u128) % val.len() as u128) as usize;
    (0..size).map(|i| val[order[(start + i) % val.len()]]).collect()
}

/// One epoch in meta mode: before every `meta_every`-th inner step γ is
/// updated from the lookahead hypergradient, then the real step is taken
/// with the new γ.
pub fn meta_train_epoch(
    train: &[&Sample],
    val: &[&Sample],
    state: ModelState,
    config: &TaskConfig,
    meta: &MetaConfig,
) -> Result<(ModelState, EpochTrace)> {
    if train.is_empty() {
        return Err(Error::Data("cannot train on an empty split".into()));
    }
    if val.is_empty() {
        return Err(Error::Data("meta mode needs a non-empty validation split".into()));
    }
    let epoch = state.rng.epoch;
    let batches = epoch_batches(train, state.rng.seed, epoch, config.batch_size);
    let mut state = state;
    let mut trace = EpochTrace::default();
    for (step, batch) in batches.iter().enumerate() {
        if step % meta.meta_every == 0 {
            let k = epoch * batches.len() as u64 + step as u64;
            let val_batch = validation_batch(val, state.rng.seed, k, meta.val_batch_size);
            let look = inner_step(batch, &state, config)?;
            let hg = hypergradient(&look, &val_batch)?;
            state = meta_update(&state, &hg, meta, config.gamma_max, step)?;
        }
        let (next, losses) = train_step(batch, &state, config, step)?;
        trace.steps.push(StepRecord {
            epoch,
            step,
            losses,
            gamma: state.gamma.clone(),
        });
        state = next;
    }
    state.rng.epoch += 1;
    Ok((state, trace))
}
