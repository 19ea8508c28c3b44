//! Multi-target adversarial training with gradient reversal.
//!
//! Each adversarial head sits behind a reversal node scaled by its
//! coefficient `γ`, so the encoder descends
//! `∇L_task − Σ γ_i ∇L_adv_i` while every head descends its own loss. The
//! adversarial heads' parameter gradients are additionally scaled by `γ_i`,
//! which makes the head updates those of `L_task + Σ γ_i L_adv_i`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attr::{Attribute, PerAttribute, Role};
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::model::{adversarial_attributes, forward_all, primary_attribute, BoundModel, ModelState};
use crate::tensor::{Graph, Tensor, Var};

pub const DEFAULT_GAMMA_INIT: f64 = 0.1;
pub const DEFAULT_GAMMA_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub roles: PerAttribute<Role>,
    pub learning_rate: f64,
    /// Starting coefficient per adversarial attribute; missing entries
    /// default to [`DEFAULT_GAMMA_INIT`].
    pub gamma_init: BTreeMap<Attribute, f64>,
    pub gamma_max: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TaskConfig {
    pub fn new(roles: PerAttribute<Role>) -> Self {
        Self {
            roles,
            learning_rate: 0.05,
            gamma_init: BTreeMap::new(),
            gamma_max: DEFAULT_GAMMA_MAX,
            epochs: 20,
            batch_size: 32,
            seed: 0,
        }
    }

    /// Single primary attribute, everything else off.
    pub fn single_task(primary: Attribute) -> Self {
        Self::new(PerAttribute::from_fn(|a| {
            if a == primary {
                Role::Primary
            } else {
                Role::Off
            }
        }))
    }

    pub fn validate(&self) -> Result<()> {
        primary_attribute(&self.roles)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max.is_finite()) {
            return Err(Error::Config(format!(
                "gamma_max must be positive, got {}",
                self.gamma_max
            )));
        }
        for (attr, g) in self.initial_gamma() {
            if !(0.0..=self.gamma_max).contains(&g) {
                return Err(Error::Config(format!(
                    "gamma_init for {attr} is {g}, outside [0, {}]",
                    self.gamma_max
                )));
            }
        }
        if let Some(attr) = self
            .gamma_init
            .keys()
            .find(|a| self.roles[**a] != Role::Adversarial)
        {
            return Err(Error::Config(format!(
                "gamma_init given for {attr}, which is not adversarial"
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn primary(&self) -> Result<Attribute> {
        primary_attribute(&self.roles)
    }

    pub fn adversarial(&self) -> Vec<Attribute> {
        adversarial_attributes(&self.roles)
    }

    pub fn initial_gamma(&self) -> BTreeMap<Attribute, f64> {
        self.adversarial()
            .into_iter()
            .map(|a| (a, self.gamma_init.get(&a).copied().unwrap_or(DEFAULT_GAMMA_INIT)))
            .collect()
    }
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig::single_task(Attribute::Dialect)
    }
}

/// Batch losses of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub primary: Attribute,
    pub task_loss: f64,
    pub adv_losses: Vec<(Attribute, f64)>,
    /// `task_loss + Σ γ_i · adv_loss_i`
    pub combined: f64,
}

impl LossBundle {
    fn assemble(primary: Attribute, task_loss: f64, adv_losses: Vec<(Attribute, f64)>, state: &ModelState) -> Self {
        let combined = adv_losses.iter().fold(task_loss, |acc, (a, l)| {
            acc + state.gamma.get(a).copied().unwrap_or(0.0) * l
        });
        Self {
            primary,
            task_loss,
            adv_losses,
            combined,
        }
    }

    pub fn adv_loss(&self, attr: Attribute) -> Option<f64> {
        self.adv_losses.iter().find(|(a, _)| *a == attr).map(|&(_, l)| l)
    }

    pub fn is_finite(&self) -> bool {
        self.combined.is_finite()
            && self.task_loss.is_finite()
            && self.adv_losses.iter().all(|(_, l)| l.is_finite())
    }
}

/// Parameter gradients in [`ModelState`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// One entry per encoder tensor, in `encoder_params` order.
    pub encoder: Vec<Vec<f64>>,
    /// `[weights, bias]` for every head that took part in the pass.
    pub heads: PerAttribute<Option<[Vec<f64>; 2]>>,
}

impl Gradients {
    pub fn encoder_flat(&self) -> Vec<f64> {
        self.encoder.concat()
    }
}

struct Objective {
    bound: BoundModel,
    task: Var,
    adv: Vec<(Attribute, Var)>,
}

fn labels_for(batch: &[&Sample], attr: Attribute) -> Result<Vec<usize>> {
    batch.iter().map(|s| s.require_label(attr)).collect()
}

fn build_objective(
    graph: &mut Graph,
    batch: &[&Sample],
    state: &ModelState,
    roles: &PerAttribute<Role>,
) -> Result<Objective> {
    if batch.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let primary = primary_attribute(roles)?;
    let adversarial = adversarial_attributes(roles);
    let task_labels = labels_for(batch, primary)?;
    let adv_labels = adversarial
        .iter()
        .map(|&a| labels_for(batch, a))
        .collect::<Result<Vec<_>>>()?;
    let frames = batch.iter().map(|s| s.frames()).collect::<Result<Vec<&Tensor>>>()?;

    let mut bound = state.bind(graph);
    for &attr in &adversarial {
        let gamma = state.gamma.get(&attr).copied().ok_or_else(|| {
            Error::Config(format!("no gamma for adversarial attribute {attr}"))
        })?;
        bound.heads[attr].scale_gradients(graph, gamma)?;
    }
    let logits = forward_all(graph, &bound, state, &frames, roles)?;
    let task = graph.log_softmax_nll(logits.primary.1, &task_labels)?;
    let mut adv = Vec::with_capacity(adversarial.len());
    for ((attr, l), labels) in logits.adversarial.iter().zip(&adv_labels) {
        adv.push((*attr, graph.log_softmax_nll(*l, labels)?));
    }
    Ok(Objective { bound, task, adv })
}

fn bundle_from(graph: &Graph, obj: &Objective, primary: Attribute, state: &ModelState) -> Result<LossBundle> {
    let value = |v: Var| -> Result<f64> { Ok(graph.value(v)?.values()[0]) };
    let task_loss = value(obj.task)?;
    let adv_losses = obj
        .adv
        .iter()
        .map(|&(a, v)| Ok((a, value(v)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossBundle::assemble(primary, task_loss, adv_losses, state))
}

/// Forward-only loss evaluation for a batch.
pub fn compute_losses(batch: &[&Sample], state: &ModelState, config: &TaskConfig) -> Result<LossBundle> {
    let mut graph = Graph::new();
    let obj = build_objective(&mut graph, batch, state, &config.roles)?;
    bundle_from(&graph, &obj, config.primary()?, state)
}

/// Losses and parameter gradients with reversal nodes in place.
pub fn batch_gradients(
    batch: &[&Sample],
    state: &ModelState,
    roles: &PerAttribute<Role>,
) -> Result<(LossBundle, Gradients)> {
    let mut graph = Graph::new();
    let obj = build_objective(&mut graph, batch, state, roles)?;
    let bundle = bundle_from(&graph, &obj, primary_attribute(roles)?, state)?;
    // γ already lives in the reversal and head-scaling nodes.
    let mut total = obj.task;
    for &(_, v) in &obj.adv {
        total = graph.add(total, v)?;
    }
    graph.backward(total)?;

    let read = |v: Var| -> Result<Vec<f64>> {
        let n = graph.value(v)?.len();
        Ok(graph.grad(v)?.map_or_else(|| vec![0.0; n], <[f64]>::to_vec))
    };
    let encoder = obj
        .bound
        .encoder_leaves()
        .map(read)
        .collect::<Result<Vec<_>>>()?;
    let mut heads = PerAttribute::from_fn(|_| None);
    for attr in std::iter::once(bundle.primary).chain(obj.adv.iter().map(|(a, _)| *a)) {
        let h = &obj.bound.heads[attr];
        heads[attr] = Some([read(h.weight_leaf)?, read(h.bias_leaf)?]);
    }
    Ok((bundle, Gradients { encoder, heads }))
}

/// `θ ← θ − α·g` for the encoder and every head with a gradient.
pub fn apply_gradients(state: &mut ModelState, grads: &Gradients, learning_rate: f64) {
    for (param, g) in state.encoder_params_mut().zip(&grads.encoder) {
        sgd(param, g, learning_rate);
    }
    for attr in Attribute::ALL {
        if let Some([gw, gb]) = &grads.heads[attr] {
            let [w, b] = state.head_params_mut(attr);
            sgd(w, gw, learning_rate);
            sgd(b, gb, learning_rate);
        }
    }
}

fn sgd(param: &mut Tensor, grad: &[f64], lr: f64) {
    for (p, g) in param.values_mut().iter_mut().zip(grad) {
        *p -= lr * g;
    }
}

/// One SGD step on the reversed objective. `step` is only used for error
/// context.
pub fn train_step(
    batch: &[&Sample],
    state: &ModelState,
    config: &TaskConfig,
    step: usize,
) -> Result<(ModelState, LossBundle)> {
    let (bundle, grads) = batch_gradients(batch, state, &config.roles)?;
    if !bundle.is_finite() {
        return Err(Error::Divergence {
            step,
            message: format!("non-finite loss {bundle:?}"),
        });
    }
    let mut next = state.clone();
    apply_gradients(&mut next, &grads, config.learning_rate);
    if next.params().any(|t| !t.is_finite()) {
        return Err(Error::Divergence {
            step,
            message: "parameters became non-finite".into(),
        });
    }
    Ok((next, bundle))
}

/// One row of the loss/γ trace.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub epoch: u64,
    pub step: usize,
    pub losses: LossBundle,
    pub gamma: BTreeMap<Attribute, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochTrace {
    pub steps: Vec<StepRecord>,
}

impl EpochTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn mean_task_loss(&self) -> f64 {
        self.steps.iter().map(|s| s.losses.task_loss).sum::<f64>() / self.steps.len().max(1) as f64
    }

    pub fn mean_adv_loss(&self, attr: Attribute) -> Option<f64> {
        let v: Vec<f64> = self.steps.iter().filter_map(|s| s.losses.adv_loss(attr)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Batches of one epoch, in the shuffle order fixed by `(seed, epoch)`.
pub fn epoch_batches<'a>(split: &[&'a Sample], seed: u64, epoch: u64, batch_size: usize) -> Vec<Vec<&'a Sample>> {
    let mut order: Vec<usize> = (0..split.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(|c| c.iter().map(|&i| split[i]).collect())
        .collect()
}

/// One pass over `split` with fixed coefficients.
pub fn train_epoch(split: &[&Sample], state: ModelState, config: &TaskConfig) -> Result<(ModelState, EpochTrace)> {
    if split.is_empty() {
        return Err(Error::Data("cannot train on an empty split".into()));
    }
    let epoch = state.rng.epoch;
    let mut state = state;
    let mut trace = EpochTrace::default();
    for (step, batch) in epoch_batches(split, state.rng.seed, epoch, config.batch_size)
        .iter()
        .enumerate()
    {
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

/// CSV trace: `epoch,step,task_loss,adv_loss_<attr>...,gamma_<attr>...`.
pub fn trace_csv(records: &[StepRecord], adversarial: &[Attribute]) -> String {
    let mut out = String::from("epoch,step,task_loss");
    for a in adversarial {
        write!(out, ",adv_loss_{a}").expect("string write");
    }
    for a in adversarial {
        write!(out, ",gamma_{a}").expect("string write");
    }
    out.push('\n');
    for r in records {
        write!(out, "{},{},{}", r.epoch, r.step, r.losses.task_loss).expect("string write");
        for a in adversarial {
            let l = r.losses.adv_loss(*a).map_or(String::new(), |v| v.to_string());
            write!(out, ",{l}").expect("string write");
        }
        for a in adversarial {
            let g = r.gamma.get(a).map_or(String::new(), |v| v.to_string());
            write!(out, ",{g}").expect("string write");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::{AgeBucket, Dialect, Gender};
    use crate::model::EncoderConfig;

    fn sample(id: usize, frames: Tensor, d: Dialect, g: Gender) -> Sample {
        Sample {
            id: format!("u{id}"),
            speaker_id: format!("s{id}"),
            dialect: Some(d),
            gender: Some(g),
            age: Some(AgeBucket::From50To60),
            duration_seconds: 1.0,
            transcript: None,
            features_path: None,
            frames: Some(frames),
        }
    }

    fn tiny_batch() -> Vec<Sample> {
        (0..4)
            .map(|i| {
                let vals = (0..6).map(|k| ((i * 7 + k) as f64 * 0.31).sin()).collect();
                let d = if i % 2 == 0 { Dialect::Moldavian } else { Dialect::StandardRomanian };
                let g = if i < 2 { Gender::Male } else { Gender::Female };
                sample(i, Tensor::matrix(3, 2, vals).unwrap(), d, g)
            })
            .collect()
    }

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            input_dim: 2,
            hidden_dim: 3,
            num_layers: 2,
        }
    }

    fn roles(d: Role, g: Role, a: Role) -> PerAttribute<Role> {
        PerAttribute([d, g, a])
    }

    #[test]
    fn degenerate_config_has_no_adversarial_losses() {
        let data = tiny_batch();
        let batch: Vec<&Sample> = data.iter().collect();
        let config = TaskConfig::single_task(Attribute::Dialect);
        let state = ModelState::init(cfg(), config.initial_gamma(), 1).unwrap();
        let b = compute_losses(&batch, &state, &config).unwrap();
        assert!(b.adv_losses.is_empty());
        assert_eq!(b.combined, b.task_loss);
    }

    #[test]
    fn combined_is_gamma_weighted_sum() {
        let data = tiny_batch();
        let batch: Vec<&Sample> = data.iter().collect();
        let mut config = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Adversarial));
        config.gamma_init = [(Attribute::Gender, 0.4), (Attribute::Age, 1.5)].into_iter().collect();
        let state = ModelState::init(cfg(), config.initial_gamma(), 2).unwrap();
        let b = compute_losses(&batch, &state, &config).unwrap();
        let recomputed = b.task_loss
            + 0.4 * b.adv_loss(Attribute::Gender).unwrap()
            + 1.5 * b.adv_loss(Attribute::Age).unwrap();
        assert!((b.combined - recomputed).abs() < 1e-12);
    }

    #[test]
    fn hand_built_scalar_model_matches_hand_loss() {
        // 1-D encoder (weight 1, bias 0), two heads fed ē = tanh(x).
        let scalar = EncoderConfig {
            input_dim: 1,
            hidden_dim: 1,
            num_layers: 1,
        };
        let mut state = ModelState::zeros(scalar).unwrap();
        state.encoder[0].weight.values_mut()[0] = 1.0;
        state.heads[Attribute::Dialect].weights.values_mut().copy_from_slice(&[1.0, -1.0]);
        state.heads[Attribute::Gender].weights.values_mut().copy_from_slice(&[0.5, 0.0]);
        state.gamma.insert(Attribute::Gender, 0.3);
        let data = vec![
            sample(0, Tensor::from_rows(&[vec![1.0]]).unwrap(), Dialect::Moldavian, Gender::Female),
            sample(1, Tensor::from_rows(&[vec![-2.0]]).unwrap(), Dialect::StandardRomanian, Gender::Male),
        ];
        let batch: Vec<&Sample> = data.iter().collect();
        let mut config = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Off));
        config.gamma_init.insert(Attribute::Gender, 0.3);

        let ce = |logits: [f64; 2], label: usize| {
            let lse = (logits[0].exp() + logits[1].exp()).ln();
            lse - logits[label]
        };
        let (e0, e1) = (1.0f64.tanh(), (-2.0f64).tanh());
        let task = (ce([e0, -e0], 0) + ce([e1, -e1], 1)) / 2.0;
        let adv = (ce([0.5 * e0, 0.0], 1) + ce([0.5 * e1, 0.0], 0)) / 2.0;
        let b = compute_losses(&batch, &state, &config).unwrap();
        assert!((b.task_loss - task).abs() < 1e-14);
        assert!((b.adv_loss(Attribute::Gender).unwrap() - adv).abs() < 1e-14);
        assert!((b.combined - (task + 0.3 * adv)).abs() < 1e-14);
    }

    #[test]
    fn zero_gamma_reduces_to_single_task() {
        let data = tiny_batch();
        let batch: Vec<&Sample> = data.iter().collect();
        let mut adv = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Adversarial));
        adv.gamma_init = [(Attribute::Gender, 0.0), (Attribute::Age, 0.0)].into_iter().collect();
        let single = TaskConfig::single_task(Attribute::Dialect);
        let state = ModelState::init(cfg(), adv.initial_gamma(), 4).unwrap();
        let (_, ga) = batch_gradients(&batch, &state, &adv.roles).unwrap();
        let (_, gs) = batch_gradients(&batch, &state, &single.roles).unwrap();
        assert_eq!(ga.encoder, gs.encoder);
        let (next_a, _) = train_step(&batch, &state, &adv, 0).unwrap();
        let (next_s, _) = train_step(&batch, &state, &single, 0).unwrap();
        assert_eq!(next_a.encoder, next_s.encoder);
    }

    #[test]
    fn missing_label_names_the_sample() {
        let mut data = tiny_batch();
        data[2].gender = None;
        let batch: Vec<&Sample> = data.iter().collect();
        let config = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Off));
        let state = ModelState::init(cfg(), config.initial_gamma(), 1).unwrap();
        match compute_losses(&batch, &state, &config) {
            Err(Error::Data(m)) => assert!(m.contains("u2")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let data = tiny_batch();
        let batch: Vec<&Sample> = data.iter().collect();
        let config = TaskConfig::single_task(Attribute::Dialect);
        let mut state = ModelState::init(cfg(), BTreeMap::new(), 1).unwrap();
        state.heads[Attribute::Dialect].bias.values_mut()[0] = f64::NAN;
        match train_step(&batch, &state, &config, 17) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 17),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn epoch_counts_and_batches() {
        let data = tiny_batch();
        let split: Vec<&Sample> = data.iter().collect();
        let mut config = TaskConfig::single_task(Attribute::Dialect);
        config.batch_size = 8;
        let state = ModelState::init(cfg(), BTreeMap::new(), 1).unwrap();
        let (state, trace) = train_epoch(&split, state, &config).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(state.rng.epoch, 1);
        config.batch_size = 3;
        let (_, trace) = train_epoch(&split, state, &config).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(train_epoch(&[], ModelState::zeros(cfg()).unwrap(), &config).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Off));
        assert!(c.validate().is_ok());
        c.gamma_init.insert(Attribute::Gender, 11.0);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.gamma_init.clear();
        c.gamma_init.insert(Attribute::Age, 1.0);
        assert!(c.validate().is_err());
        let c = TaskConfig::new(roles(Role::Off, Role::Adversarial, Role::Off));
        assert!(c.validate().is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let data = tiny_batch();
        let split: Vec<&Sample> = data.iter().collect();
        let mut config = TaskConfig::new(roles(Role::Primary, Role::Adversarial, Role::Off));
        config.batch_size = 2;
        let state = ModelState::init(cfg(), config.initial_gamma(), 1).unwrap();
        let (_, trace) = train_epoch(&split, state, &config).unwrap();
        let csv = trace_csv(&trace.steps, &config.adversarial());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,step,task_loss,adv_loss_gender,gamma_gender");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[1].ends_with(",0.1"));
    }
}
