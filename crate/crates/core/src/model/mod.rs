//! Shared frame encoder with one mean-pooled linear head per attribute.

mod checkpoint;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};

use crate::attr::{Attribute, PerAttribute, Role};
use crate::error::{Error, Result};
use crate::tensor::{softmax, Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 16,
            hidden_dim: 32,
            num_layers: 2,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 {
            return Err(Error::Config(format!(
                "encoder dimensions must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    fn layer_dims(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_layers).map(|i| {
            let fan_in = if i == 0 { self.input_dim } else { self.hidden_dim };
            (fan_in, self.hidden_dim)
        })
    }
}

/// Frame-wise affine map followed by `tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `[fan_in × fan_out]`
    pub weight: Tensor,
    /// `[fan_out]`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub attribute: Attribute,
    /// `[D × C]`
    pub weights: Tensor,
    /// `[C]`
    pub bias: Tensor,
}

impl Head {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }
}

/// Where the deterministic per-epoch shuffle stands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RngState {
    pub seed: u64,
    pub epoch: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: EncoderConfig,
    pub encoder: Vec<Layer>,
    pub heads: PerAttribute<Head>,
    /// Adversarial coefficients, keyed by adversarial attribute.
    pub gamma: BTreeMap<Attribute, f64>,
    pub rng: RngState,
}

impl ModelState {
    /// Uniform Glorot initialisation for weights, zero biases.
    pub fn init(config: EncoderConfig, gamma: BTreeMap<Attribute, f64>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x1417);
        let mut glorot = |rows: usize, cols: usize| -> Result<Tensor> {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let values = (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            Ok(Tensor::matrix(rows, cols, values)?)
        };
        let mut encoder = Vec::with_capacity(config.num_layers);
        for (fan_in, fan_out) in config.layer_dims() {
            encoder.push(Layer {
                weight: glorot(fan_in, fan_out)?,
                bias: Tensor::zeros(&[fan_out])?,
            });
        }
        let mut heads = Vec::with_capacity(3);
        for attr in Attribute::ALL {
            let c = attr.num_classes();
            heads.push(Head {
                attribute: attr,
                weights: glorot(config.hidden_dim, c)?,
                bias: Tensor::zeros(&[c])?,
            });
        }
        let heads: [Head; 3] = heads.try_into().expect("three heads");
        let state = Self {
            config,
            encoder,
            heads: PerAttribute(heads),
            gamma,
            rng: RngState { seed, epoch: 0 },
        };
        state.validate(f64::INFINITY)?;
        Ok(state)
    }

    /// Builds a model with every parameter set to zero.
    pub fn zeros(config: EncoderConfig) -> Result<Self> {
        let mut s = Self::init(config, BTreeMap::new(), 0)?;
        s.params_mut().for_each(|t| t.values_mut().fill(0.0));
        Ok(s)
    }

    pub fn validate(&self, gamma_max: f64) -> Result<()> {
        self.config.validate()?;
        if self.encoder.len() != self.config.num_layers {
            return Err(Error::State(format!(
                "{} encoder layers for num_layers = {}",
                self.encoder.len(),
                self.config.num_layers
            )));
        }
        for (layer, (fan_in, fan_out)) in self.encoder.iter().zip(self.config.layer_dims()) {
            if layer.weight.shape() != [fan_in, fan_out] || layer.bias.shape() != [fan_out] {
                return Err(Error::State(format!(
                    "encoder layer shape {:?}/{:?} does not match {fan_in}×{fan_out}",
                    layer.weight.shape(),
                    layer.bias.shape()
                )));
            }
        }
        for (attr, head) in self.heads.iter() {
            let c = attr.num_classes();
            if head.attribute != attr
                || head.weights.shape() != [self.config.hidden_dim, c]
                || head.bias.shape() != [c]
            {
                return Err(Error::State(format!("malformed {attr} head")));
            }
        }
        for (attr, &g) in &self.gamma {
            if !(g >= 0.0 && g <= gamma_max) {
                return Err(Error::State(format!(
                    "gamma for {attr} is {g}, outside [0, {gamma_max}]"
                )));
            }
        }
        Ok(())
    }

    /// Encoder tensors in layer order: weight, bias, weight, bias, ...
    pub fn encoder_params(&self) -> impl Iterator<Item = &Tensor> {
        self.encoder.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn encoder_params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.encoder.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn head_params_mut(&mut self, attr: Attribute) -> [&mut Tensor; 2] {
        let h = &mut self.heads[attr];
        [&mut h.weights, &mut h.bias]
    }

    /// Every tensor in checkpoint order: encoder, then heads by attribute.
    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.encoder_params()
            .chain(self.heads.0.iter().flat_map(|h| [&h.weights, &h.bias]))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.encoder
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .chain(
                self.heads
                    .0
                    .iter_mut()
                    .flat_map(|h| [&mut h.weights, &mut h.bias]),
            )
    }

    pub fn num_encoder_params(&self) -> usize {
        self.encoder_params().map(Tensor::len).sum()
    }

    /// Registers every parameter as a trainable leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph) -> BoundModel {
        let encoder = self
            .encoder
            .iter()
            .map(|l| BoundLayer {
                weight: graph.param(l.weight.clone()),
                bias: graph.param(l.bias.clone()),
            })
            .collect();
        let heads = PerAttribute::from_fn(|a| {
            let h = &self.heads[a];
            let weight = graph.param(h.weights.clone());
            let bias = graph.param(h.bias.clone());
            BoundHead {
                weight_leaf: weight,
                bias_leaf: bias,
                weight,
                bias,
            }
        });
        BoundModel { encoder, heads }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLayer {
    pub weight: Var,
    pub bias: Var,
}

/// Head parameters inside a graph. `weight`/`bias` are what the forward
/// pass uses; the `*_leaf` handles are where gradients are read.
#[derive(Debug, Clone, Copy)]
pub struct BoundHead {
    pub weight_leaf: Var,
    pub bias_leaf: Var,
    pub weight: Var,
    pub bias: Var,
}

impl BoundHead {
    /// Multiplies the gradient reaching this head's parameters by `factor`.
    pub fn scale_gradients(&mut self, graph: &mut Graph, factor: f64) -> Result<()> {
        self.weight = graph.scale_grad(self.weight_leaf, factor)?;
        self.bias = graph.scale_grad(self.bias_leaf, factor)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BoundModel {
    pub encoder: Vec<BoundLayer>,
    pub heads: PerAttribute<BoundHead>,
}

impl BoundModel {
    pub fn encoder_leaves(&self) -> impl Iterator<Item = Var> + '_ {
        self.encoder.iter().flat_map(|l| [l.weight, l.bias])
    }
}

fn check_width(frames: &Tensor, expected: usize, what: &str) -> Result<()> {
    match frames.shape() {
        [t, d] if *t >= 1 && *d == expected => Ok(()),
        other => Err(Error::Data(format!(
            "{what}: expected [T×{expected}] frames, got {other:?}"
        ))),
    }
}

/// Frame-wise encoder inside `graph`.
pub fn encode_in(graph: &mut Graph, model: &BoundModel, frames: Var) -> Result<Var> {
    let mut h = frames;
    for layer in &model.encoder {
        let z = graph.matmul(h, layer.weight)?;
        let z = graph.add_bias(z, layer.bias)?;
        h = graph.tanh(z)?;
    }
    Ok(h)
}

/// Linear head over stacked pooled vectors: `[B×D] -> [B×C]` logits.
pub fn head_logits_in(graph: &mut Graph, head: &BoundHead, pooled: Var) -> Result<Var> {
    let z = graph.matmul(pooled, head.weight)?;
    Ok(graph.add_bias(z, head.bias)?)
}

/// `[T×D_in] -> [T×D]` embeddings for one utterance.
pub fn encode(frames: &Tensor, state: &ModelState) -> Result<Tensor> {
    check_width(frames, state.config.input_dim, "encode")?;
    let mut g = Graph::new();
    let bound = state.bind(&mut g);
    let x = g.constant(frames.clone());
    let h = encode_in(&mut g, &bound, x)?;
    Ok(g.value(h)?.clone())
}

/// Mean-pooled encoder output for one utterance.
pub fn pooled_embedding(frames: &Tensor, state: &ModelState) -> Result<Vec<f64>> {
    check_width(frames, state.config.input_dim, "pooled_embedding")?;
    let mut g = Graph::new();
    let bound = state.bind(&mut g);
    let x = g.constant(frames.clone());
    let h = encode_in(&mut g, &bound, x)?;
    let m = g.mean_axis(h)?;
    Ok(g.value(m)?.values().to_vec())
}

/// Mean-pools `[T×D]` embeddings and returns `softmax(θ·ē + b)`.
pub fn pool_and_classify(embeddings: &Tensor, head: &Head) -> Result<Vec<f64>> {
    check_width(embeddings, head.weights.rows(), "pool_and_classify")?;
    let mut g = Graph::new();
    let e = g.constant(embeddings.clone());
    let pooled = g.mean_axis(e)?;
    let rows = g.stack_rows(&[pooled])?;
    let w = g.constant(head.weights.clone());
    let b = g.constant(head.bias.clone());
    let z = g.matmul(rows, w)?;
    let logits = g.add_bias(z, b)?;
    Ok(softmax(g.value(logits)?.values()))
}

/// Argmax class of one utterance under `attr`'s head.
pub fn predict(frames: &Tensor, state: &ModelState, attr: Attribute) -> Result<usize> {
    let e = encode(frames, state)?;
    let p = pool_and_classify(&e, &state.heads[attr])?;
    Ok(argmax(&p))
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// How adversarial heads are wired to the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    /// Through a gradient-reversal node scaled by the attribute's gamma.
    Reversed,
    /// Straight through, as if every head were a primary objective.
    Plain,
}

/// Logits produced by one multi-head forward pass.
#[derive(Debug, Clone)]
pub struct HeadLogits {
    pub primary: (Attribute, Var),
    pub adversarial: Vec<(Attribute, Var)>,
}

impl HeadLogits {
    pub fn get(&self, attr: Attribute) -> Option<Var> {
        std::iter::once(&self.primary)
            .chain(&self.adversarial)
            .find(|(a, _)| *a == attr)
            .map(|&(_, v)| v)
    }
}

/// The primary attribute of a role map, or a configuration error.
pub fn primary_attribute(roles: &PerAttribute<Role>) -> Result<Attribute> {
    let primaries: Vec<Attribute> = roles
        .iter()
        .filter(|(_, r)| **r == Role::Primary)
        .map(|(a, _)| a)
        .collect();
    match primaries.as_slice() {
        [one] => Ok(*one),
        [] => Err(Error::Config("no attribute is marked primary".into())),
        many => Err(Error::Config(format!(
            "exactly one primary attribute allowed, got {many:?}"
        ))),
    }
}

pub fn adversarial_attributes(roles: &PerAttribute<Role>) -> Vec<Attribute> {
    roles
        .iter()
        .filter(|(_, r)| **r == Role::Adversarial)
        .map(|(a, _)| a)
        .collect()
}

/// Runs the encoder once per utterance and evaluates the primary head and
/// every adversarial head; heads whose role is `Off` are skipped.
pub fn forward_all(
    graph: &mut Graph,
    model: &BoundModel,
    state: &ModelState,
    frames: &[&Tensor],
    roles: &PerAttribute<Role>,
) -> Result<HeadLogits> {
    forward_all_wired(graph, model, state, frames, roles, Wiring::Reversed)
}

pub fn forward_all_wired(
    graph: &mut Graph,
    model: &BoundModel,
    state: &ModelState,
    frames: &[&Tensor],
    roles: &PerAttribute<Role>,
    wiring: Wiring,
) -> Result<HeadLogits> {
    let primary = primary_attribute(roles)?;
    let adversarial = adversarial_attributes(roles);
    if frames.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let mut gammas = Vec::with_capacity(adversarial.len());
    for &attr in &adversarial {
        let g = *state
            .gamma
            .get(&attr)
            .ok_or_else(|| Error::Config(format!("no gamma for adversarial attribute {attr}")))?;
        gammas.push(g);
    }

    let mut primary_rows = Vec::with_capacity(frames.len());
    let mut adv_rows: Vec<Vec<Var>> = vec![Vec::with_capacity(frames.len()); adversarial.len()];
    for f in frames {
        check_width(f, state.config.input_dim, "forward_all")?;
        let x = graph.constant((*f).clone());
        let e = encode_in(graph, model, x)?;
        primary_rows.push(graph.mean_axis(e)?);
        for (rows, &gamma) in adv_rows.iter_mut().zip(&gammas) {
            let routed = match wiring {
                Wiring::Reversed => graph.grad_reverse(e, gamma)?,
                Wiring::Plain => e,
            };
            rows.push(graph.mean_axis(routed)?);
        }
    }

    let pooled = graph.stack_rows(&primary_rows)?;
    let primary_logits = head_logits_in(graph, &model.heads[primary], pooled)?;
    let mut adv = Vec::with_capacity(adversarial.len());
    for (&attr, rows) in adversarial.iter().zip(&adv_rows) {
        let pooled = graph.stack_rows(rows)?;
        adv.push((attr, head_logits_in(graph, &model.heads[attr], pooled)?));
    }
    Ok(HeadLogits {
        primary: (primary, primary_logits),
        adversarial: adv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles(d: Role, g: Role, a: Role) -> PerAttribute<Role> {
        PerAttribute([d, g, a])
    }

    fn gammas(pairs: &[(Attribute, f64)]) -> BTreeMap<Attribute, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn zero_model_encodes_to_zero() {
        let s = ModelState::zeros(EncoderConfig::default()).unwrap();
        let frames = Tensor::matrix(3, 16, (0..48).map(|i| i as f64 * 0.1).collect()).unwrap();
        let e = encode(&frames, &s).unwrap();
        assert_eq!(e.shape(), &[3, 32]);
        assert!(e.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_encoder_is_tanh() {
        let cfg = EncoderConfig {
            input_dim: 1,
            hidden_dim: 1,
            num_layers: 1,
        };
        let mut s = ModelState::zeros(cfg).unwrap();
        s.encoder[0].weight.values_mut()[0] = 1.0;
        let e = encode(&Tensor::from_rows(&[vec![0.5]]).unwrap(), &s).unwrap();
        assert_eq!(e.values(), &[0.5f64.tanh()]);
    }

    #[test]
    fn encode_rejects_wrong_width() {
        let s = ModelState::zeros(EncoderConfig::default()).unwrap();
        let frames = Tensor::zeros(&[2, 15]).unwrap();
        assert!(matches!(encode(&frames, &s), Err(Error::Data(_))));
    }

    #[test]
    fn zero_head_gives_uniform_distribution() {
        let s = ModelState::zeros(EncoderConfig::default()).unwrap();
        let e = Tensor::matrix(2, 32, vec![0.3; 64]).unwrap();
        let p = pool_and_classify(&e, &s.heads[Attribute::Age]).unwrap();
        assert_eq!(p.len(), 5);
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_head_matches_softmax_oracle() {
        let head = Head {
            attribute: Attribute::Dialect,
            weights: Tensor::from_rows(&[vec![1.0, -1.0]]).unwrap(),
            bias: Tensor::vector(vec![0.0, 0.0]).unwrap(),
        };
        let p = pool_and_classify(&Tensor::from_rows(&[vec![2.0]]).unwrap(), &head).unwrap();
        let z = (2.0f64).exp() + (-2.0f64).exp();
        assert!((p[0] - 2.0f64.exp() / z).abs() < 1e-15);
        assert!((p[1] - (-2.0f64).exp() / z).abs() < 1e-15);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_frame_pooling_is_identity() {
        let s = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 3).unwrap();
        let frame: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let head = &s.heads[Attribute::Gender];
        let p = pool_and_classify(&Tensor::matrix(1, 32, frame.clone()).unwrap(), head).unwrap();
        let logits: Vec<f64> = (0..2)
            .map(|c| {
                (0..32).fold(head.bias.values()[c], |acc, d| {
                    acc + frame[d] * head.weights.values()[d * 2 + c]
                })
            })
            .collect();
        let direct = softmax(&logits);
        for (a, b) in p.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_all_respects_roles() {
        let s = ModelState::init(
            EncoderConfig::default(),
            gammas(&[(Attribute::Gender, 0.3), (Attribute::Age, 0.2), (Attribute::Dialect, 0.1)]),
            1,
        )
        .unwrap();
        let f = Tensor::matrix(4, 16, vec![0.1; 64]).unwrap();
        let frames = [&f];

        let mut g = Graph::new();
        let b = s.bind(&mut g);
        let out = forward_all(&mut g, &b, &s, &frames, &roles(Role::Primary, Role::Off, Role::Off)).unwrap();
        assert_eq!(out.primary.0, Attribute::Dialect);
        assert!(out.adversarial.is_empty());

        let mut g = Graph::new();
        let b = s.bind(&mut g);
        let out = forward_all(
            &mut g,
            &b,
            &s,
            &frames,
            &roles(Role::Primary, Role::Adversarial, Role::Adversarial),
        )
        .unwrap();
        let attrs: Vec<_> = out.adversarial.iter().map(|(a, _)| *a).collect();
        assert_eq!(attrs, vec![Attribute::Gender, Attribute::Age]);

        let mut g = Graph::new();
        let b = s.bind(&mut g);
        let out = forward_all(
            &mut g,
            &b,
            &s,
            &frames,
            &roles(Role::Adversarial, Role::Primary, Role::Adversarial),
        )
        .unwrap();
        assert_eq!(out.primary.0, Attribute::Gender);
        assert_eq!(g.value(out.primary.1).unwrap().shape(), &[1, 2]);
        assert_eq!(g.value(out.get(Attribute::Age).unwrap()).unwrap().shape(), &[1, 5]);
    }

    #[test]
    fn forward_all_requires_exactly_one_primary() {
        let s = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 1).unwrap();
        let f = Tensor::zeros(&[2, 16]).unwrap();
        for r in [
            roles(Role::Off, Role::Off, Role::Off),
            roles(Role::Primary, Role::Primary, Role::Off),
        ] {
            let mut g = Graph::new();
            let b = s.bind(&mut g);
            assert!(matches!(
                forward_all(&mut g, &b, &s, &[&f], &r),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn reversal_does_not_change_forward_values() {
        let s = ModelState::init(
            EncoderConfig::default(),
            gammas(&[(Attribute::Gender, 2.5)]),
            9,
        )
        .unwrap();
        let f = Tensor::matrix(3, 16, (0..48).map(|i| (i as f64).cos()).collect()).unwrap();
        let r = roles(Role::Primary, Role::Adversarial, Role::Off);
        let run = |w| {
            let mut g = Graph::new();
            let b = s.bind(&mut g);
            let out = forward_all_wired(&mut g, &b, &s, &[&f], &r, w).unwrap();
            let v = g.value(out.get(Attribute::Gender).unwrap()).unwrap().clone();
            v
        };
        assert_eq!(run(Wiring::Reversed), run(Wiring::Plain));
    }

    #[test]
    fn init_is_deterministic() {
        let a = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 5).unwrap();
        let b = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 5).unwrap();
        let c = ModelState::init(EncoderConfig::default(), BTreeMap::new(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
