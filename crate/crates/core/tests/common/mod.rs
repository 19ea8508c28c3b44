#![allow(dead_code)]

use std::collections::BTreeMap;

use mtadv::corpus::{speaker_disjoint_split, CorpusManifest, Sample, SplitRatios};
use mtadv::model::{forward_all_wired, EncoderConfig, ModelState, Wiring};
use mtadv::synth::{generate, SynthConfig};
use mtadv::{AgeBucket, Attribute, Dialect, Gender, Graph, PerAttribute, Role, Tensor};
use rand::{Rng, RngCore};

pub fn random_tensor(rng: &mut impl RngCore, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

/// Central differences of `f` at `x`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn random_config(rng: &mut impl RngCore) -> EncoderConfig {
    EncoderConfig {
        input_dim: rng.random_range(2..=4),
        hidden_dim: rng.random_range(2..=5),
        num_layers: rng.random_range(1..=2),
    }
}

pub fn random_batch(rng: &mut impl RngCore, input_dim: usize, size: usize) -> Vec<Sample> {
    (0..size)
        .map(|i| {
            let t = rng.random_range(1..=3);
            Sample {
                id: format!("u{i}"),
                speaker_id: format!("s{i}"),
                dialect: Some(Dialect::ALL[rng.random_range(0..2)]),
                gender: Some(Gender::ALL[rng.random_range(0..2)]),
                age: Some(AgeBucket::ALL[rng.random_range(0..5)]),
                duration_seconds: 1.0,
                transcript: None,
                features_path: None,
                frames: Some(random_tensor(rng, &[t, input_dim])),
            }
        })
        .collect()
}

pub fn random_gammas(rng: &mut impl RngCore, attrs: &[Attribute], lo: f64, hi: f64) -> BTreeMap<Attribute, f64> {
    attrs.iter().map(|&a| (a, rng.random_range(lo..hi))).collect()
}

pub fn roles(d: Role, g: Role, a: Role) -> PerAttribute<Role> {
    PerAttribute([d, g, a])
}

pub fn flat_params(state: &ModelState) -> Vec<f64> {
    state.params().flat_map(|t| t.values().to_vec()).collect()
}

pub fn set_flat_params(state: &mut ModelState, flat: &[f64]) {
    let mut it = flat.iter();
    for t in state.params_mut() {
        for v in t.values_mut() {
            *v = *it.next().unwrap();
        }
    }
}

/// `L_task + Σ w_i·L_adv_i` through a reversal-free graph, with gradients
/// for every parameter in `params` order (zeros for unused heads).
pub fn plain_objective(
    state: &ModelState,
    batch: &[&Sample],
    roles: &PerAttribute<Role>,
    weights: &BTreeMap<Attribute, f64>,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mut g = Graph::new();
    let bound = state.bind(&mut g);
    let frames: Vec<&Tensor> = batch.iter().map(|s| s.frames().unwrap()).collect();
    let logits = forward_all_wired(&mut g, &bound, state, &frames, roles, Wiring::Plain).unwrap();
    let labels = |a: Attribute| batch.iter().map(|s| s.require_label(a).unwrap()).collect::<Vec<_>>();
    let (p, pl) = logits.primary;
    let mut total = g.log_softmax_nll(pl, &labels(p)).unwrap();
    for (a, l) in &logits.adversarial {
        let loss = g.log_softmax_nll(*l, &labels(*a)).unwrap();
        let scaled = g.scale(loss, weights[a]).unwrap();
        total = g.add(total, scaled).unwrap();
    }
    let value = g.value(total).unwrap().values()[0];
    g.backward(total).unwrap();
    let read = |v| {
        let n = g.value(v).unwrap().len();
        g.grad(v).unwrap().map_or(vec![0.0; n], |s| s.to_vec())
    };
    let encoder: Vec<f64> = bound.encoder_leaves().flat_map(read).collect();
    let mut all = encoder.clone();
    for attr in Attribute::ALL {
        let h = &bound.heads[attr];
        all.extend(read(h.weight_leaf));
        all.extend(read(h.bias_leaf));
    }
    (value, encoder, all)
}

/// Synthetic corpus with a speaker-disjoint split.
pub fn split_corpus(synth: &SynthConfig, ratios: [f64; 3], seed: u64) -> CorpusManifest {
    let mut m = generate(synth).unwrap();
    m.split_assignment = Some(speaker_disjoint_split(&m, SplitRatios(ratios), seed).unwrap());
    m.validate().unwrap();
    m
}
