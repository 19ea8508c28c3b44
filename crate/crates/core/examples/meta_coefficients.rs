//! One lookahead step, its hypergradient, and the resulting γ update;
//! then a short meta-mode fit.

use mtadv::adversarial::TaskConfig;
use mtadv::corpus::{speaker_disjoint_split, Split, SplitRatios};
use mtadv::meta::{hypergradient, inner_step, meta_loss, meta_update, validation_batch, MetaConfig};
use mtadv::model::{EncoderConfig, ModelState};
use mtadv::pipeline::{fit, FitConfig, TrainMode};
use mtadv::synth::{generate, SynthConfig};
use mtadv::{Attribute, PerAttribute, Role};

fn main() -> mtadv::Result<()> {
    let mut corpus = generate(&SynthConfig { num_speakers: 30, samples_per_speaker: 10, ..SynthConfig::default() })?;
    corpus.split_assignment = Some(speaker_disjoint_split(&corpus, SplitRatios::new(0.6, 0.2, 0.2)?, 1)?);
    let train = corpus.split(Split::Train)?;
    let val = corpus.split(Split::Val)?;

    let task = TaskConfig::new(PerAttribute([Role::Primary, Role::Adversarial, Role::Adversarial]));
    let meta = MetaConfig::default();
    let state = ModelState::init(EncoderConfig::default(), task.initial_gamma(), 0)?;
    let batch = &train[..task.batch_size.min(train.len())];
    let vb = validation_batch(&val, 0, 0, meta.val_batch_size);

    let look = inner_step(batch, &state, &task)?;
    println!("meta loss at theta' = {:.5}", meta_loss(&vb, &look)?);
    let hg = hypergradient(&look, &vb)?;
    let next = meta_update(&state, &hg, &meta, task.gamma_max, 0)?;
    for (a, h) in &hg.0 {
        println!("{a}: dL/dgamma = {h:+.3e}, gamma {} -> {}", state.gamma[a], next.gamma[a]);
    }

    let mut cfg = FitConfig { task, meta, mode: TrainMode::Meta, ..FitConfig::default() };
    cfg.task.epochs = 5;
    let out = fit(&corpus, &cfg)?;
    for a in [Attribute::Gender, Attribute::Age] {
        println!("after 5 meta epochs gamma_{a} = {:.4}", out.state.gamma[&a]);
    }
    Ok(())
}
