//! Dialect as the primary task with gender as a fixed-γ adversary.

use mtadv::adversarial::{compute_losses, train_epoch, TaskConfig};
use mtadv::corpus::{speaker_disjoint_split, Split, SplitRatios};
use mtadv::eval::probe;
use mtadv::model::{EncoderConfig, ModelState};
use mtadv::synth::{generate, SynthConfig};
use mtadv::{Attribute, PerAttribute, Role};

fn main() -> mtadv::Result<()> {
    let mut corpus = generate(&SynthConfig { num_speakers: 40, samples_per_speaker: 10, ..SynthConfig::default() })?;
    corpus.split_assignment = Some(speaker_disjoint_split(&corpus, SplitRatios::new(0.7, 0.15, 0.15)?, 0)?);
    let train = corpus.split(Split::Train)?;
    let test = corpus.split(Split::Test)?;

    let mut task = TaskConfig::new(PerAttribute([Role::Primary, Role::Adversarial, Role::Off]));
    task.gamma_init.insert(Attribute::Gender, 0.5);
    task.epochs = 10;
    let mut state = ModelState::init(EncoderConfig::default(), task.initial_gamma(), task.seed)?;
    for epoch in 0..task.epochs {
        let (next, trace) = train_epoch(&train, state, &task)?;
        state = next;
        println!(
            "epoch {epoch:>2}  task {:.4}  gender {:.4}",
            trace.mean_task_loss(),
            trace.mean_adv_loss(Attribute::Gender).unwrap_or(f64::NAN)
        );
    }
    let test_losses = compute_losses(&test, &state, &task)?;
    println!("test task loss {:.4}, combined {:.4}", test_losses.task_loss, test_losses.combined);
    println!("gender probe on test: {:.3}", probe(&state, &test, Attribute::Gender, 0)?);
    Ok(())
}
