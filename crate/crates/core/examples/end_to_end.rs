//! The full pipeline in memory: synth, split, fixed-γ and meta training,
//! evaluation, probing, checkpoint round-trip.

use mtadv::adversarial::TaskConfig;
use mtadv::corpus::{speaker_disjoint_split, Split, SplitRatios};
use mtadv::eval::{probe, render_results_table, ResultRow};
use mtadv::model::{decode_checkpoint, encode_checkpoint};
use mtadv::pipeline::{evaluate_split, fit, FitConfig, TrainMode};
use mtadv::synth::{generate, SynthConfig};
use mtadv::{Attribute, PerAttribute, Role};

fn main() -> mtadv::Result<()> {
    let mut corpus = generate(&SynthConfig { num_speakers: 50, samples_per_speaker: 12, ..SynthConfig::default() })?;
    corpus.split_assignment = Some(speaker_disjoint_split(&corpus, SplitRatios::new(0.7, 0.15, 0.15)?, 0)?);
    let test = corpus.split(Split::Test)?;

    let mut rows = Vec::new();
    for (name, roles, mode) in [
        ("single", PerAttribute([Role::Primary, Role::Off, Role::Off]), TrainMode::FixedGamma),
        ("adv-meta", PerAttribute([Role::Primary, Role::Adversarial, Role::Off]), TrainMode::Meta),
    ] {
        let mut task = TaskConfig::new(roles);
        task.epochs = 10;
        let out = fit(&corpus, &FitConfig { task, mode, ..FitConfig::default() })?;
        let bytes = encode_checkpoint(&out.state)?;
        assert_eq!(decode_checkpoint(&bytes)?, out.state);
        let report = evaluate_split(&corpus, &out.state, Split::Test, &[Attribute::Dialect])?.remove(0).1;
        println!(
            "{name}: {} checkpoint bytes, gender probe {:.3}, gamma {:?}",
            bytes.len(),
            probe(&out.state, &test, Attribute::Gender, 0)?,
            out.state.gamma
        );
        rows.push(ResultRow { model: name.into(), roles, report });
    }
    print!("{}", render_results_table(&rows));
    Ok(())
}
