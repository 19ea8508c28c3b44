//! Speaker-disjoint train/val/test assignment.

use std::collections::{BTreeMap, BTreeSet};

use mtadv::corpus::{speaker_disjoint_split, Split, SplitRatios};
use mtadv::synth::{generate, stats, SynthConfig};

fn main() -> mtadv::Result<()> {
    let mut corpus = generate(&SynthConfig::default())?;
    let assignment = speaker_disjoint_split(&corpus, SplitRatios::default(), 0)?;
    let mut speakers: BTreeMap<Split, BTreeSet<&str>> = BTreeMap::new();
    for s in &corpus.samples {
        speakers.entry(assignment[&s.id]).or_default().insert(&s.speaker_id);
    }
    for (split, set) in &speakers {
        println!("{split}: {} speakers", set.len());
    }
    corpus.split_assignment = Some(assignment);
    print!("{}", stats(&corpus).render());
    Ok(())
}
