//! Distinctive transcript terms per dialect and token statistics.

use mtadv::corpus::{tfidf_csv, tfidf_top_terms, token_stats, whitespace_tokenize};
use mtadv::synth::{generate, SynthConfig};
use mtadv::Attribute;

fn main() -> mtadv::Result<()> {
    let corpus = generate(&SynthConfig { num_speakers: 20, samples_per_speaker: 10, ..SynthConfig::default() })?;
    let docs: Vec<(String, Vec<String>)> = corpus
        .samples
        .iter()
        .map(|s| {
            let class = Attribute::Dialect.class_names()[s.label(Attribute::Dialect).unwrap()];
            (class.to_string(), whitespace_tokenize(s.transcript.as_deref().unwrap_or("")))
        })
        .collect();
    print!("{}", tfidf_csv(&tfidf_top_terms(&docs, 5)?));
    let samples: Vec<_> = corpus.samples.iter().collect();
    print!("{}", token_stats(&samples, whitespace_tokenize)?.render());
    Ok(())
}
