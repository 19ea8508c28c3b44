//! Corpus engineering: manifests, speaker-disjoint splits, quality metrics,
//! rater agreement and transcript statistics.

mod agreement;
mod manifest;
mod quality;
mod split;
mod text;

pub use agreement::{pairwise_agreement, qwk, read_rater_table, RaterTable};
pub use manifest::{
    decode_features, encode_features, manifest_from_jsonl, manifest_to_jsonl, read_features,
    read_manifest, read_waveform, write_features, write_manifest, write_waveform, CorpusManifest,
    Sample, Split, FEATURE_MAGIC,
};
pub use quality::{frame_energies, snr_estimate, srr_components};
pub use split::{speaker_disjoint_split, SplitRatios};
pub use text::{
    tfidf_csv, tfidf_top_terms, token_stats, whitespace_tokenize, ClassTerms, TokenRow, TokenStats,
};
