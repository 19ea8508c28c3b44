//! Multi-target adversarial training of a shared speech-feature encoder.
//!
//! A frame encoder feeds one classification head per attribute (dialect,
//! gender, age). One attribute is the primary task; others can be made
//! adversarial, in which case a gradient reversal layer pushes the encoder
//! to discard them. The coefficients of those adversaries are either fixed
//! or adapted by a one-step lookahead hypergradient.
//!
//! Around the trainer sit the corpus tools used to build and audit such a
//! dataset: a seeded synthetic generator, speaker-disjoint splitting, SNR and
//! SRR estimators, quadratic weighted kappa, TF-IDF and token statistics,
//! and evaluation with macro metrics and linear probes.

pub mod adversarial;
pub mod attr;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
mod fsutil;
pub mod meta;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod tensor;

pub use attr::{AgeBucket, Attribute, Dialect, Gender, PerAttribute, Role};
pub use error::{Error, Result};
pub use tensor::{Graph, Tensor, TensorError, Var};
