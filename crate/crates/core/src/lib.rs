//! Confidence-aware concept tagging for spoken language understanding.
//!
//! The crate covers the full desk-scale pipeline: a synthetic touristic
//! dialogue corpus, a stochastic ASR noise channel with confusion networks,
//! an embedding-fusing multi-stream MLP that scores every hypothesized word
//! as correct or erroneous, two concept taggers (a feature-templated
//! linear-chain CRF and a bidirectional GRU encoder with an attention
//! decoder), error-specific label augmentation, system combination and the
//! usual scoring metrics (NCE, calibration tables, WER, CER, CVER).

pub mod alignment;
pub mod confidence;
pub mod corpus;
pub mod crf;
pub mod eda;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
