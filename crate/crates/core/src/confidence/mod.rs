//! Word-level ASR error detection: embedding fusion by an autoencoder and
//! the multi-stream MLP whose softmax-Correct output is the confidence.

mod autoencoder;
mod backoff;
mod embeddings;
mod msmlp;

pub use autoencoder::{fuse, fused_table, train_autoencoder, AutoencoderModel, AeHyper};
pub use backoff::{BackoffState, BackoffTable};
pub use embeddings::{synthetic_embeddings, EmbeddingTable, OovPolicy, UNKNOWN};
pub use msmlp::{
    attach_confidences, correct_probability, MlpExample, MlpHyper, MsMlpModel, MlpTraining,
};
