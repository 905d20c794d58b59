//! Comparison verifiers: an MLP over token-statistic features and an
//! attention-pooled classifier over token embeddings.

mod attn;
mod embeddings;
mod features;
mod mlp;

pub use attn::{train_attn, AttnArch, AttnConfig, AttnEpoch, AttnHistory, AttnModel};
pub use embeddings::{
    embeddings_container, embeddings_from_container, read_embeddings, write_embeddings, TokenEmbeddingSequence,
};
pub use features::{extract_features, read_features, write_features, FeatureRecord, FeatureVector13, Summary, NUM_FEATURES};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
