pub mod artifact;
pub mod baselines;
pub mod container;
pub mod corpus;
pub mod error;
pub mod labeling;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod prm;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
