//! Adversarial latent-code text generation, end to end: a reverse-mode
//! autodiff tensor engine in `f64`, transformer building blocks, spectrally
//! normalized GAN networks over sentence codes, a BPE data pipeline,
//! deterministic training loops with binary checkpoints, and corpus-level
//! evaluation metrics (BLEU, Self-BLEU, forward/reverse perplexity).
//!
//! Everything is CPU-only and deterministic: a run is a pure function of its
//! seed and inputs, down to the checkpoint bytes.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod params;
pub mod rng;
pub mod specnorm;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use nn::{ArchitectureConfig, Mode};
pub use params::{Grads, ParameterStore};
pub use rng::Rng;
pub use tensor::{Graph, TensorId};