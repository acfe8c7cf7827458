//! Automatic modulation classification of raw I/Q vectors with stacked
//! sparse denoising autoencoders.
//!
//! The pipeline runs end to end on synthetic data:
//!
//! 1. [`siggen`] modulates random bytes with six digital modulation families
//!    and cuts the baseband streams into labeled interleaved I/Q vectors.
//! 2. [`whiten`] fits a ZCA whitening filter on the training vectors.
//! 3. [`sda`] trains tied-weight sparse denoising autoencoder layers with
//!    AdaGrad; [`stack`] stacks them greedily, adds a softmax head and
//!    fine-tunes the whole network.
//! 4. [`channel`] adds per-family calibrated white Gaussian noise, and
//!    [`eval`] measures confusion matrices, macro accuracy, precision and
//!    sensitivity across SNR sweeps.
//! 5. [`modelio`] persists datasets, models and receptive-field images.
//!
//! [`config`] and [`pipeline`] tie the stages together from a `key=value`
//! experiment description; [`cli`] exposes them as the `ssda` command.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod modelio;
pub mod pipeline;
pub mod rng;
pub mod sda;
pub mod siggen;
pub mod stack;
pub mod whiten;

pub use error::{Error, Result};
