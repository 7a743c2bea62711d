//! Speech and audiovisual emotion recognition.
//!
//! The pipeline turns utterance audio into fixed-scale spectrogram images and
//! the matching video into short head-crop clips, trains audio-only or
//! two-stream (audio + video) networks with cross-entropy and contrastive
//! objectives, and evaluates them with confusion matrices.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod losses;
pub mod models;
pub mod nn;
pub mod npy;
pub mod rng;
pub mod signal;
pub mod tensor;
pub mod training;
pub mod vision;

pub use error::{Error, Result};
