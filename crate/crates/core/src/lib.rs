//! Blind video quality scoring from a single-pair restoration prior.
//!
//! The pipeline: train a small convolutional restoration network on one
//! original/distorted video pair, then score unseen distorted videos by how
//! well that network restores them, measured as mean log-PSNR between each
//! frame and its restoration. Higher scores mean the distortion is closer to
//! the kind the network learned to undo.

pub mod config;
pub mod distort;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod net;
pub mod score;
pub mod tensor;
pub mod train;
pub mod video;

pub use error::{Error, Result};
