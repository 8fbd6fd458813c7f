//! Prompt-conditioned unified source separation: forward inference,
//! closed-form compute accounting, attention-mask variants, KV-cached causal
//! streaming, and chunked continuous separation.

pub mod blocks;
pub mod cli;
pub mod cost;
pub mod css;
pub mod dsp;
pub mod error;
pub mod macs;
pub mod manifest;
pub mod masks;
pub mod model;
pub mod real;
pub mod rng;
pub mod streaming;
pub mod tensor;
pub mod verify;
pub mod wav;
pub mod weights_io;

pub use error::{Error, Result};
