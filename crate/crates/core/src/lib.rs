#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod channel;
pub mod cli;
pub mod config;
pub mod demappers;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod phase_noise;
pub mod trainer;
pub mod waveform;

pub use error::{Error, Result};
