//! Numeric substrate: signal primitives, the gradient tape, Adam, spectra and seeded RNG.

pub mod adam;
pub mod autodiff;
pub mod cvar;
pub mod params;
pub mod rng;
pub mod signal;
pub mod spectrum;

pub use adam::{adam_step, AdamState};
pub use autodiff::{Gradients, Tape, Var};
pub use cvar::CVar;
pub use params::{ParamGroup, ParamSet};
pub use signal::{
    convolve, db_to_lin, dft, downsample, idft, lin_to_db, sinc, upsample, wrap_angle,
    ComplexBuffer, RealBuffer,
};
