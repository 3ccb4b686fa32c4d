//! Transmit/receive oscillator phase-noise models and phase sample synthesis.

pub mod models;
pub mod synth;

pub use models::{
    db_sum, CompositeLogPsd, LogComponent, PnModelKind, PnSelection, PoleZeroPsd, PsdModel, TabulatedPsd,
};
pub use synth::{generate_pn, generate_pn_from_grid, psd_grid, PnGenSpec};
