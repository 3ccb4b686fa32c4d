//! Constellations, pulse-shaping filters, pilots and frame assembly.

pub mod bundle;
pub mod constellation;
pub mod filter;
pub mod frame;

pub use bundle::{Provenance, TrainingMeta, WaveformBundle};
pub use constellation::{
    bits_to_labels, init_apsk64, init_qam, label_bit, label_subset, labels_to_bits, map_bits,
    normalize_constellation, Constellation,
};
pub use filter::{init_rrc, normalize_filter, pulse_shape, PulseFilter};
pub use frame::{assemble_frame, assemble_with, extract, frame_pilots, zadoff_chu, FrameConfig, FrameLayout};

use crate::error::{invalid, Result};

/// Constellation initializers selectable by name.
pub fn init_constellation(name: &str) -> Result<Constellation> {
    match name {
        "apsk64" => init_apsk64(),
        "qpsk" | "qam4" => init_qam(2),
        "qam16" => init_qam(4),
        "qam64" => init_qam(6),
        other => invalid(format!(
            "unknown constellation `{other}` (expected apsk64, qpsk, qam16 or qam64)"
        )),
    }
}

/// Default initializer for `k` bits per symbol: APSK for K = 6, square QAM otherwise.
pub fn default_constellation(k: usize) -> Result<Constellation> {
    if k == 6 {
        init_apsk64()
    } else {
        init_qam(k)
    }
}
