//! Stopband quadratic-form ACLR of RRC filters, cross-checked by spectrum integration,
//! and the 99.9% occupied bandwidth.
//!
//! `cargo run --release --example aclr_and_bandwidth`

use wavelab::metrics::{aclr_beta, aclr_from_spectrum, obw_999_filter, stopband_matrix};
use wavelab::waveform::init_rrc;

fn main() -> wavelab::Result<()> {
    println!("beta,span,taps,aclr_db,aclr_spectrum_db,obw_norm");
    for beta in [0.25, 0.3] {
        for span in [8, 16, 32] {
            let g = init_rrc(beta, span, 4)?;
            let q = aclr_beta(&g.taps, &stopband_matrix(g.len(), beta, 4)?)?;
            let s = aclr_from_spectrum(&g.taps, beta, 4, 1 << 16)?;
            let obw = obw_999_filter(&g.taps, 4)?;
            println!("{beta},{span},{},{q:.3},{s:.3},{obw:.4}", g.len());
        }
    }
    Ok(())
}
