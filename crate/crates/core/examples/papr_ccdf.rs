//! PAPR CCDF of baseline constellations with RRC shaping, and the PAPR at the 1e-3
//! exceedance level.
//!
//! `cargo run --release --example papr_ccdf`

use wavelab::channel::LinkSetup;
use wavelab::metrics::{papr_ccdf, powers};
use wavelab::waveform::{bits_to_labels, init_constellation, init_rrc, FrameConfig};

fn main() -> wavelab::Result<()> {
    let g = init_rrc(0.3, 32, 4)?;
    println!("constellation,papr_db@1e-3,ccdf@4dB,ccdf@6dB");
    for (name, k) in [("qpsk", 2), ("qam16", 4), ("qam64", 6), ("apsk64", 6)] {
        let frame = FrameConfig::full_scale(k, 1);
        let setup = LinkSetup::new(init_constellation(name)?, g.clone(), g.clone(), frame, None, None, 1.0)?;
        let start = (g.len() - 1) / 2;
        let len = frame.n_total() * frame.m;
        let mut p = Vec::new();
        for f in 0..25 {
            let labels = bits_to_labels(&setup.draw_bits(7, f), k)?;
            let tx = setup.transmit(&labels)?;
            p.extend(powers(&tx[start..start + len]));
        }
        let curve = papr_ccdf(&p)?;
        println!("{name},{:.3},{:.4},{:.5}", curve.papr_at(1e-3)?, curve.at(4.0), curve.at(6.0));
    }
    Ok(())
}
