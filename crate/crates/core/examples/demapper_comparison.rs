//! 64-APSK + RRC at 220 GHz with Tx-free, Rx UE1 phase noise and PTRS tracking:
//! uncoded BER of the AWGN-optimal and the two phase-noise-aware demappers.
//!
//! `cargo run --release --example demapper_comparison`

use wavelab::channel::LinkSetup;
use wavelab::demappers::PndVariant;
use wavelab::metrics::{evaluate_link, Demapper, LinkEvalSpec, UncodedDecoder, VarianceSource};
use wavelab::phase_noise::CompositeLogPsd;
use wavelab::waveform::{init_apsk64, init_rrc, FrameConfig};

fn main() -> wavelab::Result<()> {
    let frame = FrameConfig::full_scale(6, 4);
    let g = init_rrc(0.3, 32, 4)?;
    let rx = CompositeLogPsd::rx_ue1(220e9);
    let setup = LinkSetup::new(init_apsk64()?, g.clone(), g, frame, None, Some(&rx), 3.93e9 * 4.0)?;
    let spec = LinkEvalSpec {
        ebn0_db: vec![10.0, 14.0, 18.0, 22.0],
        n_frames: 16,
        code_rate: 1.0,
        seed: 3,
    };
    let demappers = [
        ("aod", Demapper::Aod),
        ("pnd-lpn", Demapper::Pnd(PndVariant::Lpn, VarianceSource::Estimated)),
        ("pnd-hsnr", Demapper::Pnd(PndVariant::Hsnr, VarianceSource::Estimated)),
        ("pnd-lpn (true variances)", Demapper::Pnd(PndVariant::Lpn, VarianceSource::True)),
    ];
    for (name, d) in &demappers {
        let rows = evaluate_link(&setup, d, &UncodedDecoder, &spec)?;
        let bers: Vec<String> = rows.iter().map(|r| format!("{:.3e}", r.ber)).collect();
        println!("{name:<26} BER at {:?} dB: {}", spec.ebn0_db, bers.join("  "));
    }
    Ok(())
}
