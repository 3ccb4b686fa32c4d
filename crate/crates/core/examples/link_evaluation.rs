//! BER, BLER and spectral efficiency of a waveform bundle under Rx phase noise, with
//! the PND demapper fed by RPN-pilot estimates.
//!
//! `cargo run --release --example link_evaluation [bundle.json]`

use wavelab::channel::LinkSetup;
use wavelab::demappers::PndVariant;
use wavelab::metrics::{evaluate_link, obw_999_filter, Demapper, LinkEvalSpec, UncodedDecoder, VarianceSource};
use wavelab::phase_noise::CompositeLogPsd;
use wavelab::trainer::{bundle_from_params, initial_params, TrainConfig};
use wavelab::waveform::WaveformBundle;

fn main() -> wavelab::Result<()> {
    let bundle = match std::env::args().nth(1) {
        Some(p) => WaveformBundle::load(p.as_ref())?,
        None => {
            let cfg = TrainConfig::desk(4);
            bundle_from_params(&cfg, &initial_params(&cfg)?)?
        }
    };
    let rx = CompositeLogPsd::rx_ue1(120e9);
    let setup = LinkSetup::new(
        bundle.constellation()?,
        bundle.tx_filter()?,
        bundle.rx_filter()?,
        bundle.frame,
        None,
        Some(&rx),
        3.93e9 * bundle.oversampling as f64,
    )?;
    let spec = LinkEvalSpec {
        ebn0_db: (0..8).map(|i| 4.0 + 2.0 * i as f64).collect(),
        n_frames: 100,
        code_rate: 1.0,
        seed: 1,
    };
    let d = Demapper::Pnd(PndVariant::Lpn, VarianceSource::Estimated);
    println!("OBW {:.4} x symbol rate", obw_999_filter(&bundle.tx_taps, bundle.oversampling)?);
    println!("ebn0_db,ber,bler,se_bits_s_hz");
    for r in evaluate_link(&setup, &d, &UncodedDecoder, &spec)? {
        println!("{},{:.4e},{:.3},{:.4}", r.ebn0_db, r.ber, r.bler, r.se);
    }
    Ok(())
}
