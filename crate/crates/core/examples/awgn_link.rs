//! Uncoded Gray QPSK over an RRC pair without phase noise, against Q(sqrt(2 Eb/N0)).
//!
//! `cargo run --release --example awgn_link`

use wavelab::channel::LinkSetup;
use wavelab::metrics::{evaluate_link, q_function, Demapper, LinkEvalSpec, UncodedDecoder};
use wavelab::waveform::{init_qam, init_rrc, FrameConfig};

fn main() -> wavelab::Result<()> {
    // no CP and no pilots, so all transmitted energy carries information
    let frame = FrameConfig::from_total(2, 4096, 0, 0, 0, 0, 4)?;
    let g = init_rrc(0.3, 32, 4)?;
    let setup = LinkSetup::new(init_qam(2)?, g.clone(), g, frame, None, None, 15.72e9)?;
    let spec = LinkEvalSpec {
        ebn0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
        n_frames: 60,
        code_rate: 1.0,
        seed: 11,
    };
    println!("ebn0_db,ber,theory,bits");
    for r in evaluate_link(&setup, &Demapper::Aod, &UncodedDecoder, &spec)? {
        let theory = q_function((2.0 * 10f64.powf(r.ebn0_db / 10.0)).sqrt());
        println!("{},{:.4e},{:.4e},{}", r.ebn0_db, r.ber, theory, r.bits);
    }
    Ok(())
}
