//! Tape gradients of the full augmented loss against central differences, for every
//! parameter group of a small NN-demapper system.
//!
//! `cargo run --release --example gradient_check`

use wavelab::demappers::DemapperKind;
use wavelab::trainer::{gradient_check, probe_state, TrainConfig};
use wavelab::waveform::FrameConfig;

fn main() -> wavelab::Result<()> {
    let cfg = TrainConfig {
        frame: FrameConfig::from_total(2, 256, 16, 2, 4, 1, 4)?,
        demapper: DemapperKind::Nnd,
        batch_size: 2,
        heldout_frames: 2,
        papr_target_db: 3.0,
        ebn0_lo_db: 4.0,
        ebn0_hi_db: 4.0,
        ..TrainConfig::desk(2)
    };
    // multipliers chosen so every penalty term contributes
    let st = probe_state(&cfg)?;
    println!("group,index,analytic,numeric,rel_err");
    for p in gradient_check(&cfg, &st, 5, 0.05, 1e-5)? {
        println!("{},{},{:.6e},{:.6e},{:.1e}", p.group, p.index, p.analytic, p.numeric, p.rel_err);
    }
    Ok(())
}
