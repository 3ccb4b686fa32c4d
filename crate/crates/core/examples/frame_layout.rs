//! Block layout: cyclic prefix, Zadoff-Chu PTRS/RPN pilot groups and data positions.
//!
//! `cargo run --release --example frame_layout`

use wavelab::waveform::{assemble_frame, init_qam, map_bits, FrameConfig};

fn main() -> wavelab::Result<()> {
    let cfg = FrameConfig::full_scale(6, 1);
    let (_, layout) = assemble_frame(&vec![Default::default(); cfg.n_data], &cfg)?;
    println!(
        "block {} symbols: CP {}, {} groups x ({} PTRS + {} RPN), {} data",
        cfg.n_total(),
        cfg.n_cp,
        cfg.groups,
        cfg.n_ptrs,
        cfg.n_rpn,
        cfg.n_data
    );
    for q in 0..3 {
        println!("group {q}: PTRS {:?}, RPN {:?}", layout.ptrs[q], layout.rpn[q]);
    }
    println!("first group centres {:?}", &layout.group_centers()[..3]);

    let small = FrameConfig::from_total(2, 32, 4, 2, 2, 1, 4)?;
    let bits: Vec<u8> = (0..small.n_data * 2).map(|i| (i % 3 == 0) as u8).collect();
    let data = map_bits(&bits, &init_qam(2)?)?;
    let (frame, l) = assemble_frame(&data, &small)?;
    println!("\n32-symbol example (CP {:?}, PTRS {:?}, RPN {:?}):", l.cp, l.ptrs, l.rpn);
    for (i, s) in frame.iter().enumerate() {
        println!("{i:>2} {:+.3}{:+.3}j", s.re, s.im);
    }
    Ok(())
}
