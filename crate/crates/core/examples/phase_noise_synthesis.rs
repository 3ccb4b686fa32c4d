//! Oscillator phase-noise models and filtered-Gaussian synthesis: model levels at a
//! few offsets, then the Welch estimate of synthesized phase against the model.
//!
//! `cargo run --release --example phase_noise_synthesis`

use wavelab::numerics::spectrum::welch_real;
use wavelab::phase_noise::{generate_pn, CompositeLogPsd, PnGenSpec, PoleZeroPsd, PsdModel};

fn main() -> wavelab::Result<()> {
    let fc = 120e9;
    let fs = 3.93e9 * 4.0;
    // pole-zero table taken verbatim; its absolute level is implausibly high
    let tx = PoleZeroPsd::tx_lmx2595(fc);
    let rx = CompositeLogPsd::rx_ue1(fc);
    println!("offset_hz,tx_dbchz,rx_dbchz");
    for f in [1e4, 1e5, 1e6, 1e7, 1e8, 1e9] {
        println!("{f:e},{:.2},{:.2}", tx.eval_dbc(f)?, rx.eval_dbc(f)?);
    }

    let n = 1 << 18;
    let nperseg = 1 << 14;
    let runs = 20;
    let mut avg = vec![0.0; nperseg];
    let mut rms = 0.0;
    for seed in 0..runs {
        let phase = generate_pn(&rx, &PnGenSpec { sample_rate: fs, n_samples: n, seed })?;
        rms += phase.iter().map(|p| p * p).sum::<f64>() / n as f64;
        let p = welch_real(&phase, fs, nperseg)?;
        avg.iter_mut().zip(&p.density).for_each(|(a, d)| *a += d / runs as f64);
    }
    println!("\nrx-ue1 synthesis, {runs} realizations of {n} samples at {:.2} GHz", fs / 1e9);
    println!("rms phase {:.4} rad", (rms / runs as f64).sqrt());
    println!("offset_hz,welch_dbchz,model_dbchz");
    let df = fs / nperseg as f64;
    for f in [2e6, 1e7, 1e8, 1e9, 3e9] {
        let k = (f / df).round() as usize;
        println!("{:e},{:.2},{:.2}", k as f64 * df, 10.0 * avg[k].log10(), rx.eval_dbc(k as f64 * df)?);
    }
    Ok(())
}
