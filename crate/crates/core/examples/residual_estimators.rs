//! RPN-pilot estimators of the residual noise and phase variances: on synthetic pilots
//! with known truth, then on a simulated block after PTRS compensation.
//!
//! `cargo run --release --example residual_estimators`

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wavelab::channel::{estimate_residual_hsnr, estimate_residual_lpn, frame_noise_variance, LinkSetup};
use wavelab::phase_noise::CompositeLogPsd;
use wavelab::waveform::{init_apsk64, init_rrc, FrameConfig};

fn main() -> wavelab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (sn2, sp2) = (1e-3f64, 1e-2f64);
    let u: Vec<Complex64> = (0..100_000)
        .map(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI)))
        .collect();
    let v: Vec<Complex64> = u
        .iter()
        .map(|&p| {
            let th = rng.sample::<f64, _>(StandardNormal) * sp2.sqrt();
            let w = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * sn2.sqrt();
            p * Complex64::from_polar(1.0, th) + w
        })
        .collect();
    let lpn = estimate_residual_lpn(&u, &v, 1.0)?;
    let hsnr = estimate_residual_hsnr(&u, &v, 1.0)?;
    println!("truth     noise {sn2:.3e}  phase {sp2:.3e}");
    println!("LPN       noise {:.3e}  phase {:.3e}", lpn.noise_var, lpn.phase_var);
    println!("HSNR      noise {:.3e}  phase {:.3e}", hsnr.noise_var, hsnr.phase_var);

    let frame = FrameConfig::full_scale(6, 4);
    let g = init_rrc(0.3, 32, 4)?;
    let rx = CompositeLogPsd::rx_ue1(220e9);
    let setup = LinkSetup::new(init_apsk64()?, g.clone(), g, frame, None, Some(&rx), 3.93e9 * 4.0)?;
    let sigma2 = frame_noise_variance(20.0, 1.0, &frame)?;
    let out = setup.simulate(sigma2, 5, 0)?;
    println!("\nsimulated block at Eb/N0 20 dB, {} RPN pilots", out.rpn_rx.len());
    // the estimate also absorbs PN-induced interference, so it sits above the injected noise
    println!("injected  noise {:.3e} (per dimension)  residual phase {:.3e}", sigma2 / 2.0, out.true_phase_var);
    if let Some(e) = out.report.residual {
        println!("estimated noise {:.3e}  phase {:.3e}", e.noise_var, e.phase_var);
    }
    Ok(())
}
