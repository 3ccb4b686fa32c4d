//! Plain (non-differentiable) signal primitives over real and complex buffers.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

pub type RealBuffer = Vec<f64>;
pub type ComplexBuffer = Vec<Complex64>;

/// Full linear convolution of a complex sequence with a real kernel.
///
/// Output length is `x.len() + h.len() - 1`.
pub fn convolve(x: &[Complex64], h: &[f64]) -> Result<ComplexBuffer> {
    if x.is_empty() || h.is_empty() {
        return invalid("convolve: empty input");
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi.re == 0.0 && xi.im == 0.0 {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    Ok(out)
}

/// Full linear convolution of two real sequences.
pub fn convolve_real(x: &[f64], h: &[f64]) -> Result<RealBuffer> {
    if x.is_empty() || h.is_empty() {
        return invalid("convolve_real: empty input");
    }
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    Ok(out)
}

/// Zero-stuffing upsampler: index `k*factor` holds `x[k]`, everything else is zero.
pub fn upsample(x: &[Complex64], factor: usize) -> Result<ComplexBuffer> {
    if factor == 0 {
        return invalid("upsample: factor must be >= 1");
    }
    let mut out = vec![Complex64::new(0.0, 0.0); x.len() * factor];
    for (k, &v) in x.iter().enumerate() {
        out[k * factor] = v;
    }
    Ok(out)
}

/// Keeps `x[offset + k*factor]` for every in-range `k`.
pub fn downsample(x: &[Complex64], factor: usize, offset: usize) -> Result<ComplexBuffer> {
    if factor == 0 {
        return invalid("downsample: factor must be >= 1");
    }
    if offset >= x.len() {
        return invalid(format!(
            "downsample: offset {offset} out of range for length {}",
            x.len()
        ));
    }
    Ok(x[offset..].iter().step_by(factor).copied().collect())
}

/// Unitary DFT (scaling 1/sqrt(N)).
pub fn dft(x: &[Complex64]) -> Result<ComplexBuffer> {
    transform(x, false)
}

/// Unitary inverse DFT, so that `idft(dft(x)) == x`.
pub fn idft(x: &[Complex64]) -> Result<ComplexBuffer> {
    transform(x, true)
}

fn transform(x: &[Complex64], inverse: bool) -> Result<ComplexBuffer> {
    if x.is_empty() {
        return invalid("dft: empty input");
    }
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = x.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}

/// Unnormalized forward FFT in place (engineering convention, no scaling).
pub(crate) fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn convolve_small_cases() {
        let y = convolve(&[c(1.0, 0.0), c(2.0, 0.0)], &[1.0]).unwrap();
        assert_eq!(y, vec![c(1.0, 0.0), c(2.0, 0.0)]);
        let y = convolve(&[c(1.0, 0.0), c(2.0, 0.0)], &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![c(1.0, 0.0), c(3.0, 0.0), c(2.0, 0.0)]);
        assert!(convolve(&[], &[1.0]).is_err());
        assert!(convolve(&[c(1.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn convolve_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_complex(&mut rng, 17);
        let h: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = convolve(&x, &h).unwrap();
        assert_eq!(y.len(), 21);
        for (n, yn) in y.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for k in 0..h.len() {
                if n >= k && n - k < x.len() {
                    acc += x[n - k] * h[k];
                }
            }
            assert!((acc - yn).norm() < 1e-12);
        }
    }

    #[test]
    fn up_and_down() {
        let a = c(1.0, 2.0);
        let b = c(-3.0, 0.5);
        assert_eq!(upsample(&[a, b], 1).unwrap(), vec![a, b]);
        let z = c(0.0, 0.0);
        assert_eq!(upsample(&[a, b], 2).unwrap(), vec![a, z, b, z]);
        assert_eq!(upsample(&[c(1.0, 1.0)], 4).unwrap(), vec![c(1.0, 1.0), z, z, z]);
        assert!(upsample(&[a], 0).is_err());

        let d = c(4.0, 4.0);
        let x = [a, b, z, d];
        assert_eq!(downsample(&x, 2, 0).unwrap(), vec![a, z]);
        assert_eq!(downsample(&x, 2, 1).unwrap(), vec![b, d]);
        assert!(downsample(&x, 2, 4).is_err());
        assert!(downsample(&x, 0, 0).is_err());
    }

    #[test]
    fn dft_delta_and_inverse() {
        let one = c(1.0, 0.0);
        let z = c(0.0, 0.0);
        let x = dft(&[one, z, z, z]).unwrap();
        for v in &x {
            assert!((v - c(0.5, 0.0)).norm() < 1e-15);
        }
        assert!(dft(&[]).is_err());
        assert!(idft(&[]).is_err());
    }

    #[test]
    fn dft_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_complex(&mut rng, 64);
        let fast = dft(&x).unwrap();
        let n = x.len() as f64;
        for (k, fk) in fast.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (t, xt) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n;
                acc += xt * Complex64::from_polar(1.0, ang);
            }
            acc /= n.sqrt();
            assert!((acc - fk).norm() < 1e-9);
        }
        let energy_t: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let energy_f: f64 = fast.iter().map(|v| v.norm_sqr()).sum();
        assert!((energy_t - energy_f).abs() < 1e-10);
        let back = idft(&fast).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(PI - 0.01 - (-PI + 0.01)) - (-0.02)).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn up_down_roundtrip(len in 1usize..40, factor in 1usize..8, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_complex(&mut rng, len);
            let y = downsample(&upsample(&x, factor).unwrap(), factor, 0).unwrap();
            proptest::prop_assert_eq!(x, y);
        }
    }
}
