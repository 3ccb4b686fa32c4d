//! Welch power spectral density estimation (Hann window, 50% overlap).

use num_complex::Complex64;

use super::signal::fft_in_place;
use crate::error::{invalid, Result};

/// Segment length used when callers do not pick one.
pub const DEFAULT_SEGMENT: usize = 4096;

/// Two-sided PSD estimate on the FFT grid (bin `k` at `k*fs/n`, wrapped above `fs/2`).
#[derive(Clone, Debug)]
pub struct Psd {
    pub sample_rate: f64,
    /// Power density per Hz, FFT bin order.
    pub density: Vec<f64>,
}

impl Psd {
    pub fn nfft(&self) -> usize {
        self.density.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.nfft() as f64
    }

    /// Signed frequency of bin `k`.
    pub fn freq(&self, k: usize) -> f64 {
        let n = self.nfft();
        let k = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
        k * self.sample_rate / n as f64
    }

    /// Total power (integral of the density).
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// Adds another estimate with the same grid (running sum; pair with [`Psd::scale`]).
    pub fn accumulate(&mut self, other: &Psd) {
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.density.iter_mut().for_each(|v| *v *= c);
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    // periodic Hann, the usual choice for spectral estimation
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate of a complex sequence sampled at `fs`.
///
/// Segments shorter than `nperseg` are not produced; if the input is shorter than one
/// segment, a single segment covering the input is used.
pub fn welch(x: &[Complex64], fs: f64, nperseg: usize) -> Result<Psd> {
    if x.is_empty() {
        return invalid("welch: empty input");
    }
    if fs <= 0.0 || nperseg == 0 {
        return invalid("welch: sample rate and segment length must be positive");
    }
    let seg = nperseg.min(x.len());
    let step = (seg / 2).max(1);
    let w = hann(seg);
    let wpow: f64 = w.iter().map(|v| v * v).sum();
    let mut acc = vec![0.0; seg];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    while start + seg <= x.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = x[start + i] * w[i];
        }
        fft_in_place(&mut buf, false);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let norm = 1.0 / (fs * wpow * count as f64);
    Ok(Psd {
        sample_rate: fs,
        density: acc.into_iter().map(|v| v * norm).collect(),
    })
}

/// Welch estimate of a real sequence (two-sided density).
pub fn welch_real(x: &[f64], fs: f64, nperseg: usize) -> Result<Psd> {
    let cx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    welch(&cx, fs, nperseg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_level_and_total_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fs = 1000.0;
        let x: Vec<f64> = (0..1 << 16)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let p = welch_real(&x, fs, 1024).unwrap();
        // unit variance spread evenly over fs
        let mean: f64 = p.density.iter().sum::<f64>() / p.nfft() as f64;
        assert!((mean * fs - 1.0).abs() < 0.03);
        assert!((p.total_power() - 1.0).abs() < 0.03);
    }

    #[test]
    fn tone_lands_in_its_bin() {
        let fs = 64.0;
        let n = 4096;
        let x: Vec<Complex64> = (0..n)
            .map(|t| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 8.0 * t as f64 / fs))
            .collect();
        let p = welch(&x, fs, 256).unwrap();
        let kmax = (0..p.nfft())
            .max_by(|&a, &b| p.density[a].total_cmp(&p.density[b]))
            .unwrap();
        assert!((p.freq(kmax) - 8.0).abs() < 1e-9);
        assert!((p.total_power() - 1.0).abs() < 1e-9);
    }
}
