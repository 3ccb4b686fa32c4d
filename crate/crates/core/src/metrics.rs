//! PAPR statistics and penalty, stopband energy / ACLR, occupied bandwidth, BCE and
//! Monte Carlo link evaluation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{FrameOutcome, LinkSetup};
use crate::demappers::{aod_llrs, nn_demap, pnd_llrs, LlrBlock, NnDemapper, PndVariant};
use crate::error::{invalid, Error, Result};
use crate::numerics::signal::{fft_in_place, lin_to_db, sinc};
use crate::numerics::spectrum::{welch, Psd, DEFAULT_SEGMENT};

/// Instantaneous powers `|x|^2`.
pub fn powers(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|v| v.norm_sqr()).collect()
}

/// Monte Carlo PAPR penalty: mean of `max(p / mean(p) - eps, 0)`.
pub fn papr_penalty(power_samples: &[f64], eps_lin: f64) -> Result<f64> {
    if power_samples.is_empty() {
        return invalid("PAPR penalty needs at least one power sample");
    }
    if !(eps_lin > 0.0) {
        return invalid("PAPR target must be positive");
    }
    let n = power_samples.len() as f64;
    let mean = power_samples.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("all power samples are zero".into()));
    }
    Ok(power_samples
        .iter()
        .map(|&p| (p / mean - eps_lin).max(0.0))
        .sum::<f64>()
        / n)
}

/// Empirical CCDF of the power normalized by its sample mean.
#[derive(Clone, Debug)]
pub struct CcdfCurve {
    pub nu_db: Vec<f64>,
    pub ccdf: Vec<f64>,
    pub samples: usize,
    /// Normalized powers, descending.
    sorted: Vec<f64>,
}

/// Default abscissae: 0 to 14 dB in 0.05 dB steps.
pub fn default_nu_grid() -> Vec<f64> {
    (0..=280).map(|i| i as f64 * 0.05).collect()
}

pub fn papr_ccdf(power_samples: &[f64]) -> Result<CcdfCurve> {
    papr_ccdf_on(power_samples, &default_nu_grid())
}

pub fn papr_ccdf_on(power_samples: &[f64], nu_db: &[f64]) -> Result<CcdfCurve> {
    if power_samples.is_empty() {
        return invalid("CCDF needs at least one power sample");
    }
    let n = power_samples.len() as f64;
    let mean = power_samples.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::Degenerate("all power samples are zero".into()));
    }
    let mut sorted: Vec<f64> = power_samples.iter().map(|p| p / mean).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let ccdf = nu_db
        .iter()
        .map(|&nu| {
            let t = 10f64.powf(nu / 10.0);
            // count of samples strictly above t
            sorted.partition_point(|&p| p > t) as f64 / n
        })
        .collect();
    Ok(CcdfCurve {
        nu_db: nu_db.to_vec(),
        ccdf,
        samples: power_samples.len(),
        sorted,
    })
}

impl CcdfCurve {
    /// Smallest level (dB) whose exceedance probability is at most `delta`.
    /// `delta = 0` gives the peak-to-mean ratio.
    pub fn papr_at(&self, delta: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&delta) {
            return invalid(format!("CCDF level must be in [0, 1), got {delta}"));
        }
        let allowed = (delta * self.samples as f64).floor() as usize;
        Ok(lin_to_db(self.sorted[allowed.min(self.samples - 1)]))
    }

    /// Exceedance probability at `nu_db`.
    pub fn at(&self, nu_db: f64) -> f64 {
        let t = 10f64.powf(nu_db / 10.0);
        self.sorted.partition_point(|&p| p > t) as f64 / self.samples as f64
    }
}

/// Stopband quadratic form: `xi_S = g^T Phi g` is the energy of `g` outside `|f| <= (1+beta)/(2M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StopbandForm {
    pub len: usize,
    pub beta: f64,
    pub m: usize,
    /// Row-major `len x len`.
    pub phi: Vec<f64>,
}

pub fn stopband_matrix(len: usize, beta: f64, m: usize) -> Result<StopbandForm> {
    if len == 0 || m == 0 {
        return invalid("stopband matrix needs a positive length and oversampling");
    }
    if !(0.0..=1.0).contains(&beta) {
        return invalid("excess bandwidth must be in [0, 1]");
    }
    let w = (1.0 + beta) / m as f64;
    let mut phi = vec![0.0; len * len];
    for i in 0..len {
        for j in 0..len {
            phi[i * len + j] = if i == j {
                1.0 - w
            } else {
                -w * sinc(w * (i as f64 - j as f64))
            };
        }
    }
    Ok(StopbandForm {
        len,
        beta,
        m,
        phi,
    })
}

impl StopbandForm {
    pub fn energy(&self, g: &[f64]) -> Result<f64> {
        if g.len() != self.len {
            return invalid(format!(
                "filter has {} taps, form expects {}",
                g.len(),
                self.len
            ));
        }
        let n = self.len;
        let mut xi = 0.0;
        for i in 0..n {
            let row = &self.phi[i * n..(i + 1) * n];
            xi += g[i] * row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(xi)
    }
}

/// `10 log10(xi / (1 - xi))` for a unit-energy filter.
pub fn aclr_beta(g: &[f64], form: &StopbandForm) -> Result<f64> {
    let e: f64 = g.iter().map(|v| v * v).sum();
    if (e - 1.0).abs() > 1e-9 {
        return invalid(format!("ACLR needs a unit-energy filter (energy {e})"));
    }
    let xi = form.energy(g)?;
    // tiny negative values are rounding of a near-ideal filter
    let xi = if xi < 0.0 && xi > -1e-12 { 0.0 } else { xi };
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::Numerical(format!(
            "stopband energy {xi} outside [0, 1)"
        )));
    }
    Ok(lin_to_db(xi / (1.0 - xi)))
}

/// `|G(f)|^2` on an `nfft`-point grid (cycles/sample, FFT order), normalized so the
/// grid sums to `nfft * energy`.
pub fn filter_spectrum(g: &[f64], nfft: usize) -> Result<Vec<f64>> {
    if nfft < g.len() || g.is_empty() {
        return invalid("filter_spectrum: nfft must cover the filter length");
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for (b, &v) in buf.iter_mut().zip(g) {
        b.re = v;
    }
    fft_in_place(&mut buf, false);
    Ok(buf.into_iter().map(|v| v.norm_sqr()).collect())
}

fn signed_freq(k: usize, n: usize) -> f64 {
    let k = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    k / n as f64
}

/// ACLR by direct integration of the zero-padded spectrum.
pub fn aclr_from_spectrum(g: &[f64], beta: f64, m: usize, nfft: usize) -> Result<f64> {
    let s = filter_spectrum(g, nfft)?;
    let edge = (1.0 + beta) / (2.0 * m as f64);
    let (mut inb, mut out) = (0.0, 0.0);
    for (k, v) in s.iter().enumerate() {
        if signed_freq(k, nfft).abs() <= edge {
            inb += v;
        } else {
            out += v;
        }
    }
    Ok(lin_to_db(out / inb))
}

/// Smallest symmetric band (same units as `psd.sample_rate`) holding `fraction` of the power.
pub fn occupied_bandwidth(psd: &Psd, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return invalid("occupied bandwidth fraction must be in (0, 1]");
    }
    let n = psd.nfft();
    let total: f64 = psd.density.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("spectrum has no power".into()));
    }
    let mut acc = psd.density[0];
    let mut k = 0;
    while acc < fraction * total && k < n / 2 {
        k += 1;
        acc += psd.density[k];
        if n - k != k {
            acc += psd.density[n - k];
        }
    }
    Ok((2 * k + 1) as f64 * psd.bin_width())
}

/// 99.9% occupied bandwidth of an oversampled signal, in multiples of the symbol rate.
pub fn obw_999(x: &[Complex64], m: usize) -> Result<f64> {
    let psd = welch(x, m as f64, DEFAULT_SEGMENT)?;
    occupied_bandwidth(&psd, 0.999)
}

/// 99.9% occupied bandwidth of a pulse's energy spectrum, in multiples of the symbol rate.
///
/// For independent zero-mean symbols this is the expected spectrum of the shaped signal.
pub fn obw_999_filter(g: &[f64], m: usize) -> Result<f64> {
    let nfft = (16 * g.len()).next_power_of_two().max(DEFAULT_SEGMENT);
    let density = filter_spectrum(g, nfft)?;
    occupied_bandwidth(
        &Psd {
            sample_rate: m as f64,
            density,
        },
        0.999,
    )
}

/// Bits per symbol-time lost to nothing: BCE in bits, averaged per data symbol.
///
/// `bits` is symbol-major and matches `llrs`.
pub fn bce_loss(bits: &[u8], llrs: &LlrBlock) -> Result<f64> {
    if bits.len() != llrs.values.len() {
        return invalid(format!(
            "{} bits but {} LLRs",
            bits.len(),
            llrs.values.len()
        ));
    }
    let n_sym = llrs.n_symbols().max(1) as f64;
    let s: f64 = bits
        .iter()
        .zip(&llrs.values)
        .map(|(&b, &g)| softplus(g) - f64::from(b) * g)
        .sum();
    Ok(s / n_sym / std::f64::consts::LN_2)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Turns LLRs into hard information-bit decisions. The uncoded decoder slices the
/// LLRs; a channel decoder can be plugged in here.
pub trait BlockDecoder: Sync {
    fn decode(&self, llrs: &LlrBlock) -> Vec<u8>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UncodedDecoder;

impl BlockDecoder for UncodedDecoder {
    fn decode(&self, llrs: &LlrBlock) -> Vec<u8> {
        llrs.hard_bits()
    }
}

/// Where PND demappers take their variances from during evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceSource {
    /// RPN pilot estimates (LPN estimator).
    #[serde(rename = "estimated")]
    Estimated,
    /// Known noise variance and measured residual phase.
    #[serde(rename = "true")]
    True,
}

#[derive(Clone, Debug)]
pub enum Demapper {
    Aod,
    Pnd(PndVariant, VarianceSource),
    Nn(NnDemapper),
}

impl Demapper {
    /// Demaps the data symbols of one simulated block.
    pub fn demap(&self, setup: &LinkSetup, out: &FrameOutcome) -> Result<LlrBlock> {
        let c = &setup.constellation;
        match self {
            Demapper::Aod => aod_llrs(&out.data, c, out.sigma2),
            Demapper::Pnd(variant, source) => {
                let (sn2, sp2) = pnd_variances(out, *source);
                pnd_llrs(&out.data, c, sn2, sp2, *variant)
            }
            Demapper::Nn(net) => nn_demap(&out.data, net),
        }
    }
}

/// Complex noise variance and residual phase variance for the PND demappers.
///
/// The pilot estimator measures the radial (per-dimension) noise, so it is doubled.
pub fn pnd_variances(out: &FrameOutcome, source: VarianceSource) -> (f64, f64) {
    let floor = 1e-12;
    match (source, out.report.residual) {
        (VarianceSource::Estimated, Some(e)) => ((2.0 * e.noise_var).max(floor), e.phase_var),
        (VarianceSource::Estimated, None) | (VarianceSource::True, _) => {
            (out.sigma2.max(floor), out.true_phase_var)
        }
    }
}

/// One row of a link sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPoint {
    pub ebn0_db: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub frames: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub bler: f64,
    /// bit/s/Hz
    pub se: f64,
}

/// Fixed settings of a sweep.
#[derive(Clone, Debug)]
pub struct LinkEvalSpec {
    pub ebn0_db: Vec<f64>,
    pub n_frames: u64,
    pub code_rate: f64,
    pub seed: u64,
}

/// Information bits per transmitted symbol (pilots and CP are overhead).
pub fn info_bits_per_symbol(setup: &LinkSetup, code_rate: f64) -> f64 {
    let f = &setup.frame;
    code_rate * f.k as f64 * f.n_data as f64 / f.n_total() as f64
}

/// `(1 - BLER) * R / (OBW * Rs)` with `R = r K N_D / N_total * Rs`.
pub fn spectral_efficiency(bler: f64, info_bits_per_symbol: f64, obw_norm: f64) -> f64 {
    (1.0 - bler) * info_bits_per_symbol / obw_norm
}

/// Monte Carlo BER/BLER/SE sweep; frames run in parallel with per-frame seeds and the
/// error counts are reduced in frame order.
pub fn evaluate_link(
    setup: &LinkSetup,
    demapper: &Demapper,
    decoder: &dyn BlockDecoder,
    spec: &LinkEvalSpec,
) -> Result<Vec<LinkPoint>> {
    let obw = obw_999_filter(&setup.g_tx.taps, setup.frame.m)?;
    let ibps = info_bits_per_symbol(setup, spec.code_rate);
    let mut rows = Vec::with_capacity(spec.ebn0_db.len());
    for (pi, &ebn0) in spec.ebn0_db.iter().enumerate() {
        let sigma2 = crate::channel::frame_noise_variance(ebn0, spec.code_rate, &setup.frame)?;
        let point_seed = crate::numerics::rng::substream_seed(
            spec.seed,
            crate::numerics::rng::Stream::EbN0,
            pi as u64,
        );
        let counts: Vec<(u64, u64)> = (0..spec.n_frames)
            .into_par_iter()
            .map(|f| -> Result<(u64, u64)> {
                let out = setup.simulate(sigma2, point_seed, f)?;
                let llrs = demapper.demap(setup, &out)?;
                let dec = decoder.decode(&llrs);
                let errs = dec.iter().zip(&out.bits).filter(|(a, b)| a != b).count() as u64;
                Ok((errs, out.bits.len() as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        let bit_errors: u64 = counts.iter().map(|c| c.0).sum();
        let bits: u64 = counts.iter().map(|c| c.1).sum();
        let frame_errors = counts.iter().filter(|c| c.0 > 0).count() as u64;
        let bler = frame_errors as f64 / spec.n_frames.max(1) as f64;
        rows.push(LinkPoint {
            ebn0_db: ebn0,
            bits,
            bit_errors,
            frames: spec.n_frames,
            frame_errors,
            ber: bit_errors as f64 / bits.max(1) as f64,
            bler,
            se: spectral_efficiency(bler, ibps, obw),
        });
    }
    Ok(rows)
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function (W. J. Cody's rational approximations, ~1e-15 relative).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    // continued-fraction-free Chebyshev fit (Numerical Recipes erfccheb)
    #[allow(clippy::excessive_precision)]
    const COF: [f64; 28] = [
        -1.3026537197817094,
        6.4196979235649026e-1,
        1.9476473204185836e-2,
        -9.561514786808631e-3,
        -9.46595344482036e-4,
        3.66839497852761e-4,
        4.2523324806907e-5,
        -2.0278578112534e-5,
        -1.624290004647e-6,
        1.303655835580e-6,
        1.5626441722e-8,
        -8.5238095915e-8,
        6.529054439e-9,
        5.059343495e-9,
        -9.91364156e-10,
        -2.27365122e-10,
        9.6467911e-11,
        2.394038e-12,
        -6.886027e-12,
        8.94487e-13,
        3.13092e-13,
        -1.12708e-13,
        3.81e-16,
        7.106e-15,
        -1.523e-15,
        -9.4e-17,
        1.21e-16,
        -2.8e-17,
    ];
    let t = 2.0 / (2.0 + x);
    let ty = 4.0 * t - 2.0;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in COF.iter().skip(1).rev() {
        let tmp = d;
        d = ty * d - dd + c;
        dd = tmp;
    }
    t * (-x * x + 0.5 * (COF[0] + ty * d) - dd).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::init_rrc;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn papr_penalty_examples() {
        assert_eq!(papr_penalty(&[1.0, 3.0], 1e12).unwrap(), 0.0);
        assert_eq!(papr_penalty(&[2.0; 10], 1.0).unwrap(), 0.0);
        assert!((papr_penalty(&[1.0, 3.0], 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(papr_penalty(&[], 1.0).is_err());
    }

    #[test]
    fn ccdf_examples() {
        let c = papr_ccdf(&[1.0; 100]).unwrap();
        assert_eq!(c.at(-0.01), 1.0);
        assert_eq!(c.at(0.0), 0.0);
        assert!(c.papr_at(0.5).unwrap().abs() < 1e-12);
        let p = [1.0, 2.0, 3.0, 10.0];
        let c = papr_ccdf(&p).unwrap();
        // delta = 0 is the peak-to-mean ratio
        assert!((c.papr_at(0.0).unwrap() - lin_to_db(10.0 / 4.0)).abs() < 1e-12);
        assert!(c.papr_at(1.0).is_err());
        for w in c.ccdf.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn stopband_diagonal_and_rrc_reference() {
        let f = stopband_matrix(129, 0.3, 4).unwrap();
        assert!((f.phi[0] - 0.675).abs() < 1e-15);
        for i in 0..129 {
            for j in 0..129 {
                assert_eq!(f.phi[i * 129 + j], f.phi[j * 129 + i]);
            }
        }
        let g = init_rrc(0.3, 32, 4).unwrap();
        let a = aclr_beta(&g.taps, &f).unwrap();
        // independent dense-matrix evaluation of the same quadratic form
        assert!((a + 55.145_733_31).abs() < 1e-6, "{a}");
        let b = aclr_from_spectrum(&g.taps, 0.3, 4, 1 << 16).unwrap();
        assert!((a - b).abs() < 0.2, "{a} vs {b}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn quadratic_form_matches_spectrum(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..33).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = crate::waveform::normalize_filter(&raw, 8, 4).unwrap();
            let f = stopband_matrix(33, 0.3, 4).unwrap();
            let a = aclr_beta(&g.taps, &f).unwrap();
            let b = aclr_from_spectrum(&g.taps, 0.3, 4, 1 << 16).unwrap();
            prop_assert!((a - b).abs() < 0.2, "{} vs {}", a, b);
        }
    }

    #[test]
    fn obw_of_rrc_is_within_rolloff_bounds() {
        let g = init_rrc(0.3, 32, 4).unwrap();
        let b = obw_999_filter(&g.taps, 4).unwrap();
        assert!(b > 1.0 && b < 1.3, "{b}");
        // brickwall: flat spectrum over the middle half of the band
        let n = 1024;
        let density: Vec<f64> = (0..n)
            .map(|k| if signed_freq(k, n).abs() < 0.25 { 1.0 } else { 0.0 })
            .collect();
        let w = occupied_bandwidth(&Psd { sample_rate: 1.0, density }, 1.0).unwrap();
        assert!((w - 0.5).abs() < 2.0 / n as f64);
    }

    #[test]
    fn bce_examples() {
        let zero = LlrBlock {
            k: 3,
            values: vec![0.0; 30],
        };
        assert!((bce_loss(&[1; 30], &zero).unwrap() - 3.0).abs() < 1e-12);
        let sure = LlrBlock {
            k: 2,
            values: vec![30.0, -30.0],
        };
        assert!(bce_loss(&[1, 0], &sure).unwrap() < 1e-8);
        let one = LlrBlock {
            k: 1,
            values: vec![1.0],
        };
        let v = bce_loss(&[1], &one).unwrap();
        assert!((v - (-(1.0 / (1.0 + (-1.0f64).exp())).log2())).abs() < 1e-12);
        assert!((v - 0.451_941_083_083_048_2).abs() < 1e-12);
        // decreasing in the correct logit
        let mut prev = f64::INFINITY;
        for g in 0..20 {
            let l = LlrBlock { k: 1, values: vec![g as f64] };
            let v = bce_loss(&[1], &l).unwrap();
            assert!(v < prev && v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn q_function_reference_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
        assert!((q_function(3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-14);
        assert!((erfc(-1.0) - 1.842_700_792_949_715).abs() < 1e-12);
    }
}
