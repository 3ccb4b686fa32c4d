//! Soft demappers. LLRs are logits: `log P(bit=1) - log P(bit=0)`.

use std::rc::Rc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::autodiff::{Tape, Var};
use crate::numerics::cvar::CVar;
use crate::waveform::constellation::{label_subset, Constellation};

/// Symmetric bound applied to every LLR before loss or decisions.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemapperKind {
    #[serde(rename = "aod")]
    Aod,
    #[serde(rename = "pnd-lpn")]
    PndLpn,
    #[serde(rename = "pnd-hsnr")]
    PndHsnr,
    #[serde(rename = "nnd")]
    Nnd,
}

impl DemapperKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aod" => Ok(Self::Aod),
            "pnd-lpn" => Ok(Self::PndLpn),
            "pnd-hsnr" => Ok(Self::PndHsnr),
            "nnd" => Ok(Self::Nnd),
            other => invalid(format!(
                "unknown demapper `{other}` (expected aod, pnd-lpn, pnd-hsnr or nnd)"
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Aod => "aod",
            Self::PndLpn => "pnd-lpn",
            Self::PndHsnr => "pnd-hsnr",
            Self::Nnd => "nnd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PndVariant {
    Lpn,
    Hsnr,
}

/// `n_symbols x k` logits, symbol-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrBlock {
    pub k: usize,
    pub values: Vec<f64>,
}

impl LlrBlock {
    pub fn n_symbols(&self) -> usize {
        self.values.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn get(&self, n: usize, bit: usize) -> f64 {
        self.values[n * self.k + bit]
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.values {
            *v = v.clamp(-LLR_CLAMP, LLR_CLAMP);
        }
        self
    }

    /// Hard decisions, symbol-major (positive logit means bit 1).
    pub fn hard_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&v| u8::from(v > 0.0)).collect()
    }
}

fn lse(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Combines per-point log-likelihoods into per-bit LLRs via bit-subset log-sum-exp.
fn llrs_from_loglik(
    r: &[Complex64],
    c: &Constellation,
    loglik: impl Fn(Complex64, Complex64) -> f64,
) -> LlrBlock {
    let k = c.bits_per_symbol();
    let subsets: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|j| (label_subset(k, j, 1), label_subset(k, j, 0)))
        .collect();
    let mut values = Vec::with_capacity(r.len() * k);
    let mut ll = vec![0.0; c.len()];
    for &rn in r {
        for (i, p) in c.points().iter().enumerate() {
            ll[i] = loglik(rn, *p);
        }
        for (one, zero) in &subsets {
            let a = lse(one.iter().map(|&i| ll[i]));
            let b = lse(zero.iter().map(|&i| ll[i]));
            values.push(a - b);
        }
    }
    LlrBlock { k, values }
}

/// AWGN-optimal LLRs before clamping.
pub fn aod_llrs_unclamped(r: &[Complex64], c: &Constellation, sigma2: f64) -> Result<LlrBlock> {
    if !(sigma2 > 0.0) {
        return invalid(format!("AOD requires a positive noise variance, got {sigma2}"));
    }
    Ok(llrs_from_loglik(r, c, |rn, p| -(rn - p).norm_sqr() / sigma2))
}

pub fn aod_llrs(r: &[Complex64], c: &Constellation, sigma2: f64) -> Result<LlrBlock> {
    Ok(aod_llrs_unclamped(r, c, sigma2)?.clamped())
}

/// Low-phase-noise point log-likelihood (hypothesis-independent constants dropped).
pub fn loglik_lpn(r: Complex64, c: Complex64, sn2: f64, sp2: f64) -> f64 {
    let mag = c.norm();
    let rot = if mag > 0.0 { r * c.conj() / mag } else { r };
    let s = sp2 * mag * mag + sn2;
    -(rot.re - mag).powi(2) / sn2 - rot.im.powi(2) / s - s.ln()
}

/// High-SNR point log-likelihood; angle difference wrapped into (-pi, pi].
pub fn loglik_hsnr(r: Complex64, c: Complex64, sn2: f64, sp2: f64) -> f64 {
    let mag = c.norm();
    let dphi = (r * c.conj()).arg();
    let s = sp2 * mag * mag + sn2;
    -(r.norm() - mag).powi(2) / sn2 - dphi * dphi / (sp2 + sn2 / (mag * mag)) - s.ln()
}

pub fn pnd_llrs_unclamped(
    r: &[Complex64],
    c: &Constellation,
    sn2: f64,
    sp2: f64,
    variant: PndVariant,
) -> Result<LlrBlock> {
    if !(sn2 > 0.0) {
        return invalid(format!("PND requires a positive noise variance, got {sn2}"));
    }
    if !(sp2 >= 0.0) {
        return invalid(format!("PND requires a nonnegative phase variance, got {sp2}"));
    }
    Ok(match variant {
        PndVariant::Lpn => llrs_from_loglik(r, c, |rn, p| loglik_lpn(rn, p, sn2, sp2)),
        PndVariant::Hsnr => {
            if c.points().iter().any(|p| p.norm() == 0.0) {
                return invalid("PND-HSNR is undefined for a zero-magnitude point");
            }
            llrs_from_loglik(r, c, |rn, p| loglik_hsnr(rn, p, sn2, sp2))
        }
    })
}

pub fn pnd_llrs(
    r: &[Complex64],
    c: &Constellation,
    sn2: f64,
    sp2: f64,
    variant: PndVariant,
) -> Result<LlrBlock> {
    Ok(pnd_llrs_unclamped(r, c, sn2, sp2, variant)?.clamped())
}

/// Fully connected demapper `2 -> hidden... -> K`, ReLU hidden layers, linear output.
///
/// Parameters are stored layer by layer: weights (`out x in`, row-major) then biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnDemapper {
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
}

/// Default hidden widths.
pub const NN_HIDDEN: [usize; 2] = [64, 64];

impl NnDemapper {
    pub fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(k: usize, hidden: &[usize]) -> Self {
        let dims = Self::dims_for(k, hidden);
        let n = Self::param_count(&dims);
        Self {
            dims,
            params: vec![0.0; n],
        }
    }

    fn dims_for(k: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = vec![2];
        dims.extend_from_slice(hidden);
        dims.push(k);
        dims
    }

    /// He-uniform weights, zero biases.
    pub fn random<R: Rng>(k: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(k, hidden);
        let mut off = 0;
        for w in net.dims.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut net.params[off..off + fan_in * fan_out] {
                *v = rng.random_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn k(&self) -> usize {
        *self.dims.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 || self.dims[0] != 2 || self.k() == 0 {
            return invalid("NN demapper must map 2 inputs to K >= 1 outputs");
        }
        if self.params.len() != Self::param_count(&self.dims) {
            return invalid(format!(
                "NN demapper has {} parameters, dims {:?} need {}",
                self.params.len(),
                self.dims,
                Self::param_count(&self.dims)
            ));
        }
        Ok(())
    }

    /// Logits for one received symbol.
    pub fn forward_one(&self, r: Complex64) -> Vec<f64> {
        let mut x = vec![r.re, r.im];
        let mut off = 0;
        let layers = self.dims.len() - 1;
        for (l, w) in self.dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let wts = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let mut y: Vec<f64> = (0..n_out)
                .map(|o| {
                    wts[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        + bias[o]
                })
                .collect();
            if l + 1 < layers {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            x = y;
            off += n_in * n_out + n_out;
        }
        x
    }
}

pub fn nn_demap(r: &[Complex64], net: &NnDemapper) -> Result<LlrBlock> {
    net.validate()?;
    let values = r.iter().flat_map(|&rn| net.forward_one(rn)).collect();
    Ok(LlrBlock { k: net.k(), values }.clamped())
}

/// Differentiable demapping on a gradient tape. Each function returns one node per bit
/// position, holding that bit's LLR for every symbol of `r`, clamped to the LLR bound.
pub mod tape {
    use super::*;

    fn bit_llrs<'t>(tape: &'t Tape, ll: &[Var<'t>], k: usize) -> Vec<Var<'t>> {
        (0..k)
            .map(|j| {
                let one: Vec<Var<'t>> = label_subset(k, j, 1).iter().map(|&i| ll[i]).collect();
                let zero: Vec<Var<'t>> = label_subset(k, j, 0).iter().map(|&i| ll[i]).collect();
                (tape.logsumexp(&one) - tape.logsumexp(&zero)).clamp(-LLR_CLAMP, LLR_CLAMP)
            })
            .collect()
    }

    fn point<'t>(points: CVar<'t>, i: usize) -> CVar<'t> {
        points.gather(Rc::new(vec![i]))
    }

    /// AOD; `inv_sigma2` is a scalar or one value per symbol.
    pub fn aod<'t>(tape: &'t Tape, r: CVar<'t>, points: CVar<'t>, inv_sigma2: Var<'t>) -> Vec<Var<'t>> {
        let m = points.len();
        let k = m.trailing_zeros() as usize;
        let ll: Vec<Var<'t>> = (0..m)
            .map(|i| -(r.sub(point(points, i)).abs2() * inv_sigma2))
            .collect();
        bit_llrs(tape, &ll, k)
    }

    /// PND with (constant) noise and residual phase variances, scalar or per symbol.
    pub fn pnd<'t>(
        tape: &'t Tape,
        r: CVar<'t>,
        points: CVar<'t>,
        sn2: Var<'t>,
        sp2: Var<'t>,
        variant: PndVariant,
    ) -> Vec<Var<'t>> {
        let m = points.len();
        let k = m.trailing_zeros() as usize;
        let ll: Vec<Var<'t>> = (0..m)
            .map(|i| {
                let c = point(points, i);
                let mag2 = c.abs2();
                let mag = mag2.sqrt();
                let s = sp2 * mag2 + sn2;
                // r * conj(c)
                let x = r.mul(c.conj());
                match variant {
                    PndVariant::Lpn => {
                        let re = x.re / mag;
                        let im = x.im / mag;
                        -((re - mag).square() / sn2) - im.square() / s - s.ln()
                    }
                    PndVariant::Hsnr => {
                        let dphi = x.im.atan2(x.re);
                        let a = r.abs() - mag;
                        -(a.square() / sn2) - dphi.square() / (sp2 + sn2 / mag2) - s.ln()
                    }
                }
            })
            .collect();
        bit_llrs(tape, &ll, k)
    }

    /// NN demapper with parameters in one flat node laid out as [`NnDemapper::params`].
    pub fn nn<'t>(tape: &'t Tape, r: CVar<'t>, params: Var<'t>, dims: &[usize]) -> Vec<Var<'t>> {
        let n = r.len();
        // column form: features x symbols
        let mut h = tape.concat(&[r.re, r.im]);
        let mut off = 0;
        let layers = dims.len() - 1;
        for (l, w) in dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let wts = params.slice(off, n_in * n_out);
            let bias = params.slice(off + n_in * n_out, n_out);
            let z = tape.add_row_bias(tape.matmul(wts, h, n_out, n_in, n), bias, n);
            h = if l + 1 < layers { z.relu() } else { z };
            off += n_in * n_out + n_out;
        }
        let k = dims[dims.len() - 1];
        (0..k)
            .map(|j| h.slice(j * n, n).clamp(-LLR_CLAMP, LLR_CLAMP))
            .collect()
    }
}
