//! Real FIR pulse-shaping filters with unit energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::signal::{convolve, upsample, ComplexBuffer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseFilter {
    pub taps: Vec<f64>,
    /// Span in symbols.
    pub span: usize,
    pub oversampling: usize,
}

/// Tap count for a span of `span` symbols at `m` samples per symbol.
pub fn filter_len(span: usize, m: usize) -> usize {
    span * m + 1
}

/// Root-raised-cosine value at `t` symbol periods.
pub fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (t.abs() - edge).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Energy-normalized RRC with `span*m + 1` taps centered at index `span*m/2`.
pub fn init_rrc(beta: f64, span: usize, m: usize) -> Result<PulseFilter> {
    if !(beta > 0.0 && beta <= 1.0) {
        return invalid(format!("RRC roll-off must be in (0, 1], got {beta}"));
    }
    if span == 0 || m == 0 {
        return invalid("RRC span and oversampling must be positive");
    }
    let len = filter_len(span, m);
    let center = (len - 1) as f64 / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|i| rrc_value((i as f64 - center) / m as f64, beta))
        .collect();
    normalize_filter(&raw, span, m)
}

/// Scales raw taps to unit energy.
pub fn normalize_filter(raw: &[f64], span: usize, m: usize) -> Result<PulseFilter> {
    if raw.len() != filter_len(span, m) {
        return invalid(format!(
            "filter has {} taps, expected S*M+1 = {}",
            raw.len(),
            filter_len(span, m)
        ));
    }
    let energy: f64 = raw.iter().map(|v| v * v).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::Degenerate("filter taps have zero energy".into()));
    }
    let s = 1.0 / energy.sqrt();
    Ok(PulseFilter {
        taps: raw.iter().map(|v| v * s).collect(),
        span,
        oversampling: m,
    })
}

impl PulseFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v * v).sum()
    }

    /// Single-tap identity filter (span 0).
    pub fn delta(m: usize) -> Self {
        Self {
            taps: vec![1.0],
            span: 0,
            oversampling: m,
        }
    }
}

/// Upsamples the symbol-rate frame by `m` and applies the transmit filter.
pub fn pulse_shape(frame: &[Complex64], g_tx: &PulseFilter, m: usize) -> Result<ComplexBuffer> {
    if m != g_tx.oversampling {
        return invalid(format!(
            "pulse_shape: oversampling {m} does not match filter ({})",
            g_tx.oversampling
        ));
    }
    convolve(&upsample(frame, m)?, &g_tx.taps)
}
