//! JSON waveform bundle: constellation, filter pair, frame layout and demapper.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::constellation::{normalize_constellation, Constellation};
use super::filter::{normalize_filter, PulseFilter};
use super::frame::FrameConfig;
use crate::demappers::{DemapperKind, NnDemapper};
use crate::error::{Error, Result};

pub const LABEL_NOTE: &str = "point index is the binary label, first bit most significant";

/// Summary of the run that produced a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub outer_iterations: usize,
    pub inner_steps: usize,
    pub papr_target_db: f64,
    pub aclr_target_db: f64,
    pub final_bce: f64,
    pub final_papr_penalty: f64,
    pub final_aclr_db: f64,
}

/// Config hash and root seed of the command that wrote a file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformBundle {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub k: usize,
    pub constellation_re: Vec<f64>,
    pub constellation_im: Vec<f64>,
    pub labels: String,
    pub tx_taps: Vec<f64>,
    pub rx_taps: Vec<f64>,
    pub span: usize,
    pub oversampling: usize,
    pub rolloff: f64,
    pub frame: FrameConfig,
    pub demapper: DemapperKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn: Option<NnDemapper>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingMeta>,
    pub seed: u64,
}

impl WaveformBundle {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c: &Constellation,
        g_tx: &PulseFilter,
        g_rx: &PulseFilter,
        rolloff: f64,
        frame: FrameConfig,
        demapper: DemapperKind,
        nn: Option<NnDemapper>,
        seed: u64,
    ) -> Self {
        Self {
            provenance: None,
            k: c.bits_per_symbol(),
            constellation_re: c.points().iter().map(|p| p.re).collect(),
            constellation_im: c.points().iter().map(|p| p.im).collect(),
            labels: LABEL_NOTE.to_string(),
            tx_taps: g_tx.taps.clone(),
            rx_taps: g_rx.taps.clone(),
            span: g_tx.span,
            oversampling: g_tx.oversampling,
            rolloff,
            frame,
            demapper,
            nn,
            training: None,
            seed,
        }
    }

    /// Re-normalizes the stored points (idempotent for saved bundles).
    pub fn constellation(&self) -> Result<Constellation> {
        let raw: Vec<Complex64> = self
            .constellation_re
            .iter()
            .zip(&self.constellation_im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let c = normalize_constellation(&raw)?;
        if c.bits_per_symbol() != self.k {
            return Err(Error::Mismatch(format!(
                "bundle declares K = {} but holds {} points",
                self.k,
                raw.len()
            )));
        }
        // keep the stored values bit-for-bit when they already satisfy the invariants
        Constellation::from_normalized(raw).or(Ok(c))
    }

    pub fn tx_filter(&self) -> Result<PulseFilter> {
        self.filter(&self.tx_taps)
    }

    pub fn rx_filter(&self) -> Result<PulseFilter> {
        self.filter(&self.rx_taps)
    }

    fn filter(&self, taps: &[f64]) -> Result<PulseFilter> {
        let f = normalize_filter(taps, self.span, self.oversampling)?;
        if (f.energy() - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical("filter renormalization failed".into()));
        }
        Ok(PulseFilter {
            taps: taps.to_vec(),
            ..f
        })
    }

    /// Checks the bundle against an expected bits-per-symbol and oversampling.
    pub fn check_compatible(&self, k: usize, m: usize) -> Result<()> {
        if self.k != k || self.oversampling != m || self.frame.k != k || self.frame.m != m {
            return Err(Error::Mismatch(format!(
                "bundle has K = {}, M = {}; configuration expects K = {k}, M = {m}",
                self.k, self.oversampling
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Self = serde_json::from_str(s)?;
        b.constellation()?;
        b.tx_filter()?;
        b.rx_filter()?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::constellation::init_apsk64;
    use crate::waveform::filter::init_rrc;

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let c = init_apsk64().unwrap();
        let g = init_rrc(0.3, 32, 4).unwrap();
        let b = WaveformBundle::new(
            &c,
            &g,
            &g,
            0.3,
            FrameConfig::full_scale(6, 1),
            DemapperKind::Aod,
            None,
            7,
        );
        let s = b.to_json().unwrap();
        let back = WaveformBundle::from_json(&s).unwrap();
        assert_eq!(back, b);
        for (x, y) in back.constellation().unwrap().points().iter().zip(c.points()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        assert!(back.check_compatible(6, 4).is_ok());
        assert!(matches!(back.check_compatible(4, 4), Err(Error::Mismatch(_))));
    }
}
