//! Oscillator phase-noise PSD models, evaluated in dBc/Hz.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::signal::{db_to_lin, lin_to_db};

/// Anything that can report a single-sideband phase-noise level at an offset frequency.
pub trait PsdModel: Send + Sync {
    /// Level in dBc/Hz at offset `f` Hz.
    fn eval_dbc(&self, f: f64) -> Result<f64>;
}

/// Multi pole-zero model: `PSD0 * prod(1 + (f/fz)^az) / prod(1 + (f/fp)^ap)`, scaled
/// from the measurement frequency `f_ref` to the carrier `f_c` by `20 log10(f_c/f_ref)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleZeroPsd {
    /// Linear power at f = 0.
    pub psd0: f64,
    /// (frequency Hz, exponent)
    pub zeros: Vec<(f64, f64)>,
    pub poles: Vec<(f64, f64)>,
    pub f_ref: f64,
    /// Carrier in Hz; tables loaded from configs take it from the scenario.
    #[serde(default)]
    pub f_c: f64,
}

impl PoleZeroPsd {
    pub fn new(
        psd0: f64,
        zeros: Vec<(f64, f64)>,
        poles: Vec<(f64, f64)>,
        f_ref: f64,
        f_c: f64,
    ) -> Result<Self> {
        if !(psd0 > 0.0) {
            return invalid("pole-zero PSD: psd0 must be positive");
        }
        if zeros.len() != poles.len() {
            return invalid("pole-zero PSD: zero and pole lists must have equal length");
        }
        if zeros.iter().chain(&poles).any(|&(f, _)| !(f > 0.0)) {
            return invalid("pole-zero PSD: zero/pole frequencies must be positive");
        }
        if !(f_ref > 0.0 && f_c > 0.0) {
            return invalid("pole-zero PSD: reference and carrier frequencies must be positive");
        }
        Ok(Self {
            psd0,
            zeros,
            poles,
            f_ref,
            f_c,
        })
    }

    /// TI LMX2595 fit measured at 20 GHz, rescaled to `f_c`.
    pub fn tx_lmx2595(f_c: f64) -> Self {
        Self {
            psd0: 6.3096e-8,
            zeros: vec![(3e-6, 1.4), (1.75e7, 2.55)],
            poles: vec![(10.0, 1.0), (3.0e5, 2.95)],
            f_ref: 20e9,
            f_c,
        }
    }

    pub fn with_carrier(mut self, f_c: f64) -> Self {
        self.f_c = f_c;
        self
    }
}

/// `10 log10(1 + (f/fc)^a)`, kept accurate when the power term overflows or underflows.
fn log_term(f: f64, corner: f64, a: f64) -> f64 {
    if f == 0.0 {
        return 0.0;
    }
    let lr = a * (f / corner).log10();
    if lr > 15.0 {
        10.0 * lr + 10.0 * (1.0 + 10f64.powf(-lr)).log10()
    } else {
        10.0 * (1.0 + 10f64.powf(lr)).log10()
    }
}

impl PsdModel for PoleZeroPsd {
    fn eval_dbc(&self, f: f64) -> Result<f64> {
        if f.is_nan() || f < 0.0 {
            return invalid(format!("pole-zero PSD: negative frequency {f}"));
        }
        let num: f64 = self.zeros.iter().map(|&(fz, a)| log_term(f, fz, a)).sum();
        let den: f64 = self.poles.iter().map(|&(fp, a)| log_term(f, fp, a)).sum();
        Ok(lin_to_db(self.psd0) + num - den + 20.0 * (self.f_c / self.f_ref).log10())
    }
}

/// One component of the composite model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComponent {
    pub fom_db: f64,
    /// Zero frequency in Hz; `None` stands for an infinite zero (term vanishes).
    pub f_z: Option<f64>,
    pub pow_mw: f64,
    pub k: f64,
}

impl LogComponent {
    /// `FOM + 20 log10(f_c) - 10 log10(POW / 1 mW)`.
    pub fn psd0_db(&self, f_c: f64) -> f64 {
        self.fom_db + 20.0 * f_c.log10() - 10.0 * self.pow_mw.log10()
    }

    /// Component level in dB at offset `f`.
    pub fn eval_db(&self, f: f64, f_c: f64) -> f64 {
        let zero = match self.f_z {
            Some(fz) => log_term(f, fz, self.k),
            None => 0.0,
        };
        self.psd0_db(f_c) + zero - log_term(f, 1.0, self.k)
    }
}

/// Composite log-domain model: Ref + PLL below the loop bandwidth, VCO terms above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeLogPsd {
    pub reference: LogComponent,
    pub pll: LogComponent,
    pub vco_v2: LogComponent,
    pub vco_v3: LogComponent,
    pub lbw: f64,
    #[serde(default)]
    pub f_c: f64,
}

impl CompositeLogPsd {
    /// 3GPP UE model 1 (loop bandwidth 187 kHz).
    pub fn rx_ue1(f_c: f64) -> Self {
        Self {
            reference: LogComponent {
                fom_db: -215.0,
                f_z: None,
                pow_mw: 10.0,
                k: 2.0,
            },
            pll: LogComponent {
                fom_db: -240.0,
                f_z: Some(1.0e4),
                pow_mw: 20.0,
                k: 1.0,
            },
            vco_v2: LogComponent {
                fom_db: -175.0,
                f_z: Some(50.3e6),
                pow_mw: 20.0,
                k: 2.0,
            },
            vco_v3: LogComponent {
                fom_db: -130.0,
                f_z: None,
                pow_mw: 20.0,
                k: 3.0,
            },
            lbw: 187e3,
            f_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lbw > 0.0) {
            return invalid("composite PSD: loop bandwidth must be positive");
        }
        for c in [&self.reference, &self.pll, &self.vco_v2, &self.vco_v3] {
            if !(c.pow_mw > 0.0) {
                return invalid("composite PSD: component power must be positive");
            }
        }
        Ok(())
    }
}

/// Power sum of two dB levels.
pub fn db_sum(a: f64, b: f64) -> f64 {
    lin_to_db(db_to_lin(a) + db_to_lin(b))
}

impl PsdModel for CompositeLogPsd {
    fn eval_dbc(&self, f: f64) -> Result<f64> {
        self.validate()?;
        if !(f > 0.0) {
            return invalid(format!(
                "composite PSD is undefined at f = {f} (log-domain model needs f > 0)"
            ));
        }
        let (a, b) = if f <= self.lbw {
            (&self.reference, &self.pll)
        } else {
            (&self.vco_v2, &self.vco_v3)
        };
        Ok(db_sum(a.eval_db(f, self.f_c), b.eval_db(f, self.f_c)))
    }
}

/// Piecewise-linear interpolation of dBc/Hz against log10(f) over a table of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPsd {
    points: Vec<(f64, f64)>,
}

impl TabulatedPsd {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("tabulated PSD needs at least two points");
        }
        if points.iter().any(|&(f, _)| !(f > 0.0)) {
            return invalid("tabulated PSD frequencies must be positive");
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    /// Samples `model` at `n` log-spaced frequencies in `[f_lo, f_hi]`.
    pub fn from_model(model: &dyn PsdModel, f_lo: f64, f_hi: f64, n: usize) -> Result<Self> {
        if !(f_lo > 0.0 && f_hi > f_lo && n >= 2) {
            return invalid("tabulated PSD: need 0 < f_lo < f_hi and n >= 2");
        }
        let (a, b) = (f_lo.log10(), f_hi.log10());
        let pts = (0..n)
            .map(|i| {
                let f = 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64);
                model.eval_dbc(f).map(|v| (f, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pts)
    }
}

impl PsdModel for TabulatedPsd {
    fn eval_dbc(&self, f: f64) -> Result<f64> {
        if !(f > 0.0) {
            return invalid("tabulated PSD evaluated at non-positive frequency");
        }
        let p = &self.points;
        if f <= p[0].0 {
            return Ok(p[0].1);
        }
        if f >= p[p.len() - 1].0 {
            return Ok(p[p.len() - 1].1);
        }
        let i = p.partition_point(|&(fi, _)| fi <= f) - 1;
        let (f0, v0) = p[i];
        let (f1, v1) = p[i + 1];
        let t = (f.log10() - f0.log10()) / (f1.log10() - f0.log10());
        Ok(v0 + t * (v1 - v0))
    }
}

/// Model selection by name, as used in configs and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PnModelKind {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "tx-lmx2595")]
    TxLmx2595,
    #[serde(rename = "rx-ue1")]
    RxUe1,
}

impl PnModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "tx-lmx2595" => Ok(Self::TxLmx2595),
            "rx-ue1" => Ok(Self::RxUe1),
            other => invalid(format!(
                "unknown phase-noise model `{other}` (expected none, tx-lmx2595 or rx-ue1)"
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::TxLmx2595 => "tx-lmx2595",
            Self::RxUe1 => "rx-ue1",
        }
    }

    /// Instantiates the model at carrier `f_c` Hz; `None` for the disabled model.
    pub fn build(self, f_c: f64) -> Option<Box<dyn PsdModel>> {
        match self {
            Self::None => None,
            Self::TxLmx2595 => Some(Box::new(PoleZeroPsd::tx_lmx2595(f_c))),
            Self::RxUe1 => Some(Box::new(CompositeLogPsd::rx_ue1(f_c))),
        }
    }
}

/// A named model, optionally with its parameter table replaced. The table's carrier
/// is overwritten at build time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnSelection {
    pub model: PnModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole_zero: Option<PoleZeroPsd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeLogPsd>,
}

impl From<PnModelKind> for PnSelection {
    fn from(model: PnModelKind) -> Self {
        Self {
            model,
            pole_zero: None,
            composite: None,
        }
    }
}

impl PnSelection {
    pub fn validate(&self) -> Result<()> {
        match (self.model, &self.pole_zero, &self.composite) {
            (_, Some(_), Some(_)) => invalid("give either a pole-zero or a composite table, not both"),
            (PnModelKind::TxLmx2595, None, Some(_)) => invalid("tx-lmx2595 takes a pole-zero table"),
            (PnModelKind::RxUe1, Some(_), None) => invalid("rx-ue1 takes a composite table"),
            (PnModelKind::None, Some(_), _) | (PnModelKind::None, _, Some(_)) => {
                invalid("a parameter table was given for the disabled model")
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, f_c: f64) -> Result<Option<Box<dyn PsdModel>>> {
        self.validate()?;
        Ok(match (self.model, &self.pole_zero, &self.composite) {
            (PnModelKind::TxLmx2595, Some(t), _) => {
                let t = t.clone();
                Some(Box::new(PoleZeroPsd::new(t.psd0, t.zeros, t.poles, t.f_ref, f_c)?))
            }
            (PnModelKind::RxUe1, _, Some(t)) => {
                let t = CompositeLogPsd { f_c, ..t.clone() };
                t.validate()?;
                Some(Box::new(t))
            }
            (kind, _, _) => kind.build(f_c),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_tables() {
        let base = PnSelection::from(PnModelKind::RxUe1);
        let custom = PnSelection {
            composite: Some(CompositeLogPsd { lbw: 1e6, ..CompositeLogPsd::rx_ue1(0.0) }),
            ..base.clone()
        };
        let a = base.build(120e9).unwrap().unwrap().eval_dbc(5e5).unwrap();
        let b = custom.build(120e9).unwrap().unwrap().eval_dbc(5e5).unwrap();
        assert!((a - b).abs() > 1.0);
        let same = PnSelection {
            composite: Some(CompositeLogPsd::rx_ue1(1.0)),
            ..base.clone()
        };
        assert_eq!(same.build(120e9).unwrap().unwrap().eval_dbc(5e5).unwrap(), a);
        let wrong = PnSelection {
            pole_zero: Some(PoleZeroPsd::tx_lmx2595(1.0)),
            ..base
        };
        assert!(wrong.build(120e9).is_err());
        assert!(PnSelection::from(PnModelKind::None).build(1.0).unwrap().is_none());
    }

    /// Direct transcription of the pole-zero formula in the linear domain.
    fn pole_zero_direct(m: &PoleZeroPsd, f: f64) -> f64 {
        let mut s = m.psd0;
        for &(fz, a) in &m.zeros {
            s *= 1.0 + (f / fz).powf(a);
        }
        for &(fp, a) in &m.poles {
            s /= 1.0 + (f / fp).powf(a);
        }
        10.0 * s.log10() + 20.0 * (m.f_c / m.f_ref).log10()
    }

    #[test]
    fn pole_zero_dc_level() {
        let m = PoleZeroPsd::tx_lmx2595(20e9);
        let v = m.eval_dbc(0.0).unwrap();
        assert!((v - 10.0 * 6.3096e-8f64.log10()).abs() < 1e-9);
        assert!((v + 72.0).abs() < 1e-3);
        assert!(m.eval_dbc(-1.0).is_err());
    }

    #[test]
    fn pole_zero_one_megahertz_matches_direct_formula() {
        let m = PoleZeroPsd::tx_lmx2595(20e9);
        // frozen from the direct linear-domain evaluation above
        let expected = 23.775_508_161_501_495;
        assert!((pole_zero_direct(&m, 1e6) - expected).abs() < 1e-9);
        assert!((m.eval_dbc(1e6).unwrap() - expected).abs() < 1e-9);
        for &f in &[1.0, 1e3, 2.5e5, 7e7, 3e9] {
            assert!((m.eval_dbc(f).unwrap() - pole_zero_direct(&m, f)).abs() < 1e-9);
        }
    }

    #[test]
    fn carrier_doubling_adds_six_db() {
        let a = PoleZeroPsd::tx_lmx2595(20e9);
        let b = PoleZeroPsd::tx_lmx2595(40e9);
        for &f in &[0.0, 1e3, 1e6, 1e9] {
            let d = b.eval_dbc(f).unwrap() - a.eval_dbc(f).unwrap();
            assert!((d - 20.0 * 2f64.log10()).abs() < 1e-9);
            assert!((d - 6.02).abs() < 0.01);
        }
    }

    #[test]
    fn pole_zero_rejects_bad_parameters() {
        assert!(PoleZeroPsd::new(0.0, vec![], vec![], 1.0, 1.0).is_err());
        assert!(PoleZeroPsd::new(1.0, vec![(1.0, 1.0)], vec![], 1.0, 1.0).is_err());
        assert!(PoleZeroPsd::new(1.0, vec![(-1.0, 1.0)], vec![(1.0, 1.0)], 1.0, 1.0).is_err());
    }

    #[test]
    fn pll_psd0_arithmetic() {
        let m = CompositeLogPsd::rx_ue1(120e9);
        let psd0 = m.pll.psd0_db(120e9);
        let expected = -240.0 + 20.0 * 1.2e11f64.log10() - 10.0 * 20f64.log10();
        assert!((psd0 - expected).abs() < 1e-12);
        assert!((psd0 + 31.4).abs() < 0.05);
    }

    #[test]
    fn composite_switches_at_loop_bandwidth() {
        let m = CompositeLogPsd::rx_ue1(120e9);
        let f_c = m.f_c;
        let below = db_sum(m.reference.eval_db(187e3, f_c), m.pll.eval_db(187e3, f_c));
        let above = db_sum(
            m.vco_v2.eval_db(187e3 + 1.0, f_c),
            m.vco_v3.eval_db(187e3 + 1.0, f_c),
        );
        assert_eq!(m.eval_dbc(187e3).unwrap(), below);
        assert_eq!(m.eval_dbc(187e3 + 1.0).unwrap(), above);
        assert!(m.eval_dbc(0.0).is_err());
    }

    #[test]
    fn composite_floor_level_at_120ghz() {
        // far above every corner the VCOv2 term flattens at PSD0 - 20 log10(f_z)
        let m = CompositeLogPsd::rx_ue1(120e9);
        let floor = m.vco_v2.psd0_db(120e9) - 20.0 * 50.3e6f64.log10();
        let v = m.eval_dbc(5e9).unwrap();
        assert!((v - floor).abs() < 0.01, "{v} vs {floor}");
        assert!((floor + 120.5).abs() < 0.1);
    }

    #[test]
    fn equal_components_add_three_db() {
        assert!((db_sum(-80.0, -80.0) - (-80.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn pole_zero_decreasing_beyond_largest_pole() {
        let m = PoleZeroPsd::tx_lmx2595(120e9);
        // monotone beyond the largest pole frequency (300 kHz)
        let mut prev = m.eval_dbc(3.0e5).unwrap();
        let mut f: f64 = 3.0e5;
        while f < 1.0e9 {
            f *= 1.2;
            let v = m.eval_dbc(f).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn tabulated_interpolates_in_log_frequency() {
        let t = TabulatedPsd::new(vec![(1e3, -80.0), (1e5, -100.0)]).unwrap();
        assert!((t.eval_dbc(1e4).unwrap() + 90.0).abs() < 1e-12);
        assert_eq!(t.eval_dbc(10.0).unwrap(), -80.0);
        let m = CompositeLogPsd::rx_ue1(120e9);
        let tab = TabulatedPsd::from_model(&m, 1e4, 1e9, 400).unwrap();
        assert!((tab.eval_dbc(3e6).unwrap() - m.eval_dbc(3e6).unwrap()).abs() < 0.1);
    }
}
