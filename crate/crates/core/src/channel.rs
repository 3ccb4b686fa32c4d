//! Oversampled link: transmit shaping, phase noise and AWGN, matched filtering,
//! CP removal, PTRS phase tracking and residual-variance estimation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::numerics::rng::{substream, substream_seed, Stream};
use crate::numerics::signal::{convolve, db_to_lin, wrap_angle, ComplexBuffer, RealBuffer};
use crate::phase_noise::{generate_pn_from_grid, psd_grid, PsdModel};
use crate::waveform::{
    assemble_with, frame_pilots, labels_to_bits, pulse_shape, Constellation, FrameConfig,
    FrameLayout, PulseFilter,
};

/// `[EbN0 * r * M * (N - Q*N_P) / (N + N_CP)]^-1` with `M` the bits per symbol.
#[allow(clippy::too_many_arguments)]
pub fn noise_variance(
    ebn0_db: f64,
    rate: f64,
    bits_per_symbol: usize,
    n: usize,
    q: usize,
    n_p: usize,
    n_cp: usize,
) -> Result<f64> {
    if !ebn0_db.is_finite() {
        return invalid("noise_variance: Eb/N0 must be finite");
    }
    if !(rate > 0.0) || bits_per_symbol == 0 || n == 0 {
        return invalid("noise_variance: rate, bits per symbol and N must be positive");
    }
    let useful = n as f64 - (q * n_p) as f64;
    if useful <= 0.0 {
        return invalid(format!(
            "noise_variance: pilot overhead Q*N_P = {} leaves no data in N = {n}",
            q * n_p
        ));
    }
    let d = db_to_lin(ebn0_db) * rate * bits_per_symbol as f64 * useful / (n + n_cp) as f64;
    Ok(1.0 / d)
}

/// Noise variance for a frame: `N` is the block without CP and the pilot term counts
/// both PTRS and RPN symbols, so the energy per information bit is exact.
pub fn frame_noise_variance(ebn0_db: f64, rate: f64, cfg: &FrameConfig) -> Result<f64> {
    noise_variance(
        ebn0_db,
        rate,
        cfg.k,
        cfg.n_body(),
        cfg.groups,
        cfg.pilots_per_group(),
        cfg.n_cp,
    )
}

/// Cached synthesis filter for one phase-noise model at a fixed length and rate.
#[derive(Clone, Debug)]
pub struct PhaseNoiseSource {
    grid: Option<Vec<f64>>,
    fs: f64,
    n: usize,
}

impl PhaseNoiseSource {
    pub fn new(model: Option<&dyn PsdModel>, fs: f64, n: usize) -> Result<Self> {
        let grid = match model {
            Some(m) => Some(psd_grid(m, fs, n)?),
            None => None,
        };
        Ok(Self { grid, fs, n })
    }

    pub fn disabled(n: usize) -> Self {
        Self {
            grid: None,
            fs: 1.0,
            n,
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.grid.is_some()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<RealBuffer> {
        match &self.grid {
            Some(g) => generate_pn_from_grid(g, self.fs, rng),
            None => Ok(vec![0.0; self.n]),
        }
    }
}

/// One draw of the channel for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// Transmit and receive oscillator phases (radians), one per oversampled sample.
    pub pn_tx: RealBuffer,
    pub pn_rx: RealBuffer,
    pub noise_seed: u64,
    /// Complex noise variance.
    pub sigma2: f64,
}

impl ChannelRealization {
    pub fn noiseless(n: usize) -> Self {
        Self {
            pn_tx: vec![0.0; n],
            pn_rx: vec![0.0; n],
            noise_seed: 0,
            sigma2: 0.0,
        }
    }

    pub fn total_phase(&self) -> RealBuffer {
        self.pn_tx.iter().zip(&self.pn_rx).map(|(a, b)| a + b).collect()
    }
}

/// Circular complex Gaussian samples, variance `sigma2` split evenly over re/im.
pub fn awgn(seed: u64, n: usize, sigma2: f64) -> ComplexBuffer {
    if sigma2 == 0.0 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (sigma2 / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// `s(n) e^{j(theta_tx(n) + theta_rx(n))} + w(n)`.
pub fn apply_impairments(s: &[Complex64], real: &ChannelRealization) -> Result<ComplexBuffer> {
    if real.pn_tx.len() != s.len() || real.pn_rx.len() != s.len() {
        return invalid(format!(
            "phase buffers ({}, {}) do not match the signal length {}",
            real.pn_tx.len(),
            real.pn_rx.len(),
            s.len()
        ));
    }
    if !(real.sigma2 >= 0.0) {
        return invalid("noise variance must be nonnegative");
    }
    let w = awgn(real.noise_seed, s.len(), real.sigma2);
    Ok(s.iter()
        .zip(real.pn_tx.iter().zip(&real.pn_rx))
        .zip(w)
        .map(|((&x, (&a, &b)), wn)| x * Complex64::from_polar(1.0, a + b) + wn)
        .collect())
}

/// Combined group delay of the filter pair, in oversampled samples.
pub fn sampling_offset(l_tx: usize, l_rx: usize) -> usize {
    (l_tx - 1) / 2 + (l_rx - 1) / 2
}

/// Matched filtering, symbol-rate sampling and CP removal. Returns the block body.
pub fn receive_chain(
    r: &[Complex64],
    g_rx: &PulseFilter,
    l_tx: usize,
    m: usize,
    layout: &FrameLayout,
) -> Result<ComplexBuffer> {
    if m == 0 || l_tx == 0 {
        return invalid("receive_chain: M and transmit filter length must be positive");
    }
    let y = convolve(r, &g_rx.taps)?;
    let off = sampling_offset(l_tx, g_rx.len());
    let n = layout.n_total();
    if off + (n - 1) * m >= y.len() {
        return Err(Error::Layout(format!(
            "received signal of {} samples is too short for {n} symbols at offset {off}",
            y.len()
        )));
    }
    Ok((layout.cfg.n_cp..n).map(|k| y[off + k * m]).collect())
}

/// Positions relative to the block body (CP removed).
#[derive(Clone, Debug, PartialEq)]
pub struct BodyIndex {
    pub data: Vec<usize>,
    pub ptrs: Vec<usize>,
    pub rpn: Vec<usize>,
    /// Body position of each PTRS group center.
    pub centers: Vec<f64>,
}

impl BodyIndex {
    pub fn new(layout: &FrameLayout) -> Self {
        let cp = layout.cfg.n_cp;
        let shift = |v: Vec<usize>| v.into_iter().map(|i| i - cp).collect::<Vec<_>>();
        Self {
            data: shift(layout.data_indices()),
            ptrs: shift(layout.ptrs_indices()),
            rpn: shift(layout.rpn_indices()),
            centers: layout
                .group_centers()
                .into_iter()
                .map(|c| c - cp as f64)
                .collect(),
        }
    }
}

/// Residual noise and phase variance estimates from RPN pilots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualEstimate {
    /// Per-dimension noise variance (radial component).
    pub noise_var: f64,
    pub phase_var: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompensationReport {
    /// Averaged phase of each PTRS group, unwrapped along the block.
    pub group_phases: Vec<f64>,
    /// Phase estimate at every body position.
    pub track: Vec<f64>,
    pub residual: Option<ResidualEstimate>,
    pub warning: Option<String>,
}

/// Sequentially unwraps a phase list so consecutive entries differ by at most pi.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        match out.last() {
            Some(&prev) => out.push(prev + wrap_angle(p - prev)),
            None => out.push(p),
        }
    }
    out
}

/// Piecewise-linear interpolation through `(centers, values)` on `0..n`, constant
/// beyond the outer centers. Returns all zeros if there are no centers.
pub fn interpolate_track(centers: &[f64], values: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| interp_at(centers, values, i as f64)).collect()
}

fn interp_at(c: &[f64], v: &[f64], x: f64) -> f64 {
    match c.len() {
        0 => 0.0,
        _ if x <= c[0] => v[0],
        _ if x >= c[c.len() - 1] => v[v.len() - 1],
        _ => {
            let j = c.partition_point(|&ci| ci <= x) - 1;
            let t = (x - c[j]) / (c[j + 1] - c[j]);
            v[j] + t * (v[j + 1] - v[j])
        }
    }
}

/// Interpolation weights `(lower index, upper index, t)` for every body position.
pub fn track_weights(centers: &[f64], n: usize) -> Vec<(usize, usize, f64)> {
    (0..n)
        .map(|i| {
            let x = i as f64;
            let q = centers.len();
            if q == 0 || x <= centers[0] {
                (0, 0, 0.0)
            } else if x >= centers[q - 1] {
                (q - 1, q - 1, 0.0)
            } else {
                let j = centers.partition_point(|&ci| ci <= x) - 1;
                (j, j + 1, (x - centers[j]) / (centers[j + 1] - centers[j]))
            }
        })
        .collect()
}

/// PTRS-based phase tracking over a block body.
///
/// `pilots_tx` holds all transmitted pilots, group by group (PTRS then RPN).
pub fn ptrs_compensate(
    body: &[Complex64],
    pilots_tx: &[Complex64],
    layout: &FrameLayout,
) -> Result<(ComplexBuffer, CompensationReport)> {
    let cfg = &layout.cfg;
    if body.len() != cfg.n_body() {
        return Err(Error::Layout(format!(
            "body has {} symbols, layout expects {}",
            body.len(),
            cfg.n_body()
        )));
    }
    if pilots_tx.len() != cfg.n_pilots() {
        return invalid(format!(
            "{} transmitted pilots, layout expects {}",
            pilots_tx.len(),
            cfg.n_pilots()
        ));
    }
    if cfg.groups == 0 || cfg.n_ptrs == 0 {
        return Ok((
            body.to_vec(),
            CompensationReport {
                group_phases: vec![],
                track: vec![0.0; body.len()],
                residual: None,
                warning: Some("no PTRS groups; phase compensation skipped".into()),
            },
        ));
    }
    let idx = BodyIndex::new(layout);
    let (ptrs_tx, _) = layout.split_pilots(pilots_tx);
    let raw: Vec<f64> = ptrs_tx
        .iter()
        .enumerate()
        .map(|(q, p)| {
            let base = q * cfg.n_ptrs;
            let acc: Complex64 = p
                .iter()
                .enumerate()
                .map(|(i, &pi)| body[idx.ptrs[base + i]] * pi.conj() / pi.norm_sqr())
                .sum();
            (acc / cfg.n_ptrs as f64).arg()
        })
        .collect();
    let group_phases = unwrap_phases(&raw);
    let track = interpolate_track(&idx.centers, &group_phases, body.len());
    let out = body
        .iter()
        .zip(&track)
        .map(|(&r, &th)| r * Complex64::from_polar(1.0, -th))
        .collect();
    Ok((
        out,
        CompensationReport {
            group_phases,
            track,
            residual: None,
            warning: None,
        },
    ))
}

fn check_pilots(u: &[Complex64], v: &[Complex64], es: f64) -> Result<()> {
    if !(es > 0.0) {
        return invalid(format!("symbol energy must be positive, got {es}"));
    }
    if u.len() != v.len() {
        return invalid("transmitted and received pilot counts differ");
    }
    if u.len() < 2 {
        return invalid("residual estimation needs at least two pilots");
    }
    Ok(())
}

/// Low-phase-noise ML estimates.
pub fn estimate_residual_lpn(u: &[Complex64], v: &[Complex64], es: f64) -> Result<ResidualEstimate> {
    check_pilots(u, v, es)?;
    let n = u.len() as f64;
    let (mut sn, mut sp) = (0.0, 0.0);
    for (&ul, &vl) in u.iter().zip(v) {
        let rot = vl * Complex64::from_polar(1.0, -ul.arg());
        sn += (rot.re - es.sqrt()).powi(2);
        sp += rot.im.powi(2);
    }
    let noise_var = sn / n;
    Ok(ResidualEstimate {
        noise_var,
        phase_var: (sp / n - noise_var / es).max(0.0),
    })
}

/// High-SNR ML estimates (magnitude and wrapped angle).
pub fn estimate_residual_hsnr(u: &[Complex64], v: &[Complex64], es: f64) -> Result<ResidualEstimate> {
    check_pilots(u, v, es)?;
    let n = u.len() as f64;
    let (mut sn, mut sp) = (0.0, 0.0);
    for (&ul, &vl) in u.iter().zip(v) {
        sn += (vl.norm() - es.sqrt()).powi(2);
        sp += wrap_angle(vl.arg() - ul.arg()).powi(2);
    }
    let noise_var = sn / n;
    Ok(ResidualEstimate {
        noise_var,
        phase_var: (sp / n - noise_var / es).max(0.0),
    })
}

/// Fixed parts of a simulated link (waveform, layout and phase-noise synthesis).
#[derive(Clone, Debug)]
pub struct LinkSetup {
    pub constellation: Constellation,
    pub g_tx: PulseFilter,
    pub g_rx: PulseFilter,
    pub frame: FrameConfig,
    pub layout: FrameLayout,
    pub index: BodyIndex,
    pub pilots: ComplexBuffer,
    pub pn_tx: PhaseNoiseSource,
    pub pn_rx: PhaseNoiseSource,
}

/// Everything the receiver and the metrics need from one simulated block.
#[derive(Clone, Debug)]
pub struct FrameOutcome {
    /// Transmitted bits, symbol-major.
    pub bits: Vec<u8>,
    /// Oversampled transmit signal.
    pub tx: ComplexBuffer,
    /// Compensated data symbols.
    pub data: ComplexBuffer,
    pub rpn_tx: ComplexBuffer,
    /// Compensated received RPN pilots.
    pub rpn_rx: ComplexBuffer,
    pub report: CompensationReport,
    pub sigma2: f64,
    /// Mean square of the phase left after tracking, at the data positions.
    pub true_phase_var: f64,
}

impl LinkSetup {
    pub fn new(
        constellation: Constellation,
        g_tx: PulseFilter,
        g_rx: PulseFilter,
        frame: FrameConfig,
        pn_tx: Option<&dyn PsdModel>,
        pn_rx: Option<&dyn PsdModel>,
        sample_rate: f64,
    ) -> Result<Self> {
        if constellation.bits_per_symbol() != frame.k {
            return Err(Error::Mismatch(format!(
                "constellation has K = {}, frame expects {}",
                constellation.bits_per_symbol(),
                frame.k
            )));
        }
        if g_tx.oversampling != frame.m || g_rx.oversampling != frame.m {
            return Err(Error::Mismatch("filter oversampling differs from the frame".into()));
        }
        let layout = FrameLayout::new(&frame)?;
        let n = frame.n_total() * frame.m + g_tx.len() - 1;
        Ok(Self {
            index: BodyIndex::new(&layout),
            pilots: frame_pilots(&frame)?,
            pn_tx: PhaseNoiseSource::new(pn_tx, sample_rate, n)?,
            pn_rx: PhaseNoiseSource::new(pn_rx, sample_rate, n)?,
            constellation,
            g_tx,
            g_rx,
            frame,
            layout,
        })
    }

    /// Oversampled signal length per block.
    pub fn signal_len(&self) -> usize {
        self.frame.n_total() * self.frame.m + self.g_tx.len() - 1
    }

    pub fn draw_bits(&self, root: u64, frame_idx: u64) -> Vec<u8> {
        let mut rng = substream(root, Stream::Bits, frame_idx);
        (0..self.frame.n_data * self.frame.k)
            .map(|_| rng.random_range(0..2u8))
            .collect()
    }

    pub fn draw_realization(&self, sigma2: f64, root: u64, frame_idx: u64) -> Result<ChannelRealization> {
        Ok(ChannelRealization {
            pn_tx: self.pn_tx.draw(&mut substream(root, Stream::PnTx, frame_idx))?,
            pn_rx: self.pn_rx.draw(&mut substream(root, Stream::PnRx, frame_idx))?,
            noise_seed: substream_seed(root, Stream::Awgn, frame_idx),
            sigma2,
        })
    }

    /// Transmit side: labels to the oversampled signal.
    pub fn transmit(&self, labels: &[usize]) -> Result<ComplexBuffer> {
        let data: Vec<Complex64> = labels.iter().map(|&l| self.constellation.point(l)).collect();
        let frame = assemble_with(&data, &self.pilots, &self.layout);
        pulse_shape(&frame, &self.g_tx, self.frame.m)
    }

    /// Runs one block through the chain with the given realization.
    pub fn run(&self, labels: &[usize], real: &ChannelRealization) -> Result<FrameOutcome> {
        let k = self.frame.k;
        let tx = self.transmit(labels)?;
        let r = apply_impairments(&tx, real)?;
        let m = self.frame.m;
        let body = receive_chain(&r, &self.g_rx, self.g_tx.len(), m, &self.layout)?;
        let (comp, mut report) = ptrs_compensate(&body, &self.pilots, &self.layout)?;
        let (_, rpn_groups) = self.layout.split_pilots(&self.pilots);
        let rpn_tx: ComplexBuffer = rpn_groups.concat();
        let rpn_rx: ComplexBuffer = self.index.rpn.iter().map(|&i| comp[i]).collect();
        if rpn_tx.len() >= 2 {
            report.residual = Some(estimate_residual_lpn(&rpn_tx, &rpn_rx, 1.0)?);
        }
        let true_phase_var = if self.pn_tx.is_enabled() || self.pn_rx.is_enabled() {
            self.residual_phase_truth(&tx, real, &report.track)?
        } else {
            0.0
        };
        Ok(FrameOutcome {
            bits: labels_to_bits(labels, k),
            data: self.index.data.iter().map(|&i| comp[i]).collect(),
            rpn_tx,
            rpn_rx,
            report,
            tx,
            sigma2: real.sigma2,
            true_phase_var,
        })
    }

    /// Residual phase after tracking, measured noise-free: the phase of the
    /// PN-impaired matched-filter output relative to the clean one, minus the track.
    pub fn residual_phase_truth(
        &self,
        tx: &[Complex64],
        real: &ChannelRealization,
        track: &[f64],
    ) -> Result<f64> {
        let clean = ChannelRealization {
            sigma2: 0.0,
            ..real.clone()
        };
        let m = self.frame.m;
        let with_pn = apply_impairments(tx, &clean)?;
        let a = receive_chain(&with_pn, &self.g_rx, self.g_tx.len(), m, &self.layout)?;
        let b = receive_chain(tx, &self.g_rx, self.g_tx.len(), m, &self.layout)?;
        let idx = &self.index.data;
        let s: f64 = idx
            .iter()
            .map(|&i| wrap_angle((a[i] * b[i].conj()).arg() - track[i]).powi(2))
            .sum();
        Ok(s / idx.len().max(1) as f64)
    }

    /// Draws bits and channel for block `frame_idx` and runs it.
    pub fn simulate(&self, sigma2: f64, root: u64, frame_idx: u64) -> Result<FrameOutcome> {
        let bits = self.draw_bits(root, frame_idx);
        let labels = crate::waveform::bits_to_labels(&bits, self.frame.k)?;
        let real = self.draw_realization(sigma2, root, frame_idx)?;
        self.run(&labels, &real)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::phase_noise::CompositeLogPsd;
    use crate::waveform::{init_qam, init_rrc};
    use rand_distr::Distribution;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn noise_variance_examples() {
        assert!(approx(noise_variance(0.0, 1.0, 1, 10, 0, 0, 0).unwrap(), 1.0, 1e-15));
        let v = noise_variance(10.0, 1.0, 4, 4096, 32, 4, 288).unwrap();
        assert!(approx(v, 1.0 / (10.0 * 4.0 * 3968.0 / 4384.0), 1e-15));
        assert!(approx(v, 2.762e-2, 1e-5));
        let half = noise_variance(10.0 + 10.0 * 2f64.log10(), 1.0, 4, 4096, 32, 4, 288).unwrap();
        assert!(approx(half / v, 0.5, 1e-12));
        assert!(noise_variance(10.0, 1.0, 4, 16, 4, 4, 0).is_err());
    }

    #[test]
    fn impairments_identity_and_rotation() {
        let s: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let r = apply_impairments(&s, &ChannelRealization::noiseless(16)).unwrap();
        assert_eq!(r, s);
        let real = ChannelRealization {
            pn_tx: vec![PI / 4.0; 16],
            ..ChannelRealization::noiseless(16)
        };
        let r = apply_impairments(&s, &real).unwrap();
        for (a, b) in r.iter().zip(&s) {
            assert!((a - b * Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-12);
        }
        assert!(apply_impairments(&s[..3], &real).is_err());
    }

    #[test]
    fn impairments_preserve_power_plus_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let s: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * 6.0))
            .collect();
        let real = ChannelRealization {
            pn_tx: (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
            pn_rx: vec![0.3; n],
            noise_seed: 5,
            sigma2: 0.25,
        };
        let r = apply_impairments(&s, &real).unwrap();
        let p = r.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        // std of the power mean is about sqrt(var)/sqrt(n), well below 0.01
        assert!(approx(p, 1.25, 0.01), "{p}");
    }

    fn setup(frame: FrameConfig, g: PulseFilter, pn: Option<&dyn PsdModel>) -> LinkSetup {
        let c = init_qam(frame.k).unwrap();
        LinkSetup::new(c, g.clone(), g, frame, None, pn, 4.0 * 3.93e9).unwrap()
    }

    #[test]
    fn noiseless_loopback_evm() {
        let frame = FrameConfig::desk(4);
        let link = setup(frame, init_rrc(0.3, 32, 4).unwrap(), None);
        let out = link.simulate(0.0, 3, 0).unwrap();
        let labels = crate::waveform::bits_to_labels(&out.bits, 4).unwrap();
        let err: f64 = out
            .data
            .iter()
            .zip(&labels)
            .map(|(r, &l)| (r - link.constellation.point(l)).norm_sqr())
            .sum::<f64>()
            / out.data.len() as f64;
        assert!(err.sqrt() < 5e-3, "EVM {}", err.sqrt());
        for (a, &l) in out.data.iter().zip(&labels) {
            assert_eq!(link.constellation.slice(*a), l);
        }
    }

    #[test]
    fn delta_filters_reduce_to_resampling() {
        let frame = FrameConfig::from_total(2, 32, 4, 2, 2, 1, 4).unwrap();
        let link = setup(frame, PulseFilter::delta(4), None);
        let out = link.simulate(0.0, 9, 1).unwrap();
        let labels = crate::waveform::bits_to_labels(&out.bits, 2).unwrap();
        for (a, &l) in out.data.iter().zip(&labels) {
            assert!((a - link.constellation.point(l)).norm() < 1e-12);
        }
    }

    #[test]
    fn matched_rrc_beats_rectangular_receive_filter() {
        let frame = FrameConfig::desk(2);
        let rrc = init_rrc(0.3, 32, 4).unwrap();
        let rect = crate::waveform::normalize_filter(
            &(0..129).map(|i| if (62..66).contains(&i) { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
            32,
            4,
        )
        .unwrap();
        let c = init_qam(2).unwrap();
        let good = LinkSetup::new(c.clone(), rrc.clone(), rrc.clone(), frame, None, None, 1.0).unwrap();
        let bad = LinkSetup::new(c, rrc, rect, frame, None, None, 1.0).unwrap();
        let mse = |l: &LinkSetup| -> f64 {
            (0..20)
                .map(|f| {
                    let o = l.simulate(0.1, 4, f).unwrap();
                    let lab = crate::waveform::bits_to_labels(&o.bits, 2).unwrap();
                    o.data
                        .iter()
                        .zip(&lab)
                        .map(|(r, &x)| (r - l.constellation.point(x)).norm_sqr())
                        .sum::<f64>()
                })
                .sum()
        };
        assert!(mse(&good) < mse(&bad));
    }

    #[test]
    fn constant_offset_is_removed_exactly() {
        let cfg = FrameConfig::desk(2);
        let layout = FrameLayout::new(&cfg).unwrap();
        let pilots = frame_pilots(&cfg).unwrap();
        let data: Vec<Complex64> = (0..cfg.n_data)
            .map(|i| Complex64::from_polar(1.0, i as f64))
            .collect();
        let frame = assemble_with(&data, &pilots, &layout);
        let body = &frame[cfg.n_cp..];
        let rot: Vec<Complex64> = body.iter().map(|v| v * Complex64::from_polar(1.0, PI / 8.0)).collect();
        let (comp, rep) = ptrs_compensate(&rot, &pilots, &layout).unwrap();
        for (a, b) in comp.iter().zip(body) {
            assert!((a - b).norm() < 1e-9);
            // pure phase correction keeps magnitudes
        }
        for (a, b) in comp.iter().zip(&rot) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert!(rep.group_phases.iter().all(|p| (p - PI / 8.0).abs() < 1e-9));
        let (_, zero) = ptrs_compensate(body, &pilots, &layout).unwrap();
        assert!(zero.group_phases.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn linear_ramp_tracked_at_centers() {
        let cfg = FrameConfig::desk(2);
        let layout = FrameLayout::new(&cfg).unwrap();
        let pilots = frame_pilots(&cfg).unwrap();
        let data = vec![Complex64::new(1.0, 0.0); cfg.n_data];
        let frame = assemble_with(&data, &pilots, &layout);
        let slope = 2e-3;
        let body: Vec<Complex64> = frame[cfg.n_cp..]
            .iter()
            .enumerate()
            .map(|(n, v)| v * Complex64::from_polar(1.0, slope * n as f64))
            .collect();
        let (_, rep) = ptrs_compensate(&body, &pilots, &layout).unwrap();
        let idx = BodyIndex::new(&layout);
        for (q, &c) in idx.centers.iter().enumerate() {
            assert!((rep.group_phases[q] - slope * c).abs() < 1e-9);
        }
        // between the outer centers the track is exact; outside it is held constant
        let first = idx.centers[0];
        let last = *idx.centers.last().unwrap();
        for (n, &t) in rep.track.iter().enumerate() {
            let truth = slope * n as f64;
            let x = n as f64;
            let bound = if x < first {
                slope * (first - x)
            } else if x > last {
                slope * (x - last)
            } else {
                0.0
            };
            assert!((t - truth).abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn no_groups_is_a_noop_with_warning() {
        let cfg = FrameConfig::from_total(2, 20, 2, 0, 0, 0, 4).unwrap();
        let layout = FrameLayout::new(&cfg).unwrap();
        let body = vec![Complex64::new(0.5, 0.5); 18];
        let (out, rep) = ptrs_compensate(&body, &[], &layout).unwrap();
        assert_eq!(out, body);
        assert!(rep.warning.is_some());
    }

    fn synthetic(n: usize, sn2: f64, sp2: f64, seed: u64) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, 0.37 * i as f64)).collect();
        let v = u
            .iter()
            .map(|&ul| {
                let th: f64 = StandardNormal.sample(&mut rng);
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                ul * Complex64::from_polar(1.0, th * sp2.sqrt()) + Complex64::new(a, b) * sn2.sqrt()
            })
            .collect();
        (u, v)
    }

    #[test]
    fn estimators_exact_and_wrapping() {
        let u: Vec<Complex64> = (0..8).map(|i| Complex64::from_polar(1.0, i as f64)).collect();
        for est in [estimate_residual_lpn, estimate_residual_hsnr] {
            let e = est(&u, &u, 1.0).unwrap();
            assert!(e.noise_var < 1e-24 && e.phase_var < 1e-24);
            assert!(est(&u, &u, 0.0).is_err());
        }
        let u = vec![Complex64::from_polar(1.0, PI - 0.01); 2];
        let v = vec![Complex64::from_polar(1.0, -PI + 0.01); 2];
        let e = estimate_residual_hsnr(&u, &v, 1.0).unwrap();
        assert!((e.phase_var - 0.02f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn estimators_recover_synthetic_truth() {
        let (u, v) = synthetic(100_000, 1e-3, 1e-2, 17);
        for est in [estimate_residual_lpn, estimate_residual_hsnr] {
            let e = est(&u, &v, 1.0).unwrap();
            assert!((e.noise_var / 1e-3 - 1.0).abs() < 0.1, "{e:?}");
            assert!((e.phase_var / 1e-2 - 1.0).abs() < 0.1, "{e:?}");
        }
    }

    #[test]
    fn pure_awgn_gives_small_phase_estimate() {
        // under H0 the LPN phase estimate is a difference of two means of chi-square
        // terms; its standard deviation is about sqrt(2/n) * noise variance * sqrt(2)
        let n = 20_000;
        let sn2 = 1e-3;
        let (u, v) = synthetic(n, sn2, 0.0, 23);
        let e = estimate_residual_lpn(&u, &v, 1.0).unwrap();
        let sd = 2.0 * sn2 * (1.0 / n as f64).sqrt();
        assert!(e.phase_var <= 3.0 * sd, "{e:?}");
    }

    #[test]
    fn residual_truth_is_small_for_weak_receive_noise() {
        let frame = FrameConfig::desk(4);
        let pn = CompositeLogPsd::rx_ue1(120e9);
        let link = setup(frame, init_rrc(0.3, 32, 4).unwrap(), Some(&pn));
        let out = link.simulate(1e-6, 5, 0).unwrap();
        assert!(out.true_phase_var > 0.0 && out.true_phase_var < 0.1, "{}", out.true_phase_var);
        assert!(out.report.residual.is_some());
    }
}
