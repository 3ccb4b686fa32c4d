//! Differentiable transmit/channel/receive chain on the tape.
//!
//! Mirrors the plain-value chain in [`crate::channel`]: the normalizations of the
//! constellation and filters are part of the graph, the impairments enter as
//! constants, and PTRS tracking is differentiated through its group phases.

use std::rc::Rc;

use num_complex::Complex64;

use super::lagrangian::LagrangianState;
use crate::channel::{sampling_offset, track_weights, unwrap_phases, BodyIndex, ChannelRealization};
use crate::demappers::{tape as tape_demap, DemapperKind, PndVariant};
use crate::error::Result;
use crate::metrics::{stopband_matrix, StopbandForm};
use crate::numerics::autodiff::{Tape, Var};
use crate::numerics::cvar::CVar;
use crate::waveform::{frame_pilots, FrameConfig, FrameLayout};

/// Index tables and constants shared by every forward pass.
#[derive(Clone, Debug)]
pub struct ChainPlan {
    pub cfg: FrameConfig,
    pub taps: usize,
    source_map: Rc<Vec<usize>>,
    pilots: Vec<Complex64>,
    body_offset: usize,
    data_idx: Rc<Vec<usize>>,
    ptrs_idx: Rc<Vec<usize>>,
    /// `conj(p) / |p|^2` for every PTRS symbol.
    ptrs_weights: Vec<Complex64>,
    /// `groups x (groups * n_ptrs)` summing matrix.
    group_sum: Vec<f64>,
    track_lo: Rc<Vec<usize>>,
    track_hi: Rc<Vec<usize>>,
    track_t: Vec<f64>,
    papr_start: usize,
    papr_len: usize,
    stopband: StopbandForm,
}

impl ChainPlan {
    pub fn new(cfg: &FrameConfig, taps: usize, beta: f64) -> Result<Self> {
        let layout = FrameLayout::new(cfg)?;
        let index = BodyIndex::new(&layout);
        let pilots = frame_pilots(cfg)?;
        let (ptrs_tx, _) = layout.split_pilots(&pilots);
        let ptrs_weights: Vec<Complex64> = ptrs_tx
            .iter()
            .flat_map(|g| g.iter().map(|p| p.conj() / p.norm_sqr()))
            .collect();
        let q = cfg.groups;
        let np = cfg.n_ptrs;
        let mut group_sum = vec![0.0; q * q * np];
        for g in 0..q {
            for i in 0..np {
                group_sum[g * q * np + g * np + i] = 1.0;
            }
        }
        let w = track_weights(&index.centers, cfg.n_body());
        let sel: Vec<_> = index.data.iter().map(|&i| w[i]).collect();
        Ok(Self {
            cfg: *cfg,
            taps,
            source_map: Rc::new(layout.source_map()),
            pilots,
            body_offset: sampling_offset(taps, taps) + cfg.n_cp * cfg.m,
            data_idx: Rc::new(index.data.clone()),
            ptrs_idx: Rc::new(index.ptrs.clone()),
            ptrs_weights,
            group_sum,
            track_lo: Rc::new(sel.iter().map(|s| s.0).collect()),
            track_hi: Rc::new(sel.iter().map(|s| s.1).collect()),
            track_t: sel.iter().map(|s| s.2).collect(),
            papr_start: (taps - 1) / 2,
            papr_len: cfg.n_total() * cfg.m,
            stopband: stopband_matrix(taps, beta, cfg.m)?,
        })
    }

    pub fn signal_len(&self) -> usize {
        self.cfg.n_total() * self.cfg.m + self.taps - 1
    }

    pub fn stopband(&self) -> &StopbandForm {
        &self.stopband
    }
}

/// One block of a training batch: bits, labels and the channel draw, all constants.
#[derive(Clone, Debug)]
pub struct FrameDraw {
    pub labels: Rc<Vec<usize>>,
    /// `bits[j][n]`: bit `j` of data symbol `n`.
    pub bits: Vec<Vec<f64>>,
    pub phase_cos: Vec<f64>,
    pub phase_sin: Vec<f64>,
    pub noise: Vec<Complex64>,
    /// Ground-truth residual phase variance (PND demappers only).
    pub phase_var: f64,
}

impl FrameDraw {
    pub fn new(labels: Vec<usize>, k: usize, real: &ChannelRealization, noise: Vec<Complex64>) -> Self {
        let bits = (0..k)
            .map(|j| {
                labels
                    .iter()
                    .map(|&l| f64::from(crate::waveform::label_bit(l, j, k)))
                    .collect()
            })
            .collect();
        let th = real.total_phase();
        Self {
            labels: Rc::new(labels),
            bits,
            phase_cos: th.iter().map(|t| t.cos()).collect(),
            phase_sin: th.iter().map(|t| t.sin()).collect(),
            noise,
            phase_var: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub frames: Vec<FrameDraw>,
    /// Complex noise variance shared by the batch.
    pub sigma2: f64,
}

/// Trainable leaves of one pass.
#[derive(Clone, Copy, Debug)]
pub struct ParamVars<'t> {
    pub constellation: Var<'t>,
    pub g_tx: Var<'t>,
    pub g_rx: Var<'t>,
    pub nn: Option<Var<'t>>,
}

/// Objective terms of one pass.
pub struct Terms<'t> {
    pub bce: Var<'t>,
    pub phi_p: Var<'t>,
    pub phi_a: Var<'t>,
    pub aclr_db: Var<'t>,
    pub loss: Var<'t>,
    /// Instantaneous transmit powers used for the PAPR term.
    pub powers: Vec<f64>,
}

/// Zero-mean, unit-power points from the raw `[re..., im...]` weights.
pub fn normalized_points<'t>(raw: Var<'t>) -> CVar<'t> {
    let n = raw.len() / 2;
    let re = raw.slice(0, n);
    let im = raw.slice(n, n);
    let re = re - re.mean();
    let im = im - im.mean();
    let rms = (re.square() + im.square()).mean().sqrt();
    CVar::new(re / rms, im / rms)
}

/// Unit-energy taps.
pub fn normalized_taps<'t>(raw: Var<'t>) -> Var<'t> {
    raw / raw.square().sum().sqrt()
}

fn constant_cvar<'t>(tape: &'t Tape, v: &[Complex64]) -> CVar<'t> {
    CVar::constant(tape, v)
}

/// Transmit side: symbols to the oversampled signal.
fn transmit<'t>(tape: &'t Tape, plan: &ChainPlan, points: CVar<'t>, pilots: CVar<'t>, g: Var<'t>, labels: &Rc<Vec<usize>>) -> CVar<'t> {
    let data = points.gather(labels.clone());
    let src = CVar::new(tape.concat(&[data.re, pilots.re]), tape.concat(&[data.im, pilots.im]));
    src.gather(plan.source_map.clone()).upsample(plan.cfg.m).conv_real(g)
}

/// Receive side: matched filter, sampling, CP removal and PTRS tracking. Returns the
/// compensated data symbols.
fn receive<'t>(tape: &'t Tape, plan: &ChainPlan, r: CVar<'t>, g: Var<'t>) -> CVar<'t> {
    let cfg = &plan.cfg;
    let body = r.conv_real(g).downsample(cfg.m, plan.body_offset, cfg.n_body());
    let data = body.gather(plan.data_idx.clone());
    if cfg.groups == 0 || cfg.n_ptrs == 0 {
        return data;
    }
    let q = cfg.groups;
    let np = cfg.n_ptrs;
    let x = body.gather(plan.ptrs_idx.clone()).mul(constant_cvar(tape, &plan.ptrs_weights));
    let s = tape.constant(plan.group_sum.clone());
    let acc_re = tape.matmul(s, x.re, q, q * np, 1);
    let acc_im = tape.matmul(s, x.im, q, q * np, 1);
    let raw = acc_im.atan2(acc_re);
    let vals = raw.value();
    let shift: Vec<f64> = unwrap_phases(&vals).iter().zip(&vals).map(|(u, v)| u - v).collect();
    let phase = raw + tape.constant(shift);
    let t = tape.constant(plan.track_t.clone());
    let one_minus_t = tape.constant(plan.track_t.iter().map(|v| 1.0 - v).collect());
    let track = phase.gather(plan.track_lo.clone()) * one_minus_t + phase.gather(plan.track_hi.clone()) * t;
    data.rotate(track.cos(), (-track).sin())
}

/// Per-bit LLR nodes for the data symbols of one block.
fn demap<'t>(
    tape: &'t Tape,
    kind: DemapperKind,
    r: CVar<'t>,
    points: CVar<'t>,
    nn: Option<(Var<'t>, &[usize])>,
    sigma2: f64,
    phase_var: f64,
) -> Vec<Var<'t>> {
    match kind {
        DemapperKind::Aod => tape_demap::aod(tape, r, points, tape.scalar(1.0 / sigma2)),
        DemapperKind::PndLpn | DemapperKind::PndHsnr => {
            let variant = if kind == DemapperKind::PndLpn {
                PndVariant::Lpn
            } else {
                PndVariant::Hsnr
            };
            tape_demap::pnd(tape, r, points, tape.scalar(sigma2), tape.scalar(phase_var), variant)
        }
        DemapperKind::Nnd => {
            let (params, dims) = nn.expect("NN demapper parameters");
            tape_demap::nn(tape, r, params, dims)
        }
    }
}

/// Full forward pass: BCE over the batch, PAPR and ACLR constraint values and the
/// augmented loss.
#[allow(clippy::too_many_arguments)]
pub fn forward<'t>(
    tape: &'t Tape,
    plan: &ChainPlan,
    vars: ParamVars<'t>,
    nn_dims: &[usize],
    kind: DemapperKind,
    batch: &Batch,
    st: &LagrangianState,
    power_samples: usize,
) -> Terms<'t> {
    let points = normalized_points(vars.constellation);
    let g_tx = normalized_taps(vars.g_tx);
    let g_rx = normalized_taps(vars.g_rx);
    let pilots = constant_cvar(tape, &plan.pilots);
    let k = plan.cfg.k;
    let nd = plan.cfg.n_data;

    let mut bce_terms = Vec::with_capacity(batch.frames.len() * k);
    let mut power_terms = Vec::with_capacity(batch.frames.len());
    for f in &batch.frames {
        let tx = transmit(tape, plan, points, pilots, g_tx, &f.labels);
        let p = tx.slice(plan.papr_start, plan.papr_len);
        power_terms.push(p.re.square() + p.im.square());
        let rx = tx
            .rotate(tape.constant(f.phase_cos.clone()), tape.constant(f.phase_sin.clone()))
            .add(constant_cvar(tape, &f.noise));
        let data = receive(tape, plan, rx, g_rx);
        let llrs = demap(tape, kind, data, points, vars.nn.map(|v| (v, nn_dims)), batch.sigma2, f.phase_var);
        for (j, l) in llrs.into_iter().enumerate() {
            bce_terms.push((l.softplus() - l * tape.constant(f.bits[j].clone())).sum());
        }
    }
    let n_sym = (batch.frames.len() * nd).max(1) as f64;
    let bce = tape.concat(&bce_terms).sum().scale(1.0 / (n_sym * std::f64::consts::LN_2));

    let all = tape.concat(&power_terms);
    let all = all.slice(0, power_samples.clamp(1, all.len()));
    let powers = all.value();
    let phi_p = (all / all.mean() - st.eps_p).relu().mean();

    let l = plan.taps;
    let phi_g = tape.matmul(tape.constant(plan.stopband.phi.clone()), g_tx, l, l, 1);
    let xi = phi_g.dot(g_tx);
    let ratio = xi / (xi.scale(-1.0) + 1.0);
    let aclr_db = ratio.ln().scale(10.0 / std::f64::consts::LN_10);
    let phi_a = aclr_db - st.aclr_target_db();

    let lam = st.lambda;
    let hinge = (phi_a.scale(lam) + st.mu_a).relu();
    let loss = bce
        + phi_p.scale(st.mu_p)
        + phi_p.square().scale(0.5 * lam)
        + (hinge.square() - st.mu_a * st.mu_a).scale(1.0 / (2.0 * lam));
    Terms {
        bce,
        phi_p,
        phi_a,
        aclr_db,
        loss,
        powers,
    }
}
