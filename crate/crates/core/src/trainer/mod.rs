//! Constrained end-to-end training of the constellation, filter pair and (optionally)
//! the NN demapper with an augmented-Lagrangian outer loop around Adam.

pub mod forward;
pub mod lagrangian;

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use forward::{normalized_points, normalized_taps, Batch, ChainPlan, FrameDraw, ParamVars, Terms};
pub use lagrangian::{aclr_violation, augmented_loss, update_multipliers, LagrangianState};

use crate::channel::{apply_impairments, awgn, frame_noise_variance, ptrs_compensate, receive_chain, LinkSetup};
use crate::demappers::{DemapperKind, NnDemapper, NN_HIDDEN};
use crate::error::{invalid, Error, Result};
use crate::metrics::papr_ccdf;
use crate::numerics::adam::{adam_step, AdamState};
use crate::numerics::autodiff::Tape;
use crate::numerics::params::ParamSet;
use crate::numerics::rng::{substream, substream_seed, Stream};
use crate::phase_noise::{PnModelKind, PnSelection};
use crate::waveform::{
    bits_to_labels, default_constellation, init_constellation, init_rrc, normalize_constellation, normalize_filter,
    Constellation, FrameConfig, Provenance, PulseFilter, TrainingMeta, WaveformBundle,
};

/// Everything that defines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub demapper: DemapperKind,
    pub ebn0_lo_db: f64,
    pub ebn0_hi_db: f64,
    pub batch_size: usize,
    pub inner_steps: usize,
    pub outer_iterations: usize,
    /// Upper bound on the PAPR Monte Carlo samples per step.
    pub power_samples: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub frame: FrameConfig,
    pub span: usize,
    pub rolloff: f64,
    /// `auto` (APSK for K = 6, QAM otherwise), `random`, or a named initializer.
    pub constellation: String,
    pub papr_target_db: f64,
    pub aclr_target_db: f64,
    pub ccdf_level: f64,
    pub lambda0: f64,
    pub tau: f64,
    pub pn_tx: PnSelection,
    pub pn_rx: PnSelection,
    pub carrier_hz: f64,
    pub symbol_rate_hz: f64,
    pub heldout_frames: usize,
    pub heldout_ebn0_db: f64,
}

impl TrainConfig {
    /// Desk-scale defaults for `k` bits per symbol.
    pub fn desk(k: usize) -> Self {
        Self {
            demapper: DemapperKind::Aod,
            ebn0_lo_db: 6.0,
            ebn0_hi_db: 18.0,
            batch_size: 10,
            inner_steps: 500,
            outer_iterations: 3,
            power_samples: 400_000,
            seed: 1,
            learning_rate: 1e-3,
            frame: FrameConfig::desk(k),
            span: 32,
            rolloff: 0.3,
            constellation: "auto".into(),
            papr_target_db: 6.5,
            aclr_target_db: -45.0,
            ccdf_level: 1e-3,
            lambda0: 1.0,
            tau: 2.0,
            pn_tx: PnModelKind::None.into(),
            pn_rx: PnModelKind::RxUe1.into(),
            carrier_hz: 120e9,
            symbol_rate_hz: 3.93e9,
            heldout_frames: 20,
            heldout_ebn0_db: 12.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ebn0_lo_db <= self.ebn0_hi_db) {
            return invalid(format!(
                "Eb/N0 range [{}, {}] dB is empty",
                self.ebn0_lo_db, self.ebn0_hi_db
            ));
        }
        if self.batch_size == 0 || self.inner_steps == 0 || self.outer_iterations == 0 {
            return invalid("batch size, inner steps and outer iterations must be positive");
        }
        if self.power_samples == 0 || self.heldout_frames == 0 {
            return invalid("power samples and held-out frames must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return invalid("learning rate must be positive");
        }
        if !(self.ccdf_level > 0.0 && self.ccdf_level < 1.0) {
            return invalid("CCDF level must be in (0, 1)");
        }
        if !(self.carrier_hz > 0.0 && self.symbol_rate_hz > 0.0) {
            return invalid("carrier and symbol rate must be positive");
        }
        self.pn_tx.validate()?;
        self.pn_rx.validate()?;
        self.frame.validate()
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate_hz * self.frame.m as f64
    }
}

/// Per-outer-iteration record; iteration 0 is the initial waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    /// Mean augmented loss over the inner steps (none for iteration 0).
    pub train_loss: Option<f64>,
    pub bce: f64,
    pub phi_p: f64,
    pub aclr_db: f64,
    pub papr_db: f64,
    pub mu_p: f64,
    pub mu_a: f64,
    pub lambda: f64,
}

pub const LOG_HEADER: &str = "iteration,train_loss,bce,phi_p,aclr_db,papr_db,mu_p,mu_a,lambda";

impl LogRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.train_loss.map(|v| v.to_string()).unwrap_or_default(),
            self.bce,
            self.phi_p,
            self.aclr_db,
            self.papr_db,
            self.mu_p,
            self.mu_a,
            self.lambda
        )
    }
}

/// Held-out objective values of the current waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Augmented loss under the current multipliers.
    pub loss: f64,
    pub bce: f64,
    pub phi_p: f64,
    pub phi_a: f64,
    pub aclr_db: f64,
    pub papr_db: f64,
}

#[derive(Clone, Copy, Debug)]
struct Groups {
    constellation: usize,
    g_tx: usize,
    g_rx: usize,
    nn: Option<usize>,
}

/// Resumable training state, stored as one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub bundle: WaveformBundle,
    pub config: TrainConfig,
    pub params: ParamSet,
    pub adam: AdamState,
    pub state: LagrangianState,
    pub next_outer: usize,
    pub log: Vec<LogRow>,
    /// Held-out augmented loss of the initial waveform.
    pub initial_loss: Option<f64>,
    /// Consecutive outer iterations above the divergence threshold.
    pub diverged_for: usize,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub bundle: WaveformBundle,
    pub log: Vec<LogRow>,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    plan: ChainPlan,
    sampler: LinkSetup,
    nn_dims: Vec<usize>,
    groups: Groups,
    pub params: ParamSet,
    pub adam: AdamState,
    pub state: LagrangianState,
    pub log: Vec<LogRow>,
    next_outer: usize,
    initial_loss: Option<f64>,
    diverged_for: usize,
    checkpoint_path: Option<PathBuf>,
    provenance: Option<Provenance>,
}

/// Initial trainable values: constellation, RRC pair and NN weights.
pub fn initial_params(cfg: &TrainConfig) -> Result<ParamSet> {
    let k = cfg.frame.k;
    let c = match cfg.constellation.as_str() {
        "auto" => default_constellation(k)?,
        "random" => {
            let mut rng = substream(cfg.seed, Stream::Init, 0);
            let raw: Vec<Complex64> = (0..1usize << k)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            normalize_constellation(&raw)?
        }
        name => init_constellation(name)?,
    };
    if c.bits_per_symbol() != k {
        return Err(Error::Mismatch(format!(
            "constellation `{}` has K = {}, frame expects {k}",
            cfg.constellation,
            c.bits_per_symbol()
        )));
    }
    let g = init_rrc(cfg.rolloff, cfg.span, cfg.frame.m)?;
    let mut ps = ParamSet::new();
    let mut raw: Vec<f64> = c.points().iter().map(|p| p.re).collect();
    raw.extend(c.points().iter().map(|p| p.im));
    ps.add_group("constellation", raw);
    ps.add_group("g_tx", g.taps.clone());
    ps.add_group("g_rx", g.taps);
    if cfg.demapper == DemapperKind::Nnd {
        let net = NnDemapper::random(k, &NN_HIDDEN, &mut substream(cfg.seed, Stream::Init, 1));
        ps.add_group("nn", net.params);
    }
    Ok(ps)
}

/// Waveform bundle from raw trainable values (normalizations applied).
pub fn bundle_from_params(cfg: &TrainConfig, ps: &ParamSet) -> Result<WaveformBundle> {
    let (c, g_tx, g_rx, nn) = waveform_from_params(cfg, ps)?;
    Ok(WaveformBundle::new(
        &c,
        &g_tx,
        &g_rx,
        cfg.rolloff,
        cfg.frame,
        cfg.demapper,
        nn,
        cfg.seed,
    ))
}

fn waveform_from_params(
    cfg: &TrainConfig,
    ps: &ParamSet,
) -> Result<(Constellation, PulseFilter, PulseFilter, Option<NnDemapper>)> {
    let group = |name: &str| {
        ps.group(name)
            .map(|g| g.values.clone())
            .ok_or_else(|| Error::Training(format!("parameter group `{name}` missing")))
    };
    let raw = group("constellation")?;
    let n = raw.len() / 2;
    let pts: Vec<Complex64> = (0..n).map(|i| Complex64::new(raw[i], raw[n + i])).collect();
    let c = normalize_constellation(&pts)?;
    let g_tx = normalize_filter(&group("g_tx")?, cfg.span, cfg.frame.m)?;
    let g_rx = normalize_filter(&group("g_rx")?, cfg.span, cfg.frame.m)?;
    let nn = match cfg.demapper {
        DemapperKind::Nnd => {
            let mut net = NnDemapper::zeros(cfg.frame.k, &NN_HIDDEN);
            net.params = group("nn")?;
            Some(net)
        }
        _ => None,
    };
    Ok((c, g_tx, g_rx, nn))
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = initial_params(&cfg)?;
        let state = LagrangianState::new(cfg.papr_target_db, cfg.aclr_target_db, cfg.rolloff, cfg.lambda0, cfg.tau)?;
        let adam = AdamState::new(params.len(), cfg.learning_rate);
        Self::assemble(cfg, params, adam, state, 0, vec![], None, 0)
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        ck.config.validate()?;
        let mut t = Self::assemble(
            ck.config,
            ck.params,
            ck.adam,
            ck.state,
            ck.next_outer,
            ck.log,
            ck.initial_loss,
            ck.diverged_for,
        )?;
        t.provenance = ck.provenance;
        Ok(t)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        cfg: TrainConfig,
        params: ParamSet,
        adam: AdamState,
        state: LagrangianState,
        next_outer: usize,
        log: Vec<LogRow>,
        initial_loss: Option<f64>,
        diverged_for: usize,
    ) -> Result<Self> {
        let (c, g_tx, g_rx, _) = waveform_from_params(&cfg, &params)?;
        let plan = ChainPlan::new(&cfg.frame, g_tx.len(), cfg.rolloff)?;
        let fc = cfg.carrier_hz;
        let tx_model = cfg.pn_tx.build(fc)?;
        let rx_model = cfg.pn_rx.build(fc)?;
        let sampler = LinkSetup::new(c, g_tx, g_rx, cfg.frame, tx_model.as_deref(), rx_model.as_deref(), cfg.sample_rate())?;
        let groups = Groups {
            constellation: params.index_of("constellation").ok_or_else(|| Error::Training("no constellation group".into()))?,
            g_tx: params.index_of("g_tx").ok_or_else(|| Error::Training("no g_tx group".into()))?,
            g_rx: params.index_of("g_rx").ok_or_else(|| Error::Training("no g_rx group".into()))?,
            nn: params.index_of("nn"),
        };
        if (cfg.demapper == DemapperKind::Nnd) != groups.nn.is_some() {
            return Err(Error::Mismatch("NN parameters present only for the NN demapper".into()));
        }
        if adam.m.len() != params.len() {
            return Err(Error::Mismatch("optimizer state does not match the parameters".into()));
        }
        Ok(Self {
            nn_dims: NnDemapper::zeros(cfg.frame.k, &NN_HIDDEN).dims,
            cfg,
            plan,
            sampler,
            groups,
            params,
            adam,
            state,
            log,
            next_outer,
            initial_loss,
            diverged_for,
            checkpoint_path: None,
            provenance: None,
        })
    }

    /// Saves a checkpoint after every outer iteration and on abort.
    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint_path = Some(path.into());
        self
    }

    /// Stamps checkpoints and the final bundle with the producing config.
    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    pub fn next_outer(&self) -> usize {
        self.next_outer
    }

    pub fn bundle(&self) -> Result<WaveformBundle> {
        let mut b = bundle_from_params(&self.cfg, &self.params)?;
        b.provenance = self.provenance.clone();
        if let Some(last) = self.log.last() {
            b.training = Some(TrainingMeta {
                outer_iterations: last.iteration,
                inner_steps: self.cfg.inner_steps,
                papr_target_db: self.cfg.papr_target_db,
                aclr_target_db: self.cfg.aclr_target_db,
                final_bce: last.bce,
                final_papr_penalty: last.phi_p,
                final_aclr_db: last.aclr_db,
            });
        }
        Ok(b)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            provenance: self.provenance.clone(),
            bundle: self.bundle()?,
            config: self.cfg.clone(),
            params: self.params.clone(),
            adam: self.adam.clone(),
            state: self.state.clone(),
            next_outer: self.next_outer,
            log: self.log.clone(),
            initial_loss: self.initial_loss,
            diverged_for: self.diverged_for,
        })
    }

    fn save_checkpoint(&self) -> Result<()> {
        if let Some(p) = &self.checkpoint_path {
            self.checkpoint()?.save(p)?;
        }
        Ok(())
    }

    /// Draws blocks `counters` under `root` at the given noise variance.
    fn draw_batch(&self, root: u64, counters: std::ops::Range<u64>, sigma2: f64) -> Result<Batch> {
        let k = self.cfg.frame.k;
        let pnd = matches!(self.cfg.demapper, DemapperKind::PndLpn | DemapperKind::PndHsnr);
        let truth_setup = if pnd {
            let (c, g_tx, g_rx, _) = waveform_from_params(&self.cfg, &self.params)?;
            Some(LinkSetup {
                constellation: c,
                g_tx,
                g_rx,
                ..self.sampler.clone()
            })
        } else {
            None
        };
        let n = self.plan.signal_len();
        let mut frames = Vec::with_capacity((counters.end - counters.start) as usize);
        for idx in counters {
            let bits = self.sampler.draw_bits(root, idx);
            let labels = bits_to_labels(&bits, k)?;
            let real = self.sampler.draw_realization(sigma2, root, idx)?;
            let noise = awgn(real.noise_seed, n, sigma2);
            let mut draw = FrameDraw::new(labels, k, &real, noise);
            if let Some(setup) = &truth_setup {
                draw.phase_var = phase_truth(setup, &draw.labels, &real)?;
            }
            frames.push(draw);
        }
        Ok(Batch { frames, sigma2 })
    }

    /// Batch for global inner step `step` (Eb/N0 drawn uniformly in the training range).
    pub fn training_batch(&self, step: u64) -> Result<Batch> {
        let u: f64 = substream(self.cfg.seed, Stream::EbN0, step).random();
        let ebn0 = self.cfg.ebn0_lo_db + (self.cfg.ebn0_hi_db - self.cfg.ebn0_lo_db) * u;
        let sigma2 = frame_noise_variance(ebn0, 1.0, &self.cfg.frame)?;
        let b = self.cfg.batch_size as u64;
        self.draw_batch(self.cfg.seed, step * b..(step + 1) * b, sigma2)
    }

    pub fn heldout_batch(&self) -> Result<Batch> {
        let sigma2 = frame_noise_variance(self.cfg.heldout_ebn0_db, 1.0, &self.cfg.frame)?;
        let root = substream_seed(self.cfg.seed, Stream::Heldout, 0);
        self.draw_batch(root, 0..self.cfg.heldout_frames as u64, sigma2)
    }

    fn leaves<'t>(&self, tape: &'t Tape, ps: &ParamSet) -> ParamVars<'t> {
        ParamVars {
            constellation: tape.param(ps.values(self.groups.constellation).to_vec()),
            g_tx: tape.param(ps.values(self.groups.g_tx).to_vec()),
            g_rx: tape.param(ps.values(self.groups.g_rx).to_vec()),
            nn: self.groups.nn.map(|i| tape.param(ps.values(i).to_vec())),
        }
    }

    fn run_forward<'t>(&self, tape: &'t Tape, vars: ParamVars<'t>, batch: &Batch, st: &LagrangianState) -> Terms<'t> {
        forward::forward(
            tape,
            &self.plan,
            vars,
            &self.nn_dims,
            self.cfg.demapper,
            batch,
            st,
            self.cfg.power_samples,
        )
    }

    /// Augmented loss and its gradient (flattened in parameter order) on a fixed batch.
    pub fn loss_and_grad(&self, ps: &ParamSet, batch: &Batch, st: &LagrangianState) -> Result<(f64, Vec<f64>)> {
        let tape = Tape::new();
        let vars = self.leaves(&tape, ps);
        let terms = self.run_forward(&tape, vars, batch, st);
        let grads = tape.backward(terms.loss)?;
        let mut flat = Vec::with_capacity(ps.len());
        for (i, _) in ps.groups().iter().enumerate() {
            let v = if i == self.groups.constellation {
                vars.constellation
            } else if i == self.groups.g_tx {
                vars.g_tx
            } else if i == self.groups.g_rx {
                vars.g_rx
            } else {
                vars.nn.expect("nn group")
            };
            flat.extend(grads.wrt(v));
        }
        Ok((terms.loss.item(), flat))
    }

    /// Augmented loss only.
    pub fn loss_at(&self, ps: &ParamSet, batch: &Batch, st: &LagrangianState) -> f64 {
        let tape = Tape::new();
        let vars = self.leaves(&tape, ps);
        self.run_forward(&tape, vars, batch, st).loss.item()
    }

    /// One SGD step on the batch of global step `step`. Returns the augmented loss.
    pub fn step(&mut self, step: u64) -> Result<f64> {
        self.step_with(step, false)
    }

    fn step_with(&mut self, step: u64, zero_grads: bool) -> Result<f64> {
        let batch = self.training_batch(step)?;
        let (loss, grad) = self.loss_and_grad(&self.params, &batch, &self.state)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite loss or gradient at step {step} (loss {loss}, noise variance {})",
                batch.sigma2
            )));
        }
        let mut start = 0;
        for i in 0..self.params.groups().len() {
            let n = self.params.values(i).len();
            let g: Vec<f64> = if zero_grads { vec![0.0; n] } else { grad[start..start + n].to_vec() };
            self.params.accumulate(i, &g)?;
            start += n;
        }
        adam_step(&mut self.params, &mut self.adam)?;
        Ok(loss)
    }

    /// J inner steps of outer iteration `outer` (1-based). Returns the mean loss.
    pub fn inner_sgd(&mut self, outer: usize) -> Result<f64> {
        let j = self.cfg.inner_steps as u64;
        let mut total = 0.0;
        for s in 0..j {
            let step = (outer as u64 - 1) * j + s;
            let loss = match self.step(step) {
                Ok(l) => l,
                Err(e) => {
                    self.save_checkpoint()?;
                    return Err(e);
                }
            };
            total += loss;
        }
        Ok(total / j as f64)
    }

    /// Objective values on the fixed held-out batch.
    pub fn evaluate(&self) -> Result<Evaluation> {
        let batch = self.heldout_batch()?;
        let tape = Tape::new();
        let vars = self.leaves(&tape, &self.params);
        let t = self.run_forward(&tape, vars, &batch, &self.state);
        let papr_db = papr_ccdf(&t.powers)?.papr_at(self.cfg.ccdf_level)?;
        Ok(Evaluation {
            loss: t.loss.item(),
            bce: t.bce.item(),
            phi_p: t.phi_p.item(),
            phi_a: t.phi_a.item(),
            aclr_db: t.aclr_db.item(),
            papr_db,
        })
    }

    fn record(&mut self, iteration: usize, train_loss: Option<f64>, ev: &Evaluation) {
        self.log.push(LogRow {
            iteration,
            train_loss,
            bce: ev.bce,
            phi_p: ev.phi_p,
            aclr_db: ev.aclr_db,
            papr_db: ev.papr_db,
            mu_p: self.state.mu_p,
            mu_a: self.state.mu_a,
            lambda: self.state.lambda,
        });
    }

    /// Runs (or resumes) the outer loop to completion.
    pub fn run(&mut self, mut progress: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
        if self.next_outer == 0 {
            let ev = self.evaluate()?;
            self.initial_loss = Some(ev.loss);
            self.record(0, None, &ev);
            progress(self.log.last().expect("row"));
            self.next_outer = 1;
            self.save_checkpoint()?;
        }
        while self.next_outer <= self.cfg.outer_iterations {
            let i = self.next_outer;
            let mean_loss = self.inner_sgd(i)?;
            let ev = self.evaluate()?;
            self.state = update_multipliers(&self.state, ev.phi_p, ev.phi_a)?;
            self.record(i, Some(mean_loss), &ev);
            progress(self.log.last().expect("row"));
            self.next_outer = i + 1;
            let init = self.initial_loss.unwrap_or(ev.loss);
            if init > 0.0 && ev.loss > 10.0 * init {
                self.diverged_for += 1;
            } else {
                self.diverged_for = 0;
            }
            self.save_checkpoint()?;
            if self.diverged_for >= 3 {
                return Err(Error::Training(format!(
                    "diverged: held-out loss {} exceeds 10x the initial {init} for 3 outer iterations",
                    ev.loss
                )));
            }
        }
        Ok(TrainOutcome {
            bundle: self.bundle()?,
            log: self.log.clone(),
        })
    }
}

/// Noise-free residual phase variance of one block under the given waveform.
fn phase_truth(setup: &LinkSetup, labels: &[usize], real: &crate::channel::ChannelRealization) -> Result<f64> {
    let tx = setup.transmit(labels)?;
    let r = apply_impairments(&tx, real)?;
    let body = receive_chain(&r, &setup.g_rx, setup.g_tx.len(), setup.frame.m, &setup.layout)?;
    let (_, report) = ptrs_compensate(&body, &setup.pilots, &setup.layout)?;
    setup.residual_phase_truth(&tx, real, &report.track)
}

/// Convenience: a fresh run from `cfg`.
pub fn train(cfg: TrainConfig, progress: impl FnMut(&LogRow)) -> Result<TrainOutcome> {
    Trainer::new(cfg)?.run(progress)
}

/// One probed coordinate of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradProbe {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// `|a - f| / max(|a|, |f|, 1e-6)`.
pub fn relative_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-6)
}

/// Multipliers and targets that make every penalty term active with an O(1)
/// contribution at the initial waveform of `cfg`, for gradient checks.
pub fn probe_state(cfg: &TrainConfig) -> Result<LagrangianState> {
    let ev = Trainer::new(cfg.clone())?.evaluate()?;
    Ok(LagrangianState {
        mu_p: 0.5,
        mu_a: 0.3,
        lambda: 2.0,
        ..LagrangianState::new(
            cfg.papr_target_db,
            ev.aclr_db - 1.0,
            cfg.rolloff,
            cfg.lambda0,
            cfg.tau,
        )?
    })
}

/// Compares the tape gradient of the augmented loss with central differences (step
/// `h`) at a jittered parameter point, probing `per_group` random coordinates of
/// every parameter group.
pub fn gradient_check(
    cfg: &TrainConfig,
    st: &LagrangianState,
    per_group: usize,
    jitter: f64,
    h: f64,
) -> Result<Vec<GradProbe>> {
    let trainer = Trainer::new(cfg.clone())?;
    let mut ps = trainer.params.clone();
    let mut rng = substream(cfg.seed, Stream::Init, 2);
    for i in 0..ps.groups().len() {
        for v in ps.values_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *v += jitter * z * v.abs().max(0.05);
        }
    }
    let batch = trainer.training_batch(0)?;
    let (_, grad) = trainer.loss_and_grad(&ps, &batch, st)?;
    let mut probes = Vec::new();
    let mut start = 0;
    for gi in 0..ps.groups().len() {
        let name = ps.groups()[gi].name.clone();
        let n = ps.values(gi).len();
        for _ in 0..per_group {
            let j = rng.random_range(0..n);
            let orig = ps.values(gi)[j];
            ps.values_mut(gi)[j] = orig + h;
            let fp = trainer.loss_at(&ps, &batch, st);
            ps.values_mut(gi)[j] = orig - h;
            let fm = trainer.loss_at(&ps, &batch, st);
            ps.values_mut(gi)[j] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = grad[start + j];
            probes.push(GradProbe {
                group: name.clone(),
                index: j,
                analytic,
                numeric,
                rel_err: relative_error(analytic, numeric),
            });
        }
        start += n;
    }
    Ok(probes)
}
