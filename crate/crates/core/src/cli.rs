//! Command-line front end. Every file written carries a `# config_hash=..., seed=...`
//! header (JSON files carry the same data in a `provenance` object), so a rerun with
//! the same header inputs reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::channel::LinkSetup;
use crate::config::{short_hash, ResolvedConfig};
use crate::demappers::{DemapperKind, PndVariant};
use crate::error::{invalid, Error, Result};
use crate::metrics::{
    aclr_beta, aclr_from_spectrum, evaluate_link, filter_spectrum, obw_999_filter, papr_ccdf, powers, stopband_matrix,
    CcdfCurve, Demapper, LinkEvalSpec, UncodedDecoder,
};
use crate::numerics::rng::{substream_seed, Stream};
use crate::phase_noise::{generate_pn, PnGenSpec, PnModelKind};
use crate::trainer::{bundle_from_params, initial_params, Checkpoint, Trainer, LOG_HEADER};
use crate::waveform::{bits_to_labels, init_rrc, FrameConfig, Provenance, WaveformBundle};

#[derive(Parser, Debug)]
#[command(name = "wavelab", version, about = "Waveform learning under phase noise with PAPR/ACLR constraints")]
pub struct Cli {
    /// Worker threads for frame-parallel evaluation (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Constrained training; writes bundle, log, checkpoint and the resolved config.
    Train(TrainArgs),
    /// BER/BLER/SE sweep, PAPR CCDF, ACLR report and Tx filter PSD of a bundle.
    Eval(EvalArgs),
    /// Phase-noise model PSD on a log frequency grid.
    Psd(PsdArgs),
    /// One synthesized phase-noise realization.
    GenPn(GenPnArgs),
    /// PAPR CCDF of a bundle or a baseline waveform.
    Papr(PaprArgs),
    /// ACLR and occupied bandwidth of a transmit filter.
    Aclr(AclrArgs),
    /// The untrained initial waveform as a bundle.
    ExportBaseline(ExportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// TOML experiment config; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario preset, e.g. 120ghz_p55_a45 or desk_k4 (overrides the file's).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Continue from a checkpoint written by an earlier run of the same config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Comma-separated Eb/N0 grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ebn0: Option<Vec<f64>>,
    #[arg(long)]
    pub frames: Option<u64>,
    /// Loopback without phase noise.
    #[arg(long)]
    pub no_pn: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct PsdArgs {
    #[arg(long, default_value = "tx-lmx2595")]
    pub model: String,
    /// Carrier frequency in Hz.
    #[arg(long, default_value_t = 120e9)]
    pub fc: f64,
    #[arg(long, default_value_t = 1e3)]
    pub f_min: f64,
    #[arg(long, default_value_t = 1e10)]
    pub f_max: f64,
    #[arg(long, default_value_t = 20)]
    pub per_decade: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct GenPnArgs {
    #[arg(long, default_value = "rx-ue1")]
    pub model: String,
    #[arg(long, default_value_t = 120e9)]
    pub fc: f64,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 15.72e9)]
    pub fs: f64,
    #[arg(long, default_value_t = 65536)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Realization index under the seed.
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct FilterArgs {
    /// Read the waveform from a bundle instead of building the baseline.
    #[arg(long)]
    #[serde(skip)]
    pub bundle: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 32)]
    pub span: usize,
    #[arg(long, default_value_t = 4)]
    pub oversampling: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct PaprArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Baseline constellation (`auto` picks APSK for K = 6, QAM otherwise).
    #[arg(long, default_value = "auto")]
    pub constellation: String,
    /// Bits per symbol of the baseline.
    #[arg(long, default_value_t = 6)]
    pub bits: usize,
    #[arg(long, default_value_t = 20)]
    pub frames: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub level: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct AclrArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// FFT size of the spectrum cross-check.
    #[arg(long, default_value_t = 65536)]
    pub nfft: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub constellation: Option<String>,
    /// Filter family; only `rrc` is available.
    #[arg(long, default_value = "rrc")]
    pub filter: String,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub span: Option<usize>,
    #[arg(long)]
    pub oversampling: Option<usize>,
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub demapper: Option<String>,
    /// Bundle path; `<output_dir>/baseline.json` when absent.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

/// Parses the process arguments, runs the command and returns the exit code. Errors go
/// to stderr as `error[<category>]: <message>`.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return invalid("--threads must be positive");
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Psd(a) => psd(&a),
        Command::GenPn(a) => gen_pn(&a),
        Command::Papr(a) => papr(&a),
        Command::Aclr(a) => aclr(&a),
        Command::ExportBaseline(a) => export_baseline(&a),
    }
}

fn header(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash}, seed={seed}\n")
}

/// Hash of a command's own arguments, for commands that take no config file.
fn args_hash<T: Serialize>(args: &T) -> Result<String> {
    Ok(short_hash(serde_json::to_string(args)?.as_bytes()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn insert_path(t: &mut toml::Table, path: &str, v: toml::Value) {
    match path.split_once('.') {
        Some((head, rest)) => {
            let sub = t
                .entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let toml::Value::Table(sub) = sub {
                insert_path(sub, rest, v);
            }
        }
        None => {
            t.insert(path.to_string(), v);
        }
    }
}

fn int(v: impl TryInto<i64>) -> Result<toml::Value> {
    v.try_into()
        .map(toml::Value::Integer)
        .map_err(|_| Error::InvalidArgument("integer argument out of range".into()))
}

fn load_config(a: &ConfigArgs, mut over: toml::Table) -> Result<ResolvedConfig> {
    if let Some(s) = a.seed {
        insert_path(&mut over, "seed", int(s)?);
    }
    if let Some(o) = &a.out {
        insert_path(&mut over, "output_dir", toml::Value::String(o.display().to_string()));
    }
    match &a.config {
        Some(p) => ResolvedConfig::load(p, a.scenario.as_deref(), &over),
        None => ResolvedConfig::resolve("", a.scenario.as_deref(), &over),
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut over = toml::Table::new();
    if let Some(n) = a.outer {
        insert_path(&mut over, "trainer.outer_iterations", int(n)?);
    }
    if let Some(n) = a.inner {
        insert_path(&mut over, "trainer.inner_steps", int(n)?);
    }
    let rc = load_config(&a.cfg, over)?;
    let cfg = &rc.config;
    let hash = cfg.hash()?;
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("resolved_config.toml"), header(&hash, cfg.seed) + &rc.echo()?)?;

    let tc = cfg.train_config()?;
    let trainer = match &a.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.config != tc {
                return Err(Error::Mismatch(format!(
                    "checkpoint {} was written by a different configuration",
                    p.display()
                )));
            }
            Trainer::from_checkpoint(ck)?
        }
        None => Trainer::new(tc)?,
    };
    let mut trainer = trainer
        .with_checkpoint(dir.join("checkpoint.json"))
        .with_provenance(Provenance {
            config_hash: hash.clone(),
            seed: cfg.seed,
        });
    let outcome = trainer.run(|row| {
        eprintln!(
            "outer {:>3}  bce {:.5}  phi_p {:.3e}  aclr {:.2} dB  papr {:.2} dB  lambda {}",
            row.iteration, row.bce, row.phi_p, row.aclr_db, row.papr_db, row.lambda
        )
    })?;
    outcome.bundle.save(&dir.join("bundle.json"))?;
    let mut log = header(&hash, cfg.seed);
    log.push_str(LOG_HEADER);
    log.push('\n');
    for r in &outcome.log {
        log.push_str(&r.csv());
        log.push('\n');
    }
    std::fs::write(dir.join("train_log.csv"), log)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn link_setup(bundle: &WaveformBundle, frame: FrameConfig, rc: &ResolvedConfig) -> Result<LinkSetup> {
    let cfg = &rc.config;
    let fc = cfg.carrier_hz();
    let tx = cfg.phase_noise.tx.build(fc)?;
    let rx = cfg.phase_noise.rx.build(fc)?;
    LinkSetup::new(
        bundle.constellation()?,
        bundle.tx_filter()?,
        bundle.rx_filter()?,
        frame,
        tx.as_deref(),
        rx.as_deref(),
        cfg.sample_rate(),
    )
}

/// Central (transient-free) transmit samples of `frames` random blocks.
fn transmit_powers(setup: &LinkSetup, frames: u64, seed: u64) -> Result<Vec<f64>> {
    let root = substream_seed(seed, Stream::Heldout, 1);
    let start = (setup.g_tx.len() - 1) / 2;
    let len = setup.frame.n_total() * setup.frame.m;
    let mut p = Vec::with_capacity(frames as usize * len);
    for f in 0..frames {
        let labels = bits_to_labels(&setup.draw_bits(root, f), setup.frame.k)?;
        let tx = setup.transmit(&labels)?;
        p.extend(powers(&tx[start..start + len]));
    }
    Ok(p)
}

fn ccdf_csv(curve: &CcdfCurve) -> String {
    let mut s = String::from("nu_db,ccdf\n");
    for (nu, c) in curve.nu_db.iter().zip(&curve.ccdf) {
        let _ = writeln!(s, "{nu},{c}");
    }
    s
}

fn fmt_level(level: f64) -> String {
    if level == 1e-3 {
        "1e-3".into()
    } else {
        format!("{level:e}")
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut over = toml::Table::new();
    if let Some(g) = &a.ebn0 {
        insert_path(&mut over, "eval.ebn0_db", toml::Value::Array(g.iter().map(|&v| toml::Value::Float(v)).collect()));
    }
    if let Some(n) = a.frames {
        insert_path(&mut over, "eval.frames", int(n)?);
    }
    if a.no_pn {
        insert_path(&mut over, "phase_noise.tx.model", toml::Value::String("none".into()));
        insert_path(&mut over, "phase_noise.rx.model", toml::Value::String("none".into()));
    }
    let rc = load_config(&a.cfg, over)?;
    let cfg = &rc.config;
    let bundle_text = std::fs::read_to_string(&a.bundle)?;
    let bundle = WaveformBundle::from_json(&bundle_text)?;
    let frame = cfg.frame()?;
    bundle.check_compatible(frame.k, frame.m)?;
    let hash = short_hash(format!("{}:{}", cfg.hash()?, short_hash(bundle_text.as_bytes())).as_bytes());
    let head = header(&hash, cfg.seed);
    let setup = link_setup(&bundle, frame, &rc)?;

    let demapper = match cfg.demapper.kind {
        DemapperKind::Aod => Demapper::Aod,
        DemapperKind::PndLpn => Demapper::Pnd(PndVariant::Lpn, cfg.demapper.variances),
        DemapperKind::PndHsnr => Demapper::Pnd(PndVariant::Hsnr, cfg.demapper.variances),
        DemapperKind::Nnd => Demapper::Nn(
            bundle
                .nn
                .clone()
                .ok_or_else(|| Error::Mismatch("NN demapper selected but the bundle has no NN weights".into()))?,
        ),
    };
    let spec = LinkEvalSpec {
        ebn0_db: cfg.eval.ebn0_db.clone(),
        n_frames: cfg.eval.frames,
        code_rate: cfg.eval.code_rate,
        seed: cfg.seed,
    };
    let points = evaluate_link(&setup, &demapper, &UncodedDecoder, &spec)?;

    let curve = papr_ccdf(&transmit_powers(&setup, cfg.eval.spectrum_frames, cfg.seed)?)?;
    let level = cfg.constraints.ccdf_level;
    let papr_db = curve.papr_at(level)?;
    let taps = &setup.g_tx.taps;
    let m = frame.m;
    let aclr_db = aclr_beta(taps, &stopband_matrix(taps.len(), bundle.rolloff, m)?)?;
    let aclr_spec = aclr_from_spectrum(taps, bundle.rolloff, m, 1 << 16)?;
    let obw = obw_999_filter(taps, m)?;

    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    let mut link = head.clone();
    let _ = writeln!(link, "ebn0_db,ber,bler,se_bits_s_hz,papr_db@{},aclr_db,obw", fmt_level(level));
    for p in &points {
        let _ = writeln!(link, "{},{},{},{},{papr_db},{aclr_db},{obw}", p.ebn0_db, p.ber, p.bler, p.se);
    }
    std::fs::write(dir.join("link.csv"), link)?;
    std::fs::write(dir.join("ccdf.csv"), head.clone() + &ccdf_csv(&curve))?;
    let mut rep = head.clone();
    rep.push_str("beta,taps,aclr_db,aclr_spectrum_db,obw\n");
    let _ = writeln!(rep, "{},{},{aclr_db},{aclr_spec},{obw}", bundle.rolloff, taps.len());
    std::fs::write(dir.join("aclr.csv"), rep)?;
    std::fs::write(dir.join("tx_psd.csv"), head.clone() + &filter_psd_csv(taps, cfg.sample_rate())?)?;
    std::fs::write(dir.join("eval_config.toml"), head + &rc.echo()?)?;
    println!("ACLR_beta {aclr_db:.3} dB  PAPR@{} {papr_db:.3} dB  OBW {obw:.4}", fmt_level(level));
    println!("wrote {}", dir.display());
    Ok(())
}

/// `|G(f)|^2` in dB on a centred frequency grid in Hz.
fn filter_psd_csv(taps: &[f64], fs: f64) -> Result<String> {
    let nfft = 4096usize.max(taps.len().next_power_of_two());
    let spec = filter_spectrum(taps, nfft)?;
    let mut s = String::from("f_hz,psd_db\n");
    for i in 0..nfft {
        let k = (i + nfft / 2) % nfft;
        let f = (k as f64 - if k >= nfft / 2 { nfft as f64 } else { 0.0 }) * fs / nfft as f64;
        let _ = writeln!(s, "{f},{}", 10.0 * spec[k].max(1e-300).log10());
    }
    Ok(s)
}

fn pn_model(name: &str, fc: f64) -> Result<Box<dyn crate::phase_noise::PsdModel>> {
    PnModelKind::parse(name)?
        .build(fc)
        .ok_or_else(|| Error::InvalidArgument("model `none` has no spectrum".into()))
}

fn psd(a: &PsdArgs) -> Result<()> {
    if !(a.f_min > 0.0 && a.f_max >= a.f_min && a.per_decade > 0) {
        return invalid("need 0 < f_min <= f_max and a positive point density");
    }
    let model = pn_model(&a.model, a.fc)?;
    let decades = (a.f_max / a.f_min).log10();
    let n = (decades * a.per_decade as f64).round() as usize + 1;
    let mut s = header(&args_hash(a)?, 0);
    s.push_str("f_hz,psd_dbchz\n");
    for i in 0..n {
        let f = a.f_min * 10f64.powf(decades * i as f64 / (n - 1).max(1) as f64);
        let _ = writeln!(s, "{f},{}", model.eval_dbc(f)?);
    }
    emit(a.out.as_deref(), &s)
}

fn gen_pn(a: &GenPnArgs) -> Result<()> {
    let model = pn_model(&a.model, a.fc)?;
    let phase = generate_pn(
        model.as_ref(),
        &PnGenSpec {
            sample_rate: a.fs,
            n_samples: a.samples,
            seed: substream_seed(a.seed, Stream::PnTx, a.realization),
        },
    )?;
    let mut s = header(&args_hash(a)?, a.seed);
    s.push_str("n,t_s,phase_rad\n");
    for (i, p) in phase.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{p}", i as f64 / a.fs);
    }
    emit(a.out.as_deref(), &s)
}

/// Bundle from `--bundle`, or the baseline built from the filter flags.
fn waveform_from(f: &FilterArgs, constellation: &str, bits: usize) -> Result<(WaveformBundle, Option<String>)> {
    if let Some(p) = &f.bundle {
        let text = std::fs::read_to_string(p)?;
        return Ok((WaveformBundle::from_json(&text)?, Some(short_hash(text.as_bytes()))));
    }
    let frame = FrameConfig::from_total(bits, 4096, 288, 32, 4, 1, f.oversampling)?;
    let c = match constellation {
        "auto" => crate::waveform::default_constellation(bits)?,
        name => crate::waveform::init_constellation(name)?,
    };
    if c.bits_per_symbol() != bits {
        return Err(Error::Mismatch(format!(
            "constellation `{constellation}` has K = {}, --bits is {bits}",
            c.bits_per_symbol()
        )));
    }
    let g = init_rrc(f.beta, f.span, f.oversampling)?;
    Ok((WaveformBundle::new(&c, &g, &g, f.beta, frame, DemapperKind::Aod, None, 0), None))
}

fn combined_hash<T: Serialize>(a: &T, bundle_hash: Option<String>) -> Result<String> {
    let h = args_hash(a)?;
    Ok(match bundle_hash {
        Some(b) => short_hash(format!("{h}:{b}").as_bytes()),
        None => h,
    })
}

fn papr(a: &PaprArgs) -> Result<()> {
    let (bundle, bh) = waveform_from(&a.filter, &a.constellation, a.bits)?;
    let setup = LinkSetup::new(
        bundle.constellation()?,
        bundle.tx_filter()?,
        bundle.rx_filter()?,
        bundle.frame,
        None,
        None,
        1.0,
    )?;
    let curve = papr_ccdf(&transmit_powers(&setup, a.frames, a.seed)?)?;
    let v = curve.papr_at(a.level)?;
    let mut s = header(&combined_hash(a, bh)?, a.seed);
    let _ = writeln!(s, "# papr_db@{}={v}", fmt_level(a.level));
    s.push_str(&ccdf_csv(&curve));
    if a.out.is_some() {
        println!("PAPR@{} {v:.3} dB over {} samples", fmt_level(a.level), curve.samples);
    }
    emit(a.out.as_deref(), &s)
}

fn aclr(a: &AclrArgs) -> Result<()> {
    let (bundle, bh) = waveform_from(&a.filter, "auto", 6)?;
    let taps = &bundle.tx_taps;
    let m = bundle.oversampling;
    let q = aclr_beta(taps, &stopband_matrix(taps.len(), bundle.rolloff, m)?)?;
    let sp = aclr_from_spectrum(taps, bundle.rolloff, m, a.nfft)?;
    let obw = obw_999_filter(taps, m)?;
    let mut s = header(&combined_hash(a, bh)?, 0);
    s.push_str("beta,taps,aclr_db,aclr_spectrum_db,obw\n");
    let _ = writeln!(s, "{},{},{q},{sp},{obw}", bundle.rolloff, taps.len());
    if a.out.is_some() {
        println!("ACLR_beta {q:.3} dB (spectrum {sp:.3} dB), OBW {obw:.4}");
    }
    emit(a.out.as_deref(), &s)
}

/// Bits per symbol implied by a named constellation.
fn named_bits(name: &str) -> Option<usize> {
    match name {
        "apsk64" | "qam64" => Some(6),
        "qam16" => Some(4),
        "qpsk" | "qam4" => Some(2),
        _ => None,
    }
}

fn export_baseline(a: &ExportArgs) -> Result<()> {
    if a.filter != "rrc" {
        return invalid(format!("unknown filter family `{}` (only rrc)", a.filter));
    }
    let mut over = toml::Table::new();
    if let Some(c) = &a.constellation {
        insert_path(&mut over, "waveform.constellation", toml::Value::String(c.clone()));
    }
    if let Some(k) = a.bits.or_else(|| a.constellation.as_deref().and_then(named_bits)) {
        insert_path(&mut over, "waveform.bits_per_symbol", int(k)?);
    }
    if let Some(b) = a.beta {
        insert_path(&mut over, "waveform.rolloff", toml::Value::Float(b));
    }
    if let Some(s) = a.span {
        insert_path(&mut over, "waveform.span", int(s)?);
    }
    if let Some(m) = a.oversampling {
        insert_path(&mut over, "waveform.oversampling", int(m)?);
    }
    if let Some(d) = &a.demapper {
        insert_path(&mut over, "demapper.kind", toml::Value::String(d.clone()));
    }
    let rc = load_config(&a.cfg, over)?;
    let tc = rc.config.train_config()?;
    let mut bundle = bundle_from_params(&tc, &initial_params(&tc)?)?;
    bundle.provenance = Some(Provenance {
        config_hash: rc.config.hash()?,
        seed: rc.config.seed,
    });
    let path = a
        .file
        .clone()
        .unwrap_or_else(|| PathBuf::from(&rc.config.output_dir).join("baseline.json"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    bundle.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
