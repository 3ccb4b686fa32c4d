//! Experiment configuration: TOML with sections per module, a built-in default set,
//! named scenario presets, and per-field provenance for the resolved echo.
//!
//! Resolution order (later wins): built-in defaults, scenario preset, file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::demappers::DemapperKind;
use crate::error::{Error, Result};
use crate::metrics::VarianceSource;
use crate::phase_noise::{PnModelKind, PnSelection};
use crate::trainer::TrainConfig;
use crate::waveform::FrameConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    pub bits_per_symbol: usize,
    /// Symbols per block including the cyclic prefix.
    pub block_len: usize,
    pub cp_len: usize,
    pub ptrs_groups: usize,
    pub ptrs_per_group: usize,
    pub rpn_per_group: usize,
    pub oversampling: usize,
    /// Filter span in symbols.
    pub span: usize,
    /// Initial RRC roll-off; also the excess bandwidth of the ACLR in-band.
    pub rolloff: f64,
    /// `auto`, `random` or a named initializer.
    pub constellation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseNoiseSection {
    pub tx: PnSelection,
    pub rx: PnSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemapperSection {
    pub kind: DemapperKind,
    /// Variance source of the phase-noise-aware demappers at evaluation time.
    pub variances: VarianceSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub papr_target_db: f64,
    pub aclr_target_db: f64,
    pub ccdf_level: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    pub ebn0_lo_db: f64,
    pub ebn0_hi_db: f64,
    pub batch_size: usize,
    pub inner_steps: usize,
    pub outer_iterations: usize,
    pub power_samples: usize,
    pub learning_rate: f64,
    pub lambda0: f64,
    pub tau: f64,
    pub heldout_frames: usize,
    pub heldout_ebn0_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub ebn0_db: Vec<f64>,
    pub frames: u64,
    pub code_rate: f64,
    /// Blocks used for the PAPR CCDF and the Tx PSD.
    pub spectrum_frames: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub seed: u64,
    pub output_dir: String,
    pub carrier_ghz: f64,
    /// Symbol rate in GHz.
    pub bandwidth_ghz: f64,
    pub waveform: WaveformSection,
    pub phase_noise: PhaseNoiseSection,
    pub demapper: DemapperSection,
    pub constraints: ConstraintSection,
    pub trainer: TrainerSection,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    /// The full-scale simulation parameter set at 120 GHz.
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            seed: 1,
            output_dir: "out".into(),
            carrier_ghz: 120.0,
            bandwidth_ghz: 3.93,
            waveform: WaveformSection {
                bits_per_symbol: 6,
                block_len: 4096,
                cp_len: 288,
                ptrs_groups: 32,
                ptrs_per_group: 4,
                rpn_per_group: 1,
                oversampling: 4,
                span: 32,
                rolloff: 0.3,
                constellation: "auto".into(),
            },
            phase_noise: PhaseNoiseSection {
                tx: PnModelKind::None.into(),
                rx: PnModelKind::RxUe1.into(),
            },
            demapper: DemapperSection {
                kind: DemapperKind::Aod,
                variances: VarianceSource::Estimated,
            },
            constraints: ConstraintSection {
                papr_target_db: 6.5,
                aclr_target_db: -45.0,
                ccdf_level: 1e-3,
            },
            trainer: TrainerSection {
                ebn0_lo_db: 6.0,
                ebn0_hi_db: 18.0,
                batch_size: 10,
                inner_steps: 500,
                outer_iterations: 3,
                power_samples: 400_000,
                learning_rate: 1e-3,
                lambda0: 1.0,
                tau: 2.0,
                heldout_frames: 20,
                heldout_ebn0_db: 12.0,
            },
            eval: EvalSection {
                ebn0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0],
                frames: 50,
                code_rate: 1.0,
                spectrum_frames: 20,
            },
        }
    }
}

/// Where a resolved value came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Default,
    Preset(String),
    File,
    Override,
}

impl Source {
    fn label(&self) -> String {
        match self {
            Source::Default => "default".into(),
            Source::Preset(p) => format!("preset {p}"),
            Source::File => "file".into(),
            Source::Override => "command line".into(),
        }
    }
}

/// A config together with the source of every leaf value.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub sources: BTreeMap<String, Source>,
}

/// Names accepted as presets: `{120,220}ghz_p{55,60,65}_a{45,55}` with an optional
/// `_b25` suffix for 0.25 excess bandwidth, plus `desk_k{2,4,6}` for laptop-scale runs.
pub fn preset_names() -> Vec<String> {
    let mut v = vec![];
    for fc in [120, 220] {
        for p in [55, 60, 65] {
            for a in [45, 55] {
                for b in ["", "_b25"] {
                    v.push(format!("{fc}ghz_p{p}_a{a}{b}"));
                }
            }
        }
    }
    v.extend(["desk_k2", "desk_k4", "desk_k6"].map(String::from));
    v
}

fn table(pairs: &[(&str, toml::Value)]) -> toml::Table {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Overlay that a preset applies on top of the defaults.
pub fn preset(name: &str) -> Result<toml::Table> {
    use toml::Value as V;
    if name == "default" {
        return Ok(toml::Table::new());
    }
    if let Some(k) = name.strip_prefix("desk_k") {
        let k: i64 = match k {
            "2" => 2,
            "4" => 4,
            "6" => 6,
            _ => return Err(unknown_preset(name)),
        };
        let d = FrameConfig::desk(k as usize);
        return Ok(table(&[(
            "waveform",
            V::Table(table(&[
                ("bits_per_symbol", V::Integer(k)),
                ("block_len", V::Integer(d.n_total() as i64)),
                ("cp_len", V::Integer(d.n_cp as i64)),
                ("ptrs_groups", V::Integer(d.groups as i64)),
                ("ptrs_per_group", V::Integer(d.n_ptrs as i64)),
                ("rpn_per_group", V::Integer(d.n_rpn as i64)),
            ])),
        )]));
    }
    let parse = || -> Option<(i64, f64, f64, f64)> {
        let (fc, rest) = name.split_once("ghz_p")?;
        let fc = match fc {
            "120" => 120,
            "220" => 220,
            _ => return None,
        };
        let (p, rest) = rest.split_once("_a")?;
        let papr = match p {
            "55" => 5.5,
            "60" => 6.0,
            "65" => 6.5,
            _ => return None,
        };
        let (a, beta) = match rest.strip_suffix("_b25") {
            Some(a) => (a, 0.25),
            None => (rest, 0.3),
        };
        let aclr = match a {
            "45" => -45.0,
            "55" => -55.0,
            _ => return None,
        };
        Some((fc, papr, aclr, beta))
    };
    let (fc, papr, aclr, beta) = parse().ok_or_else(|| unknown_preset(name))?;
    Ok(table(&[
        ("carrier_ghz", V::Float(fc as f64)),
        (
            "waveform",
            V::Table(table(&[
                ("rolloff", V::Float(beta)),
                ("rpn_per_group", V::Integer(if fc == 220 { 4 } else { 1 })),
            ])),
        ),
        (
            "constraints",
            V::Table(table(&[("papr_target_db", V::Float(papr)), ("aclr_target_db", V::Float(aclr))])),
        ),
    ]))
}

fn unknown_preset(name: &str) -> Error {
    Error::Config {
        path: "scenario".into(),
        message: format!(
            "unknown scenario `{name}` (expected default, desk_k2/4/6 or e.g. 120ghz_p55_a45, 220ghz_p60_a55_b25)"
        ),
    }
}

fn config_err(path: impl Into<String>, message: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Merges `over` into `base`, recording the source of every leaf taken from `over`.
fn overlay(base: &mut toml::Table, over: &toml::Table, src: &Source, prefix: &str, sources: &mut BTreeMap<String, Source>) {
    for (k, v) in over {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => overlay(b, o, src, &path, sources),
            _ => {
                base.insert(k.clone(), v.clone());
                mark(v, src, &path, sources);
            }
        }
    }
}

fn mark(v: &toml::Value, src: &Source, path: &str, sources: &mut BTreeMap<String, Source>) {
    match v {
        toml::Value::Table(t) => {
            for (k, c) in t {
                mark(c, src, &format!("{path}.{k}"), sources);
            }
        }
        _ => {
            sources.insert(path.to_string(), src.clone());
        }
    }
}

impl ResolvedConfig {
    /// Resolves `text` (TOML). `scenario`, when given, overrides the file's scenario key.
    pub fn from_toml(text: &str, scenario: Option<&str>) -> Result<Self> {
        Self::resolve(text, scenario, &toml::Table::new())
    }

    /// Like [`Self::from_toml`], with command-line values applied last.
    pub fn resolve(text: &str, scenario: Option<&str>, overrides: &toml::Table) -> Result<Self> {
        let file: toml::Table = toml::from_str(text).map_err(|e| config_err("<file>", e.to_string().trim_end()))?;
        let name = match (scenario, file.get("scenario")) {
            (Some(s), _) => s.to_string(),
            (None, Some(toml::Value::String(s))) => s.clone(),
            (None, Some(_)) => return Err(config_err("scenario", "expected a string")),
            (None, None) => "default".to_string(),
        };
        let defaults = ExperimentConfig::default();
        let mut merged = toml::Table::try_from(&defaults).map_err(|e| config_err("<defaults>", e))?;
        let mut sources = BTreeMap::new();
        mark(&toml::Value::Table(merged.clone()), &Source::Default, "", &mut sources);
        sources = sources.into_iter().map(|(k, v)| (k.trim_start_matches('.').to_string(), v)).collect();
        overlay(&mut merged, &preset(&name)?, &Source::Preset(name.clone()), "", &mut sources);
        overlay(&mut merged, &file, &Source::File, "", &mut sources);
        overlay(&mut merged, overrides, &Source::Override, "", &mut sources);
        let scenario_src = if scenario.is_some() { Source::Override } else { sources.get("scenario").cloned().unwrap_or(Source::Default) };
        merged.insert("scenario".into(), toml::Value::String(name));
        sources.insert("scenario".into(), scenario_src);
        let config: ExperimentConfig =
            serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
                let path = e.path().to_string();
                let msg = e.into_inner().to_string();
                config_err(path, msg.lines().next().unwrap_or_default())
            })?;
        config.validate()?;
        Ok(Self { config, sources })
    }

    pub fn load(path: &Path, scenario: Option<&str>, overrides: &toml::Table) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::resolve(&text, scenario, overrides)
    }

    /// Built-in defaults with an optional preset and no file.
    pub fn builtin(scenario: &str) -> Result<Self> {
        Self::from_toml("", Some(scenario))
    }

    pub fn source_of(&self, path: &str) -> Option<&Source> {
        self.sources.get(path)
    }

    /// Resolved TOML with each value annotated by its source.
    pub fn echo(&self) -> Result<String> {
        let t = toml::Table::try_from(&self.config).map_err(|e| config_err("<echo>", e))?;
        let mut out = String::new();
        self.emit(&t, "", &mut out);
        Ok(out)
    }

    fn emit(&self, t: &toml::Table, prefix: &str, out: &mut String) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        for (k, v) in t.iter().filter(|(_, v)| !v.is_table()) {
            let path = join(k);
            let src = self.sources.get(&path).map(Source::label).unwrap_or_else(|| "derived".into());
            let _ = writeln!(out, "{} = {}  # {src}", toml_key(k), v);
        }
        for (k, v) in t {
            if let toml::Value::Table(sub) = v {
                let path = join(k);
                let _ = writeln!(out, "\n[{path}]");
                self.emit(sub, &path, out);
            }
        }
    }
}

fn toml_key(k: &str) -> String {
    if k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        k.to_string()
    } else {
        format!("{k:?}")
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.waveform;
        if !(1..=8).contains(&w.bits_per_symbol) {
            return Err(config_err("waveform.bits_per_symbol", "must be between 1 and 8"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(config_err("carrier_ghz", "must be positive"));
        }
        if !(self.bandwidth_ghz > 0.0) {
            return Err(config_err("bandwidth_ghz", "must be positive"));
        }
        if !(w.rolloff > 0.0 && w.rolloff <= 1.0) {
            return Err(config_err("waveform.rolloff", "must be in (0, 1]"));
        }
        if w.span == 0 || w.oversampling == 0 {
            return Err(config_err("waveform", "span and oversampling must be positive"));
        }
        if self.eval.ebn0_db.is_empty() || self.eval.frames == 0 || self.eval.spectrum_frames == 0 {
            return Err(config_err("eval", "need at least one Eb/N0 point and one frame"));
        }
        if !(self.eval.code_rate > 0.0 && self.eval.code_rate <= 1.0) {
            return Err(config_err("eval.code_rate", "must be in (0, 1]"));
        }
        self.frame().map_err(|e| config_err("waveform", e))?;
        self.train_config()?.validate().map_err(|e| config_err("trainer", e))
    }

    pub fn frame(&self) -> Result<FrameConfig> {
        let w = &self.waveform;
        FrameConfig::from_total(
            w.bits_per_symbol,
            w.block_len,
            w.cp_len,
            w.ptrs_groups,
            w.ptrs_per_group,
            w.rpn_per_group,
            w.oversampling,
        )
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_ghz * 1e9
    }

    pub fn symbol_rate_hz(&self) -> f64 {
        self.bandwidth_ghz * 1e9
    }

    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate_hz() * self.waveform.oversampling as f64
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.trainer;
        let c = &self.constraints;
        Ok(TrainConfig {
            demapper: self.demapper.kind,
            ebn0_lo_db: t.ebn0_lo_db,
            ebn0_hi_db: t.ebn0_hi_db,
            batch_size: t.batch_size,
            inner_steps: t.inner_steps,
            outer_iterations: t.outer_iterations,
            power_samples: t.power_samples,
            seed: self.seed,
            learning_rate: t.learning_rate,
            frame: self.frame()?,
            span: self.waveform.span,
            rolloff: self.waveform.rolloff,
            constellation: self.waveform.constellation.clone(),
            papr_target_db: c.papr_target_db,
            aclr_target_db: c.aclr_target_db,
            ccdf_level: c.ccdf_level,
            lambda0: t.lambda0,
            tau: t.tau,
            pn_tx: self.phase_noise.tx.clone(),
            pn_rx: self.phase_noise.rx.clone(),
            carrier_hz: self.carrier_hz(),
            symbol_rate_hz: self.symbol_rate_hz(),
            heldout_frames: t.heldout_frames,
            heldout_ebn0_db: t.heldout_ebn0_db,
        })
    }

    /// Canonical serialization (no comments).
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<canonical>", e))
    }

    /// Hash of everything that can change results; the output directory is excluded.
    pub fn hash(&self) -> Result<String> {
        let c = Self {
            output_dir: String::new(),
            ..self.clone()
        };
        Ok(short_hash(c.canonical()?.as_bytes()))
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_resolves_targets() {
        let r = ResolvedConfig::builtin("120ghz_p55_a45").unwrap();
        assert_eq!(r.config.constraints.papr_target_db, 5.5);
        assert_eq!(r.config.constraints.aclr_target_db, -45.0);
        assert_eq!(r.config.waveform.rolloff, 0.3);
        assert_eq!(r.config.waveform.rpn_per_group, 1);
        let st = r.config.train_config().unwrap();
        let lin = crate::trainer::LagrangianState::new(st.papr_target_db, st.aclr_target_db, 0.3, 1.0, 2.0).unwrap();
        assert!((lin.eps_p - 10f64.powf(0.55)).abs() < 1e-12);

        let r = ResolvedConfig::builtin("220ghz_p60_a55_b25").unwrap();
        assert_eq!(r.config.carrier_ghz, 220.0);
        assert_eq!(r.config.waveform.rolloff, 0.25);
        assert_eq!(r.config.waveform.rpn_per_group, 4);
        assert_eq!(r.config.constraints.aclr_target_db, -55.0);
        assert_eq!(r.source_of("constraints.aclr_target_db"), Some(&Source::Preset("220ghz_p60_a55_b25".into())));
    }

    #[test]
    fn every_listed_preset_resolves() {
        for name in preset_names() {
            ResolvedConfig::builtin(&name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(ResolvedConfig::builtin("120ghz_p70_a45").is_err());
    }

    #[test]
    fn missing_field_reports_default_source() {
        let r = ResolvedConfig::from_toml("seed = 9\n[trainer]\nbatch_size = 4\n", None).unwrap();
        assert_eq!(r.config.seed, 9);
        assert_eq!(r.source_of("seed"), Some(&Source::File));
        assert_eq!(r.source_of("trainer.batch_size"), Some(&Source::File));
        assert_eq!(r.source_of("trainer.inner_steps"), Some(&Source::Default));
        let echo = r.echo().unwrap();
        assert!(echo.contains("inner_steps = 500  # default"), "{echo}");
        assert!(echo.contains("batch_size = 4  # file"));
        // the echo is itself a valid config that resolves to the same values
        let again = ResolvedConfig::from_toml(&echo, None).unwrap();
        assert_eq!(again.config, r.config);
    }

    #[test]
    fn field_path_in_errors() {
        let e = ResolvedConfig::from_toml("[trainer]\nbatch_size = \"ten\"\n", None).unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, "trainer.batch_size"),
            other => panic!("{other}"),
        }
        let e = ResolvedConfig::from_toml("[waveform]\nrollof = 0.3\n", None).unwrap_err();
        assert!(e.to_string().contains("rollof"), "{e}");
        let e = ResolvedConfig::from_toml("[phase_noise.rx]\nmodel = \"rx-ue2\"\n", None).unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, "phase_noise.rx.model"),
            other => panic!("{other}"),
        }
        let e = ResolvedConfig::from_toml("[trainer]\nebn0_lo_db = 20.0\n", None).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
    }

    #[test]
    fn parameter_table_override() {
        let text = "[phase_noise.rx]\nmodel = \"rx-ue1\"\n[phase_noise.rx.composite]\nlbw = 1e6\n";
        // a partial table is an error: every component must be given
        assert!(ResolvedConfig::from_toml(text, None).is_err());
        let mut c = ExperimentConfig::default();
        c.phase_noise.rx.composite = Some(crate::phase_noise::CompositeLogPsd::rx_ue1(0.0));
        let text = toml::to_string(&c).unwrap();
        let r = ResolvedConfig::from_toml(&text, None).unwrap();
        assert_eq!(r.config, c);
        assert_eq!(r.source_of("phase_noise.rx.composite.lbw"), Some(&Source::File));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ResolvedConfig::from_toml("seed = 1\n", None).unwrap();
        let b = ResolvedConfig::from_toml("", None).unwrap();
        let c = ResolvedConfig::from_toml("seed = 2\n", None).unwrap();
        assert_eq!(a.config.hash().unwrap(), b.config.hash().unwrap());
        assert_ne!(a.config.hash().unwrap(), c.config.hash().unwrap());
        assert_eq!(a.config.hash().unwrap().len(), 16);
        let d = ResolvedConfig::from_toml("output_dir = \"elsewhere\"\n", None).unwrap();
        assert_eq!(a.config.hash().unwrap(), d.config.hash().unwrap());
        let mut over = toml::Table::new();
        over.insert("seed".into(), toml::Value::Integer(2));
        let e = ResolvedConfig::resolve("seed = 1\n", None, &over).unwrap();
        assert_eq!(e.config.hash().unwrap(), c.config.hash().unwrap());
        assert_eq!(e.source_of("seed"), Some(&Source::Override));
    }
}
