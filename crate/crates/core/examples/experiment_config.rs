//! Experiment configs: presets, per-field provenance, the resolved echo, and the
//! baseline bundle that training starts from.
//!
//! `cargo run --release --example experiment_config`

use wavelab::config::{preset_names, ResolvedConfig};
use wavelab::trainer::{bundle_from_params, initial_params};
use wavelab::waveform::WaveformBundle;

fn main() -> wavelab::Result<()> {
    println!("presets: {}", preset_names().join(" "));
    let text = "scenario = \"220ghz_p60_a55_b25\"\nseed = 7\n[trainer]\ninner_steps = 200\n";
    let rc = ResolvedConfig::from_toml(text, None)?;
    println!("\n{}", rc.echo()?);
    println!("config hash {}", rc.config.hash()?);

    let tc = rc.config.train_config()?;
    let bundle = bundle_from_params(&tc, &initial_params(&tc)?)?;
    let dir = std::env::temp_dir().join("wavelab-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("baseline.json");
    bundle.save(&path)?;
    let back = WaveformBundle::load(&path)?;
    println!(
        "baseline bundle K = {}, {} taps, rolloff {}, round trip exact: {}",
        back.k,
        back.tx_taps.len(),
        back.rolloff,
        back == bundle
    );
    Ok(())
}
