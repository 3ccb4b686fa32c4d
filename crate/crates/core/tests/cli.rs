//! End-to-end checks of the `wavelab` binary.

use std::path::Path;
use std::process::{Command, Output};

use wavelab::config::ResolvedConfig;
use wavelab::trainer::Trainer;
use wavelab::waveform::WaveformBundle;

fn wavelab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = wavelab(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn export_baseline_equals_iteration_zero_bundle() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["export-baseline", "--constellation", "apsk64", "--filter", "rrc", "--beta", "0.3", "--file", "b.json"],
    );
    let exported = WaveformBundle::load(&dir.path().join("b.json")).unwrap();

    let rc = ResolvedConfig::from_toml("[waveform]\nconstellation = \"apsk64\"\n", None).unwrap();
    let trainer = Trainer::new(rc.config.train_config().unwrap()).unwrap();
    let initial = trainer.bundle().unwrap();
    let prov = exported.provenance.clone().unwrap();
    assert_eq!(prov.config_hash, rc.config.hash().unwrap());
    assert_eq!(WaveformBundle { provenance: None, ..exported }, initial);
}

#[test]
fn psd_scales_with_carrier() {
    let dir = tempfile::tempdir().unwrap();
    let args = |fc: &str| {
        ok(
            dir.path(),
            &["psd", "--model", "tx-lmx2595", "--fc", fc, "--f-min", "1e4", "--f-max", "1e9", "--per-decade", "5"],
        )
    };
    let hi = csv_rows(&args("220e9"));
    let reference = csv_rows(&args("20e9"));
    assert_eq!(hi.len(), 26);
    for (a, b) in hi.iter().zip(&reference) {
        assert_eq!(a[0], b[0]);
        assert!((a[1] - b[1] - 20.0 * 11f64.log10()).abs() < 1e-9);
    }
}

#[test]
fn gen_pn_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        ok(dir.path(), &["gen-pn", "--samples", "1024", "--seed", seed, "--out", name]);
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv", "3");
    assert_eq!(a, run("b.csv", "3"));
    assert_ne!(a, run("c.csv", "4"));
    assert!(String::from_utf8(a).unwrap().starts_with("# config_hash="));
}

#[test]
fn papr_and_aclr_reports() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["papr", "--constellation", "qam16", "--bits", "4", "--frames", "4", "--out", "p.csv"]);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let rows = csv_rows(&text);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]), "CCDF must be nonincreasing");
    assert!(text.contains("# papr_db@1e-3="));

    let out = ok(dir.path(), &["aclr"]);
    let row = &csv_rows(&out)[0];
    assert_eq!(row[1], 129.0);
    assert!((row[2] - -55.1457).abs() < 1e-3);
}

#[test]
fn train_eval_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("exp.toml"), "[trainer]\nouter_iterations = 1\ninner_steps = 5\n[eval]\nframes = 4\nebn0_db = [6.0]\n").unwrap();
    ok(d, &["train", "--config", "exp.toml", "--scenario", "desk_k2", "--out", "r"]);
    let echo = std::fs::read_to_string(d.join("r/resolved_config.toml")).unwrap();
    assert!(echo.contains("inner_steps = 5  # file"));
    assert!(echo.contains("batch_size = 10  # default"));
    assert!(echo.contains("bits_per_symbol = 2  # preset desk_k2"));
    let log = std::fs::read_to_string(d.join("r/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    ok(d, &["eval", "--config", "exp.toml", "--scenario", "desk_k2", "--out", "r", "--bundle", "r/bundle.json"]);
    let link = std::fs::read_to_string(d.join("r/link.csv")).unwrap();
    assert!(link.contains("ebn0_db,ber,bler,se_bits_s_hz,papr_db@1e-3,aclr_db,obw"));
    let ccdf = csv_rows(&std::fs::read_to_string(d.join("r/ccdf.csv")).unwrap());
    assert!(ccdf.windows(2).all(|w| w[1][1] <= w[0][1]));

    // resuming a finished run is a no-op that rewrites the same bundle
    let before = std::fs::read(d.join("r/bundle.json")).unwrap();
    ok(d, &["train", "--config", "exp.toml", "--scenario", "desk_k2", "--out", "r", "--resume", "r/checkpoint.json"]);
    assert_eq!(before, std::fs::read(d.join("r/bundle.json")).unwrap());

    // K mismatch between bundle and config
    let out = wavelab(d, &["eval", "--scenario", "desk_k4", "--out", "x", "--bundle", "r/bundle.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[mismatch]"));

    // resume under a different config
    let out = wavelab(d, &["train", "--scenario", "desk_k4", "--out", "y", "--resume", "r/checkpoint.json"]);
    assert_eq!(out.status.code(), Some(4));

    // parse error with field path
    std::fs::write(d.join("bad.toml"), "[trainer]\nbatch_size = -3\n").unwrap();
    let out = wavelab(d, &["train", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[config]") && err.contains("trainer.batch_size"), "{err}");
}
