use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fmqrm::output::{verify_manifest, MANIFEST, RESOLVED_CONFIG};
use fmqrm::{resolve, Invocation};

fn fmqrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmqrm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_parameter_names_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", "[run]\nexperiment = crossing\n\n[params]\nbogus = 3\n");
    let o = fmqrm(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("a.cfg:5"), "{err}");
    assert!(err.contains("`bogus`"), "{err}");
}

#[test]
fn unknown_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.cfg", "[run]\nexperiment = warp\n");
    let o = fmqrm(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b.cfg:2"));
    assert!(stderr(&o).contains("`warp`"));

    let o = fmqrm(&["crossing", "--set", "lambda=0.02"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--set"));
}

#[test]
fn malformed_config_lines_are_located() {
    let dir = tempfile::tempdir().unwrap();
    for (text, line) in [
        ("x = 1\n", ":1"),
        ("[run]\nexperiment = crossing\n[extras]\n", ":3"),
        ("[params]\nx = 0.1\nx = 0.2\n", ":3"),
    ] {
        let cfg = write_config(dir.path(), "m.cfg", text);
        let o = fmqrm(&["crossing", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(&format!("m.cfg{line}")), "{text}: {}", stderr(&o));
    }
}

#[test]
fn list_names_every_experiment() {
    let o = fmqrm(&["--list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["spectrum", "crossing", "dynamics", "fidelity-sweep", "splitting-compare", "flux", "circuit-map", "three-level", "selftest"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn runs_are_byte_identical_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for out in [&a, &b] {
        let o = fmqrm(&["crossing", "--set", "x=0.4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let manifest_a = fs::read(a.join(MANIFEST)).unwrap();
    assert_eq!(manifest_a, fs::read(b.join(MANIFEST)).unwrap());
    assert!(verify_manifest(&a).unwrap().is_empty());

    let replay = a.join(RESOLVED_CONFIG);
    let o = fmqrm(&["--config", replay.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest_a, fs::read(c.join(MANIFEST)).unwrap());
}

#[test]
fn manifest_detects_edits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(fmqrm(&["circuit-map", "--out", out.to_str().unwrap()]).status.success());
    assert!(verify_manifest(&out).unwrap().is_empty());
    fs::write(out.join("circuit.csv"), "edited\n").unwrap();
    assert_eq!(verify_manifest(&out).unwrap(), vec!["circuit.csv".to_string()]);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = fmqrm(&["selftest", "--seed", "11", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn flag_beats_file_beats_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.cfg", "[run]\nexperiment = crossing\noutput_dir = here\n\n[params]\nx = 0.3\n");
    let x_of = |inv: &Invocation| resolve(inv).unwrap().context.params.f64("x");

    let preset_only = Invocation { experiment: Some("crossing".into()), ..Default::default() };
    assert_eq!(x_of(&preset_only), 0.5);

    let from_file = Invocation { config: Some(cfg.clone().into()), ..Default::default() };
    assert_eq!(x_of(&from_file), 0.3);
    assert_eq!(resolve(&from_file).unwrap().output_dir, dir.path().join("here"));

    let flagged = Invocation { sets: vec!["x=0.45".into()], ..from_file.clone() };
    assert_eq!(x_of(&flagged), 0.45);

    let cutoff = Invocation { fock_cutoff: Some(20), sets: vec!["fock_cutoff=10".into()], ..from_file };
    assert_eq!(resolve(&cutoff).unwrap().context.params.usize("fock_cutoff"), 20);
}

#[test]
fn subcommand_beats_config_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.cfg", "[run]\nexperiment = crossing\n");
    let inv = Invocation { experiment: Some("circuit-map".into()), config: Some(cfg.into()), ..Default::default() };
    assert_eq!(resolve(&inv).unwrap().context.experiment.name(), "circuit-map");
    let by_preset = Invocation { preset: Some("fig7".into()), ..Default::default() };
    assert_eq!(resolve(&by_preset).unwrap().context.experiment.name(), "splitting-compare");
}
