//! Experiment driver for the frequency-modulated quantum Rabi model: config
//! resolution, experiment runners and artifact output on top of
//! `fmqrm-core`.

pub mod config;
pub mod experiments;
pub mod output;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use config::{apply_overrides, parse_assignment, parse_bool, Entry, Origin, RawConfig};
use experiments::{Experiment, RunContext};
use output::Artifacts;

/// Everything the command line can say about a run.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub experiment: Option<String>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub long_run: bool,
    pub preset: Option<String>,
    pub fock_cutoff: Option<usize>,
    pub seed: Option<u64>,
    /// `key=value` strings from `--set`, in order.
    pub sets: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Resolved {
    pub context: RunContext,
    pub output_dir: PathBuf,
}

/// Applies preset defaults, then the config file, then `--set`, then the
/// dedicated flags.
pub fn resolve(inv: &Invocation) -> Result<Resolved> {
    let raw = match &inv.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let run_value = |key: &str| raw.run.get(key);

    let preset = inv.preset.clone().or_else(|| run_value("preset").map(|e| e.value.clone()));
    let experiment = match (&inv.experiment, run_value("experiment")) {
        (Some(name), _) => parse_experiment(name, "command line")?,
        (None, Some(e)) => parse_experiment(&e.value, &e.origin.to_string())?,
        (None, None) => match &preset {
            Some(p) => Experiment::for_preset(p).ok_or_else(|| anyhow!("unknown preset `{p}`"))?,
            None => bail!("no experiment given: name a subcommand, a preset, or `experiment` in [run]"),
        },
    };
    let preset = preset.unwrap_or_else(|| experiment.presets()[0].to_string());

    let long_run = inv.long_run
        || match run_value("long_run") {
            Some(e) => parse_bool(&e.value).with_context(|| format!("{}: key `long_run`", e.origin))?,
            None => false,
        };
    let seed = match (inv.seed, run_value("seed")) {
        (Some(s), _) => s,
        (None, Some(e)) => e.value.parse().map_err(|_| anyhow!("{}: key `seed`: `{}` is not an integer", e.origin, e.value))?,
        (None, None) => 0,
    };

    let mut overrides: BTreeMap<String, Entry> = raw.params.clone();
    for s in &inv.sets {
        let (k, v) = parse_assignment(s)?;
        overrides.insert(k, Entry { value: v, origin: Origin::Flag("--set") });
    }
    if let Some(n) = inv.fock_cutoff {
        overrides.insert("fock_cutoff".into(), Entry { value: n.to_string(), origin: Origin::Flag("--fock-cutoff") });
    }
    let schema = experiment.schema(&preset);
    let defaults = experiment.defaults(&preset, long_run)?;
    let params = apply_overrides(&schema, defaults, &overrides, &format!("{} (preset {preset})", experiment.name()))?;

    let output_dir = match (&inv.out, run_value("output_dir")) {
        (Some(d), _) => d.clone(),
        (None, Some(e)) => {
            // relative paths in a config file are relative to the file
            let base = inv.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
            base.join(&e.value)
        }
        (None, None) => PathBuf::from("fmqrm-out").join(format!("{}-{preset}", experiment.name())),
    };
    Ok(Resolved { context: RunContext { experiment, preset, params, long_run, seed }, output_dir })
}

fn parse_experiment(name: &str, origin: &str) -> Result<Experiment> {
    Experiment::parse(name).ok_or_else(|| {
        let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        anyhow!("{origin}: unknown experiment `{name}` (expected one of {})", known.join(", "))
    })
}

/// The config file that reproduces `ctx` exactly. The output directory is
/// left out so the echo is independent of where it was written.
pub fn resolved_config_text(ctx: &RunContext) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "experiment = {}", ctx.experiment.name());
    let _ = writeln!(s, "preset = {}", ctx.preset);
    let _ = writeln!(s, "long_run = {}", ctx.long_run);
    let _ = writeln!(s, "seed = {}", ctx.seed);
    let _ = writeln!(s);
    let _ = writeln!(s, "[params]");
    let schema = ctx.experiment.schema(&ctx.preset);
    for (key, value) in ctx.params.iter() {
        if let Some(spec) = schema.iter().find(|p| p.key == key) {
            let unit = if spec.unit.is_empty() { String::new() } else { format!(" [{}]", spec.unit) };
            let _ = writeln!(s, "# {}{unit}", spec.help);
        }
        let _ = writeln!(s, "{key} = {value}");
    }
    s
}

pub struct RunReport {
    pub artifacts: Artifacts,
    pub files: Vec<PathBuf>,
}

/// Runs the experiment and writes its artifacts.
pub fn execute(resolved: &Resolved) -> Result<RunReport> {
    let ctx = &resolved.context;
    let artifacts = ctx.experiment.run(ctx).with_context(|| format!("running {}", ctx.experiment.name()))?;
    let files = output::write_all(&resolved.output_dir, &resolved_config_text(ctx), &artifacts)?;
    Ok(RunReport { artifacts, files })
}

/// Text printed by `--list`.
pub fn listing() -> String {
    let mut s = String::from("experiments:\n");
    for e in Experiment::ALL {
        let _ = writeln!(s, "  {:<18} {} (presets: {})", e.name(), e.description(), e.presets().join(", "));
    }
    s.push_str("presets:\n");
    for name in fmqrm_core::presets::NAMES {
        let runs = Experiment::for_preset(name).map_or("", |e| e.name());
        let _ = writeln!(s, "  {:<18} {} (default experiment: {runs})", name, fmqrm_core::presets::describe(name).unwrap_or(""));
    }
    s
}
