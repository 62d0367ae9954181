//! Flat `key = value` configuration files with `[run]` and `[params]`
//! sections.
//!
//! ```text
//! # comment
//! [run]
//! experiment = crossing
//! preset = fig3
//!
//! [params]
//! lambdas = 0.01, 0.03
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

/// Keys accepted in the `[run]` section.
pub const RUN_KEYS: [&str; 5] = ["experiment", "preset", "output_dir", "long_run", "seed"];

/// A raw value with the place it came from, for diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Flag(&'static str),
    Preset,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{}", path.display(), line),
            Origin::Flag(flag) => write!(f, "command-line {flag}"),
            Origin::Preset => write!(f, "preset default"),
        }
    }
}

/// Parsed but untyped configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub run: BTreeMap<String, Entry>,
    pub params: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let here = || format!("{}:{}", path.display(), line);
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("{}: malformed section header `{content}`", here()))?
                    .trim();
                section = Some(match name {
                    "run" => "run",
                    "params" => "params",
                    other => bail!("{}: unknown section [{other}] (expected [run] or [params])", here()),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| anyhow!("{}: expected `key = value`, got `{content}`", here()))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                bail!("{}: empty key", here());
            }
            let map = match section {
                Some("run") => {
                    if !RUN_KEYS.contains(&key) {
                        bail!("{}: unknown key `{key}` in [run] (expected one of {})", here(), RUN_KEYS.join(", "));
                    }
                    &mut cfg.run
                }
                Some(_) => &mut cfg.params,
                None => bail!("{}: key `{key}` outside of a section", here()),
            };
            let entry = Entry { value: value.to_string(), origin: Origin::File { path: path.to_path_buf(), line } };
            if let Some(prev) = map.insert(key.to_string(), entry) {
                bail!("{}: duplicate key `{key}` (first set at {})", here(), prev.origin);
            }
        }
        Ok(cfg)
    }
}

/// Splits a `--set key=value` argument.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got `{s}`"))?;
    let k = k.trim();
    if k.is_empty() {
        bail!("--set expects key=value, got `{s}`");
    }
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    /// Comma-separated floats.
    Floats,
    Text,
    Bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(usize),
    Floats(Vec<f64>),
    Text(String),
    Bool(bool),
}

impl Value {
    pub fn parse(kind: Kind, s: &str) -> Result<Self> {
        let float = |t: &str| -> Result<f64> {
            let v: f64 = t.trim().parse().map_err(|_| anyhow!("`{}` is not a number", t.trim()))?;
            if !v.is_finite() {
                bail!("`{}` is not finite", t.trim());
            }
            Ok(v)
        };
        Ok(match kind {
            Kind::Float => Value::Float(float(s)?),
            Kind::Int => Value::Int(s.trim().parse().map_err(|_| anyhow!("`{s}` is not a non-negative integer"))?),
            Kind::Floats => {
                let v = s.split(',').filter(|t| !t.trim().is_empty()).map(float).collect::<Result<Vec<_>>>()?;
                if v.is_empty() {
                    bail!("empty list");
                }
                Value::Floats(v)
            }
            Kind::Text => Value::Text(s.trim().to_string()),
            Kind::Bool => Value::Bool(parse_bool(s)?),
        })
    }
}

impl fmt::Display for Value {
    /// Round-trips through [`Value::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Floats(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", parts.join(", "))
            }
            Value::Text(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => bail!("`{other}` is not a boolean"),
    }
}

/// One parameter an experiment accepts.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub unit: &'static str,
    pub help: &'static str,
}

/// Fully resolved, typed parameters in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(&'static str, Value)>,
}

impl ParamSet {
    pub fn new(entries: Vec<(&'static str, Value)>) -> Self {
        Self { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Value)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    fn get(&self, key: &str) -> &Value {
        // keys come from the experiment's own schema, so a miss is a bug
        &self.entries.iter().find(|(k, _)| *k == key).unwrap_or_else(|| panic!("parameter `{key}` not in schema")).1
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("parameter `{key}` is {other:?}, not a number"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v,
            other => panic!("parameter `{key}` is {other:?}, not an integer"),
        }
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::Floats(v) => v.clone(),
            Value::Float(v) => vec![*v],
            other => panic!("parameter `{key}` is {other:?}, not a list"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(s) => s,
            other => panic!("parameter `{key}` is {other:?}, not text"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(b) => *b,
            other => panic!("parameter `{key}` is {other:?}, not a boolean"),
        }
    }
}

/// Checks overrides against `schema` and parses them into `defaults`.
pub fn apply_overrides(
    schema: &[ParamSpec],
    defaults: Vec<(&'static str, String)>,
    overrides: &BTreeMap<String, Entry>,
    context: &str,
) -> Result<ParamSet> {
    for (key, entry) in overrides {
        if !schema.iter().any(|s| s.key == key) {
            let known: Vec<&str> = schema.iter().map(|s| s.key).collect();
            bail!("{}: unknown key `{key}` for {context} (expected one of {})", entry.origin, known.join(", "));
        }
    }
    let mut entries = Vec::with_capacity(schema.len());
    for spec in schema {
        let (raw, origin) = match overrides.get(spec.key) {
            Some(e) => (e.value.clone(), e.origin.clone()),
            None => {
                let d = defaults
                    .iter()
                    .find(|(k, _)| *k == spec.key)
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| anyhow!("no default for `{}` in {context}", spec.key))?;
                (d, Origin::Preset)
            }
        };
        let value = Value::parse(spec.kind, &raw).with_context(|| format!("{origin}: key `{}`", spec.key))?;
        entries.push((spec.key, value));
    }
    Ok(ParamSet::new(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let text = "# top\n[run]\nexperiment = crossing # trailing\n\n[params]\nlambdas = 0.01, 0.02\n";
        let cfg = RawConfig::parse(text, Path::new("t.cfg")).unwrap();
        assert_eq!(cfg.run["experiment"].value, "crossing");
        assert_eq!(cfg.params["lambdas"].value, "0.01, 0.02");
        assert_eq!(cfg.params["lambdas"].origin, Origin::File { path: "t.cfg".into(), line: 6 });
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let err = RawConfig::parse("[run]\nexperimnt = x\n", Path::new("a.cfg")).unwrap_err().to_string();
        assert!(err.contains("a.cfg:2") && err.contains("experimnt"), "{err}");
        let err = RawConfig::parse("[params]\nx = 1\nx = 2\n", Path::new("a.cfg")).unwrap_err().to_string();
        assert!(err.contains("a.cfg:3") && err.contains("duplicate"), "{err}");
        let err = RawConfig::parse("lambda = 1\n", Path::new("a.cfg")).unwrap_err().to_string();
        assert!(err.contains("outside of a section"), "{err}");
        let err = RawConfig::parse("[other]\n", Path::new("a.cfg")).unwrap_err().to_string();
        assert!(err.contains("unknown section"), "{err}");
    }

    #[test]
    fn values_round_trip() {
        for (kind, s) in [(Kind::Float, "0.1"), (Kind::Floats, "0.005, 0.01, 1e-7"), (Kind::Int, "15"), (Kind::Bool, "true")] {
            let v = Value::parse(kind, s).unwrap();
            assert_eq!(Value::parse(kind, &v.to_string()).unwrap(), v);
        }
        assert!(Value::parse(Kind::Float, "nan").is_err());
        assert!(Value::parse(Kind::Int, "-3").is_err());
    }
}
