//! Artifact writing: CSV tables, the resolved-config echo, a plain-text
//! summary and a SHA-256 manifest of everything written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "MANIFEST";
pub const RESOLVED_CONFIG: &str = "resolved.cfg";
pub const SUMMARY: &str = "summary.txt";

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A column header: name plus unit, rendered as `name [unit]`.
pub struct Column {
    pub name: String,
    pub unit: &'static str,
}

pub fn col(name: impl Into<String>, unit: &'static str) -> Column {
    Column { name: name.into(), unit }
}

#[derive(Debug, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        let header = columns
            .into_iter()
            .map(|c| if c.unit.is_empty() { c.name } else { format!("{} [{}]", c.name, c.unit) })
            .collect();
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width does not match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

/// Everything an experiment produces, before it touches the disk.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub summary: String,
    /// Headline checks: `(label, passed)`. A failed check makes the run exit
    /// nonzero only when the experiment marks it as strict.
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    pub strict: bool,
}

impl Artifacts {
    pub fn table(&mut self, name: impl Into<String>, table: Table) {
        self.tables.push((name.into(), table));
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.summary.push_str(s.as_ref());
        self.summary.push('\n');
    }

    /// Records a check; its verdict also goes into the summary.
    pub fn check(&mut self, label: impl Into<String>, passed: bool, strict: bool) {
        let label = label.into();
        self.line(format!("[{}] {label}", if passed { "pass" } else { "FAIL" }));
        self.checks.push(Check { label, passed, strict });
    }

    pub fn strict_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.strict && !c.passed).collect()
    }
}

/// Writes tables, `resolved.cfg`, `summary.txt` and the manifest into `dir`.
/// Returns the paths written, manifest last.
pub fn write_all(dir: &Path, resolved_config: &str, artifacts: &Artifacts) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for (name, table) in &artifacts.tables {
        files.push((name.clone(), table.to_bytes().with_context(|| format!("formatting {name}"))?));
    }
    files.push((RESOLVED_CONFIG.to_string(), resolved_config.as_bytes().to_vec()));
    files.push((SUMMARY.to_string(), artifacts.summary.as_bytes().to_vec()));
    let mut names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) || names.contains(&MANIFEST) {
        bail!("duplicate or reserved output file name in {names:?}");
    }
    let mut written = Vec::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let manifest = manifest_text(files.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(written)
}

/// `sha256  name` lines sorted by name.
pub fn manifest_text<'a>(files: impl Iterator<Item = (&'a str, &'a [u8])>) -> String {
    let mut entries: Vec<(&str, String)> = files.map(|(n, b)| (n, hex(&Sha256::digest(b)))).collect();
    entries.sort_unstable();
    let mut out = String::new();
    for (name, digest) in entries {
        let _ = writeln!(out, "{digest}  {name}");
    }
    out
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Recomputes every digest listed in `dir/MANIFEST`; returns mismatching
/// file names.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let Some((digest, name)) = line.split_once("  ") else { bail!("malformed manifest line `{line}`") };
        let bytes = fs::read(dir.join(name)).with_context(|| format!("reading {name}"))?;
        if hex(&Sha256::digest(&bytes)) != digest {
            bad.push(name.to_string());
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(Cell::Num(0.1).render(), "1.0000000000000001e-1");
        let v = 0.333_515_300_86_f64;
        assert_eq!(Cell::Num(v).render().parse::<f64>().unwrap(), v);
    }

    #[test]
    fn header_names_units() {
        let mut t = Table::new(vec![col("t", "1/omega0"), col("label", "")]);
        t.push(vec![1.0.into(), "x".into()]);
        let s = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(s, "t [1/omega0],label\n1.0000000000000000e0,x\n");
    }

    #[test]
    fn manifest_is_sorted_and_known() {
        let m = manifest_text([("b", &b""[..]), ("a", &b"abc"[..])].into_iter());
        assert_eq!(
            m,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  a\n\
             e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  b\n"
        );
    }
}
