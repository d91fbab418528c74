//! Run artifacts: CSV tables with a fixed dialect (comma, dot decimal,
//! header row, LF endings), a manifest with content hashes, and the
//! machine-readable verdict lines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Canonical float rendering: shortest round-trip decimal, dot separator.
/// Identical bit patterns always print identically, which is what the
/// byte-reproducibility contract rests on.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "ragged row in {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    /// Acceptance item this line covers, e.g. "4.rate".
    pub criterion: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: &str, pass: bool, detail: String) -> Self {
        Verdict {
            criterion: criterion.to_string(),
            pass,
            detail,
        }
    }

    /// One greppable line per covered acceptance item.
    pub fn line(&self) -> String {
        format!(
            "verdict criterion={} status={} detail={}",
            self.criterion,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

#[derive(Debug)]
pub struct RunArtifact {
    pub out_dir: PathBuf,
    pub verdicts: Vec<Verdict>,
    /// (file name, sha256 of contents) per written CSV.
    pub csv_hashes: Vec<(String, String)>,
}

impl RunArtifact {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_csv(dir: &Path, table: &Table) -> Result<(PathBuf, String)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.csv", table.name));
    let body = table.to_csv();
    let mut file = fs::File::create(&path)?;
    file.write_all(body.as_bytes())?;
    Ok((path, sha256_hex(body.as_bytes())))
}

/// Verdicts as a CSV table, so the summary is itself a stable artifact.
pub fn verdict_table(verdicts: &[Verdict]) -> Table {
    let mut t = Table::new("verdicts", &["criterion", "status", "detail"]);
    for v in verdicts {
        t.push(vec![
            v.criterion.clone(),
            if v.pass { "PASS" } else { "FAIL" }.to_string(),
            v.detail.clone(),
        ]);
    }
    t
}

pub fn write_manifest(
    dir: &Path,
    scenario: &str,
    config_text: &str,
    csv_hashes: &[(String, String)],
    wall_seconds: f64,
    all_pass: bool,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut doc = toml::Table::new();
    let mut run = toml::Table::new();
    run.insert("scenario".into(), scenario.into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("wall_seconds".into(), wall_seconds.into());
    run.insert("all_pass".into(), all_pass.into());
    doc.insert("run".into(), toml::Value::Table(run));

    let mut inputs = toml::Table::new();
    inputs.insert("config_sha256".into(), sha256_hex(config_text.as_bytes()).into());
    inputs.insert("config".into(), config_text.into());
    doc.insert("inputs".into(), toml::Value::Table(inputs));

    let mut outputs = toml::Table::new();
    for (name, hash) in csv_hashes {
        outputs.insert(name.clone(), hash.clone().into());
    }
    doc.insert("outputs".into(), toml::Value::Table(outputs));

    let text = toml::to_string(&toml::Value::Table(doc))
        .map_err(|e| Error::InvalidParameter(format!("manifest serialization failed: {e}")))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_dialect_is_comma_dot_header_lf() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![fmt_f64(1.5), fmt_f64(-0.25)]);
        t.push(vec![fmt_f64(1e-9), "x".to_string()]);
        let body = t.to_csv();
        assert_eq!(body, "a,b\n1.5,-0.25\n0.000000001,x\n");
        assert!(!body.contains('\r'));
    }

    #[test]
    fn float_rendering_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn hashes_are_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
