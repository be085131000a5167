use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// One pass/fail invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    /// Extra settings that are not part of a config (self-test options).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub settings: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, config: Option<ExperimentConfig>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            experiment: experiment.into(),
            seed,
            settings: BTreeMap::new(),
            config,
        }
    }
}

/// Everything an experiment emits. Contents are deterministic: no
/// timestamps, no timings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub name: String,
    pub manifest: Manifest,
    /// file name -> CSV text
    pub tables: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl ReportBundle {
    pub fn new(name: &str, manifest: Manifest) -> Self {
        Self {
            name: name.into(),
            manifest,
            tables: BTreeMap::new(),
            notes: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn table(&mut self, file: &str, csv: impl Into<String>) {
        self.tables.insert(file.into(), csv.into());
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} | {} | seed {}",
            self.manifest.tool, self.manifest.version, self.manifest.experiment, self.manifest.seed
        );
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let _ = writeln!(
            s,
            "{}",
            if self.all_passed() {
                "all checks passed"
            } else {
                "some checks FAILED"
            }
        );
        s
    }

    /// Bundle contents by file name, `SHA256SUMS` excluded.
    pub fn files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut f = BTreeMap::new();
        let manifest = toml::to_string(&self.manifest).expect("manifest serializes");
        f.insert("manifest.toml".to_string(), manifest.into_bytes());
        f.insert("summary.txt".to_string(), self.summary().into_bytes());
        for (k, v) in &self.tables {
            f.insert(k.clone(), v.clone().into_bytes());
        }
        f
    }

    fn sums(files: &BTreeMap<String, Vec<u8>>) -> String {
        files
            .iter()
            .map(|(k, v)| format!("{}  {k}\n", hex::encode(Sha256::digest(v))))
            .collect()
    }

    /// SHA-256 of the `SHA256SUMS` listing.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(Self::sums(&self.files()).as_bytes()))
    }

    /// Writes `<root>/<name>` through a temporary sibling inside `root`
    /// and one rename, replacing an older bundle of the same name.
    pub fn write(&self, root: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(root)?;
        let target = root.join(&self.name);
        let tmp = root.join(format!(".{}.partial-{}", self.name, std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        let files = self.files();
        for (k, v) in &files {
            fs::write(tmp.join(k), v)?;
        }
        fs::write(tmp.join("SHA256SUMS"), Self::sums(&files))?;
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(&tmp, &target)?;
        Ok(target)
    }
}

/// CSV text from a writer callback of fracvolt-core.
pub fn csv_text(
    f: impl FnOnce(&mut Vec<u8>) -> fracvolt_core::Result<()>,
) -> fracvolt_core::Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// CSV table assembled row by row.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("write to memory");
        Self { w }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.w.write_record(cells).expect("write to memory");
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}

/// Round-trip float formatting used in every table.
pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}
