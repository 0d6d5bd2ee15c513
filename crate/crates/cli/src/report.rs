//! Report documents and file output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use contagion::asymptotics::RegimePrediction;
use contagion::stats::Check;
use serde::Serialize;

/// Test-report JSON written by `verify`, `oracle` and `identity`.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<u8>,
    pub seed: u64,
    pub steps: usize,
    pub replicates: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<RegimePrediction>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: u64, steps: usize, replicates: usize) -> Self {
        Self {
            command: command.to_string(),
            theorem: None,
            seed,
            steps,
            replicates,
            passed: true,
            checks: Vec::new(),
            prediction: None,
            notes: Vec::new(),
        }
    }

    pub fn check(&mut self, check: Check) {
        if !check.passed {
            log::warn!(
                "check {} failed: {:e} > {:e}",
                check.name,
                check.value,
                check.threshold
            );
        }
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn at_most(
        &mut self,
        name: impl Into<String>,
        value: f64,
        threshold: f64,
        n: Option<usize>,
    ) {
        self.check(Check::at_most(name, value, threshold, n));
    }

    pub fn print_summary(&self) {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        println!(
            "{}: {} ({} checks, {failed} failed)",
            self.command,
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len()
        );
    }
}

pub fn create_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn create_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path: PathBuf = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut out = create_file(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
