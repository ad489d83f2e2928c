//! Serialized run artifacts: metrics reports, fold plans, training logs and
//! the per-run manifest.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cvrnet_core::data::FoldPlan;
use cvrnet_core::eval::{render_confusion_csv, render_text};
use cvrnet_core::eval::MetricsReport;
use cvrnet_core::train::{EpochRecord, TrainReport};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{fs, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Pretty JSON with a trailing newline; parsing and re-rendering gives the
/// same bytes.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))
}

/// `csv` is the confusion grid alone, the input format of `metrics`.
pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => render_confusion_csv(&report.confusion),
    }
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let report: MetricsReport = from_json(&fs::read_text(path)?, path)?;
    if report.version != cvrnet_core::eval::REPORT_VERSION {
        return Err(Error::Mismatch(format!("{}: report version {}", path.display(), report.version)));
    }
    Ok(report)
}

pub fn write_plan(path: &Path, plan: &FoldPlan) -> Result<()> {
    fs::write_atomic(path, to_json(plan).as_bytes())
}

pub fn read_plan(path: &Path) -> Result<FoldPlan> {
    from_json(&fs::read_text(path)?, path)
}

/// One JSON object per epoch, then a summary line holding the best epoch.
pub fn train_report_jsonl(report: &TrainReport) -> String {
    #[derive(Serialize)]
    struct Best {
        best_epoch: usize,
        best_val_loss: f64,
    }
    let mut out = String::new();
    for e in &report.epochs {
        out.push_str(&serde_json::to_string(e).expect("record serializes"));
        out.push('\n');
    }
    let best = Best { best_epoch: report.best_epoch, best_val_loss: report.best_val_loss };
    out.push_str(&serde_json::to_string(&best).expect("summary serializes"));
    out.push('\n');
    out
}

pub fn parse_train_report_jsonl(text: &str, origin: &Path) -> Result<TrainReport> {
    #[derive(Deserialize)]
    struct Best {
        best_epoch: usize,
        best_val_loss: f64,
    }
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (last, records) = lines.split_last().ok_or_else(|| Error::format(origin, "empty training log"))?;
    let epochs = records.iter().map(|l| from_json::<EpochRecord>(l, origin)).collect::<Result<Vec<_>>>()?;
    let best: Best = from_json(last, origin)?;
    Ok(TrainReport { epochs, best_epoch: best.best_epoch, best_val_loss: best.best_val_loss })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub artifacts: Vec<ArtifactEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects the files a command writes under one output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    manifest: String,
    command: String,
    written: Vec<ArtifactEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        Self::create_named(root, command, MANIFEST_NAME)
    }

    /// Like [`OutputDir::create`] with a custom manifest file name.
    pub fn create_named(root: &Path, command: &str, manifest: &str) -> Result<Self> {
        fs::create_dir(root)?;
        Ok(OutputDir { root: root.to_path_buf(), manifest: manifest.into(), command: command.into(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write_atomic(&path, bytes)?;
        self.record(name, bytes);
        Ok(path)
    }

    /// Registers a file written by other means.
    pub fn record(&mut self, name: &str, bytes: &[u8]) {
        let sha256 = Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect();
        self.written.retain(|a| a.path != name);
        self.written.push(ArtifactEntry { path: name.into(), bytes: bytes.len() as u64, sha256 });
    }

    /// Writes the manifest listing every recorded artifact.
    pub fn finish(mut self) -> Result<Manifest> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { command: self.command, artifacts: self.written };
        fs::write_atomic(&self.root.join(&self.manifest), to_json(&manifest).as_bytes())?;
        Ok(manifest)
    }
}
