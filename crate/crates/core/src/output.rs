//! Output artifacts. Every file carries the run configuration, its SHA-256
//! and the master seed, so a result can be traced back to the exact run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::anomaly::{probe_name, AnomalyReport, Probe};
use crate::decomposition::{Fingerprint2D, RegionPeakTable};
use crate::shape::{Envelope, PeakShape, WeightedHistogram};
use crate::spectral::{AmplitudeSpectrum, Spectrogram, SpectrumEnvelope};
use crate::{Error, Result};

/// Lowercase hex SHA-256 of the compact JSON form of `config`.
pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHeader {
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
}

impl RunHeader {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> Result<Self> {
        Ok(RunHeader {
            config: serde_json::to_value(config)?,
            config_hash: config_hash(config)?,
            seed,
        })
    }
}

/// `{config, config_hash, seed, result}` as pretty JSON with a final newline.
pub fn json_document<T: Serialize>(header: &RunHeader, result: &T) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        config: &'a serde_json::Value,
        config_hash: &'a str,
        seed: u64,
        result: &'a T,
    }
    let mut out = serde_json::to_vec_pretty(&Doc {
        config: &header.config,
        config_hash: &header.config_hash,
        seed: header.seed,
        result,
    })?;
    out.push(b'\n');
    Ok(out)
}

/// Column-oriented table rendered as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal; empty for absent values.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Comment lines with the run header, then the CSV body.
pub fn csv_document(header: &RunHeader, table: &Table) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(format!("# config_hash: {}\n# seed: {}\n", header.config_hash, header.seed).as_bytes());
    out.extend_from_slice(format!("# config: {}\n", serde_json::to_string(&header.config)?).as_bytes());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn anomaly_summary_table(reports: &[AnomalyReport]) -> Table {
    let mut t = Table::new([
        "label",
        "statistic",
        "window",
        "model",
        "iterations",
        "n_stations",
        "empirical",
        "mc_mean",
        "mc_sd",
        "mc_min",
        "mc_median",
        "mc_max",
        "level_low",
        "level_high",
        "percentile_low",
        "percentile_high",
        "z_score",
        "anomaly_size",
        "p_value",
        "p_value_is_bound",
    ]);
    for r in reports {
        t.push(vec![
            r.label.clone(),
            probe_name(&Probe::new(r.statistic, r.window)),
            r.window.to_string(),
            r.model.to_string(),
            r.iterations.to_string(),
            r.n_stations.to_string(),
            num(r.empirical),
            num(r.mc_mean),
            num(r.mc_sd),
            num(r.mc_min),
            num(r.mc_median),
            num(r.mc_max),
            num(r.percentile_levels.0),
            num(r.percentile_levels.1),
            num(r.percentile_interval.0),
            num(r.percentile_interval.1),
            opt(r.z_score),
            num(r.anomaly_size),
            num(r.p_value.value),
            r.p_value.below_resolution.to_string(),
        ]);
    }
    t
}

/// One row per iteration, one column per report.
pub fn mc_samples_table(reports: &[AnomalyReport]) -> Table {
    let mut t = Table::new(
        std::iter::once("iteration".to_string())
            .chain(reports.iter().map(|r| format!("{}:{}", r.label, probe_name(&Probe::new(r.statistic, r.window))))),
    );
    let n = reports.iter().map(|r| r.mc_samples.len()).max().unwrap_or(0);
    for i in 0..n {
        let mut row = vec![i.to_string()];
        row.extend(reports.iter().map(|r| r.mc_samples.get(i).copied().map(num).unwrap_or_default()));
        t.push(row);
    }
    t
}

/// Bin centers, the empirical weights and, if given, the envelope columns.
pub fn histogram_table(hist: &WeightedHistogram, envelope: Option<&Envelope>) -> Table {
    let mut cols = vec!["center", "empirical"];
    if envelope.is_some() {
        cols.extend(["mc_mean", "mc_low", "mc_high"]);
    }
    let mut t = Table::new(cols);
    for (i, w) in hist.weights.iter().enumerate() {
        let mut row = vec![num(hist.grid.center(i)), num(*w)];
        if let Some(e) = envelope {
            row.extend([num(e.mean[i]), num(e.low[i]), num(e.high[i])]);
        }
        t.push(row);
    }
    t
}

pub fn peak_shape_table(shape: &PeakShape) -> Table {
    let mut t = Table::new(["offset", "mean_excess"]);
    for (o, e) in shape.offsets.iter().zip(&shape.mean_excess) {
        t.push(vec![num(*o), num(*e)]);
    }
    t
}

pub fn spectrum_table(spectrum: &AmplitudeSpectrum, envelope: Option<&SpectrumEnvelope>) -> Table {
    let mut cols = vec!["frequency", "amplitude"];
    if envelope.is_some() {
        cols.extend(["mc_mean", "mc_low", "mc_high"]);
    }
    let mut t = Table::new(cols);
    for (k, (f, a)) in spectrum.frequencies.iter().zip(&spectrum.amplitudes).enumerate() {
        let mut row = vec![num(*f), num(*a)];
        if let Some(e) = envelope {
            row.extend([num(e.mean[k]), num(e.low[k]), num(e.high[k])]);
        }
        t.push(row);
    }
    t
}

/// Long format: one row per (window center, frequency).
pub fn spectrogram_table(sg: &Spectrogram) -> Table {
    let mut t = Table::new(["center", "frequency", "relative_amplitude"]);
    for (c, row) in sg.centers.iter().zip(&sg.values) {
        for (f, v) in sg.frequencies.iter().zip(row) {
            t.push(vec![num(*c), num(*f), opt(*v)]);
        }
    }
    t
}

pub fn region_peaks_table(table: &RegionPeakTable) -> Table {
    let mut t = Table::new(["label", "region_code", "n_stations", "peak_amplitude", "peak_metric", "peak_percent"]);
    for r in &table.rows {
        t.push(vec![
            r.label.clone(),
            r.region_code.clone(),
            r.n_stations.to_string(),
            opt(r.peak_amplitude),
            r.peak_location.as_ref().map(|l| l.metric.to_string()).unwrap_or_default(),
            opt(r.peak_location.as_ref().map(|l| l.percent)),
        ]);
    }
    t
}

pub fn region_ranking_table(table: &RegionPeakTable) -> Table {
    let mut t = Table::new(["rank", "region_code", "max_amplitude", "label", "peak_metric", "peak_percent"]);
    for (i, r) in table.ranking.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            r.region_code.clone(),
            opt(r.max_amplitude),
            r.label.clone().unwrap_or_default(),
            r.location.as_ref().map(|l| l.metric.to_string()).unwrap_or_default(),
            opt(r.location.as_ref().map(|l| l.percent)),
        ]);
    }
    t
}

/// Non-empty cells only, by lower cell edges.
pub fn fingerprint_table(fp: &Fingerprint2D) -> Table {
    let mut t = Table::new(["turnout_low", "result_low", "registered"]);
    let n = fp.cells_per_axis;
    for i in 0..n {
        for j in 0..n {
            let w = fp.weight(i, j);
            if w > 0 {
                t.push(vec![
                    num(i as f64 * Fingerprint2D::CELL_WIDTH),
                    num(j as f64 * Fingerprint2D::CELL_WIDTH),
                    w.to_string(),
                ]);
            }
        }
    }
    t
}

/// Named files produced by a run, held in memory until the run succeeds.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file under `dir`. If any write fails, files written so
    /// far are removed.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(&path);
                return Err(Error::io(path, e));
            }
            written.push(path);
        }
        Ok(written)
    }
}
