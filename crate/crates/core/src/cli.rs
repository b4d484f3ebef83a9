//! `heaping` command line. Each subcommand loads its inputs, runs one
//! analysis and writes CSV/JSON/SVG artifacts stamped with the run config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or schema error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::anomaly::{standard_probes, AnomalyReport, CenterKind, NullConfig, StatisticDef};
use crate::decomposition::{
    exclude_regions, fingerprint, region_peaks, restrict_regions, CandidateSet, CorrelationWeighting,
};
use crate::ingest::{load_dataset, load_reference_totals, verify_subtotals, write_canonical_tsv, CountryProfile};
use crate::model::{apply_filters, ElectionDataset, FilterPolicy, Metric};
use crate::output::{self, csv_document, json_document, Artifacts, RunHeader, Table};
use crate::render::{self, Band, Series};
use crate::sampling::NullModel;
use crate::shape::{average_histograms, build_histogram, peak_shape, simulate_histograms, BinGrid, HistogramOptions, SimulatedHistograms, WeightedHistogram};
use crate::spectral::{amplitude_spectrum, spectrogram, spectrum_envelope, SpectrogramConfig};
use crate::synth::{self, FraudSpec, GeneratorConfig, Mechanism, Palette, ProbabilityField, SizeDistribution, TargetSide};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "heaping", version, about = "Integer-percentage anomalies in polling-station election data")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load inputs, report row counts and optional subtotal discrepancies.
    Validate(ValidateArgs),
    /// Integer-station statistic against its Monte Carlo null.
    Analyze(AnalyzeArgs),
    /// Voter-weighted histograms with simulation envelopes and peak shape.
    Histogram(HistogramArgs),
    /// Amplitude spectra and normalized spectrograms of the histograms.
    Spectrum(HistogramArgs),
    /// Per-region integer peak amplitudes and ranking.
    Regions(RegionsArgs),
    /// 2D turnout/result histograms.
    Fingerprint(FingerprintArgs),
    /// Synthetic election with optional fraud, written as canonical TSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input file; repeat for several elections.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    /// Built-in profile name or path to a profile TOML.
    #[arg(long, default_value = "canonical")]
    pub profile: String,
    /// Comma-separated region codes to drop.
    #[arg(long, value_delimiter = ',')]
    pub exclude_regions: Vec<String>,
    /// Comma-separated region codes to keep.
    #[arg(long, value_delimiter = ',')]
    pub restrict_regions: Vec<String>,
    #[arg(long)]
    pub min_registered: Option<u64>,
    #[arg(long)]
    pub max_percentage: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    /// binomial, beta-binomial or clustered:<c>
    #[arg(long, default_value = "binomial", value_parser = parse_model)]
    pub model: NullModel,
    #[arg(long, default_value_t = 10_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lower and upper percentile levels.
    #[arg(long, default_value = "0.5,99.5", value_parser = parse_levels)]
    pub levels: (f64, f64),
}

impl McArgs {
    fn null_config(&self) -> NullConfig {
        NullConfig {
            levels: self.levels,
            ..NullConfig::new(self.model, self.iterations, self.seed)
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

impl OutputArgs {
    fn wants(&self, f: Format) -> bool {
        self.format.contains(&f)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// TSV of expected per-region totals.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Also write each input as canonical TSV into --out.
    #[arg(long)]
    pub canonical: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Window half-width in percentage points; repeat for a sweep.
    #[arg(long, default_value = "0.05")]
    pub window: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HistogramArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Bin width in percent.
    #[arg(long, default_value_t = 0.1)]
    pub bins: f64,
    /// Add U(-0.5, 0.5) to numerators before binning.
    #[arg(long)]
    pub jitter: bool,
    /// Average histograms over all inputs.
    #[arg(long)]
    pub average: bool,
    /// Drop the k regions with the largest peaks before the analysis.
    #[arg(long)]
    pub exclude_top: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Centers {
    Integer,
    HalfInteger,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, value_enum, default_value = "integer")]
    pub centers: Centers,
    /// Also write averaged histograms with the top k regions removed.
    #[arg(long)]
    pub exclude_top: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FingerprintArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Weight the correlation by registered voters.
    #[arg(long)]
    pub weighted_correlation: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismArg {
    IntegerRounding,
    FiveMultipleRounding,
    BallotStuffing,
    ExtremeCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PaletteArg {
    /// 70..=99, multiples of five weighted 3x.
    Appealing,
    /// 1..=99, equal weights.
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    pub stations: usize,
    #[arg(long, default_value = "synthetic")]
    pub label: String,
    /// Fixed station size; log-normal sizes otherwise.
    #[arg(long)]
    pub registered: Option<u64>,
    #[arg(long, default_value_t = 1500.0)]
    pub size_median: f64,
    #[arg(long, default_value_t = 0.5)]
    pub size_sigma: f64,
    /// Beta parameters of the true turnout, as `alpha,beta`.
    #[arg(long, default_value = "12,8", value_parser = parse_pair)]
    pub turnout_beta: (f64, f64),
    #[arg(long, default_value = "12,8", value_parser = parse_pair)]
    pub result_beta: (f64, f64),
    #[arg(long, default_value_t = 10)]
    pub regions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub mechanism: Option<MechanismArg>,
    #[arg(long, default_value_t = 0.0)]
    pub affected_fraction: f64,
    #[arg(long, value_enum, default_value = "appealing")]
    pub palette: PaletteArg,
    #[arg(long)]
    pub nearest: bool,
    #[arg(long)]
    pub avoid_round_counts: bool,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_model(s: &str) -> std::result::Result<NullModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn parse_levels(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = parse_pair(s)?;
    if !(0.0 <= lo && lo < hi && hi <= 100.0) {
        return Err(format!("levels must satisfy 0 <= low < high <= 100, got {s}"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Serialize)]
struct InputDigest {
    file: String,
    sha256: String,
}

/// Echoed into every artifact; worker count and output paths are left out
/// because they do not change results.
#[derive(Debug, Serialize)]
struct RunConfig<'a, A: Serialize> {
    command: &'static str,
    args: &'a A,
    inputs: Vec<InputDigest>,
}

fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<InputDigest>> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let sha = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
            Ok(InputDigest {
                file: p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                sha256: sha,
            })
        })
        .collect()
}

fn header<A: Serialize>(command: &'static str, args: &A, inputs: &[PathBuf], seed: u64) -> Result<RunHeader> {
    RunHeader::new(
        &RunConfig {
            command,
            args,
            inputs: digest_inputs(inputs)?,
        },
        seed,
    )
}

fn progress(msg: impl AsRef<str>) {
    eprintln!("[heaping] {}", msg.as_ref());
}

fn load_inputs(args: &InputArgs, default_policy: FilterPolicy) -> Result<Vec<ElectionDataset>> {
    let profile = CountryProfile::resolve(&args.profile)?;
    let policy = FilterPolicy {
        min_registered: args.min_registered.unwrap_or(default_policy.min_registered),
        max_percentage: args.max_percentage.unwrap_or(default_policy.max_percentage),
        ..default_policy
    };
    let exclude: BTreeSet<String> = args.exclude_regions.iter().cloned().collect();
    let restrict: BTreeSet<String> = args.restrict_regions.iter().cloned().collect();
    let mut out = Vec::new();
    for path in &args.input {
        let (ds, report) = load_dataset(path, &profile)?;
        progress(format!(
            "{}: {} rows, {} stations, {} skipped",
            path.display(),
            report.parsed,
            report.stations,
            report.skipped
        ));
        let mut ds = apply_filters(&ds, &policy);
        if !restrict.is_empty() {
            let sel = restrict_regions(&ds, &restrict)?;
            warn_unknown(&ds.label, &sel.unknown_codes);
            ds = sel.dataset;
        }
        if !exclude.is_empty() {
            let sel = exclude_regions(&ds, &exclude)?;
            warn_unknown(&ds.label, &sel.unknown_codes);
            ds = sel.dataset;
        }
        progress(format!("{}: {} stations after filtering", ds.label, ds.len()));
        out.push(ds);
    }
    Ok(out)
}

fn warn_unknown(label: &str, codes: &[String]) {
    if !codes.is_empty() {
        progress(format!("warning: {label}: region codes not present: {}", codes.join(",")));
    }
}

/// Histogram analyses keep stations at 100%; only small stations are dropped.
fn histogram_policy() -> FilterPolicy {
    FilterPolicy {
        max_percentage: 100.0,
        ..FilterPolicy::default()
    }
}

struct Emitter<'a> {
    header: RunHeader,
    output: &'a OutputArgs,
    artifacts: Artifacts,
}

impl<'a> Emitter<'a> {
    fn new(header: RunHeader, output: &'a OutputArgs) -> Self {
        Emitter {
            header,
            output,
            artifacts: Artifacts::default(),
        }
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        if self.output.wants(Format::Csv) {
            self.artifacts.add(format!("{name}.csv"), csv_document(&self.header, table)?);
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.output.wants(Format::Json) {
            self.artifacts.add(format!("{name}.json"), json_document(&self.header, value)?);
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, render: impl FnOnce() -> String) {
        if self.output.wants(Format::Svg) {
            let body = render();
            let stamped = body.replacen(
                '>',
                &format!(">\n<!-- config_hash: {} seed: {} -->", self.header.config_hash, self.header.seed),
                1,
            );
            self.artifacts.add(format!("{name}.svg"), stamped.into_bytes());
        }
    }

    fn finish(self) -> Result<()> {
        let written = self.artifacts.write_all(&self.output.out)?;
        for p in written {
            progress(format!("wrote {}", p.display()));
        }
        Ok(())
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<()> {
    let profile = CountryProfile::resolve(&args.input.profile)?;
    let reference = args.reference.as_ref().map(load_reference_totals).transpose()?;
    let mut results = Vec::new();
    let mut artifacts = Artifacts::default();
    for path in &args.input.input {
        let (ds, report) = load_dataset(path, &profile)?;
        let discrepancies = reference.as_ref().map(|r| verify_subtotals(&ds, r)).unwrap_or_default();
        if !discrepancies.is_empty() {
            progress(format!("warning: {}: {} subtotal discrepancies", ds.label, discrepancies.len()));
        }
        if args.canonical {
            let mut buf = Vec::new();
            write_canonical_tsv(&ds, &mut buf)?;
            artifacts.add(format!("{}.tsv", ds.label), buf);
        }
        results.push(serde_json::json!({
            "file": path.display().to_string(),
            "label": ds.label,
            "report": report,
            "discrepancies": discrepancies,
        }));
    }
    let text = serde_json::to_string_pretty(&results)?;
    println!("{text}");
    if let Some(out) = &args.out {
        artifacts.add("validate.json", format!("{text}\n").into_bytes());
        artifacts.write_all(out)?;
    } else if args.canonical {
        return Err(Error::param("--canonical needs --out"));
    }
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeResult<'a> {
    reports: Vec<&'a AnomalyReport>,
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let head = header("analyze", args, &args.input.input, args.mc.seed)?;
    let datasets = load_inputs(&args.input, FilterPolicy::default())?;
    let cfg = args.mc.null_config();
    let mut reports = Vec::new();
    for ds in &datasets {
        for &hw in &args.window {
            progress(format!("{}: {} iterations, window ±{hw}", ds.label, cfg.iterations));
            reports.extend(crate::anomaly::run_null_many(ds, &standard_probes(hw)?, &cfg)?);
        }
    }
    for r in reports.iter().filter(|r| r.statistic == StatisticDef::MAIN && r.window.centers == CenterKind::Integer) {
        println!(
            "{}\twindow={}\tq={}\tmc_mean={:.2}\tz={}\tp={}",
            r.label,
            r.window.half_width(),
            r.empirical,
            r.mc_mean,
            r.z_score.map_or("undefined".into(), |z| format!("{z:.3}")),
            r.p_value
        );
    }

    let mut em = Emitter::new(head, &args.output);
    em.csv("analyze_summary", &output::anomaly_summary_table(&reports))?;
    em.csv("analyze_mc_samples", &output::mc_samples_table(&reports))?;
    let stripped: Vec<AnomalyReport> = reports
        .iter()
        .map(|r| AnomalyReport {
            mc_samples: Vec::new(),
            ..r.clone()
        })
        .collect();
    em.json(
        "analyze",
        &AnalyzeResult {
            reports: stripped.iter().collect(),
        },
    )?;
    if args.window.len() > 1 {
        let series: Vec<Series> = datasets
            .iter()
            .enumerate()
            .map(|(i, ds)| {
                let pts = reports
                    .iter()
                    .filter(|r| r.label == ds.label && r.statistic == StatisticDef::MAIN && r.window.centers == CenterKind::Integer)
                    .map(|r| (r.window.half_width(), r.z_score.unwrap_or(f64::NAN)))
                    .collect();
                Series::new(ds.label.clone(), pts, PALETTE[i % PALETTE.len()])
            })
            .collect();
        em.svg("analyze_window_sweep", || render::line_plot("Window sweep", "half-width (%)", "z", &series, None));
    }
    em.finish()
}

const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#27864a", "#8e44ad", "#d35400", "#555555"];

/// Empirical histograms and simulations for both metrics of one dataset.
struct HistogramRun {
    label: String,
    empirical: [WeightedHistogram; 2],
    simulated: Vec<SimulatedHistograms>,
}

fn histogram_runs(datasets: &[ElectionDataset], opts: &HistogramOptions, cfg: &NullConfig, average: bool) -> Result<Vec<HistogramRun>> {
    let mut runs = Vec::new();
    for ds in datasets {
        progress(format!("{}: simulating {} histograms", ds.label, cfg.iterations));
        runs.push(HistogramRun {
            label: ds.label.clone(),
            empirical: Metric::BOTH.map(|m| build_histogram(ds, m, opts)),
            simulated: simulate_histograms(ds, &Metric::BOTH, opts, cfg)?,
        });
    }
    if average && runs.len() > 1 {
        let empirical = [0, 1].map(|k| average_histograms(&runs.iter().map(|r| r.empirical[k].clone()).collect::<Vec<_>>()));
        let [t, r] = empirical;
        let simulated = (0..2)
            .map(|k| SimulatedHistograms::average(&runs.iter().map(|r| &r.simulated[k]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        runs = vec![HistogramRun {
            label: "average".into(),
            empirical: [t?, r?],
            simulated,
        }];
    }
    Ok(runs)
}

fn top_regions(datasets: &[ElectionDataset], k: usize, cfg: &NullConfig) -> Result<Vec<String>> {
    let table = region_peaks(datasets, &CandidateSet::integer(), cfg)?;
    Ok(table.top_regions(k))
}

fn drop_regions(datasets: &[ElectionDataset], codes: &[String]) -> Result<Vec<ElectionDataset>> {
    let set: BTreeSet<String> = codes.iter().cloned().collect();
    datasets.iter().map(|d| exclude_regions(d, &set).map(|s| s.dataset)).collect()
}

fn histogram_options(args: &HistogramArgs) -> Result<HistogramOptions> {
    Ok(HistogramOptions {
        grid: BinGrid::from_width(args.bins)?,
        jitter_seed: args.jitter.then_some(args.mc.seed),
    })
}

fn emit_histograms(em: &mut Emitter, prefix: &str, runs: &[HistogramRun], levels: (f64, f64)) -> Result<()> {
    for run in runs {
        let mut means = Vec::new();
        for (k, metric) in Metric::BOTH.iter().enumerate() {
            let env = run.simulated[k].envelope(levels);
            let name = format!("{prefix}_{}_{metric}", run.label);
            em.csv(&name, &output::histogram_table(&run.empirical[k], Some(&env)))?;
            let shown = run.empirical[k].without_full_bin();
            let centers = run.empirical[k].grid.centers();
            let last = centers.len() - 1;
            em.svg(&name, || {
                let emp = Series::new("empirical", centers.iter().copied().zip(shown.weights.iter().copied()).take(last).collect(), "black");
                let mean = Series::new("MC mean", centers.iter().copied().zip(env.mean.iter().copied()).take(last).collect(), "#1f4e9c").dashed();
                let band = Band {
                    x: centers[..last].to_vec(),
                    low: env.low[..last].to_vec(),
                    high: env.high[..last].to_vec(),
                };
                render::line_plot(&format!("{} {metric}", run.label), &format!("{metric} (%)"), "registered voters", &[emp, mean], Some(&band))
            });
            means.push(env.mean_histogram());
        }
        if run.empirical[0].grid.bins_per_percent % 2 == 0 {
            let shape = peak_shape(&[(&run.empirical[0], &means[0]), (&run.empirical[1], &means[1])])?;
            em.csv(&format!("{prefix}_{}_peak_shape", run.label), &output::peak_shape_table(&shape))?;
        } else {
            progress("peak shape needs an even number of bins per percent; skipped");
        }
    }
    Ok(())
}

fn cmd_histogram(args: &HistogramArgs) -> Result<()> {
    let head = header("histogram", args, &args.input.input, args.mc.seed)?;
    let opts = histogram_options(args)?;
    let cfg = args.mc.null_config();
    let mut datasets = load_inputs(&args.input, histogram_policy())?;
    let mut excluded = Vec::new();
    if let Some(k) = args.exclude_top {
        excluded = top_regions(&datasets, k, &cfg)?;
        progress(format!("excluding regions {}", excluded.join(",")));
        datasets = drop_regions(&datasets, &excluded)?;
    }
    let runs = histogram_runs(&datasets, &opts, &cfg, args.average)?;
    let mut em = Emitter::new(head, &args.output);
    emit_histograms(&mut em, "histogram", &runs, cfg.levels)?;
    em.json(
        "histogram",
        &serde_json::json!({
            "labels": runs.iter().map(|r| r.label.clone()).collect::<Vec<_>>(),
            "excluded_regions": excluded,
            "iterations": cfg.iterations,
        }),
    )?;
    em.finish()
}

fn cmd_spectrum(args: &HistogramArgs) -> Result<()> {
    let head = header("spectrum", args, &args.input.input, args.mc.seed)?;
    let opts = histogram_options(args)?;
    let cfg = args.mc.null_config();
    let mut datasets = load_inputs(&args.input, histogram_policy())?;
    if let Some(k) = args.exclude_top {
        let codes = top_regions(&datasets, k, &cfg)?;
        datasets = drop_regions(&datasets, &codes)?;
    }
    let runs = histogram_runs(&datasets, &opts, &cfg, args.average)?;
    let mut em = Emitter::new(head, &args.output);
    let mut summary = Vec::new();
    for run in &runs {
        for (k, metric) in Metric::BOTH.iter().enumerate() {
            let spec = amplitude_spectrum(&run.empirical[k]);
            let env = spectrum_envelope(&run.simulated[k], cfg.levels);
            let name = format!("spectrum_{}_{metric}", run.label);
            em.csv(&name, &output::spectrum_table(&spec, Some(&env)))?;
            em.svg(&name, || {
                let skip = 1;
                let pts = |v: &[f64]| spec.frequencies.iter().copied().zip(v.iter().copied()).skip(skip).collect::<Vec<_>>();
                let band = Band {
                    x: spec.frequencies[skip..].to_vec(),
                    low: env.low[skip..].to_vec(),
                    high: env.high[skip..].to_vec(),
                };
                render::line_plot(
                    &format!("{} {metric} spectrum", run.label),
                    "frequency (1/%)",
                    "amplitude",
                    &[Series::new("empirical", pts(&spec.amplitudes), "black")],
                    Some(&band),
                )
            });
            let sg = spectrogram(&run.empirical[k], &run.simulated[k], &SpectrogramConfig::default())?;
            let sg_name = format!("spectrogram_{}_{metric}", run.label);
            em.csv(&sg_name, &output::spectrogram_table(&sg))?;
            em.svg(&sg_name, || {
                // rows: frequencies, columns: window centers
                let grid: Vec<Vec<Option<f64>>> = (1..sg.frequencies.len())
                    .map(|f| sg.values.iter().map(|row| row[f]).collect())
                    .collect();
                render::heatmap(
                    &format!("{} {metric} spectrogram", run.label),
                    "window center (%)",
                    "frequency (1/%)",
                    (sg.centers[0], sg.centers[sg.centers.len() - 1]),
                    (sg.frequencies[1], sg.frequencies[sg.frequencies.len() - 1]),
                    &grid,
                )
            });
            summary.push(serde_json::json!({
                "label": run.label,
                "metric": metric,
                "amplitude_1": spec.amplitude_at(1.0),
                "amplitude_2": spec.amplitude_at(2.0),
                "amplitude_0.2": spec.amplitude_at(0.2),
                "spectrogram_last_window_1": sg.last_window(1.0)?,
            }));
        }
    }
    em.json("spectrum", &summary)?;
    em.finish()
}

fn cmd_regions(args: &RegionsArgs) -> Result<()> {
    let head = header("regions", args, &args.input.input, args.mc.seed)?;
    let cfg = args.mc.null_config();
    let datasets = load_inputs(&args.input, histogram_policy())?;
    let centers = match args.centers {
        Centers::Integer => CenterKind::Integer,
        Centers::HalfInteger => CenterKind::HalfInteger,
    };
    let table = region_peaks(&datasets, &CandidateSet::for_centers(centers), &cfg)?;
    for r in table.ranking.iter().take(5) {
        println!("{}\t{}", r.region_code, output::opt(r.max_amplitude));
    }
    let mut em = Emitter::new(head, &args.output);
    em.csv("regions_table", &output::region_peaks_table(&table))?;
    em.csv("regions_ranking", &output::region_ranking_table(&table))?;
    em.json("regions", &table)?;
    if let Some(k) = args.exclude_top {
        let codes = table.top_regions(k);
        let kept = drop_regions(&datasets, &codes)?;
        let runs = histogram_runs(&kept, &HistogramOptions::default(), &cfg, true)?;
        emit_histograms(&mut em, &format!("regions_excluded_top{k}"), &runs, cfg.levels)?;
    }
    em.finish()
}

fn cmd_fingerprint(args: &FingerprintArgs) -> Result<()> {
    let head = header("fingerprint", args, &args.input.input, 0)?;
    let datasets = load_inputs(&args.input, histogram_policy())?;
    let weighting = if args.weighted_correlation {
        CorrelationWeighting::RegisteredVoters
    } else {
        CorrelationWeighting::Unweighted
    };
    let mut em = Emitter::new(head, &args.output);
    let mut summary = Vec::new();
    for ds in &datasets {
        let fp = fingerprint(ds, weighting);
        let name = format!("fingerprint_{}", ds.label);
        em.csv(&name, &output::fingerprint_table(&fp))?;
        em.svg(&name, || {
            let n = fp.cells_per_axis;
            // rows: result cells, columns: turnout cells
            let grid: Vec<Vec<Option<f64>>> = (0..n)
                .map(|r| (0..n).map(|t| Some(fp.weight(t, r) as f64)).collect())
                .collect();
            render::heatmap(&ds.label, "turnout (%)", "leader's result (%)", (0.0, 100.0), (0.0, 100.0), &grid)
        });
        summary.push(serde_json::json!({
            "label": ds.label,
            "n_stations": fp.n_stations,
            "registered": fp.total(),
            "correlation": fp.correlation,
            "correlation_weighting": fp.correlation_weighting,
        }));
    }
    em.json("fingerprint", &summary)?;
    em.finish()
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = GeneratorConfig {
        label: args.label.clone(),
        n_stations: args.stations,
        size: match args.registered {
            Some(registered) => SizeDistribution::Fixed { registered },
            None => SizeDistribution::lognormal(args.size_median, args.size_sigma),
        },
        turnout: ProbabilityField::Beta {
            alpha: args.turnout_beta.0,
            beta: args.turnout_beta.1,
        },
        result: ProbabilityField::Beta {
            alpha: args.result_beta.0,
            beta: args.result_beta.1,
        },
        n_regions: args.regions,
        ..GeneratorConfig::default()
    };
    let generated = synth::generate(&cfg, args.seed)?;
    for w in &generated.warnings {
        progress(format!("warning: {w}"));
    }
    let mut dataset = generated.dataset;
    let mut artifacts = Artifacts::default();
    if let Some(m) = args.mechanism {
        let mechanism = match m {
            MechanismArg::IntegerRounding => Mechanism::IntegerRounding,
            MechanismArg::FiveMultipleRounding => Mechanism::FiveMultipleRounding,
            MechanismArg::BallotStuffing => Mechanism::BallotStuffing,
            MechanismArg::ExtremeCluster => Mechanism::ExtremeCluster,
        };
        let mut spec = FraudSpec::new(mechanism, args.affected_fraction);
        spec.palette = match args.palette {
            PaletteArg::Appealing => Palette::appealing(),
            PaletteArg::All => Palette::uniform(1..=99),
        };
        spec.target_side = if args.nearest { TargetSide::Nearest } else { TargetSide::JustAbove };
        spec.avoid_round_counts = args.avoid_round_counts;
        let (modified, log) = synth::inject_fraud(&dataset, &spec, args.seed)?;
        progress(format!("{} stations selected, {} modified", log.selected, log.modified.len()));
        dataset = modified;
        let head = RunHeader::new(&RunConfig { command: "simulate", args, inputs: Vec::new() }, args.seed)?;
        artifacts.add(format!("{}_injection.json", args.label), json_document(&head, &log)?);
    }
    let mut buf = Vec::new();
    write_canonical_tsv(&dataset, &mut buf)?;
    artifacts.add(format!("{}.tsv", args.label), buf);
    for p in artifacts.write_all(&args.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Histogram(a) => cmd_histogram(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Regions(a) => cmd_regions(a),
        Command::Fingerprint(a) => cmd_fingerprint(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Schema { .. } | Error::Profile(_) | Error::Parameter(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

