//! The integer-station statistic and its Monte Carlo null distribution.
//!
//! A station is "integer" when its turnout or leader's result lies within a
//! small window around an integer percentage. The number of such stations
//! (or the registered voters they hold) is compared against the same count
//! evaluated on simulated counts drawn from a [`NullModel`].

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{percent_to_micros, Counts, ElectionDataset, Fraction, MICROS_PER_PERCENT};
use crate::sampling::{MetricSet, NullModel, SimStations};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterKind {
    Integer,
    HalfInteger,
}

/// Window of half-width `h` around integer (or half-integer) percentages.
/// Membership is decided on exact ratios; the boundary counts as inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub centers: CenterKind,
    half_width_micros: u64,
}

impl WindowSpec {
    pub const DEFAULT_HALF_WIDTH: f64 = 0.05;

    pub fn new(centers: CenterKind, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= 0.5) {
            return Err(Error::param(format!(
                "window half-width must be in (0, 0.5], got {half_width}"
            )));
        }
        let half_width_micros = percent_to_micros(half_width);
        if half_width_micros == 0 {
            return Err(Error::param("window half-width below 1e-6 percentage points"));
        }
        Ok(WindowSpec {
            centers,
            half_width_micros,
        })
    }

    pub fn integer(half_width: f64) -> Result<Self> {
        Self::new(CenterKind::Integer, half_width)
    }

    pub fn half_integer(half_width: f64) -> Result<Self> {
        Self::new(CenterKind::HalfInteger, half_width)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width_micros as f64 / MICROS_PER_PERCENT as f64
    }

    pub fn contains(&self, value: Fraction) -> bool {
        let den = value.den as u128;
        let micros = MICROS_PER_PERCENT as u128;
        let spacing = micros * den;
        let scaled = value.num as u128 * 100 * micros;
        let shift = match self.centers {
            CenterKind::Integer => 0,
            CenterKind::HalfInteger => micros / 2 * den,
        };
        let offset = (scaled + spacing - shift) % spacing;
        let distance = offset.min(spacing - offset);
        distance <= self.half_width_micros as u128 * den
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::integer(Self::DEFAULT_HALF_WIDTH).expect("valid default")
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.centers {
            CenterKind::Integer => "integer",
            CenterKind::HalfInteger => "half-integer",
        };
        write!(f, "{kind}±{}", self.half_width())
    }
}

pub fn is_in_window(value: Fraction, window: &WindowSpec) -> bool {
    window.contains(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricScope {
    TurnoutOrResult,
    TurnoutOnly,
    ResultOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    StationCount,
    RegisteredVoters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatisticDef {
    pub scope: MetricScope,
    pub weighting: Weighting,
    /// Skip a metric for a station when its numerator or denominator ends in 0.
    pub zero_exclusion: bool,
}

impl StatisticDef {
    pub const MAIN: StatisticDef = StatisticDef {
        scope: MetricScope::TurnoutOrResult,
        weighting: Weighting::StationCount,
        zero_exclusion: false,
    };

    pub fn with_scope(self, scope: MetricScope) -> Self {
        StatisticDef { scope, ..self }
    }

    pub fn voter_weighted(self) -> Self {
        StatisticDef {
            weighting: Weighting::RegisteredVoters,
            ..self
        }
    }

    pub fn zero_excluded(self) -> Self {
        StatisticDef {
            zero_exclusion: true,
            ..self
        }
    }

    pub fn metrics(&self) -> MetricSet {
        MetricSet {
            turnout: self.scope != MetricScope::ResultOnly,
            result: self.scope != MetricScope::TurnoutOnly,
        }
    }

    /// Short stable name, used for output file names.
    pub fn name(&self) -> String {
        let scope = match self.scope {
            MetricScope::TurnoutOrResult => "turnout_or_result",
            MetricScope::TurnoutOnly => "turnout",
            MetricScope::ResultOnly => "result",
        };
        let mut name = scope.to_string();
        if self.weighting == Weighting::RegisteredVoters {
            name.push_str("_voters");
        }
        if self.zero_exclusion {
            name.push_str("_nozero");
        }
        name
    }

    /// This station's contribution to the statistic.
    #[inline]
    pub fn contribution(&self, counts: &Counts, window: &WindowSpec) -> u64 {
        let m = self.metrics();
        let turnout_hit = m.turnout
            && !(self.zero_exclusion && (counts.given.is_multiple_of(10) || counts.registered.is_multiple_of(10)))
            && counts.turnout().is_some_and(|f| window.contains(f));
        let hit = turnout_hit
            || (m.result
                && !(self.zero_exclusion && (counts.leader.is_multiple_of(10) || counts.cast.is_multiple_of(10)))
                && counts.result().is_some_and(|f| window.contains(f)));
        match (hit, self.weighting) {
            (false, _) => 0,
            (true, Weighting::StationCount) => 1,
            (true, Weighting::RegisteredVoters) => counts.registered,
        }
    }
}

impl Default for StatisticDef {
    fn default() -> Self {
        Self::MAIN
    }
}

/// One statistic evaluated with one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Probe {
    pub statistic: StatisticDef,
    pub window: WindowSpec,
}

impl Probe {
    pub fn new(statistic: StatisticDef, window: WindowSpec) -> Self {
        Probe { statistic, window }
    }

    fn evaluate<'a>(&self, counts: impl IntoIterator<Item = &'a Counts>) -> u64 {
        counts
            .into_iter()
            .map(|c| self.statistic.contribution(c, &self.window))
            .sum()
    }
}

/// `q` (or its voter-weighted variant) on an already filtered dataset.
pub fn empirical_statistic(dataset: &ElectionDataset, stat: &StatisticDef, window: &WindowSpec) -> f64 {
    dataset
        .stations()
        .iter()
        .map(|s| stat.contribution(&s.counts(), window))
        .sum::<u64>() as f64
}

/// Settings shared by every Monte Carlo pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub model: NullModel,
    pub iterations: usize,
    pub master_seed: u64,
    /// Lower and upper percentile levels, in percent.
    pub levels: (f64, f64),
    /// When set, simulated stations whose turnout or result exceeds this
    /// percentage contribute nothing. Off by default so the station set
    /// (and `n`) stays fixed across iterations.
    pub refilter_max_percentage: Option<f64>,
}

impl Default for NullConfig {
    fn default() -> Self {
        NullConfig {
            model: NullModel::Binomial,
            iterations: 10_000,
            master_seed: 0,
            levels: (0.5, 99.5),
            refilter_max_percentage: None,
        }
    }
}

impl NullConfig {
    pub fn new(model: NullModel, iterations: usize, master_seed: u64) -> Self {
        NullConfig {
            model,
            iterations,
            master_seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.iterations == 0 {
            return Err(Error::param("iteration budget must be positive"));
        }
        let (lo, hi) = self.levels;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return Err(Error::param(format!(
                "percentile levels must satisfy 0 <= low < high <= 100, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Minimum iterations for a report with meaningful percentiles.
    pub const MIN_ITERATIONS: usize = 100;

    fn validate_for_report(&self) -> Result<()> {
        self.validate()?;
        if self.iterations < Self::MIN_ITERATIONS {
            return Err(Error::param(format!(
                "at least {} iterations are needed for percentile reports, got {}",
                Self::MIN_ITERATIONS,
                self.iterations
            )));
        }
        Ok(())
    }
}

/// Upper-tail Monte Carlo p-value. When no sample reaches the empirical
/// value, the estimate is `1/iterations` and only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    pub below_resolution: bool,
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.below_resolution {
            write!(f, "< {}", self.value)
        } else {
            write!(f, "{}", self.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub label: String,
    pub statistic: StatisticDef,
    pub window: WindowSpec,
    pub model: NullModel,
    pub iterations: usize,
    pub master_seed: u64,
    pub n_stations: usize,
    pub empirical: f64,
    pub mc_mean: f64,
    pub mc_sd: f64,
    pub mc_min: f64,
    pub mc_median: f64,
    pub mc_max: f64,
    pub percentile_levels: (f64, f64),
    pub percentile_interval: (f64, f64),
    /// `None` only when the MC spread is zero but the empirical value differs.
    pub z_score: Option<f64>,
    pub anomaly_size: f64,
    pub p_value: PValue,
    pub mc_samples: Vec<f64>,
}

impl AnomalyReport {
    fn from_samples(
        label: &str,
        probe: Probe,
        cfg: &NullConfig,
        n_stations: usize,
        empirical: f64,
        samples: Vec<f64>,
    ) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let z_score = if sd > 0.0 {
            Some((empirical - mean) / sd)
        } else if empirical == mean {
            Some(0.0)
        } else {
            None
        };
        let at_least = samples.iter().filter(|&&x| x >= empirical).count();
        let p_value = if at_least == 0 {
            PValue {
                value: 1.0 / n,
                below_resolution: true,
            }
        } else {
            PValue {
                value: at_least as f64 / n,
                below_resolution: false,
            }
        };
        AnomalyReport {
            label: label.to_string(),
            statistic: probe.statistic,
            window: probe.window,
            model: cfg.model,
            iterations: samples.len(),
            master_seed: cfg.master_seed,
            n_stations,
            empirical,
            mc_mean: mean,
            mc_sd: sd,
            mc_min: sorted[0],
            mc_median: percentile(&sorted, 50.0),
            mc_max: sorted[sorted.len() - 1],
            percentile_levels: cfg.levels,
            percentile_interval: (percentile(&sorted, cfg.levels.0), percentile(&sorted, cfg.levels.1)),
            z_score,
            anomaly_size: empirical - mean,
            p_value,
            mc_samples: samples,
        }
    }

    pub fn in_percentile_box(&self) -> bool {
        let (lo, hi) = self.percentile_interval;
        lo <= self.empirical && self.empirical <= hi
    }

    pub fn exceeds_all_samples(&self) -> bool {
        self.empirical > self.mc_max
    }

    /// Randomized rank of the empirical value among the MC samples, in (0, 1).
    /// Ties are broken by `u` in [0, 1), which makes the rank uniform when the
    /// empirical value is exchangeable with the samples.
    pub fn rank_fraction(&self, u: f64) -> f64 {
        let less = self.mc_samples.iter().filter(|&&x| x < self.empirical).count();
        let equal = self.mc_samples.iter().filter(|&&x| x == self.empirical).count();
        (less as f64 + u * (equal as f64 + 1.0)) / (self.mc_samples.len() as f64 + 1.0)
    }
}

/// Linear-interpolation percentile (`level` in percent) of sorted data.
pub fn percentile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let pos = (level / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Simulated values of every probe, one row per iteration.
///
/// All probes share the same draws: a station's simulated counts depend only
/// on its seed tuple.
pub fn simulate_probes(dataset: &ElectionDataset, probes: &[Probe], cfg: &NullConfig) -> Result<Vec<Vec<u64>>> {
    cfg.validate()?;
    let sim = SimStations::new(&dataset.label, dataset.stations());
    let which = probes
        .iter()
        .map(|p| p.statistic.metrics())
        .fold(MetricSet { turnout: false, result: false }, MetricSet::union);
    let refilter = cfg.refilter_max_percentage.map(percent_to_micros);
    let rows = (0..cfg.iterations as u64)
        .into_par_iter()
        .map(|iteration| {
            let mut sums = vec![0u64; probes.len()];
            for i in 0..sim.len() {
                let c = sim.simulate(i, cfg.model, cfg.master_seed, iteration, which);
                if let Some(max) = refilter {
                    let over = |f: Option<Fraction>| f.is_some_and(|f| f.cmp_micros(max) == Ordering::Greater);
                    if over(c.turnout()) || over(c.result()) {
                        continue;
                    }
                }
                for (sum, probe) in sums.iter_mut().zip(probes) {
                    *sum += probe.statistic.contribution(&c, &probe.window);
                }
            }
            sums
        })
        .collect();
    Ok(rows)
}

/// Runs one Monte Carlo pass and reports every probe against it.
pub fn run_null_many(dataset: &ElectionDataset, probes: &[Probe], cfg: &NullConfig) -> Result<Vec<AnomalyReport>> {
    cfg.validate_for_report()?;
    let rows = simulate_probes(dataset, probes, cfg)?;
    let counts: Vec<Counts> = dataset.stations().iter().map(|s| s.counts()).collect();
    Ok(probes
        .iter()
        .enumerate()
        .map(|(p, probe)| {
            let samples = rows.iter().map(|r| r[p] as f64).collect();
            let empirical = probe.evaluate(&counts) as f64;
            AnomalyReport::from_samples(&dataset.label, *probe, cfg, dataset.len(), empirical, samples)
        })
        .collect())
}

pub fn run_null(
    dataset: &ElectionDataset,
    stat: &StatisticDef,
    window: &WindowSpec,
    cfg: &NullConfig,
) -> Result<AnomalyReport> {
    let mut reports = run_null_many(dataset, &[Probe::new(*stat, *window)], cfg)?;
    Ok(reports.remove(0))
}

/// One report per integer-centred window half-width, all from a single pass.
pub fn window_sweep(
    dataset: &ElectionDataset,
    stat: &StatisticDef,
    half_widths: &[f64],
    cfg: &NullConfig,
) -> Result<Vec<AnomalyReport>> {
    if half_widths.is_empty() {
        return Err(Error::param("window sweep needs at least one half-width"));
    }
    let probes = half_widths
        .iter()
        .map(|&h| WindowSpec::integer(h).map(|w| Probe::new(*stat, w)))
        .collect::<Result<Vec<_>>>()?;
    run_null_many(dataset, &probes, cfg)
}

/// The report set produced for a full analysis: the main statistic and its controls.
pub fn standard_probes(half_width: f64) -> Result<Vec<Probe>> {
    let int = WindowSpec::integer(half_width)?;
    let half = WindowSpec::half_integer(half_width)?;
    let main = StatisticDef::MAIN;
    Ok(vec![
        Probe::new(main, int),
        Probe::new(main.with_scope(MetricScope::TurnoutOnly), int),
        Probe::new(main.with_scope(MetricScope::ResultOnly), int),
        Probe::new(main.voter_weighted(), int),
        Probe::new(main.with_scope(MetricScope::TurnoutOnly).zero_excluded(), int),
        Probe::new(main.with_scope(MetricScope::ResultOnly).zero_excluded(), int),
        Probe::new(main, half),
        Probe::new(main.with_scope(MetricScope::TurnoutOnly), half),
        Probe::new(main.with_scope(MetricScope::ResultOnly), half),
    ])
}

pub fn probe_name(probe: &Probe) -> String {
    match probe.window.centers {
        CenterKind::Integer => probe.statistic.name(),
        CenterKind::HalfInteger => format!("half_integer_{}", probe.statistic.name()),
    }
}
