//! Synthetic elections drawn from a known null, and fraud mechanisms that
//! push stations onto appealing percentages. Used as ground truth for
//! calibration and power experiments.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, RngCore};
use rand_distr::{Beta, Binomial, Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{percent_to_micros, ElectionDataset, Metric, StationRecord, MICROS_PER_PERCENT};
use crate::sampling::{mix64, station_key, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDistribution {
    Fixed { registered: u64 },
    /// Log-normal around `median`, redrawn until it falls in `[min, max]`.
    LogNormal { median: f64, sigma: f64, min: u64, max: u64 },
}

impl SizeDistribution {
    pub fn lognormal(median: f64, sigma: f64) -> Self {
        SizeDistribution::LogNormal {
            median,
            sigma,
            min: 100,
            max: 3000,
        }
    }

    fn sample<R: RngCore>(&self, rng: &mut R) -> u64 {
        match *self {
            SizeDistribution::Fixed { registered } => registered,
            SizeDistribution::LogNormal { median, sigma, min, max } => {
                let dist = LogNormal::new(median.ln(), sigma).expect("validated");
                for _ in 0..1000 {
                    let v = dist.sample(rng).round();
                    if v >= min as f64 && v <= max as f64 {
                        return v as u64;
                    }
                }
                median.round().clamp(min as f64, max as f64) as u64
            }
        }
    }
}

/// Per-station true probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbabilityField {
    Fixed { p: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl ProbabilityField {
    fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match *self {
            ProbabilityField::Fixed { p } => p,
            ProbabilityField::Beta { alpha, beta } => Beta::new(alpha, beta).expect("validated").sample(rng),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            ProbabilityField::Fixed { p } => (0.0..=1.0).contains(&p),
            ProbabilityField::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid {name} field {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub label: String,
    pub n_stations: usize,
    pub size: SizeDistribution,
    pub turnout: ProbabilityField,
    pub result: ProbabilityField,
    /// Probability that a given ballot is not cast.
    pub taken_away_rate: f64,
    /// Stations are split into this many contiguous regions.
    pub n_regions: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            label: "synthetic".into(),
            n_stations: 10_000,
            size: SizeDistribution::lognormal(1500.0, 0.5),
            turnout: ProbabilityField::Beta { alpha: 12.0, beta: 8.0 },
            result: ProbabilityField::Beta { alpha: 12.0, beta: 8.0 },
            taken_away_rate: 0.002,
            n_regions: 10,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.turnout.validate("turnout")?;
        self.result.validate("result")?;
        if !(0.0..=1.0).contains(&self.taken_away_rate) {
            return Err(Error::param("taken_away_rate must lie in [0, 1]"));
        }
        if self.n_regions == 0 {
            return Err(Error::param("n_regions must be at least 1"));
        }
        match self.size {
            SizeDistribution::Fixed { registered } => {
                if registered == 0 {
                    return Err(Error::param("fixed station size must be positive"));
                }
                if registered < 100 {
                    warnings.push(format!(
                        "all stations have {registered} registered voters and fall below the default minimum of 100"
                    ));
                }
            }
            SizeDistribution::LogNormal { median, sigma, min, max } => {
                if !(median > 0.0 && sigma >= 0.0 && min >= 1 && min <= max) {
                    return Err(Error::param(format!("invalid size distribution {:?}", self.size)));
                }
                if min < 100 {
                    warnings.push(format!("station sizes may fall below the default minimum of 100 (min {min})"));
                }
            }
        }
        Ok(warnings)
    }

    pub fn region_code(&self, station: usize) -> String {
        let region = station * self.n_regions / self.n_stations.max(1);
        let width = self.n_regions.to_string().len().max(2);
        format!("R{:0width$}", region + 1)
    }
}

/// Generated dataset with the probabilities each station was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticElection {
    pub dataset: ElectionDataset,
    pub true_turnout: Vec<f64>,
    pub true_result: Vec<f64>,
    pub warnings: Vec<String>,
}

fn stream(seed: u64, tag: u64, counter: u64) -> SimRng {
    SimRng::from_state(mix64(mix64(seed ^ tag) ^ counter))
}

const GENERATE_TAG: u64 = 0x6765_6e65_7261_7465;
const SELECT_TAG: u64 = 0x7365_6c65_6374_2121;
const INJECT_TAG: u64 = 0x696e_6a65_6374_2121;

fn binomial<R: RngCore>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("probability in range").sample(rng)
}

/// Draws a fair election: given ~ Bin(V, p_t), cast = given minus
/// Bin(given, taken_away_rate), leader ~ Bin(cast, p_r).
pub fn generate(cfg: &GeneratorConfig, seed: u64) -> Result<SyntheticElection> {
    let warnings = cfg.validate()?;
    let drawn: Vec<(StationRecord, f64, f64)> = (0..cfg.n_stations)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, GENERATE_TAG, i as u64);
            let registered = cfg.size.sample(&mut rng);
            let pt = cfg.turnout.sample(&mut rng);
            let pr = cfg.result.sample(&mut rng);
            let given = binomial(registered, pt, &mut rng);
            let cast = given - binomial(given, cfg.taken_away_rate, &mut rng);
            let leader = binomial(cast, pr, &mut rng);
            let rec = StationRecord::new(format!("S{:06}", i + 1), cfg.region_code(i), registered, given, cast, leader);
            (rec, pt, pr)
        })
        .collect();
    let mut stations = Vec::with_capacity(drawn.len());
    let mut true_turnout = Vec::with_capacity(drawn.len());
    let mut true_result = Vec::with_capacity(drawn.len());
    for (rec, pt, pr) in drawn {
        stations.push(rec);
        true_turnout.push(pt);
        true_result.push(pr);
    }
    Ok(SyntheticElection {
        dataset: ElectionDataset::new(cfg.label.clone(), stations)?,
        true_turnout,
        true_result,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    IntegerRounding,
    FiveMultipleRounding,
    /// Adds ballots for the leader to given, cast and leader alike.
    BallotStuffing,
    /// Moves turnout and result to nearly 100%.
    ExtremeCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSide {
    /// Smallest numerator at or above the target.
    JustAbove,
    /// Numerator closest to the target on either side.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMetric {
    Turnout,
    Result,
    /// Chosen at random per station.
    Either,
}

/// Integer targets and their relative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub targets: Vec<(u32, f64)>,
}

impl Palette {
    /// 70..=99, multiples of five three times as likely.
    pub fn appealing() -> Self {
        Palette {
            targets: (70..=99).map(|k| (k, if k % 5 == 0 { 3.0 } else { 1.0 })).collect(),
        }
    }

    /// Every integer in `range` with equal weight.
    pub fn uniform(range: std::ops::RangeInclusive<u32>) -> Self {
        Palette {
            targets: range.map(|k| (k, 1.0)).collect(),
        }
    }

    fn multiples_of_five(&self) -> Self {
        Palette {
            targets: self.targets.iter().copied().filter(|(k, _)| k % 5 == 0).collect(),
        }
    }
}

impl Default for Palette {
    fn default() -> Self {
        Palette::appealing()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraudSpec {
    pub mechanism: Mechanism,
    pub affected_fraction: f64,
    pub target_side: TargetSide,
    pub target_metric: TargetMetric,
    /// Restricts the affected stations to these regions.
    pub region_concentration: Option<BTreeSet<String>>,
    pub palette: Palette,
    /// Largest allowed move in percentage points; defaults to 1 for integer
    /// rounding and 5 for multiples of five.
    pub max_shift: Option<f64>,
    /// Prefer numerators not ending in 0 when one lands in the window.
    pub avoid_round_counts: bool,
    /// Landing window half-width in percentage points.
    pub half_width: f64,
    /// Ballot stuffing: share of the non-voters added for the leader.
    pub stuffing_share: f64,
}

impl FraudSpec {
    pub fn new(mechanism: Mechanism, affected_fraction: f64) -> Self {
        FraudSpec {
            mechanism,
            affected_fraction,
            target_side: TargetSide::JustAbove,
            target_metric: TargetMetric::Either,
            region_concentration: None,
            palette: Palette::default(),
            max_shift: None,
            avoid_round_counts: false,
            half_width: 0.05,
            stuffing_share: 0.3,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.affected_fraction) {
            return Err(Error::param("affected_fraction must lie in [0, 1]"));
        }
        if !(self.half_width >= 0.0 && self.half_width < 0.5) {
            return Err(Error::param("landing half-width must lie in [0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&self.stuffing_share) {
            return Err(Error::param("stuffing_share must lie in [0, 1]"));
        }
        if self.palette.targets.iter().any(|&(k, w)| k > 100 || w.is_nan() || w < 0.0) {
            return Err(Error::param("palette targets must be at most 100 with non-negative weights"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionEntry {
    pub station_id: String,
    pub metric: Option<Metric>,
    pub target_percent: Option<u32>,
    pub before: [u64; 4],
    pub after: [u64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStation {
    pub station_id: String,
    pub reason: String,
}

/// Counts are `[registered, given, cast, leader]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InjectionLog {
    pub selected: usize,
    pub modified: Vec<InjectionEntry>,
    pub skipped: Vec<SkippedStation>,
}

fn as_array(s: &StationRecord) -> [u64; 4] {
    [s.registered, s.given, s.cast, s.leader]
}

/// Numerator landing on `target`% of `den` under the given side rule, or
/// `None` if no numerator in `[0, den]` lands within the half-width.
pub fn landing_numerator(den: u64, target: u32, side: TargetSide, half_width: f64, avoid_round: bool) -> Option<u64> {
    if den == 0 {
        return None;
    }
    let micros = MICROS_PER_PERCENT as u128;
    let hw = percent_to_micros(half_width) as u128;
    let d = den as u128;
    let k = target as u128;
    // x lands if |100·x/d − k| ≤ hw (just above: 0 ≤ 100·x/d − k ≤ hw)
    let offset = |x: u64| x as i128 * 100 * micros as i128 - (k * micros * d) as i128;
    let lands = |x: u64| {
        let o = offset(x);
        let limit = (hw * d) as i128;
        x <= den
            && match side {
                TargetSide::JustAbove => o >= 0 && o <= limit,
                TargetSide::Nearest => o.abs() <= limit,
            }
    };
    let ceil = ((k * d).div_ceil(100)) as u64;
    let candidates: Vec<u64> = match side {
        TargetSide::JustAbove => (ceil..=ceil.saturating_add(3)).filter(|&x| lands(x)).collect(),
        TargetSide::Nearest => {
            let mut c: Vec<u64> = (ceil.saturating_sub(4)..=ceil.saturating_add(3)).filter(|&x| lands(x)).collect();
            c.sort_by_key(|&x| (offset(x).unsigned_abs(), x));
            c
        }
    };
    let first = *candidates.first()?;
    if avoid_round && first % 10 == 0 {
        if let Some(&x) = candidates.iter().find(|&&x| x % 10 != 0) {
            return Some(x);
        }
    }
    Some(first)
}

fn pick_weighted<R: RngCore>(options: &[(u32, f64)], rng: &mut R) -> Option<u32> {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    if options.is_empty() || total <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for &(k, w) in options {
        if u < w {
            return Some(k);
        }
        u -= w;
    }
    options.iter().rev().find(|(_, w)| *w > 0.0).map(|(k, _)| *k)
}

fn round_station<R: RngCore>(s: &mut StationRecord, spec: &FraudSpec, palette: &Palette, max_shift: f64, rng: &mut R) -> std::result::Result<(Metric, u32), String> {
    let metric = match spec.target_metric {
        TargetMetric::Turnout => Metric::Turnout,
        TargetMetric::Result => Metric::Result,
        TargetMetric::Either => {
            if rng.random::<bool>() {
                Metric::Turnout
            } else {
                Metric::Result
            }
        }
    };
    let (num, den) = match metric {
        Metric::Turnout => (s.given, s.registered),
        Metric::Result => (s.leader, s.cast),
    };
    if den == 0 {
        return Err(format!("{metric} undefined"));
    }
    let current = 100.0 * num as f64 / den as f64;
    let reachable: Vec<(u32, f64)> = palette
        .targets
        .iter()
        .copied()
        .filter(|&(k, _)| (k as f64 - current).abs() <= max_shift)
        .collect();
    let target = pick_weighted(&reachable, rng).ok_or_else(|| format!("no target within {max_shift} points of {current:.2}%"))?;
    let x = landing_numerator(den, target, spec.target_side, spec.half_width, spec.avoid_round_counts)
        .ok_or_else(|| format!("{target}% unreachable with denominator {den}"))?;
    match metric {
        Metric::Turnout => {
            s.given = x;
            // fewer ballots handed out than were cast: drop the surplus
            s.cast = s.cast.min(x);
            s.leader = s.leader.min(s.cast);
        }
        Metric::Result => s.leader = x,
    }
    Ok((metric, target))
}

fn stuff_station<R: RngCore>(s: &mut StationRecord, share: f64, rng: &mut R) -> std::result::Result<(), String> {
    let room = s.registered - s.given;
    let added = binomial(room, share, rng);
    if added == 0 {
        return Err("no ballots to add".into());
    }
    s.given += added;
    s.cast += added;
    s.leader += added;
    Ok(())
}

fn extreme_station<R: RngCore>(s: &mut StationRecord, rng: &mut R) -> std::result::Result<(), String> {
    let v = s.registered;
    let slack = (v / 50).max(1);
    s.given = v - rng.random_range(0..=slack.min(v));
    s.cast = s.given;
    s.leader = s.cast - rng.random_range(0..=slack.min(s.cast));
    Ok(())
}

/// Modifies a seeded random selection of stations.
///
/// `round(affected_fraction · eligible)` stations are chosen among those in
/// `region_concentration` (all stations if unset). Stations whose target
/// cannot be reached are left unchanged and listed in the log.
pub fn inject_fraud(dataset: &ElectionDataset, spec: &FraudSpec, seed: u64) -> Result<(ElectionDataset, InjectionLog)> {
    spec.validate()?;
    let eligible: Vec<usize> = dataset
        .stations()
        .iter()
        .enumerate()
        .filter(|(_, s)| spec.region_concentration.as_ref().is_none_or(|r| r.contains(&s.region_code)))
        .map(|(i, _)| i)
        .collect();
    let amount = (spec.affected_fraction * eligible.len() as f64).round() as usize;
    let mut select_rng = stream(seed, SELECT_TAG, 0);
    let mut chosen: Vec<usize> = index::sample(&mut select_rng, eligible.len(), amount.min(eligible.len()))
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    chosen.sort_unstable();

    let palette = match spec.mechanism {
        Mechanism::FiveMultipleRounding => spec.palette.multiples_of_five(),
        _ => spec.palette.clone(),
    };
    let max_shift = spec.max_shift.unwrap_or(match spec.mechanism {
        Mechanism::FiveMultipleRounding => 5.0,
        _ => 1.0,
    });

    let mut stations = dataset.stations().to_vec();
    let mut log = InjectionLog {
        selected: chosen.len(),
        ..InjectionLog::default()
    };
    for i in chosen {
        let s = &mut stations[i];
        let before = as_array(s);
        let mut rng = stream(seed, INJECT_TAG, station_key(&dataset.label, &s.station_id));
        let mut scratch = s.clone();
        let outcome = match spec.mechanism {
            Mechanism::IntegerRounding | Mechanism::FiveMultipleRounding => {
                round_station(&mut scratch, spec, &palette, max_shift, &mut rng).map(|(m, k)| (Some(m), Some(k)))
            }
            Mechanism::BallotStuffing => stuff_station(&mut scratch, spec.stuffing_share, &mut rng).map(|_| (None, None)),
            Mechanism::ExtremeCluster => extreme_station(&mut scratch, &mut rng).map(|_| (None, None)),
        };
        match outcome {
            Ok((metric, target_percent)) => {
                debug_assert!(scratch.count_violation().is_none());
                *s = scratch;
                log.modified.push(InjectionEntry {
                    station_id: s.station_id.clone(),
                    metric,
                    target_percent,
                    before,
                    after: as_array(s),
                });
            }
            Err(reason) => log.skipped.push(SkippedStation {
                station_id: s.station_id.clone(),
                reason,
            }),
        }
    }
    Ok((dataset.with_stations_unchecked(stations), log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(n: usize, v: u64, pt: f64, pr: f64) -> GeneratorConfig {
        GeneratorConfig {
            n_stations: n,
            size: SizeDistribution::Fixed { registered: v },
            turnout: ProbabilityField::Fixed { p: pt },
            result: ProbabilityField::Fixed { p: pr },
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn mean_turnout_matches_probability() {
        let e = generate(&fixed(10_000, 1000, 0.6, 0.5), 1).unwrap();
        let mean = e.dataset.stations().iter().map(|s| s.given as f64 / 10.0).sum::<f64>() / 10_000.0;
        assert!((mean - 60.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn empty_and_deterministic() {
        assert!(generate(&fixed(0, 1000, 0.6, 0.5), 1).unwrap().dataset.is_empty());
        let cfg = GeneratorConfig {
            n_stations: 500,
            ..GeneratorConfig::default()
        };
        assert_eq!(generate(&cfg, 9).unwrap(), generate(&cfg, 9).unwrap());
        assert_ne!(generate(&cfg, 9).unwrap().dataset, generate(&cfg, 10).unwrap().dataset);
    }

    #[test]
    fn small_stations_warn() {
        let e = generate(&fixed(10, 50, 0.6, 0.5), 1).unwrap();
        assert_eq!(e.warnings.len(), 1);
    }

    #[test]
    fn generated_counts_are_consistent_and_bounded() {
        let e = generate(&GeneratorConfig::default(), 3).unwrap();
        for s in e.dataset.stations() {
            assert!(s.count_violation().is_none());
            assert!((100..=3000).contains(&s.registered));
        }
        assert_eq!(e.dataset.regions().len(), 10);
    }

    #[test]
    fn landing_examples() {
        assert_eq!(landing_numerator(1000, 70, TargetSide::JustAbove, 0.05, false), Some(700));
        assert_eq!(landing_numerator(1000, 70, TargetSide::JustAbove, 0.05, true), Some(700));
        assert_eq!(landing_numerator(2000, 70, TargetSide::JustAbove, 0.05, true), Some(1401));
        assert_eq!(landing_numerator(999, 70, TargetSide::JustAbove, 0.05, false), None);
        assert_eq!(landing_numerator(999, 70, TargetSide::JustAbove, 0.1, false), Some(700));
        assert_eq!(landing_numerator(3001, 70, TargetSide::Nearest, 0.05, false), Some(2101));
        assert_eq!(landing_numerator(7, 70, TargetSide::JustAbove, 0.05, false), None);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let ds = generate(&GeneratorConfig { n_stations: 200, ..GeneratorConfig::default() }, 4).unwrap().dataset;
        let (out, log) = inject_fraud(&ds, &FraudSpec::new(Mechanism::IntegerRounding, 0.0), 1).unwrap();
        assert_eq!(out, ds);
        assert!(log.modified.is_empty());
    }

    #[test]
    fn rounding_lands_just_above_target() {
        let ds = generate(&GeneratorConfig { n_stations: 2000, ..GeneratorConfig::default() }, 5).unwrap().dataset;
        let mut spec = FraudSpec::new(Mechanism::IntegerRounding, 0.5);
        spec.palette = Palette::uniform(1..=99);
        let (out, log) = inject_fraud(&ds, &spec, 2).unwrap();
        assert_eq!(log.selected, 1000);
        // small denominators often have no numerator in [k, k + 0.05]
        assert!(log.modified.len() > 500);
        assert_eq!(log.modified.len() + log.skipped.len(), 1000);
        assert!(log.skipped.iter().all(|s| s.reason.contains("unreachable")));
        for e in &log.modified {
            let [v, g, b, l] = e.after;
            let pct = match e.metric.unwrap() {
                Metric::Turnout => 100.0 * g as f64 / v as f64,
                Metric::Result => 100.0 * l as f64 / b as f64,
            };
            let k = e.target_percent.unwrap() as f64;
            assert!(pct >= k - 1e-9 && pct <= k + 0.05 + 1e-9, "{pct} {k}");
        }
        assert!(out.stations().iter().all(|s| s.count_violation().is_none()));
    }

    #[test]
    fn five_multiples_and_concentration() {
        let ds = generate(&GeneratorConfig { n_stations: 1000, ..GeneratorConfig::default() }, 6).unwrap().dataset;
        let mut spec = FraudSpec::new(Mechanism::FiveMultipleRounding, 1.0);
        spec.palette = Palette::uniform(1..=99);
        spec.region_concentration = Some(["R01".to_string()].into());
        let (_, log) = inject_fraud(&ds, &spec, 3).unwrap();
        assert_eq!(log.selected, 100);
        assert!(log.modified.iter().all(|e| e.target_percent.unwrap() % 5 == 0));
        assert!(log.modified.iter().all(|e| e.station_id.as_str() <= "S000100"));
    }

    #[test]
    fn stuffing_and_extreme_keep_invariants() {
        let ds = generate(&GeneratorConfig { n_stations: 500, ..GeneratorConfig::default() }, 7).unwrap().dataset;
        for m in [Mechanism::BallotStuffing, Mechanism::ExtremeCluster] {
            let (out, log) = inject_fraud(&ds, &FraudSpec::new(m, 0.3), 8).unwrap();
            assert!(out.stations().iter().all(|s| s.count_violation().is_none()));
            assert!(!log.modified.is_empty());
        }
        let (out, _) = inject_fraud(&ds, &FraudSpec::new(Mechanism::ExtremeCluster, 1.0), 8).unwrap();
        assert!(out.stations().iter().all(|s| s.given * 100 >= s.registered * 97));
    }
}
