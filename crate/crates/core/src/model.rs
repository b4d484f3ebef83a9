//! Station records, derived turnout/result ratios and the exclusion rules
//! applied before any statistic is computed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Percentages in exact comparisons are scaled to integer millionths of a
/// percentage point.
pub const MICROS_PER_PERCENT: u64 = 1_000_000;

/// Converts a percentage given as a real number into micro-percent units.
///
/// Thresholds and window widths are user-facing decimals; rounding to the
/// nearest micro-percent makes `0.05` mean exactly five hundredths.
pub fn percent_to_micros(value: f64) -> u64 {
    (value * MICROS_PER_PERCENT as f64).round().max(0.0) as u64
}

/// Which per-station percentage a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Turnout,
    Result,
}

impl Metric {
    pub const BOTH: [Metric; 2] = [Metric::Turnout, Metric::Result];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Turnout => "turnout",
            Metric::Result => "result",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One polling station's raw counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationRecord {
    pub station_id: String,
    pub region_code: String,
    pub constituency_id: String,
    pub registered: u64,
    pub given: u64,
    pub cast: u64,
    pub leader: u64,
}

impl StationRecord {
    pub fn new(
        station_id: impl Into<String>,
        region_code: impl Into<String>,
        registered: u64,
        given: u64,
        cast: u64,
        leader: u64,
    ) -> Self {
        StationRecord {
            station_id: station_id.into(),
            region_code: region_code.into(),
            constituency_id: String::new(),
            registered,
            given,
            cast,
            leader,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            registered: self.registered,
            given: self.given,
            cast: self.cast,
            leader: self.leader,
        }
    }

    /// Describes the first violated count invariant, if any.
    pub fn count_violation(&self) -> Option<&'static str> {
        if self.registered == 0 {
            Some("registered = 0")
        } else if self.leader > self.cast {
            Some("leader > cast")
        } else if self.cast > self.given {
            Some("cast > given")
        } else if self.given > self.registered {
            Some("given > registered")
        } else {
            None
        }
    }
}

/// The four counts of a station, detached from its identity. Simulation
/// code swaps numerators in and out of this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Counts {
    pub registered: u64,
    pub given: u64,
    pub cast: u64,
    pub leader: u64,
}

impl Counts {
    pub fn turnout(&self) -> Option<Fraction> {
        Fraction::new(self.given, self.registered)
    }

    pub fn result(&self) -> Option<Fraction> {
        Fraction::new(self.leader, self.cast)
    }

    pub fn metric(&self, metric: Metric) -> Option<Fraction> {
        match metric {
            Metric::Turnout => self.turnout(),
            Metric::Result => self.result(),
        }
    }
}

/// A percentage held as the exact ratio `num / den · 100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    /// `None` when the denominator is zero.
    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0).then_some(Fraction { num, den })
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.num as f64 / self.den as f64
    }

    /// Exact comparison of this percentage against `micros` micro-percent.
    pub fn cmp_micros(&self, micros: u64) -> Ordering {
        let lhs = self.num as u128 * 100 * MICROS_PER_PERCENT as u128;
        let rhs = micros as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }

    pub fn exceeds_percent(&self, percent: f64) -> bool {
        self.cmp_micros(percent_to_micros(percent)) == Ordering::Greater
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({:.4}%)", self.num, self.den, self.percent())
    }
}

/// Turnout and leader's result of one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationMetrics {
    pub turnout: Fraction,
    /// Absent when no ballots were cast.
    pub result: Option<Fraction>,
}

pub fn compute_metrics(record: &StationRecord) -> Result<StationMetrics> {
    let turnout = Fraction::new(record.given, record.registered).ok_or_else(|| Error::Domain {
        station_id: record.station_id.clone(),
        message: "turnout undefined: zero registered voters".into(),
    })?;
    Ok(StationMetrics {
        turnout,
        result: Fraction::new(record.leader, record.cast),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    InvalidCounts,
    TooSmall,
    OverMaxTurnout,
    OverMaxResult,
    UndefinedResult,
}

impl ExclusionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExclusionReason::InvalidCounts => "invalid_counts",
            ExclusionReason::TooSmall => "too_small",
            ExclusionReason::OverMaxTurnout => "over_max_turnout",
            ExclusionReason::OverMaxResult => "over_max_result",
            ExclusionReason::UndefinedResult => "undefined_result",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub station_id: String,
    pub region_code: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_registered: u64,
    /// Stations whose turnout or result is strictly above this are dropped.
    pub max_percentage: f64,
    pub exclude_undefined_result: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_registered: 100,
            max_percentage: 99.0,
            exclude_undefined_result: true,
        }
    }
}

impl FilterPolicy {
    /// Primary exclusion reason for a station, `None` if it survives.
    ///
    /// Precedence: invalid_counts, too_small, over_max_turnout,
    /// over_max_result, undefined_result.
    pub fn classify(&self, record: &StationRecord) -> Option<ExclusionReason> {
        if record.count_violation().is_some() {
            return Some(ExclusionReason::InvalidCounts);
        }
        if record.registered < self.min_registered {
            return Some(ExclusionReason::TooSmall);
        }
        let max = percent_to_micros(self.max_percentage);
        let counts = record.counts();
        // count_violation() guarantees registered > 0
        let turnout = counts.turnout().expect("registered > 0");
        if turnout.cmp_micros(max) == Ordering::Greater {
            return Some(ExclusionReason::OverMaxTurnout);
        }
        match counts.result() {
            Some(result) if result.cmp_micros(max) == Ordering::Greater => {
                Some(ExclusionReason::OverMaxResult)
            }
            None if self.exclude_undefined_result => Some(ExclusionReason::UndefinedResult),
            _ => None,
        }
    }
}

/// Validated collection of stations for one election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionDataset {
    pub label: String,
    stations: Vec<StationRecord>,
    filter_log: Vec<FilterEntry>,
}

impl ElectionDataset {
    /// Fails on duplicate station ids.
    pub fn new(label: impl Into<String>, stations: Vec<StationRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(stations.len());
        for s in &stations {
            if !seen.insert(s.station_id.as_str()) {
                return Err(Error::DuplicateStation(s.station_id.clone()));
            }
        }
        Ok(ElectionDataset {
            label: label.into(),
            stations,
            filter_log: Vec::new(),
        })
    }

    pub fn empty(label: impl Into<String>) -> Self {
        ElectionDataset {
            label: label.into(),
            stations: Vec::new(),
            filter_log: Vec::new(),
        }
    }

    pub fn stations(&self) -> &[StationRecord] {
        &self.stations
    }

    pub fn filter_log(&self) -> &[FilterEntry] {
        &self.filter_log
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Keeps stations matching `keep`; ids are already unique so no re-check.
    pub fn retain_stations(&self, mut keep: impl FnMut(&StationRecord) -> bool) -> Self {
        ElectionDataset {
            label: self.label.clone(),
            stations: self.stations.iter().filter(|s| keep(s)).cloned().collect(),
            filter_log: self.filter_log.clone(),
        }
    }

    pub(crate) fn with_stations_unchecked(&self, stations: Vec<StationRecord>) -> Self {
        ElectionDataset {
            label: self.label.clone(),
            stations,
            filter_log: self.filter_log.clone(),
        }
    }

    /// Sorted distinct region codes.
    pub fn regions(&self) -> Vec<String> {
        let mut codes: Vec<String> = self.stations.iter().map(|s| s.region_code.clone()).collect();
        codes.sort();
        codes.dedup();
        codes
    }

    pub fn totals(&self) -> Counts {
        self.stations.iter().fold(Counts::default(), |acc, s| Counts {
            registered: acc.registered + s.registered,
            given: acc.given + s.given,
            cast: acc.cast + s.cast,
            leader: acc.leader + s.leader,
        })
    }

    pub fn totals_by_region(&self) -> BTreeMap<String, Counts> {
        let mut out: BTreeMap<String, Counts> = BTreeMap::new();
        for s in &self.stations {
            let t = out.entry(s.region_code.clone()).or_default();
            t.registered += s.registered;
            t.given += s.given;
            t.cast += s.cast;
            t.leader += s.leader;
        }
        out
    }
}

/// Drops stations that fail `policy`, appending one log entry per exclusion.
pub fn apply_filters(dataset: &ElectionDataset, policy: &FilterPolicy) -> ElectionDataset {
    let mut stations = Vec::with_capacity(dataset.stations.len());
    let mut filter_log = dataset.filter_log.clone();
    for s in &dataset.stations {
        match policy.classify(s) {
            None => stations.push(s.clone()),
            Some(reason) => filter_log.push(FilterEntry {
                station_id: s.station_id.clone(),
                region_code: s.region_code.clone(),
                reason,
            }),
        }
    }
    ElectionDataset {
        label: dataset.label.clone(),
        stations,
        filter_log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, registered: u64, given: u64, cast: u64, leader: u64) -> StationRecord {
        StationRecord::new(id, "XX", registered, given, cast, leader)
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&rec("a", 974, 682, 682, 300)).unwrap();
        assert!((m.turnout.percent() - 70.0205).abs() < 1e-4);

        let m = compute_metrics(&rec("b", 1000, 1000, 1000, 1000)).unwrap();
        assert_eq!(m.turnout.percent(), 100.0);
        assert_eq!(m.result.unwrap().percent(), 100.0);

        let m = compute_metrics(&rec("c", 800, 600, 598, 299)).unwrap();
        assert_eq!(m.turnout.percent(), 75.0);
        assert_eq!(m.result.unwrap().percent(), 50.0);
    }

    #[test]
    fn zero_registered_is_domain_error() {
        let err = compute_metrics(&rec("st-9", 0, 0, 0, 0)).unwrap_err();
        assert!(err.to_string().contains("st-9"));
    }

    #[test]
    fn result_absent_without_cast_ballots() {
        let m = compute_metrics(&rec("a", 500, 0, 0, 0)).unwrap();
        assert!(m.result.is_none());
    }

    #[test]
    fn filter_examples() {
        let policy = FilterPolicy::default();
        assert_eq!(policy.classify(&rec("a", 99, 50, 50, 20)), Some(ExclusionReason::TooSmall));
        // 993/1000 = 99.3%
        assert_eq!(
            policy.classify(&rec("b", 1000, 993, 990, 500)),
            Some(ExclusionReason::OverMaxTurnout)
        );
        assert_eq!(policy.classify(&rec("c", 500, 425, 420, 294)), None);
        // exactly 99% survives
        assert_eq!(policy.classify(&rec("d", 1000, 990, 990, 500)), None);
        assert_eq!(
            policy.classify(&rec("e", 1000, 600, 600, 597)),
            Some(ExclusionReason::OverMaxResult)
        );
        assert_eq!(
            policy.classify(&rec("f", 1000, 0, 0, 0)),
            Some(ExclusionReason::UndefinedResult)
        );
    }

    #[test]
    fn precedence_too_small_before_percentages() {
        let policy = FilterPolicy::default();
        assert_eq!(policy.classify(&rec("a", 50, 50, 50, 50)), Some(ExclusionReason::TooSmall));
        assert_eq!(
            policy.classify(&rec("b", 500, 500, 500, 500)),
            Some(ExclusionReason::OverMaxTurnout)
        );
    }

    #[test]
    fn invalid_counts_are_flagged_not_fatal() {
        let ds = ElectionDataset::new(
            "t",
            vec![rec("bad", 500, 600, 500, 100), rec("ok", 500, 300, 300, 100)],
        )
        .unwrap();
        let out = apply_filters(&ds, &FilterPolicy::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out.filter_log().len(), 1);
        assert_eq!(out.filter_log()[0].reason, ExclusionReason::InvalidCounts);
        assert_eq!(out.filter_log()[0].station_id, "bad");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = ElectionDataset::new("t", vec![rec("a", 1, 1, 1, 1), rec("a", 2, 2, 2, 2)]);
        assert!(matches!(err, Err(Error::DuplicateStation(id)) if id == "a"));
    }

    #[test]
    fn exact_boundary_comparison() {
        // 99/100 is exactly 99%, not greater
        let f = Fraction::new(99, 100).unwrap();
        assert_eq!(f.cmp_micros(percent_to_micros(99.0)), Ordering::Equal);
        assert!(!f.exceeds_percent(99.0));
        assert!(Fraction::new(991, 1000).unwrap().exceeds_percent(99.0));
    }
}
