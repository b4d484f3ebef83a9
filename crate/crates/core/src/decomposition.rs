//! Geographic attribution of integer peaks and 2D turnout/result fingerprints.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{CenterKind, NullConfig};
use crate::model::{ElectionDataset, Fraction, Metric};
use crate::sampling::{MetricSet, SimStations};
use crate::shape::{build_histogram, BinGrid, HistogramOptions};
use crate::{Error, Result};

/// Percentages at which peak amplitudes are read off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub centers: CenterKind,
    pub percents: Vec<f64>,
}

impl CandidateSet {
    /// Integers 71..=99: 29 per metric, 58 over turnout and result.
    pub fn integer() -> Self {
        CandidateSet {
            centers: CenterKind::Integer,
            percents: (71..=99).map(|k| k as f64).collect(),
        }
    }

    /// Half-integers 70.5..=99.5.
    pub fn half_integer() -> Self {
        CandidateSet {
            centers: CenterKind::HalfInteger,
            percents: (70..=99).map(|k| k as f64 + 0.5).collect(),
        }
    }

    pub fn for_centers(centers: CenterKind) -> Self {
        match centers {
            CenterKind::Integer => Self::integer(),
            CenterKind::HalfInteger => Self::half_integer(),
        }
    }

    /// Number of (metric, percent) candidates.
    pub fn len(&self) -> usize {
        2 * self.percents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.percents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakLocation {
    pub metric: Metric,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPeakRow {
    pub label: String,
    pub region_code: String,
    pub n_stations: usize,
    /// Registered voters in the peak bin minus the MC mean; absent without stations.
    pub peak_amplitude: Option<f64>,
    pub peak_location: Option<PeakLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRank {
    pub region_code: String,
    pub max_amplitude: Option<f64>,
    pub label: Option<String>,
    pub location: Option<PeakLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPeakTable {
    pub candidates: CandidateSet,
    pub rows: Vec<RegionPeakRow>,
    /// Regions ordered by their largest amplitude over all labels.
    pub ranking: Vec<RegionRank>,
}

impl RegionPeakTable {
    pub fn top_regions(&self, k: usize) -> Vec<String> {
        self.ranking.iter().take(k).map(|r| r.region_code.clone()).collect()
    }
}

/// Per-region histogram excess at the candidate bins, for one election.
///
/// Histograms are voter-weighted at 0.1% resolution. The MC mean of each
/// region's histogram is accumulated from a single national pass, so every
/// station keeps the draws it has in any other analysis with the same seed.
fn region_excess(
    dataset: &ElectionDataset,
    regions: &[String],
    candidates: &CandidateSet,
    cfg: &NullConfig,
) -> Result<Vec<RegionPeakRow>> {
    let grid = BinGrid::DEFAULT;
    let bins: Vec<usize> = candidates
        .percents
        .iter()
        .map(|&p| {
            grid.index_of_center(p)
                .ok_or_else(|| Error::param(format!("candidate {p}% is not a 0.1% bin center")))
        })
        .collect::<Result<_>>()?;
    let region_index: HashMap<&str, usize> = regions.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
    let station_region: Vec<usize> = dataset
        .stations()
        .iter()
        .map(|s| region_index[s.region_code.as_str()])
        .collect();

    let n_regions = regions.len();
    let n_cand = bins.len();
    // layout: [region][metric][candidate]
    let slot = |r: usize, m: usize, c: usize| (r * 2 + m) * n_cand + c;
    let bin_to_cand: HashMap<usize, usize> = bins.iter().enumerate().map(|(c, &b)| (b, c)).collect();

    let mut empirical = vec![0u64; n_regions * 2 * n_cand];
    let mut n_stations = vec![0usize; n_regions];
    for (s, &r) in dataset.stations().iter().zip(&station_region) {
        n_stations[r] += 1;
        let counts = s.counts();
        for (m, metric) in Metric::BOTH.iter().enumerate() {
            if let Some(&c) = counts.metric(*metric).and_then(|f| bin_to_cand.get(&grid.bin_of(f))) {
                empirical[slot(r, m, c)] += s.registered;
            }
        }
    }

    cfg.validate()?;
    let sim = SimStations::new(&dataset.label, dataset.stations());
    let mc_sum = (0..cfg.iterations as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; n_regions * 2 * n_cand],
            |mut acc, iteration| {
                for (i, &r) in station_region.iter().enumerate() {
                    let c = sim.simulate(i, cfg.model, cfg.master_seed, iteration, MetricSet::BOTH);
                    for (m, metric) in Metric::BOTH.iter().enumerate() {
                        if let Some(&k) = c.metric(*metric).and_then(|f: Fraction| bin_to_cand.get(&grid.bin_of(f))) {
                            acc[slot(r, m, k)] += c.registered;
                        }
                    }
                }
                acc
            },
        )
        // integer sums: the reduction order does not matter
        .reduce(
            || vec![0u64; n_regions * 2 * n_cand],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let iterations = cfg.iterations as f64;
    Ok(regions
        .iter()
        .enumerate()
        .map(|(r, code)| {
            let mut best: Option<(f64, PeakLocation)> = None;
            if n_stations[r] > 0 {
                // candidates are visited by percent, turnout before result, so
                // strict improvement keeps the lower percentage on ties
                for (c, &percent) in candidates.percents.iter().enumerate() {
                    for (m, metric) in Metric::BOTH.iter().enumerate() {
                        let excess = empirical[slot(r, m, c)] as f64 - mc_sum[slot(r, m, c)] as f64 / iterations;
                        if best.as_ref().is_none_or(|(b, _)| excess > *b) {
                            best = Some((excess, PeakLocation { metric: *metric, percent }));
                        }
                    }
                }
            }
            RegionPeakRow {
                label: dataset.label.clone(),
                region_code: code.clone(),
                n_stations: n_stations[r],
                peak_amplitude: best.as_ref().map(|(a, _)| *a),
                peak_location: best.map(|(_, l)| l),
            }
        })
        .collect())
}

/// Region × election table of maximal candidate-bin excesses, plus a ranking.
///
/// `datasets` are the elections (e.g. one per year), already filtered. Every
/// region seen in any election gets a row for every election.
pub fn region_peaks(datasets: &[ElectionDataset], candidates: &CandidateSet, cfg: &NullConfig) -> Result<RegionPeakTable> {
    if candidates.is_empty() {
        return Err(Error::param("no peak candidates"));
    }
    let regions: Vec<String> = datasets
        .iter()
        .flat_map(|d| d.stations().iter().map(|s| s.region_code.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rows = Vec::new();
    for ds in datasets {
        rows.extend(region_excess(ds, &regions, candidates, cfg)?);
    }

    let mut best: BTreeMap<&str, Option<&RegionPeakRow>> = regions.iter().map(|r| (r.as_str(), None)).collect();
    for row in &rows {
        if let Some(a) = row.peak_amplitude {
            let slot = best.get_mut(row.region_code.as_str()).expect("known region");
            if slot.is_none_or(|b| a > b.peak_amplitude.expect("set")) {
                *slot = Some(row);
            }
        }
    }
    let mut ranking: Vec<RegionRank> = best
        .into_iter()
        .map(|(code, row)| RegionRank {
            region_code: code.to_string(),
            max_amplitude: row.and_then(|r| r.peak_amplitude),
            label: row.map(|r| r.label.clone()),
            location: row.and_then(|r| r.peak_location.clone()),
        })
        .collect();
    ranking.sort_by(|a, b| {
        let key = |r: &RegionRank| r.max_amplitude.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then_with(|| a.region_code.cmp(&b.region_code))
    });
    Ok(RegionPeakTable {
        candidates: candidates.clone(),
        rows,
        ranking,
    })
}

fn check_codes(codes: &BTreeSet<String>) -> Result<()> {
    for c in codes {
        let ok = !c.is_empty() && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_');
        if !ok {
            return Err(Error::param(format!("malformed region code `{c}`")));
        }
    }
    Ok(())
}

/// Result of a region selection: the new dataset and codes absent from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSelection {
    pub dataset: ElectionDataset,
    pub unknown_codes: Vec<String>,
}

fn select_regions(dataset: &ElectionDataset, codes: &BTreeSet<String>, keep_listed: bool) -> Result<RegionSelection> {
    check_codes(codes)?;
    let present: BTreeSet<String> = dataset.regions().into_iter().collect();
    let unknown_codes = codes.difference(&present).cloned().collect();
    Ok(RegionSelection {
        dataset: dataset.retain_stations(|s| codes.contains(&s.region_code) == keep_listed),
        unknown_codes,
    })
}

/// Drops every station in the listed regions.
pub fn exclude_regions(dataset: &ElectionDataset, codes: &BTreeSet<String>) -> Result<RegionSelection> {
    select_regions(dataset, codes, false)
}

/// Keeps only stations in the listed regions.
pub fn restrict_regions(dataset: &ElectionDataset, codes: &BTreeSet<String>) -> Result<RegionSelection> {
    select_regions(dataset, codes, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationWeighting {
    #[default]
    Unweighted,
    RegisteredVoters,
}

/// Joint turnout × result histogram in 0.5% cells weighted by registered voters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint2D {
    pub cells_per_axis: usize,
    /// Row-major, `weights[turnout_cell * cells_per_axis + result_cell]`.
    pub weights: Vec<u64>,
    pub n_stations: usize,
    pub correlation: Option<f64>,
    pub correlation_weighting: CorrelationWeighting,
}

impl Fingerprint2D {
    pub const CELL_WIDTH: f64 = 0.5;
    const CELLS: usize = 200;

    /// Cell index; 100% falls into the last cell.
    pub fn cell_of(value: Fraction) -> usize {
        let idx = (2 * 100 * value.num as u128) / value.den as u128;
        (idx as usize).min(Self::CELLS - 1)
    }

    pub fn weight(&self, turnout_cell: usize, result_cell: usize) -> u64 {
        self.weights[turnout_cell * self.cells_per_axis + result_cell]
    }

    pub fn total(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub fn occupied_cells(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0).count()
    }

    /// Cell-wise sum. The correlation of a union cannot be derived from the
    /// parts, so it is left absent.
    pub fn add(&self, other: &Fingerprint2D) -> Fingerprint2D {
        Fingerprint2D {
            cells_per_axis: self.cells_per_axis,
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
            n_stations: self.n_stations + other.n_stations,
            correlation: None,
            correlation_weighting: self.correlation_weighting,
        }
    }
}

/// Pearson correlation of paired values with optional weights.
/// `None` with fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..xs.len()).map(w).sum();
    if total <= 0.0 {
        return None;
    }
    let mx = (0..xs.len()).map(|i| w(i) * xs[i]).sum::<f64>() / total;
    let my = (0..ys.len()).map(|i| w(i) * ys[i]).sum::<f64>() / total;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..xs.len() {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += w(i) * dx * dy;
        sxx += w(i) * dx * dx;
        syy += w(i) * dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Stations without a defined result are skipped.
pub fn fingerprint(dataset: &ElectionDataset, weighting: CorrelationWeighting) -> Fingerprint2D {
    let n = Fingerprint2D::CELLS;
    let mut weights = vec![0u64; n * n];
    let mut xs = Vec::with_capacity(dataset.len());
    let mut ys = Vec::with_capacity(dataset.len());
    let mut ws = Vec::with_capacity(dataset.len());
    for s in dataset.stations() {
        let c = s.counts();
        let (Some(t), Some(r)) = (c.turnout(), c.result()) else {
            continue;
        };
        weights[Fingerprint2D::cell_of(t) * n + Fingerprint2D::cell_of(r)] += s.registered;
        xs.push(t.percent());
        ys.push(r.percent());
        ws.push(s.registered as f64);
    }
    let correlation = match weighting {
        CorrelationWeighting::Unweighted => pearson(&xs, &ys, None),
        CorrelationWeighting::RegisteredVoters => pearson(&xs, &ys, Some(&ws)),
    };
    Fingerprint2D {
        cells_per_axis: n,
        weights,
        n_stations: xs.len(),
        correlation,
        correlation_weighting: weighting,
    }
}

/// Voter-weighted histograms of both metrics, for the additivity checks.
pub fn metric_histograms(dataset: &ElectionDataset, opts: &HistogramOptions) -> [crate::shape::WeightedHistogram; 2] {
    Metric::BOTH.map(|m| build_histogram(dataset, m, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StationRecord;

    fn codes(list: &[&str]) -> BTreeSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn sample() -> ElectionDataset {
        ElectionDataset::new(
            "d",
            vec![
                StationRecord::new("1", "AA", 1000, 700, 700, 600),
                StationRecord::new("2", "AA", 800, 500, 500, 200),
                StationRecord::new("3", "BB", 900, 450, 440, 300),
                StationRecord::new("4", "CC", 1200, 900, 880, 700),
            ],
        )
        .unwrap()
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(CandidateSet::integer().len(), 58);
        assert_eq!(CandidateSet::half_integer().len(), 60);
    }

    #[test]
    fn exclusion_identity_and_total() {
        let ds = sample();
        let sel = exclude_regions(&ds, &BTreeSet::new()).unwrap();
        assert_eq!(sel.dataset, ds);
        let sel = exclude_regions(&ds, &codes(&["AA", "BB", "CC"])).unwrap();
        assert!(sel.dataset.is_empty());
    }

    #[test]
    fn unknown_codes_are_warnings() {
        let sel = exclude_regions(&sample(), &codes(&["AA", "ZZ"])).unwrap();
        assert_eq!(sel.unknown_codes, vec!["ZZ".to_string()]);
        assert_eq!(sel.dataset.len(), 2);
        assert!(exclude_regions(&sample(), &codes(&["A A"])).is_err());
    }

    #[test]
    fn restrict_is_complement_of_exclude() {
        let ds = sample();
        let set = codes(&["AA"]);
        let a = exclude_regions(&ds, &set).unwrap().dataset;
        let b = restrict_regions(&ds, &set).unwrap().dataset;
        assert_eq!(a.len() + b.len(), ds.len());
        assert!(b.stations().iter().all(|s| s.region_code == "AA"));
    }

    #[test]
    fn fingerprint_degenerate_and_perfect() {
        let same = ElectionDataset::new(
            "f",
            (0..5).map(|i| StationRecord::new(format!("{i}"), "R", 1000, 700, 700, 420)).collect(),
        )
        .unwrap();
        let fp = fingerprint(&same, CorrelationWeighting::Unweighted);
        assert_eq!(fp.occupied_cells(), 1);
        assert_eq!(fp.weight(140, 120), 5000);
        assert!(fp.correlation.is_none());

        let equal = ElectionDataset::new(
            "e",
            (1..20u64)
                .map(|i| StationRecord::new(format!("{i}"), "R", 2000, 100 * i, 1000, 50 * i))
                .collect(),
        )
        .unwrap();
        let fp = fingerprint(&equal, CorrelationWeighting::Unweighted);
        assert!((fp.correlation.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fingerprint_too_few_stations() {
        let one = ElectionDataset::new("o", vec![StationRecord::new("1", "R", 1000, 700, 700, 420)]).unwrap();
        assert!(fingerprint(&one, CorrelationWeighting::Unweighted).correlation.is_none());
    }

    #[test]
    fn cells_split_at_half_percent() {
        assert_eq!(Fingerprint2D::cell_of(Fraction::new(0, 10).unwrap()), 0);
        assert_eq!(Fingerprint2D::cell_of(Fraction::new(5, 1000).unwrap()), 1);
        assert_eq!(Fingerprint2D::cell_of(Fraction::new(4, 1000).unwrap()), 0);
        assert_eq!(Fingerprint2D::cell_of(Fraction::new(10, 10).unwrap()), 199);
    }
}
