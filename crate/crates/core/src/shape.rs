//! Voter-weighted percentage histograms, Monte Carlo envelopes and the
//! average integer-peak shape.
//!
//! Bins are centred on multiples of the bin width and are lower-closed:
//! with the default 0.1% width the bin at 70.0 holds `[69.95, 70.05)`.
//! Each station adds its registered-voter count to the bin of its turnout
//! (or result). The grid runs from 0% to 100% inclusive; the 100% bin is
//! kept in the data and only dropped when a histogram is presented.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anomaly::{percentile, NullConfig};
use crate::model::{Counts, ElectionDataset, Fraction, Metric};
use crate::sampling::{mix64, MetricSet, SimRng, SimStations};
use crate::{Error, Result};

/// Uniform bin grid over 0..=100%, `bins_per_percent` bins per percentage point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinGrid {
    pub bins_per_percent: u32,
}

impl BinGrid {
    pub const DEFAULT: BinGrid = BinGrid { bins_per_percent: 10 };

    /// Grid with the given bin width in percent; the width must divide 1%.
    pub fn from_width(width: f64) -> Result<Self> {
        if !(width > 0.0 && width <= 1.0) {
            return Err(Error::param(format!("bin width must be in (0, 1], got {width}")));
        }
        let per = 1.0 / width;
        let rounded = per.round();
        if (per - rounded).abs() > 1e-9 * per {
            return Err(Error::param(format!("bin width {width} does not divide 1% evenly")));
        }
        Ok(BinGrid {
            bins_per_percent: rounded as u32,
        })
    }

    pub fn width(&self) -> f64 {
        1.0 / self.bins_per_percent as f64
    }

    pub fn n_bins(&self) -> usize {
        100 * self.bins_per_percent as usize + 1
    }

    pub fn center(&self, index: usize) -> f64 {
        index as f64 / self.bins_per_percent as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.center(i)).collect()
    }

    /// Bin holding an exact percentage.
    pub fn bin_of(&self, value: Fraction) -> usize {
        let m = self.bins_per_percent as u128;
        let num = value.num as u128;
        let den = value.den as u128;
        let idx = (2 * m * 100 * num + den) / (2 * den);
        (idx as usize).min(self.n_bins() - 1)
    }

    /// Bin of a real-valued percentage; used when the numerator is jittered.
    pub fn bin_of_real(&self, percent: f64) -> usize {
        let idx = (percent * self.bins_per_percent as f64 + 0.5).floor();
        idx.clamp(0.0, (self.n_bins() - 1) as f64) as usize
    }

    /// Index of the bin centred exactly on `percent`, if it is a grid point.
    pub fn index_of_center(&self, percent: f64) -> Option<usize> {
        let pos = percent * self.bins_per_percent as f64;
        let idx = pos.round();
        ((pos - idx).abs() < 1e-9 && idx >= 0.0 && (idx as usize) < self.n_bins()).then_some(idx as usize)
    }
}

impl Default for BinGrid {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HistogramOptions {
    pub grid: BinGrid,
    /// Adds U(-0.5, 0.5) to each numerator before dividing, seeded per station.
    pub jitter_seed: Option<u64>,
}

impl HistogramOptions {
    pub fn with_grid(grid: BinGrid) -> Self {
        HistogramOptions { grid, jitter_seed: None }
    }

    #[inline]
    fn bin(&self, counts: &Counts, metric: Metric, station_key: u64, salt: u64) -> Option<usize> {
        let f = counts.metric(metric)?;
        Some(match self.jitter_seed {
            None => self.grid.bin_of(f),
            Some(seed) => {
                let tag = match metric {
                    Metric::Turnout => 0x4a49_5454_4552_5431,
                    Metric::Result => 0x4a49_5454_4552_5232,
                };
                let mut rng = SimRng::from_state(mix64(mix64(seed ^ tag) ^ station_key) ^ salt);
                let u: f64 = rng.random::<f64>() - 0.5;
                self.grid.bin_of_real(100.0 * (f.num as f64 + u) / f.den as f64)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedHistogram {
    pub metric: Metric,
    pub grid: BinGrid,
    pub weights: Vec<f64>,
}

impl WeightedHistogram {
    pub fn zeros(metric: Metric, grid: BinGrid) -> Self {
        WeightedHistogram {
            metric,
            grid,
            weights: vec![0.0; grid.n_bins()],
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Copy with the 100% bin zeroed, for presentation.
    pub fn without_full_bin(&self) -> Self {
        let mut out = self.clone();
        if let Some(last) = out.weights.last_mut() {
            *last = 0.0;
        }
        out
    }

    fn check_compatible(&self, other: &WeightedHistogram) -> Result<()> {
        if self.grid != other.grid || self.metric != other.metric {
            return Err(Error::param(format!(
                "histogram grids differ: {} at {}% vs {} at {}%",
                self.metric,
                self.grid.width(),
                other.metric,
                other.grid.width()
            )));
        }
        Ok(())
    }

    /// Cell-wise sum; histograms of disjoint station sets add up to the whole.
    pub fn add(&self, other: &WeightedHistogram) -> Result<WeightedHistogram> {
        self.check_compatible(other)?;
        let weights = self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect();
        Ok(WeightedHistogram { weights, ..self.clone() })
    }
}

pub fn build_histogram(dataset: &ElectionDataset, metric: Metric, opts: &HistogramOptions) -> WeightedHistogram {
    let mut hist = WeightedHistogram::zeros(metric, opts.grid);
    let sim = opts
        .jitter_seed
        .map(|_| SimStations::new(&dataset.label, dataset.stations()));
    for (i, s) in dataset.stations().iter().enumerate() {
        let key = sim.as_ref().map_or(0, |sim| sim.keys[i]);
        if let Some(bin) = opts.bin(&s.counts(), metric, key, 0) {
            hist.weights[bin] += s.registered as f64;
        }
    }
    hist
}

/// Per-bin arithmetic mean of histograms on the same grid.
pub fn average_histograms(histograms: &[WeightedHistogram]) -> Result<WeightedHistogram> {
    let first = histograms
        .first()
        .ok_or_else(|| Error::param("cannot average an empty histogram list"))?;
    let mut sum = WeightedHistogram::zeros(first.metric, first.grid);
    for h in histograms {
        sum = sum.add(h)?;
    }
    let n = histograms.len() as f64;
    sum.weights.iter_mut().for_each(|w| *w /= n);
    Ok(sum)
}

/// Simulated histograms, one row per Monte Carlo iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedHistograms {
    pub metric: Metric,
    pub grid: BinGrid,
    iterations: usize,
    data: Vec<f64>,
}

impl SimulatedHistograms {
    /// Wraps explicitly given histograms as a simulation set.
    pub fn from_histograms(histograms: &[WeightedHistogram]) -> Result<Self> {
        let first = histograms
            .first()
            .ok_or_else(|| Error::param("empty simulation set"))?;
        for h in histograms {
            first.check_compatible(h)?;
        }
        Ok(SimulatedHistograms {
            metric: first.metric,
            grid: first.grid,
            iterations: histograms.len(),
            data: histograms.iter().flat_map(|h| h.weights.iter().copied()).collect(),
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn row(&self, iteration: usize) -> &[f64] {
        let n = self.grid.n_bins();
        &self.data[iteration * n..(iteration + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.grid.n_bins())
    }

    pub fn row_histogram(&self, iteration: usize) -> WeightedHistogram {
        WeightedHistogram {
            metric: self.metric,
            grid: self.grid,
            weights: self.row(iteration).to_vec(),
        }
    }

    pub fn mean_histogram(&self) -> WeightedHistogram {
        let n = self.grid.n_bins();
        let mut weights = vec![0.0; n];
        for row in self.rows() {
            weights.iter_mut().zip(row).for_each(|(w, x)| *w += x);
        }
        weights.iter_mut().for_each(|w| *w /= self.iterations as f64);
        WeightedHistogram {
            metric: self.metric,
            grid: self.grid,
            weights,
        }
    }

    pub fn envelope(&self, levels: (f64, f64)) -> Envelope {
        let n = self.grid.n_bins();
        let mean = self.mean_histogram().weights;
        let mut low = vec![0.0; n];
        let mut high = vec![0.0; n];
        let mut column = vec![0.0; self.iterations];
        for bin in 0..n {
            for (it, v) in column.iter_mut().enumerate() {
                *v = self.data[it * n + bin];
            }
            column.sort_by(|a, b| a.total_cmp(b));
            low[bin] = percentile(&column, levels.0);
            high[bin] = percentile(&column, levels.1);
        }
        Envelope {
            metric: self.metric,
            grid: self.grid,
            levels,
            mean,
            low,
            high,
        }
    }

    /// Iteration-wise average across several elections (e.g. years).
    pub fn average(sets: &[&SimulatedHistograms]) -> Result<SimulatedHistograms> {
        let first = sets
            .first()
            .ok_or_else(|| Error::param("cannot average an empty set of simulations"))?;
        for s in sets {
            if s.grid != first.grid || s.metric != first.metric || s.iterations != first.iterations {
                return Err(Error::param(
                    "simulated histograms differ in grid, metric or iteration count",
                ));
            }
        }
        let k = sets.len() as f64;
        let data = (0..first.data.len())
            .map(|i| sets.iter().map(|s| s.data[i]).sum::<f64>() / k)
            .collect();
        Ok(SimulatedHistograms {
            data,
            ..(*first).clone()
        })
    }
}

/// Simulated histograms for each requested metric from one Monte Carlo pass.
pub fn simulate_histograms(
    dataset: &ElectionDataset,
    metrics: &[Metric],
    opts: &HistogramOptions,
    cfg: &NullConfig,
) -> Result<Vec<SimulatedHistograms>> {
    cfg.validate()?;
    let sim = SimStations::new(&dataset.label, dataset.stations());
    let which = metrics
        .iter()
        .map(|&m| MetricSet::only(m))
        .fold(MetricSet { turnout: false, result: false }, MetricSet::union);
    let n_bins = opts.grid.n_bins();
    let rows: Vec<Vec<Vec<u64>>> = (0..cfg.iterations as u64)
        .into_par_iter()
        .map(|iteration| {
            let mut hists = vec![vec![0u64; n_bins]; metrics.len()];
            for i in 0..sim.len() {
                let c = sim.simulate(i, cfg.model, cfg.master_seed, iteration, which);
                for (h, &metric) in hists.iter_mut().zip(metrics) {
                    if let Some(bin) = opts.bin(&c, metric, sim.keys[i], iteration.wrapping_add(1)) {
                        h[bin] += c.registered;
                    }
                }
            }
            hists
        })
        .collect();
    Ok(metrics
        .iter()
        .enumerate()
        .map(|(k, &metric)| SimulatedHistograms {
            metric,
            grid: opts.grid,
            iterations: cfg.iterations,
            data: rows.iter().flat_map(|r| r[k].iter().map(|&w| w as f64)).collect(),
        })
        .collect())
}

/// Per-bin percentile band and mean of simulated histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub metric: Metric,
    pub grid: BinGrid,
    pub levels: (f64, f64),
    pub mean: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Envelope {
    pub fn mean_histogram(&self) -> WeightedHistogram {
        WeightedHistogram {
            metric: self.metric,
            grid: self.grid,
            weights: self.mean.clone(),
        }
    }

    /// Fraction of bins in which `hist` lies inside `[low, high]`.
    pub fn coverage(&self, hist: &WeightedHistogram) -> f64 {
        let inside = hist
            .weights
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .filter(|(w, (lo, hi))| *lo <= *w && *w <= *hi)
            .count();
        inside as f64 / hist.weights.len() as f64
    }
}

pub fn histogram_envelope(
    dataset: &ElectionDataset,
    metric: Metric,
    opts: &HistogramOptions,
    cfg: &NullConfig,
) -> Result<Envelope> {
    let sims = simulate_histograms(dataset, &[metric], opts, cfg)?;
    Ok(sims[0].envelope(cfg.levels))
}

/// Average excess of the empirical histogram over the MC mean in 1%-long
/// intervals centred on the integers 1..=99.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakShape {
    pub offsets: Vec<f64>,
    pub mean_excess: Vec<f64>,
    pub intervals: usize,
}

/// Peak shape over `(empirical, mc_mean)` pairs, 99 intervals per pair.
/// Passing the turnout pair and the result pair gives the 198-interval average.
pub fn peak_shape(pairs: &[(&WeightedHistogram, &WeightedHistogram)]) -> Result<PeakShape> {
    let (first, _) = pairs
        .first()
        .ok_or_else(|| Error::param("peak shape needs at least one histogram pair"))?;
    let grid = first.grid;
    let m = grid.bins_per_percent as usize;
    if !m.is_multiple_of(2) {
        return Err(Error::param("peak shape needs a bin width that divides 0.5%"));
    }
    let half = m / 2;
    let mut sum = vec![0.0; m + 1];
    let mut intervals = 0;
    for (emp, mc) in pairs {
        emp.check_compatible(mc)?;
        if emp.grid != grid {
            return Err(Error::param("all histogram pairs must share one grid"));
        }
        for k in 1..=99usize {
            let center = k * m;
            for (j, acc) in sum.iter_mut().enumerate() {
                let bin = center - half + j;
                *acc += emp.weights[bin] - mc.weights[bin];
            }
            intervals += 1;
        }
    }
    let offsets = (0..=m).map(|j| (j as f64 - half as f64) / m as f64).collect();
    Ok(PeakShape {
        offsets,
        mean_excess: sum.into_iter().map(|s| s / intervals as f64).collect(),
        intervals,
    })
}
