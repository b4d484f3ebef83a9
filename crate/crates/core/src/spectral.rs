//! Fourier analysis of percentage histograms.
//!
//! Periodic integer peaks show up as harmonics at 1%⁻¹ (and 2%⁻¹, ...)
//! when they repeat every percentage point, and as a 0.2%⁻¹ family when
//! they repeat every five points. The full-range spectrum uses the first
//! `100/width` bins of the grid (1000 at 0.1%), dropping the 100% bin, and
//! is normalized by that sample count. Spectrograms slide a 15%-wide
//! Hamming window one bin at a time and are normalized cell by cell by the
//! average spectrogram of Monte Carlo histograms.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::anomaly::percentile;
use crate::shape::{BinGrid, SimulatedHistograms, WeightedHistogram};
use crate::{Error, Result};

/// Un-normalized forward DFT, `X_k = Σ x_n e^{-2πi kn/N}`.
pub fn dft(values: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Samples of a histogram used for spectra: every bin except the 100% one.
fn spectral_samples(hist: &WeightedHistogram) -> &[f64] {
    &hist.weights[..hist.weights.len() - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSpectrum {
    /// In cycles per percentage point.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub normalization: usize,
}

impl AmplitudeSpectrum {
    pub fn amplitude_at(&self, frequency: f64) -> Option<f64> {
        self.frequencies
            .iter()
            .position(|f| (f - frequency).abs() < 1e-9)
            .map(|i| self.amplitudes[i])
    }
}

/// `|DFT| / N` over frequencies `0 ..= Nyquist`.
pub fn amplitude_spectrum(hist: &WeightedHistogram) -> AmplitudeSpectrum {
    let samples = spectral_samples(hist);
    let n = samples.len();
    let coeffs = dft(samples);
    let span = n as f64 * hist.grid.width();
    let (frequencies, amplitudes) = (0..=n / 2)
        .map(|k| (k as f64 / span, coeffs[k].norm() / n as f64))
        .unzip();
    AmplitudeSpectrum {
        frequencies,
        amplitudes,
        normalization: n,
    }
}

/// Per-frequency percentile band of the amplitude spectra of simulated histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEnvelope {
    pub frequencies: Vec<f64>,
    pub levels: (f64, f64),
    pub mean: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

pub fn spectrum_envelope(mc: &SimulatedHistograms, levels: (f64, f64)) -> SpectrumEnvelope {
    let spectra: Vec<AmplitudeSpectrum> = (0..mc.iterations())
        .into_par_iter()
        .map(|it| amplitude_spectrum(&mc.row_histogram(it)))
        .collect();
    let frequencies = spectra[0].frequencies.clone();
    let nf = frequencies.len();
    let mut mean = vec![0.0; nf];
    let mut low = vec![0.0; nf];
    let mut high = vec![0.0; nf];
    for k in 0..nf {
        let mut col: Vec<f64> = spectra.iter().map(|s| s.amplitudes[k]).collect();
        mean[k] = col.iter().sum::<f64>() / col.len() as f64;
        col.sort_by(|a, b| a.total_cmp(b));
        low[k] = percentile(&col, levels.0);
        high[k] = percentile(&col, levels.1);
    }
    SpectrumEnvelope {
        frequencies,
        levels,
        mean,
        low,
        high,
    }
}

/// Conventional Hamming coefficients `0.54 − 0.46·cos(2πn/(L−1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub window_percent: f64,
    pub hop_bins: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            window_percent: 15.0,
            hop_bins: 1,
        }
    }
}

/// Window geometry shared by the empirical and the MC spectrograms.
struct Layout {
    len: usize,
    starts: Vec<usize>,
    window: Vec<f64>,
}

impl Layout {
    fn new(grid: BinGrid, cfg: &SpectrogramConfig) -> Result<Self> {
        let n = grid.n_bins() - 1;
        let len = (cfg.window_percent * grid.bins_per_percent as f64).round() as usize;
        if len < 2 || len > n {
            return Err(Error::param(format!(
                "spectrogram window of {}% does not fit the 0-100% grid",
                cfg.window_percent
            )));
        }
        if cfg.hop_bins == 0 {
            return Err(Error::param("spectrogram hop must be at least one bin"));
        }
        Ok(Layout {
            len,
            starts: (0..=n - len).step_by(cfg.hop_bins).collect(),
            window: hamming(len),
        })
    }

    fn centers(&self, grid: BinGrid) -> Vec<f64> {
        self.starts
            .iter()
            .map(|&s| (s as f64 + self.len as f64 / 2.0) * grid.width())
            .collect()
    }

    fn frequencies(&self, grid: BinGrid) -> Vec<f64> {
        let span = self.len as f64 * grid.width();
        (0..=self.len / 2).map(|k| k as f64 / span).collect()
    }

    /// Amplitudes, flattened center-major. The DC cell holds the windowed
    /// mean level; every other cell is computed on the mean-removed window.
    fn amplitudes(&self, samples: &[f64], planner_fft: &dyn rustfft::Fft<f64>) -> Vec<f64> {
        let nf = self.len / 2 + 1;
        let norm = self.len as f64;
        let mut out = Vec::with_capacity(self.starts.len() * nf);
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for &s in &self.starts {
            let seg = &samples[s..s + self.len];
            let mean = seg.iter().sum::<f64>() / norm;
            let dc: f64 = seg.iter().zip(&self.window).map(|(x, w)| x * w).sum();
            for ((b, x), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex::new((x - mean) * w, 0.0);
            }
            planner_fft.process(&mut buf);
            out.push(dc.abs() / norm);
            out.extend(buf[1..nf].iter().map(|c| c.norm() / norm));
        }
        out
    }
}

/// Sliding-window amplitudes without MC normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSpectrogram {
    pub centers: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `values[c][f]`
    pub values: Vec<Vec<f64>>,
}

pub fn raw_spectrogram(hist: &WeightedHistogram, cfg: &SpectrogramConfig) -> Result<RawSpectrogram> {
    let layout = Layout::new(hist.grid, cfg)?;
    let fft = FftPlanner::new().plan_fft_forward(layout.len);
    let flat = layout.amplitudes(spectral_samples(hist), fft.as_ref());
    let nf = layout.len / 2 + 1;
    Ok(RawSpectrogram {
        centers: layout.centers(hist.grid),
        frequencies: layout.frequencies(hist.grid),
        values: flat.chunks(nf).map(|c| c.to_vec()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub centers: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// Empirical amplitude over MC-average amplitude; `None` where the MC average is 0.
    pub values: Vec<Vec<Option<f64>>>,
    pub mc_iterations: usize,
}

impl Spectrogram {
    fn frequency_index(&self, frequency: f64) -> Result<usize> {
        self.frequencies
            .iter()
            .position(|f| (f - frequency).abs() < 1e-9)
            .ok_or_else(|| Error::param(format!("frequency {frequency} is not on the spectrogram grid")))
    }

    /// Relative amplitude of one harmonic as a function of window center.
    pub fn harmonic(&self, frequency: f64) -> Result<Vec<(f64, Option<f64>)>> {
        let k = self.frequency_index(frequency)?;
        Ok(self.centers.iter().zip(&self.values).map(|(&c, row)| (c, row[k])).collect())
    }

    /// Relative amplitude of a harmonic in the last (highest-percentage) window.
    pub fn last_window(&self, frequency: f64) -> Result<Option<f64>> {
        let k = self.frequency_index(frequency)?;
        Ok(self.values.last().and_then(|row| row[k]))
    }
}

const MC_CHUNK: usize = 64;

pub fn spectrogram(
    hist: &WeightedHistogram,
    mc: &SimulatedHistograms,
    cfg: &SpectrogramConfig,
) -> Result<Spectrogram> {
    if mc.iterations() == 0 {
        return Err(Error::param("spectrogram normalization needs at least one MC histogram"));
    }
    if mc.grid != hist.grid {
        return Err(Error::param("MC histograms are on a different grid"));
    }
    let layout = Layout::new(hist.grid, cfg)?;
    let fft = FftPlanner::new().plan_fft_forward(layout.len);
    let empirical = layout.amplitudes(spectral_samples(hist), fft.as_ref());

    // fixed-size chunks summed in order keep the float reduction
    // independent of the worker count
    let iterations: Vec<usize> = (0..mc.iterations()).collect();
    let chunk_sums: Vec<Vec<f64>> = iterations
        .par_chunks(MC_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; empirical.len()];
            for &it in chunk {
                let row = mc.row(it);
                let amps = layout.amplitudes(&row[..row.len() - 1], fft.as_ref());
                acc.iter_mut().zip(amps).for_each(|(a, v)| *a += v);
            }
            acc
        })
        .collect();
    let mut mean = vec![0.0; empirical.len()];
    for sums in chunk_sums {
        mean.iter_mut().zip(sums).for_each(|(m, v)| *m += v);
    }
    let n = mc.iterations() as f64;
    let nf = layout.len / 2 + 1;
    let values = empirical
        .iter()
        .zip(&mean)
        .map(|(&e, &m)| {
            let m = m / n;
            (m > 0.0).then(|| e / m)
        })
        .collect::<Vec<_>>()
        .chunks(nf)
        .map(|c| c.to_vec())
        .collect();
    Ok(Spectrogram {
        centers: layout.centers(hist.grid),
        frequencies: layout.frequencies(hist.grid),
        values,
        mc_iterations: mc.iterations(),
    })
}
