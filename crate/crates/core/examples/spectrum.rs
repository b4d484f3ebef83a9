//! Amplitude spectrum and spectrogram of a histogram with integer heaping.
//!
//! cargo run --release --example spectrum

use heaping::anomaly::NullConfig;
use heaping::model::{apply_filters, FilterPolicy, Metric};
use heaping::sampling::NullModel;
use heaping::shape::{build_histogram, simulate_histograms, HistogramOptions};
use heaping::spectral::{amplitude_spectrum, spectrogram, spectrum_envelope, SpectrogramConfig};
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 30_000, ..GeneratorConfig::default() };
    let policy = FilterPolicy { max_percentage: 100.0, ..FilterPolicy::default() };
    let clean = apply_filters(&generate(&cfg, 14)?.dataset, &policy);
    let spec = FraudSpec { palette: Palette::uniform(60..=99), ..FraudSpec::new(Mechanism::IntegerRounding, 0.15) };
    let (rigged, _) = inject_fraud(&clean, &spec, 15)?;

    let opts = HistogramOptions::default();
    let hist = build_histogram(&rigged, Metric::Result, &opts);
    let sims = simulate_histograms(&rigged, &[Metric::Result], &opts, &NullConfig::new(NullModel::Binomial, 200, 16))?;
    let spectrum = amplitude_spectrum(&hist);
    let env = spectrum_envelope(&sims[0], (0.5, 99.5));
    for f in [0.2, 0.5, 1.0, 2.0, 3.0] {
        let k = spectrum.frequencies.iter().position(|x| (x - f).abs() < 1e-9).expect("on grid");
        println!("f = {f}: amplitude {:.2}, MC band [{:.2}, {:.2}]", spectrum.amplitudes[k], env.low[k], env.high[k]);
    }

    let sg = spectrogram(&hist, &sims[0], &SpectrogramConfig::default())?;
    println!("relative amplitude at 1 cycle per point, by window center:");
    for (c, v) in sg.harmonic(1.0)?.iter().step_by(50) {
        println!("  {c:>5.1}%  {}", v.map_or("-".into(), |v| format!("{v:.2}")));
    }
    Ok(())
}
