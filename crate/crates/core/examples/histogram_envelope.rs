//! Voter-weighted turnout histogram against its Monte Carlo envelope.
//!
//! cargo run --release --example histogram_envelope

use heaping::anomaly::NullConfig;
use heaping::model::{apply_filters, FilterPolicy, Metric};
use heaping::sampling::NullModel;
use heaping::shape::{build_histogram, histogram_envelope, HistogramOptions};
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 30_000, ..GeneratorConfig::default() };
    let policy = FilterPolicy { max_percentage: 100.0, ..FilterPolicy::default() };
    let clean = apply_filters(&generate(&cfg, 8)?.dataset, &policy);
    let spec = FraudSpec { palette: Palette::appealing(), ..FraudSpec::new(Mechanism::FiveMultipleRounding, 0.05) };
    let (rigged, _) = inject_fraud(&clean, &spec, 9)?;

    let opts = HistogramOptions::default();
    let hist = build_histogram(&rigged, Metric::Turnout, &opts);
    let env = histogram_envelope(&rigged, Metric::Turnout, &opts, &NullConfig::new(NullModel::Binomial, 200, 10))?;
    println!("{:.1}% of bins inside the envelope", 100.0 * env.coverage(&hist));
    println!("bins above the envelope:");
    for (i, w) in hist.weights.iter().enumerate() {
        if *w > env.high[i] && *w > 2.0 * env.mean[i] {
            println!("  {:>5.1}%  {:>8.0} voters vs MC mean {:>8.0}", hist.grid.center(i), w, env.mean[i]);
        }
    }
    Ok(())
}
