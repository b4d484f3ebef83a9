//! Average excess around integer percentages, turnout and result pooled.
//!
//! cargo run --release --example peak_shape

use heaping::anomaly::NullConfig;
use heaping::model::{apply_filters, FilterPolicy, Metric};
use heaping::sampling::NullModel;
use heaping::shape::{build_histogram, peak_shape, simulate_histograms, HistogramOptions};
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 30_000, ..GeneratorConfig::default() };
    let policy = FilterPolicy { max_percentage: 100.0, ..FilterPolicy::default() };
    let clean = apply_filters(&generate(&cfg, 11)?.dataset, &policy);
    let spec = FraudSpec { palette: Palette::uniform(1..=99), ..FraudSpec::new(Mechanism::IntegerRounding, 0.05) };
    let (rigged, _) = inject_fraud(&clean, &spec, 12)?;

    let opts = HistogramOptions::default();
    let metrics = [Metric::Turnout, Metric::Result];
    let sims = simulate_histograms(&rigged, &metrics, &opts, &NullConfig::new(NullModel::Binomial, 200, 13))?;
    let emp: Vec<_> = metrics.iter().map(|&m| build_histogram(&rigged, m, &opts)).collect();
    let means: Vec<_> = sims.iter().map(|s| s.mean_histogram()).collect();
    let shape = peak_shape(&[(&emp[0], &means[0]), (&emp[1], &means[1])])?;
    println!("{} intervals", shape.intervals);
    for (o, e) in shape.offsets.iter().zip(&shape.mean_excess) {
        println!("{o:>+5.1}  {e:>8.1}");
    }
    Ok(())
}
