//! Anomaly size and z-score as the integer window widens.
//!
//! cargo run --release --example window_sweep

use heaping::anomaly::{window_sweep, NullConfig, StatisticDef};
use heaping::model::{apply_filters, FilterPolicy};
use heaping::sampling::NullModel;
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 20_000, ..GeneratorConfig::default() };
    let clean = apply_filters(&generate(&cfg, 3)?.dataset, &FilterPolicy::default());
    let (rigged, _) = inject_fraud(&clean, &FraudSpec { palette: Palette::uniform(1..=99), ..FraudSpec::new(Mechanism::IntegerRounding, 0.02) }, 4)?;
    let widths = [0.01, 0.02, 0.05, 0.1, 0.2];
    let reports = window_sweep(&rigged, &StatisticDef::MAIN, &widths, &NullConfig::new(NullModel::Binomial, 1000, 5))?;
    println!("half-width  empirical  mc_mean  anomaly  z");
    for (h, r) in widths.iter().zip(&reports) {
        println!("{h:>10}  {:>9}  {:>7.1}  {:>7.1}  {:.2}", r.empirical, r.mc_mean, r.anomaly_size, r.z_score.unwrap_or(f64::NAN));
    }
    Ok(())
}
