//! How often the integer-window test flags rounding, by affected share.
//!
//! cargo run --release --example fraud_power

use heaping::anomaly::{run_null, NullConfig, StatisticDef, WindowSpec};
use heaping::model::{apply_filters, FilterPolicy};
use heaping::sampling::NullModel;
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 10_000, ..GeneratorConfig::default() };
    let trials = 10u64;
    println!("affected  flagged");
    for frac in [0.0, 0.01, 0.02, 0.05, 0.1] {
        let mut flagged = 0;
        for t in 0..trials {
            let clean = apply_filters(&generate(&cfg, 100 + t)?.dataset, &FilterPolicy::default());
            let (rigged, _) = inject_fraud(&clean, &FraudSpec { palette: Palette::uniform(1..=99), ..FraudSpec::new(Mechanism::IntegerRounding, frac) }, 200 + t)?;
            let r = run_null(&rigged, &StatisticDef::MAIN, &WindowSpec::default(), &NullConfig::new(NullModel::Binomial, 500, 300 + t))?;
            flagged += (r.empirical > r.percentile_interval.1) as u64;
        }
        println!("{frac:>8}  {flagged}/{trials}");
    }
    Ok(())
}
