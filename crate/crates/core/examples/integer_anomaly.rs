//! Count stations at integer percentages and compare with the null distribution,
//! on a clean synthetic election and on one with rounded results.
//!
//! cargo run --release --example integer_anomaly

use heaping::anomaly::{run_null_many, standard_probes, probe_name, NullConfig};
use heaping::model::{apply_filters, FilterPolicy};
use heaping::sampling::NullModel;
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism, Palette};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 20_000, ..GeneratorConfig::default() };
    let clean = apply_filters(&generate(&cfg, 1)?.dataset, &FilterPolicy::default());
    let (rigged, log) = inject_fraud(&clean, &FraudSpec { palette: Palette::uniform(1..=99), ..FraudSpec::new(Mechanism::IntegerRounding, 0.02) }, 2)?;
    println!("{} of {} stations rounded", log.modified.len(), clean.len());

    let probes = standard_probes(0.05)?;
    let null = NullConfig::new(NullModel::Binomial, 1000, 7);
    for (name, ds) in [("clean", &clean), ("rigged", &rigged)] {
        println!("{name}:");
        for (probe, r) in probes.iter().zip(run_null_many(ds, &probes, &null)?) {
            println!(
                "  {:<34} q {:>6} MC [{:>7.1}, {:>7.1}] z {:>6.2} p {}",
                probe_name(probe),
                r.empirical,
                r.percentile_interval.0,
                r.percentile_interval.1,
                r.z_score.unwrap_or(f64::NAN),
                r.p_value
            );
        }
    }
    Ok(())
}
