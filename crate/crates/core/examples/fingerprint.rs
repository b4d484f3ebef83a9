//! Turnout-result fingerprint of a clean and a stuffed election.
//!
//! cargo run --release --example fingerprint

use heaping::decomposition::{fingerprint, CorrelationWeighting};
use heaping::model::{apply_filters, FilterPolicy};
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 20_000, ..GeneratorConfig::default() };
    let policy = FilterPolicy { max_percentage: 100.0, ..FilterPolicy::default() };
    let clean = apply_filters(&generate(&cfg, 20)?.dataset, &policy);
    let (stuffed, _) = inject_fraud(&clean, &FraudSpec { stuffing_share: 0.8, ..FraudSpec::new(Mechanism::BallotStuffing, 0.2) }, 21)?;
    for (name, ds) in [("clean", &clean), ("stuffed", &stuffed)] {
        let fp = fingerprint(ds, CorrelationWeighting::Unweighted);
        let upper_right: u64 = (160..200).flat_map(|t| (160..200).map(move |r| (t, r))).map(|(t, r)| fp.weight(t, r)).sum();
        println!(
            "{name:>8}: {} occupied cells, correlation {:.3}, {:.1}% of voters above 80%/80%",
            fp.occupied_cells(),
            fp.correlation.unwrap_or(f64::NAN),
            100.0 * upper_right as f64 / fp.total() as f64
        );
    }
    Ok(())
}
