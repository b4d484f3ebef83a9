//! Rank regions by their excess at integer percentages, then drop the worst.
//!
//! cargo run --release --example region_ranking

use std::collections::BTreeSet;

use heaping::anomaly::{empirical_statistic, NullConfig, StatisticDef, WindowSpec};
use heaping::decomposition::{exclude_regions, region_peaks, CandidateSet};
use heaping::model::{apply_filters, FilterPolicy};
use heaping::sampling::NullModel;
use heaping::synth::{generate, inject_fraud, FraudSpec, GeneratorConfig, Mechanism};

fn main() -> heaping::Result<()> {
    let cfg = GeneratorConfig { n_stations: 20_000, n_regions: 10, ..GeneratorConfig::default() };
    let policy = FilterPolicy { max_percentage: 100.0, ..FilterPolicy::default() };
    let clean = apply_filters(&generate(&cfg, 17)?.dataset, &policy);
    let spec = FraudSpec {
        region_concentration: Some(BTreeSet::from(["R03".to_string(), "R07".to_string()])),
        ..FraudSpec::new(Mechanism::FiveMultipleRounding, 0.3)
    };
    let (rigged, _) = inject_fraud(&clean, &spec, 18)?;

    let table = region_peaks(std::slice::from_ref(&rigged), &CandidateSet::integer(), &NullConfig::new(NullModel::Binomial, 200, 19))?;
    for r in table.ranking.iter().take(5) {
        let loc = r.location.as_ref().map_or(String::new(), |l| format!("{} {}%", l.metric, l.percent));
        println!("{:<4} {:>9.1}  {loc}", r.region_code, r.max_amplitude.unwrap_or(f64::NAN));
    }
    let worst: BTreeSet<String> = table.top_regions(2).into_iter().collect();
    let rest = exclude_regions(&rigged, &worst)?.dataset;
    let w = WindowSpec::default();
    println!(
        "integer-window count: {} with all regions, {} without {:?}",
        empirical_statistic(&rigged, &StatisticDef::MAIN, &w),
        empirical_statistic(&rest, &StatisticDef::MAIN, &w),
        worst
    );
    Ok(())
}
