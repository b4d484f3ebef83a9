//! Draw simulated turnout counts for one station under each null model.
//!
//! cargo run --example null_sampling

use heaping::model::{Metric, StationRecord};
use heaping::sampling::{sample_turnout, station_key, NullModel, SimSeed};

fn main() -> heaping::Result<()> {
    let station = StationRecord::new("S1", "R1", 1000, 600, 590, 300);
    let key = station_key("demo", &station.station_id);
    for model in [NullModel::Binomial, NullModel::BetaBinomial, NullModel::clustered(5)?] {
        let draws: Vec<u64> = (0..20_000)
            .map(|i| sample_turnout(&station, model, SimSeed::new(42, i, key, Metric::Turnout)))
            .collect::<heaping::Result<_>>()?;
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<u64>() as f64 / n;
        let var = draws.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        println!("{model:>14}: mean {mean:.1}, sd {:.1}, first draws {:?}", var.sqrt(), &draws[..5]);
    }
    Ok(())
}
