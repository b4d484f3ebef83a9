//! Load a country extract through a profile, then apply the station filters.
//!
//! cargo run --example ingest_and_filter

use heaping::ingest::{canonical_tsv_string, load_reader, CountryProfile};
use heaping::model::{apply_filters, FilterPolicy};

fn main() -> heaping::Result<()> {
    let extract = "mesa;provincia;municipio;censo;nulos;blancos;validos;lider\n\
                   0001A;28;079;800;5;10;585;300\n\
                   0001B;28;079;60;1;2;40;20\n\
                   0002A;08;019;650;0;3;497;200\n\
                   0002B;08;019;500;0;0;500;500\n\
                   0003A;08;019;700;x;3;400;200\n";
    let profile = CountryProfile::builtin("es")?;
    let (ds, report) = load_reader(extract.as_bytes(), &profile, "es-sample")?;
    println!("parsed {} rows, {} stations, {} invalid", report.parsed, report.stations, report.invalid);
    for e in &report.errors {
        println!("  line {}: {}", e.line, e.message);
    }

    let kept = apply_filters(&ds, &FilterPolicy::default());
    println!("{} stations kept", kept.len());
    for entry in kept.filter_log() {
        println!("  dropped {} ({})", entry.station_id, entry.reason.as_str());
    }
    print!("{}", canonical_tsv_string(&kept)?);
    Ok(())
}
