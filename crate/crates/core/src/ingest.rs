//! Loading delimited election exports through declarative column mappings,
//! and the canonical TSV format.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Counts, ElectionDataset, StationRecord};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalField {
    StationId,
    RegionCode,
    ConstituencyId,
    Registered,
    Given,
    Cast,
    Leader,
}

impl LogicalField {
    pub const COUNTS: [LogicalField; 4] = [
        LogicalField::Registered,
        LogicalField::Given,
        LogicalField::Cast,
        LogicalField::Leader,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LogicalField::StationId => "station_id",
            LogicalField::RegionCode => "region_code",
            LogicalField::ConstituencyId => "constituency_id",
            LogicalField::Registered => "registered",
            LogicalField::Given => "given",
            LogicalField::Cast => "cast",
            LogicalField::Leader => "leader",
        }
    }

    fn is_count(&self) -> bool {
        Self::COUNTS.contains(self)
    }
}

impl fmt::Display for LogicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Source column by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "#{i}"),
            ColumnRef::Name(n) => write!(f, "`{n}`"),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub delimiter: char,
    pub has_header: bool,
    #[serde(default = "default_true")]
    pub quoting: bool,
    pub columns: BTreeMap<LogicalField, ColumnRef>,
    /// Count fields computed as the sum of several source columns.
    #[serde(default)]
    pub derived: BTreeMap<LogicalField, Vec<ColumnRef>>,
}

impl ColumnMapping {
    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Profile(format!("delimiter {:?} is not ASCII", self.delimiter)));
        }
        for (field, refs) in &self.derived {
            if !field.is_count() {
                return Err(Error::Profile(format!("{field} cannot be derived")));
            }
            if self.columns.contains_key(field) {
                return Err(Error::Profile(format!("{field} is both mapped and derived")));
            }
            if refs.is_empty() {
                return Err(Error::Profile(format!("derived {field} has no source columns")));
            }
        }
        for field in LogicalField::COUNTS {
            if !self.columns.contains_key(&field) && !self.derived.contains_key(&field) {
                return Err(Error::Schema {
                    field: field.to_string(),
                    message: "not mapped".into(),
                });
            }
        }
        let named = self.columns.values().chain(self.derived.values().flatten());
        if !self.has_header && named.into_iter().any(|c| matches!(c, ColumnRef::Name(_))) {
            return Err(Error::Profile("header names used without a header row".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryProfile {
    pub name: String,
    pub mapping: ColumnMapping,
    #[serde(default)]
    pub notes: String,
}

const BUILTIN: [(&str, &str); 5] = [
    ("canonical", include_str!("../profiles/canonical.toml")),
    ("ru", include_str!("../profiles/ru.toml")),
    ("es", include_str!("../profiles/es.toml")),
    ("de", include_str!("../profiles/de.toml")),
    ("pl", include_str!("../profiles/pl.toml")),
];

impl CountryProfile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let profile: CountryProfile = toml::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        profile.mapping.validate()?;
        Ok(profile)
    }

    pub fn builtin_names() -> Vec<&'static str> {
        BUILTIN.iter().map(|(n, _)| *n).collect()
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::Profile(format!("unknown profile `{name}`; built-in: {}", Self::builtin_names().join(", "))))?;
        Self::from_toml(text)
    }

    pub fn canonical() -> Self {
        Self::builtin("canonical").expect("built-in profile parses")
    }

    /// A built-in name, or else a path to a TOML profile.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if BUILTIN.iter().any(|(n, _)| *n == name_or_path) {
            return Self::builtin(name_or_path);
        }
        if !Path::new(name_or_path).is_file() {
            return Err(Error::Profile(format!(
                "`{name_or_path}` is neither a built-in profile ({}) nor a profile file",
                Self::builtin_names().join(", ")
            )));
        }
        let text = std::fs::read_to_string(name_or_path).map_err(|e| Error::io(name_or_path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// One-based line in the source, header included.
    pub line: u64,
    pub field: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    /// Data rows read.
    pub parsed: u64,
    /// Rows not turned into stations (invalid or duplicate).
    pub skipped: u64,
    /// Rows with missing or non-integer counts.
    pub invalid: u64,
    pub stations: u64,
    /// The first [`IngestReport::MAX_ERRORS`] row errors.
    pub errors: Vec<RowError>,
}

impl IngestReport {
    pub const MAX_ERRORS: usize = 1000;

    fn record(&mut self, err: RowError) {
        if self.errors.len() < Self::MAX_ERRORS {
            self.errors.push(err);
        }
    }
}

enum Source {
    One(usize),
    Sum(Vec<usize>),
}

struct Resolved {
    sources: HashMap<LogicalField, Source>,
    width: usize,
}

fn resolve_columns(mapping: &ColumnMapping, header: Option<&csv::StringRecord>) -> Result<Resolved> {
    let lookup = |field: LogicalField, c: &ColumnRef| -> Result<usize> {
        match c {
            ColumnRef::Index(i) => {
                if let Some(h) = header {
                    if *i >= h.len() {
                        return Err(Error::Schema {
                            field: field.to_string(),
                            message: format!("column {c} beyond the {} header columns", h.len()),
                        });
                    }
                }
                Ok(*i)
            }
            ColumnRef::Name(name) => header
                .and_then(|h| h.iter().position(|x| x.trim() == name))
                .ok_or_else(|| Error::Schema {
                    field: field.to_string(),
                    message: format!("column {c} not found in header"),
                }),
        }
    };
    let mut sources = HashMap::new();
    for (&field, c) in &mapping.columns {
        sources.insert(field, Source::One(lookup(field, c)?));
    }
    for (&field, refs) in &mapping.derived {
        let idx = refs.iter().map(|c| lookup(field, c)).collect::<Result<_>>()?;
        sources.insert(field, Source::Sum(idx));
    }
    let width = sources
        .values()
        .flat_map(|s| match s {
            Source::One(i) => vec![*i],
            Source::Sum(v) => v.clone(),
        })
        .max()
        .map_or(0, |m| m + 1);
    Ok(Resolved { sources, width })
}

/// Base-10 digits only, surrounding whitespace ignored.
pub fn parse_count(cell: &str) -> Option<u64> {
    let t = cell.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

fn read_count(rec: &csv::StringRecord, field: LogicalField, src: &Source) -> std::result::Result<u64, String> {
    let cell = |i: usize| -> std::result::Result<u64, String> {
        let raw = rec.get(i).ok_or_else(|| format!("missing column {i}"))?;
        parse_count(raw).ok_or_else(|| format!("`{raw}` is not a non-negative integer"))
    };
    match src {
        Source::One(i) => cell(*i),
        Source::Sum(v) => v.iter().try_fold(0u64, |acc, &i| {
            acc.checked_add(cell(i)?).ok_or_else(|| format!("{field} overflows"))
        }),
    }
}

fn read_text(rec: &csv::StringRecord, sources: &HashMap<LogicalField, Source>, field: LogicalField) -> Option<String> {
    match sources.get(&field) {
        Some(Source::One(i)) => rec.get(*i).map(|s| s.trim().to_string()),
        _ => None,
    }
}

/// Streams rows from `reader` into a dataset labelled `label`.
pub fn load_reader<R: Read>(reader: R, profile: &CountryProfile, label: &str) -> Result<(ElectionDataset, IngestReport)> {
    let mapping = &profile.mapping;
    mapping.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(mapping.has_header)
        .quoting(mapping.quoting)
        .flexible(true)
        .from_reader(reader);
    let header = if mapping.has_header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let resolved = resolve_columns(mapping, header.as_ref())?;

    let mut report = IngestReport::default();
    let mut stations = Vec::new();
    let mut seen = HashSet::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        report.parsed += 1;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            report.parsed -= 1;
            continue;
        }
        if rec.len() < resolved.width {
            report.invalid += 1;
            report.skipped += 1;
            report.record(RowError {
                line,
                field: None,
                message: format!("{} columns, expected at least {}", rec.len(), resolved.width),
            });
            continue;
        }
        let mut counts = [0u64; 4];
        let mut bad = None;
        for (slot, field) in LogicalField::COUNTS.iter().enumerate() {
            match read_count(&rec, *field, &resolved.sources[field]) {
                Ok(v) => counts[slot] = v,
                Err(message) => {
                    bad = Some((field, message));
                    break;
                }
            }
        }
        if let Some((field, message)) = bad {
            report.invalid += 1;
            report.skipped += 1;
            report.record(RowError {
                line,
                field: Some(field.to_string()),
                message,
            });
            continue;
        }
        let station_id = read_text(&rec, &resolved.sources, LogicalField::StationId)
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("row{}", report.parsed));
        if !seen.insert(station_id.clone()) {
            report.skipped += 1;
            report.record(RowError {
                line,
                field: Some("station_id".into()),
                message: format!("duplicate station id `{station_id}`"),
            });
            continue;
        }
        let region = read_text(&rec, &resolved.sources, LogicalField::RegionCode)
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| "ALL".into());
        let mut station = StationRecord::new(station_id, region, counts[0], counts[1], counts[2], counts[3]);
        station.constituency_id = read_text(&rec, &resolved.sources, LogicalField::ConstituencyId).unwrap_or_default();
        stations.push(station);
    }
    report.stations = stations.len() as u64;
    Ok((ElectionDataset::new(label, stations)?, report))
}

/// Loads a file; the dataset label is the file stem.
pub fn load_dataset(path: impl AsRef<Path>, profile: &CountryProfile) -> Result<(ElectionDataset, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    load_reader(io::BufReader::new(file), profile, &label).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => match c.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        other => other,
    })
}

pub const CANONICAL_HEADER: &str = "station_id\tregion_code\tconstituency_id\tregistered\tgiven\tcast\tleader";

fn check_text(station: &StationRecord, value: &str, field: &str) -> Result<()> {
    if value.contains(['\t', '\n', '\r']) {
        return Err(Error::Domain {
            station_id: station.station_id.clone(),
            message: format!("{field} contains a tab or line break"),
        });
    }
    Ok(())
}

/// Writes the canonical TSV: header row, LF endings, no trailing delimiter.
pub fn write_canonical_tsv<W: Write>(dataset: &ElectionDataset, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    let io_err = |e| Error::io("<canonical tsv>", e);
    writeln!(w, "{CANONICAL_HEADER}").map_err(io_err)?;
    for s in dataset.stations() {
        check_text(s, &s.station_id, "station_id")?;
        check_text(s, &s.region_code, "region_code")?;
        check_text(s, &s.constituency_id, "constituency_id")?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.station_id, s.region_code, s.constituency_id, s.registered, s.given, s.cast, s.leader
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn canonical_tsv_string(dataset: &ElectionDataset) -> Result<String> {
    let mut buf = Vec::new();
    write_canonical_tsv(dataset, &mut buf)?;
    Ok(String::from_utf8(buf).expect("input strings are UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountField {
    Registered,
    Given,
    Cast,
    Leader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discrepancy {
    /// `difference` is data minus reference.
    Mismatch {
        region_code: String,
        field: CountField,
        expected: u64,
        actual: u64,
        difference: i128,
    },
    Unmatched { region_code: String },
}

/// Compares per-region count sums against reference subtotals.
pub fn verify_subtotals(dataset: &ElectionDataset, reference: &BTreeMap<String, Counts>) -> Vec<Discrepancy> {
    let actual = dataset.totals_by_region();
    let mut out = Vec::new();
    for (region, expected) in reference {
        let Some(got) = actual.get(region) else {
            out.push(Discrepancy::Unmatched {
                region_code: region.clone(),
            });
            continue;
        };
        let pairs = [
            (CountField::Registered, expected.registered, got.registered),
            (CountField::Given, expected.given, got.given),
            (CountField::Cast, expected.cast, got.cast),
            (CountField::Leader, expected.leader, got.leader),
        ];
        for (field, e, a) in pairs {
            if e != a {
                out.push(Discrepancy::Mismatch {
                    region_code: region.clone(),
                    field,
                    expected: e,
                    actual: a,
                    difference: a as i128 - e as i128,
                });
            }
        }
    }
    out
}

/// Reads reference subtotals from a TSV with header
/// `region_code registered given cast leader`.
pub fn load_reference_totals(path: impl AsRef<Path>) -> Result<BTreeMap<String, Counts>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(file);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Schema {
            field: name.into(),
            message: "column not found in reference header".into(),
        })
    };
    let idx = [col("region_code")?, col("registered")?, col("given")?, col("cast")?, col("leader")?];
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let num = |k: usize| -> Result<u64> {
            let raw = row.get(idx[k]).unwrap_or("");
            parse_count(raw).ok_or_else(|| Error::Schema {
                field: ["region_code", "registered", "given", "cast", "leader"][k].into(),
                message: format!("`{raw}` is not a non-negative integer"),
            })
        };
        let region = row.get(idx[0]).unwrap_or("").trim().to_string();
        out.insert(
            region,
            Counts {
                registered: num(1)?,
                given: num(2)?,
                cast: num(3)?,
                leader: num(4)?,
            },
        );
    }
    Ok(out)
}
