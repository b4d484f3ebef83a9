//! Detection of integer-percentage heaping in polling-station election data.
//!
//! The crate compares how many polling stations report a turnout or leader's
//! result that sits on (or within a small window around) an integer
//! percentage against the distribution of the same count under Monte Carlo
//! null models of fair voting. Around that core test it provides the
//! supporting analyses: voter-weighted histograms with simulation envelopes,
//! the average integer-peak shape, Fourier spectra and spectrograms of the
//! histograms, per-region peak tables, and 2D turnout/result fingerprints.
//!
//! Module map:
//!
//! - [`model`]: station records, exact percentage ratios, filtering rules.
//! - [`ingest`]: delimited-file loading through declarative column mappings.
//! - [`sampling`]: counter-seeded binomial, beta-binomial and clustered draws.
//! - [`anomaly`]: the integer-station statistic and its null distribution.
//! - [`shape`]: weighted histograms, envelopes, peak shape.
//! - [`spectral`]: amplitude spectra and sliding Hamming spectrograms.
//! - [`decomposition`]: region peaks, region exclusion, fingerprints.
//! - [`synth`]: synthetic elections and fraud injection.
//! - [`output`] and [`render`]: CSV/JSON/SVG emission.
//! - [`cli`]: the `heaping` command-line front end.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod anomaly;
pub mod cli;
pub mod decomposition;
mod error;
pub mod ingest;
pub mod model;
pub mod output;
pub mod render;
pub mod sampling;
pub mod shape;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ElectionDataset, FilterPolicy, Fraction, Metric, StationMetrics, StationRecord};
