//! Null-model draws of simulated station counts.
//!
//! Every draw is addressed by a [`SimSeed`] tuple `(master seed, iteration,
//! station key, metric)`. The tuple is hashed into the state of a small
//! counter-style generator, so a draw never depends on which worker ran it or
//! in what order, and two analyses that touch the same station in the same
//! iteration see the same simulated counts.
//!
//! Three generative models are supported:
//!
//! - binomial: `k' ~ Binom(n, k/n)`;
//! - beta-binomial: `p ~ Beta(k+1, n-k+1)`, then `k' ~ Binom(n, p)`;
//! - clustered with cluster size `c`: `k' = c·K + R` where
//!   `K ~ Binom(⌊n/c⌋, k/n)` and the `n mod c` leftover voters give
//!   `R ~ Binom(n mod c, k/n)`. Mean is preserved and the variance grows
//!   roughly `c`-fold.
//!
//! The beta-binomial mean is `n·(k+1)/(n+2)`, i.e. slightly shrunk toward
//! 50%; the model is implemented as stated and the shrinkage is left alone.

use std::fmt;
use std::str::FromStr;

use rand::rand_core::impls;
use rand::RngCore;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::model::{Counts, Metric, StationRecord};
use crate::{Error, Result};

pub const MAX_CLUSTER_SIZE: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NullModel {
    #[default]
    Binomial,
    BetaBinomial,
    Clustered { cluster_size: u32 },
}

impl NullModel {
    pub fn clustered(cluster_size: u32) -> Result<Self> {
        let model = NullModel::Clustered { cluster_size };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NullModel::Clustered { cluster_size } if !(1..=MAX_CLUSTER_SIZE).contains(&cluster_size) => {
                Err(Error::param(format!(
                    "cluster size must be in 1..={MAX_CLUSTER_SIZE}, got {cluster_size}"
                )))
            }
            _ => Ok(()),
        }
    }
}


impl fmt::Display for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullModel::Binomial => f.write_str("binomial"),
            NullModel::BetaBinomial => f.write_str("beta-binomial"),
            NullModel::Clustered { cluster_size } => write!(f, "clustered:{cluster_size}"),
        }
    }
}

impl FromStr for NullModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binomial" => Ok(NullModel::Binomial),
            "beta-binomial" | "beta_binomial" => Ok(NullModel::BetaBinomial),
            _ => {
                let size = s
                    .strip_prefix("clustered:")
                    .and_then(|c| c.parse::<u32>().ok())
                    .ok_or_else(|| {
                        Error::param(format!(
                            "unknown model `{s}` (expected binomial, beta-binomial or clustered:<c>)"
                        ))
                    })?;
                NullModel::clustered(size)
            }
        }
    }
}

/// Address of one random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimSeed {
    pub master_seed: u64,
    pub iteration: u64,
    /// Stable per-station key, see [`station_key`].
    pub station: u64,
    pub metric: Metric,
}

impl SimSeed {
    pub fn new(master_seed: u64, iteration: u64, station: u64, metric: Metric) -> Self {
        SimSeed {
            master_seed,
            iteration,
            station,
            metric,
        }
    }

    pub fn rng(&self) -> SimRng {
        let tag = match self.metric {
            Metric::Turnout => 0x7475_726e_6f75_7421,
            Metric::Result => 0x7265_7375_6c74_2121,
        };
        let mut h = mix64(self.master_seed.wrapping_add(GOLDEN_GAMMA));
        h = mix64(h ^ self.iteration.wrapping_mul(0xd6e8_feb8_6659_fd93));
        h = mix64(h ^ self.station);
        h = mix64(h ^ tag);
        SimRng { state: h }
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable key for a station within a labelled dataset.
///
/// Keys depend on the dataset label and the station id only, never on the
/// station's position, so reordering or subsetting a dataset leaves every
/// remaining station's draws unchanged.
pub fn station_key(label: &str, station_id: &str) -> u64 {
    // FNV-1a, then a SplitMix finalizer to spread the bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes().chain(std::iter::once(0xff)).chain(station_id.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}

/// SplitMix64 stream seeded from a [`SimSeed`].
#[derive(Debug, Clone)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn from_state(state: u64) -> Self {
        SimRng { state }
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

fn binomial<R: RngCore>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 {
        return 0;
    }
    Binomial::new(trials, p)
        .expect("probability within [0, 1]")
        .sample(rng)
}

/// Draws a simulated success count for `trials` trials with observed
/// `successes`. Callers guarantee `successes <= trials`.
pub fn draw_count<R: RngCore>(model: NullModel, trials: u64, successes: u64, rng: &mut R) -> u64 {
    debug_assert!(successes <= trials);
    if trials == 0 {
        return 0;
    }
    let p = successes as f64 / trials as f64;
    match model {
        NullModel::Binomial => binomial(trials, p, rng),
        NullModel::BetaBinomial => {
            let a = Gamma::new((successes + 1) as f64, 1.0)
                .expect("shape >= 1")
                .sample(rng);
            let b = Gamma::new((trials - successes + 1) as f64, 1.0)
                .expect("shape >= 1")
                .sample(rng);
            binomial(trials, a / (a + b), rng)
        }
        NullModel::Clustered { cluster_size } => {
            let c = cluster_size.max(1) as u64;
            let clusters = binomial(trials / c, p, rng);
            let rest = binomial(trials % c, p, rng);
            c * clusters + rest
        }
    }
}

/// Simulated given-ballot count for a station.
pub fn sample_turnout(record: &StationRecord, model: NullModel, seed: SimSeed) -> Result<u64> {
    if record.given > record.registered {
        return Err(Error::Domain {
            station_id: record.station_id.clone(),
            message: format!("given {} > registered {}", record.given, record.registered),
        });
    }
    if record.registered == 0 {
        return Err(Error::Domain {
            station_id: record.station_id.clone(),
            message: "zero registered voters".into(),
        });
    }
    model.validate()?;
    let mut rng = SimSeed { metric: Metric::Turnout, ..seed }.rng();
    Ok(draw_count(model, record.registered, record.given, &mut rng))
}

/// Simulated leader count for a station; the cast-ballot denominator stays fixed.
pub fn sample_result(record: &StationRecord, model: NullModel, seed: SimSeed) -> Result<u64> {
    if record.cast == 0 {
        return Err(Error::Domain {
            station_id: record.station_id.clone(),
            message: "zero cast ballots".into(),
        });
    }
    if record.leader > record.cast {
        return Err(Error::Domain {
            station_id: record.station_id.clone(),
            message: format!("leader {} > cast {}", record.leader, record.cast),
        });
    }
    model.validate()?;
    let mut rng = SimSeed { metric: Metric::Result, ..seed }.rng();
    Ok(draw_count(model, record.cast, record.leader, &mut rng))
}

/// Which metrics a simulation pass needs to redraw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    pub turnout: bool,
    pub result: bool,
}

impl MetricSet {
    pub const BOTH: MetricSet = MetricSet {
        turnout: true,
        result: true,
    };

    pub fn only(metric: Metric) -> Self {
        MetricSet {
            turnout: metric == Metric::Turnout,
            result: metric == Metric::Result,
        }
    }

    pub fn union(self, other: MetricSet) -> Self {
        MetricSet {
            turnout: self.turnout || other.turnout,
            result: self.result || other.result,
        }
    }
}

/// Per-station inputs of a simulation pass, precomputed once per dataset.
#[derive(Debug, Clone)]
pub struct SimStations {
    pub counts: Vec<Counts>,
    pub keys: Vec<u64>,
}

impl SimStations {
    pub fn new<'a>(label: &str, stations: impl IntoIterator<Item = &'a StationRecord>) -> Self {
        let (counts, keys) = stations
            .into_iter()
            .map(|s| (s.counts(), station_key(label, &s.station_id)))
            .unzip();
        SimStations { counts, keys }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts of station `i` in `iteration` with the requested numerators redrawn.
    /// Metrics not in `which` keep their observed values.
    #[inline]
    pub fn simulate(
        &self,
        i: usize,
        model: NullModel,
        master_seed: u64,
        iteration: u64,
        which: MetricSet,
    ) -> Counts {
        let mut c = self.counts[i];
        let key = self.keys[i];
        if which.turnout && c.registered > 0 {
            let mut rng = SimSeed::new(master_seed, iteration, key, Metric::Turnout).rng();
            c.given = draw_count(model, c.registered, c.given, &mut rng);
        }
        if which.result && c.cast > 0 {
            let mut rng = SimSeed::new(master_seed, iteration, key, Metric::Result).rng();
            c.leader = draw_count(model, c.cast, c.leader, &mut rng);
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(registered: u64, given: u64, cast: u64, leader: u64) -> StationRecord {
        StationRecord::new("s", "R", registered, given, cast, leader)
    }

    fn seed(i: u64) -> SimSeed {
        SimSeed::new(42, i, station_key("t", "s"), Metric::Turnout)
    }

    #[test]
    fn degenerate_probabilities() {
        for i in 0..200 {
            assert_eq!(sample_turnout(&rec(50, 0, 0, 0), NullModel::Binomial, seed(i)).unwrap(), 0);
            assert_eq!(
                sample_result(&rec(1000, 1000, 1000, 1000), NullModel::Binomial, seed(i)).unwrap(),
                1000
            );
        }
    }

    #[test]
    fn domain_errors() {
        assert!(sample_turnout(&rec(10, 11, 5, 1), NullModel::Binomial, seed(0)).is_err());
        assert!(sample_result(&rec(10, 5, 0, 0), NullModel::Binomial, seed(0)).is_err());
    }

    #[test]
    fn same_seed_same_draw() {
        let r = rec(1000, 600, 600, 300);
        for model in [NullModel::Binomial, NullModel::BetaBinomial, NullModel::Clustered { cluster_size: 4 }] {
            let a = sample_turnout(&r, model, seed(7)).unwrap();
            let b = sample_turnout(&r, model, seed(7)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn metric_streams_are_distinct() {
        let a = SimSeed::new(1, 2, 3, Metric::Turnout).rng().next_u64();
        let b = SimSeed::new(1, 2, 3, Metric::Result).rng().next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn station_key_ignores_position_but_not_label() {
        assert_eq!(station_key("RU-2008", "1"), station_key("RU-2008", "1"));
        assert_ne!(station_key("RU-2008", "1"), station_key("RU-2011", "1"));
        // the separator prevents concatenation collisions
        assert_ne!(station_key("ab", "c"), station_key("a", "bc"));
    }

    #[test]
    fn model_parsing() {
        assert_eq!("binomial".parse::<NullModel>().unwrap(), NullModel::Binomial);
        assert_eq!("beta-binomial".parse::<NullModel>().unwrap(), NullModel::BetaBinomial);
        assert_eq!(
            "clustered:5".parse::<NullModel>().unwrap(),
            NullModel::Clustered { cluster_size: 5 }
        );
        assert!("clustered:0".parse::<NullModel>().is_err());
        assert!("clustered:11".parse::<NullModel>().is_err());
        assert!("poisson".parse::<NullModel>().is_err());
        for m in [NullModel::Binomial, NullModel::BetaBinomial, NullModel::Clustered { cluster_size: 3 }] {
            assert_eq!(m.to_string().parse::<NullModel>().unwrap(), m);
        }
    }

    #[test]
    fn cluster_size_one_is_binomial_in_distribution() {
        // with c = 1 there is no remainder and K ~ Binom(n, p) drawn from the same stream
        let r = rec(300, 120, 120, 60);
        for i in 0..500 {
            let a = sample_turnout(&r, NullModel::Binomial, seed(i)).unwrap();
            let b = sample_turnout(&r, NullModel::Clustered { cluster_size: 1 }, seed(i)).unwrap();
            assert_eq!(a, b);
        }
    }
}
