use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::path::Path;

use rand::{Rng, RngCore};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate-level homomorphic bit capability.
///
/// Every gate call increments exactly one counter in [`GateStats`]. `or` is
/// derived (one AND, three NOTs). Trivial encryptions from [`constant`] and
/// fresh encryptions are not gates.
///
/// Implementations must accept concurrent calls.
///
/// [`constant`]: BitBackend::constant
pub trait BitBackend: Send + Sync {
    type Bit: Clone + Debug + Send + Sync + Serialize + DeserializeOwned;

    fn encrypt_bit(&self, value: bool) -> Self::Bit;

    /// Noiseless encryption of a public constant.
    fn constant(&self, value: bool) -> Self::Bit;

    fn xor(&self, a: &Self::Bit, b: &Self::Bit) -> Self::Bit;
    fn and(&self, a: &Self::Bit, b: &Self::Bit) -> Self::Bit;
    fn not(&self, a: &Self::Bit) -> Self::Bit;

    /// `select ? a : b`
    fn mux(&self, select: &Self::Bit, a: &Self::Bit, b: &Self::Bit) -> Self::Bit;

    fn stats(&self) -> GateStats;

    fn or(&self, a: &Self::Bit, b: &Self::Bit) -> Self::Bit {
        let nand = self.and(&self.not(a), &self.not(b));
        self.not(&nand)
    }

    /// A uniformly random bit from `rng`, returned in the clear to the caller
    /// together with a fresh encryption of it.
    fn fresh_random_bit(&self, rng: &mut dyn RngCore) -> (bool, Self::Bit) {
        let b: bool = rng.gen();
        (b, self.encrypt_bit(b))
    }
}

/// Decryption, available only to the key holder.
pub trait BitDecrypt: BitBackend {
    fn decrypt_bit(&self, c: &Self::Bit) -> bool;
}

/// Gate counters. `total` is always the sum of the four kinds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GateStatsRepr", from = "GateStatsRepr")]
pub struct GateStats {
    pub xor: u64,
    pub and: u64,
    pub not: u64,
    pub mux: u64,
}

#[derive(Serialize, Deserialize)]
struct GateStatsRepr {
    xor: u64,
    and: u64,
    not: u64,
    mux: u64,
    #[serde(default)]
    total: u64,
}

impl From<GateStats> for GateStatsRepr {
    fn from(s: GateStats) -> Self {
        Self {
            xor: s.xor,
            and: s.and,
            not: s.not,
            mux: s.mux,
            total: s.total(),
        }
    }
}

impl From<GateStatsRepr> for GateStats {
    fn from(r: GateStatsRepr) -> Self {
        Self {
            xor: r.xor,
            and: r.and,
            not: r.not,
            mux: r.mux,
        }
    }
}

impl GateStats {
    pub fn total(&self) -> u64 {
        self.xor + self.and + self.not + self.mux
    }

    /// Gates applied between the `earlier` snapshot and this one.
    pub fn since(&self, earlier: &GateStats) -> GateStats {
        GateStats {
            xor: self.xor - earlier.xor,
            and: self.and - earlier.and,
            not: self.not - earlier.not,
            mux: self.mux - earlier.mux,
        }
    }
}

impl Add for GateStats {
    type Output = GateStats;

    fn add(self, o: GateStats) -> GateStats {
        GateStats {
            xor: self.xor + o.xor,
            and: self.and + o.and,
            not: self.not + o.not,
            mux: self.mux + o.mux,
        }
    }
}

impl AddAssign for GateStats {
    fn add_assign(&mut self, o: GateStats) {
        *self = *self + o;
    }
}

impl Sum for GateStats {
    fn sum<I: Iterator<Item = GateStats>>(iter: I) -> Self {
        iter.fold(GateStats::default(), Add::add)
    }
}

/// Per-gate cost weights (seconds per gate) for wall-clock estimates.
///
/// NOT defaults to zero: on gate-bootstrapping schemes it is a free linear
/// operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub xor: f64,
    pub and: f64,
    pub mux: f64,
    #[serde(default)]
    pub not: f64,
}

impl Default for CostModel {
    /// One time unit per bootstrapped gate.
    fn default() -> Self {
        Self {
            xor: 1.0,
            and: 1.0,
            mux: 1.0,
            not: 0.0,
        }
    }
}

impl CostModel {
    pub fn validate(self) -> Result<Self> {
        let all = [self.xor, self.and, self.mux, self.not];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Argument(format!(
                "cost weights must be non-negative: {self:?}"
            )));
        }
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<CostModel>(text)?.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn estimate(&self, stats: &GateStats) -> f64 {
        self.xor * stats.xor as f64
            + self.and * stats.and as f64
            + self.mux * stats.mux as f64
            + self.not * stats.not as f64
    }
}
