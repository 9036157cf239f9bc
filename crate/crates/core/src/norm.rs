//! Fixed-bound min-max scaling onto the unit interval.
//!
//! Bounds are chosen up front per variable rather than fitted to data, so a
//! model trained on one season scales a second season identically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBounds", into = "RawBounds")]
pub struct Normalizer {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBounds {
    lo: f64,
    hi: f64,
}

impl TryFrom<RawBounds> for Normalizer {
    type Error = Error;

    fn try_from(raw: RawBounds) -> Result<Self> {
        Normalizer::new(raw.lo, raw.hi)
    }
}

impl From<Normalizer> for RawBounds {
    fn from(n: Normalizer) -> Self {
        RawBounds { lo: n.lo, hi: n.hi }
    }
}

impl Normalizer {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidNormalizer { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Maps `x` onto `[0, 1]`. Values outside `[lo, hi]` are clamped.
    pub fn normalize(&self, x: f64) -> f64 {
        ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    /// Inverse map. Not clamped.
    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

pub fn normalize(x: f64, nz: &Normalizer) -> f64 {
    nz.normalize(x)
}

pub fn denormalize(u: f64, nz: &Normalizer) -> f64 {
    nz.denormalize(u)
}
