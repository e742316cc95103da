//! Clipped affine networks.
//!
//! A network maps the hypercube `[-1,1]^n` through layers of clipped affine
//! units `w ↦ clip(⟨w, weights⟩ + bias)` down to a single scalar in `[-1,1]`.
//! Every weight lies in the box `[-q,q]`; biases are real but are stored
//! clamped to `±(d_in·q + 1)`, beyond which a unit is constant anyway.

mod net;
mod unit;

pub use net::{compose_parallel, RepCert, RepNet};
pub use unit::ClipUnit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The saturating identity: `-1` below `-1`, identity on `[-1,1]`, `1` above `1`.
pub fn beta(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite(z));
    }
    Ok(clip(z))
}

/// Unchecked [`beta`] for the evaluation hot paths, where finiteness is
/// guaranteed by construction.
#[inline]
pub fn clip(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

/// Subgradient of [`clip`], taking the interior value 1 at the kinks `z = ±1`.
#[inline]
pub fn clip_slope(z: f64) -> f64 {
    if (-1.0..=1.0).contains(&z) {
        1.0
    } else {
        0.0
    }
}

/// Dot product accumulated in input-index order, then offset by `bias`.
///
/// Every evaluation path in the crate goes through this so results agree
/// bit for bit across implementations.
#[inline]
pub fn affine(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, xi) in weights.iter().zip(x) {
        acc += w * xi;
    }
    acc + bias
}

/// Input dimension `n` of the hypercube `W_n` and the weight bound `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub n: usize,
    pub q: f64,
}

impl DomainSpec {
    pub fn new(n: usize, q: f64) -> Result<Self> {
        let spec = Self { n, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDomain("n must be at least 1".into()));
        }
        // q ≥ 1 is what lets the stopping argument pick t = ±ε/‖h‖ inside [-q,q].
        if !self.q.is_finite() || self.q < 1.0 {
            return Err(Error::InvalidDomain(format!(
                "q must be finite and at least 1, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Largest useful bias magnitude for a unit reading `d_in` coordinates.
    pub fn bias_bound(&self, d_in: usize) -> f64 {
        bias_bound(d_in, self.q)
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.n && w.iter().all(|x| (-1.0..=1.0).contains(x))
    }
}

pub(crate) fn bias_bound(d_in: usize, q: f64) -> f64 {
    d_in as f64 * q + 1.0
}
