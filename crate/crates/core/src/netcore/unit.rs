use serde::{Deserialize, Serialize};

use super::{affine, bias_bound, clip};
use crate::error::{Error, Result};

/// One clipped affine neuron `w ↦ clip(⟨w, weights⟩ + bias)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipUnit {
    #[serde(rename = "w")]
    weights: Vec<f64>,
    #[serde(rename = "b")]
    bias: f64,
}

impl ClipUnit {
    /// Builds a unit over `weights.len()` inputs. Weights must lie in
    /// `[-q,q]`; the bias is clamped to `±(d_in·q + 1)`, which leaves the
    /// computed function unchanged.
    pub fn new(weights: Vec<f64>, bias: f64, q: f64) -> Result<Self> {
        for &w in &weights {
            if !w.is_finite() {
                return Err(Error::NonFinite(w));
            }
            if w.abs() > q {
                return Err(Error::WeightOutOfBox { value: w, q });
            }
        }
        if !bias.is_finite() {
            return Err(Error::NonFinite(bias));
        }
        let bound = bias_bound(weights.len(), q);
        Ok(Self {
            weights,
            bias: bias.clamp(-bound, bound),
        })
    }

    /// The identity on `[-1,1]`: one input, weight 1, bias 0.
    pub fn identity() -> Self {
        Self {
            weights: vec![1.0],
            bias: 0.0,
        }
    }

    pub fn constant(d_in: usize, value: f64) -> Self {
        Self {
            weights: vec![0.0; d_in],
            bias: value,
        }
    }

    pub(crate) fn from_raw(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn input_width(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: w.len(),
            });
        }
        Ok(self.eval_unchecked(w))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, w: &[f64]) -> f64 {
        clip(affine(&self.weights, self.bias, w))
    }

    /// ℓ¹ norm of the weights: the Lipschitz constant of the unit w.r.t. ‖·‖∞.
    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub(crate) fn check(&self, q: f64) -> Result<()> {
        for &w in &self.weights {
            if !w.is_finite() {
                return Err(Error::NonFinite(w));
            }
            if w.abs() > q {
                return Err(Error::WeightOutOfBox { value: w, q });
            }
        }
        if !self.bias.is_finite() {
            return Err(Error::NonFinite(self.bias));
        }
        let bound = bias_bound(self.weights.len(), q);
        if self.bias.abs() > bound {
            return Err(Error::BiasOutOfRange {
                value: self.bias,
                bound,
            });
        }
        Ok(())
    }
}
