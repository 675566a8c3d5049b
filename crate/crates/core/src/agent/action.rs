use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Equally spaced discretization of an attribute's value range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
}

impl Default for ActionSpace {
    fn default() -> Self {
        Self {
            lo: -4.5,
            hi: 4.5,
            n_bins: 17,
        }
    }
}

impl ActionSpace {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_bins - 1) as f64
    }

    pub fn value_f64(&self, a: usize) -> Result<f64> {
        if a >= self.n_bins {
            return Err(Error::Index {
                index: a,
                len: self.n_bins,
            });
        }
        Ok(self.lo + a as f64 * self.spacing())
    }

    pub fn value<T: Scalar>(&self, a: usize) -> Result<T> {
        self.value_f64(a).map(T::lit)
    }

    /// Bin whose value equals `v` (within 1e-9 of the grid), if any.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        let pos = (v - self.lo) / self.spacing();
        let a = pos.round();
        if a < 0.0 || a >= self.n_bins as f64 || (pos - a).abs() > 1e-9 {
            None
        } else {
            Some(a as usize)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - 1e-12 && v <= self.hi + 1e-12
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_bins)
            .map(|a| self.lo + a as f64 * self.spacing())
            .collect()
    }
}
