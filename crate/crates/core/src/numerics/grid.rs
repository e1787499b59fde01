use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform periodic position grid together with the physical constants ħ and m.
///
/// Points sit at `q_j = q_min + j·dq` for `j = 0..n`; `q_max` itself is the
/// periodic image of `q_min` and is not a grid point.
///
/// Momentum ordering: FFT-facing code uses the wrapped integer index
/// `m = 0, 1, …, n/2−1, −n/2, …, −1`; every momentum array handed out by the
/// public API is sorted ascending, `m = −n/2, …, n/2−1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    q_min: f64,
    q_max: f64,
    hbar: f64,
    mass: f64,
}

/// Builds a grid, validating every precondition.
pub fn make_grid(n: usize, q_min: f64, q_max: f64, hbar: f64, mass: f64) -> Result<GridSpec> {
    GridSpec::new(n, q_min, q_max, hbar, mass)
}

impl GridSpec {
    pub fn new(n: usize, q_min: f64, q_max: f64, hbar: f64, mass: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Grid("n must be even and ≥ 8".into()));
        }
        if !(q_min.is_finite() && q_max.is_finite()) || q_max <= q_min {
            return Err(Error::Grid("q_max must exceed q_min".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Grid("hbar must be positive".into()));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Grid("mass must be positive".into()));
        }
        Ok(Self {
            n,
            q_min,
            q_max,
            hbar,
            mass,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Window length `L = q_max − q_min`.
    pub fn length(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn dq(&self) -> f64 {
        self.length() / self.n as f64
    }

    /// Conjugate momentum spacing `2πħ/(n·dq)`.
    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / self.length()
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.dq()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.q(j)).collect()
    }

    /// Signed integer momentum index for FFT slot `k`.
    pub fn wrapped_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// FFT slot holding the signed index `m` (`−n/2 ≤ m < n/2`).
    pub fn slot_of(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Momenta `ħ·2πm/L` in FFT slot order.
    pub fn momenta_wrapped(&self) -> Vec<f64> {
        let dp = self.dp();
        (0..self.n).map(|k| self.wrapped_index(k) as f64 * dp).collect()
    }

    /// Momenta sorted ascending, `p = −n/2·dp, …, (n/2−1)·dp`.
    pub fn momenta(&self) -> Vec<f64> {
        let dp = self.dp();
        let half = (self.n / 2) as i64;
        (0..self.n as i64).map(|i| (i - half) as f64 * dp).collect()
    }

    /// Ascending position `i` → FFT slot.
    pub(crate) fn sorted_to_slot(&self, i: usize) -> usize {
        (i + self.n / 2) % self.n
    }

    /// Momentum spacing of the Wigner lattice, `πħ/(n·dq)`.
    pub fn wigner_dp(&self) -> f64 {
        PI * self.hbar / self.length()
    }

    /// Ascending momenta of the Wigner lattice (n points, half the standard spacing).
    pub fn wigner_momenta(&self) -> Vec<f64> {
        let dp = self.wigner_dp();
        let half = (self.n / 2) as i64;
        (0..self.n as i64).map(|i| (i - half) as f64 * dp).collect()
    }
}
