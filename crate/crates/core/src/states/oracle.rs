use std::f64::consts::PI;

use super::StateRecipe;
use crate::{Error, Result};

/// Closed-form local moments of the Gaussian recipe
/// `ψ ∝ exp(−(q−q0)²/(4s²) + i·k0·q)`.
///
/// With `x = q − q0`, `p̂ψ/ψ = ħk0 + iħx/(2s²)` and
/// `p̂²ψ/ψ = ħ²(k0² + 1/(2s²) − x²/(4s⁴)) + i(…)`, from which every profile
/// below follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianOracle {
    pub s: f64,
    pub k0: f64,
    pub q0: f64,
    pub hbar: f64,
}

/// Closed forms for a Gaussian recipe; any other recipe is rejected.
pub fn gaussian_oracle(recipe: &StateRecipe, hbar: f64) -> Result<GaussianOracle> {
    match *recipe {
        StateRecipe::Gaussian { s, k0, q0 } => Ok(GaussianOracle { s, k0, q0, hbar }),
        _ => Err(Error::input("gaussian_oracle requires a gaussian recipe")),
    }
}

impl GaussianOracle {
    pub fn density(&self, q: f64) -> f64 {
        let x = q - self.q0;
        (-x * x / (2.0 * self.s * self.s)).exp() / (2.0 * PI * self.s * self.s).sqrt()
    }

    /// Local value of `p̂`, identical under S, C, MH and W.
    pub fn mean_momentum(&self, _q: f64) -> f64 {
        self.hbar * self.k0
    }

    /// Symmetrized local second moment of `p̂`.
    pub fn second_moment_s(&self, q: f64) -> f64 {
        let x = q - self.q0;
        let s2 = self.s * self.s;
        self.hbar * self.hbar * (self.k0 * self.k0 + 1.0 / (2.0 * s2) - x * x / (4.0 * s2 * s2))
    }

    /// `|p̂ψ|²/ϱ`.
    pub fn sandwich_moment(&self, q: f64) -> f64 {
        let x = q - self.q0;
        let s2 = self.s * self.s;
        self.hbar * self.hbar * (self.k0 * self.k0 + x * x / (4.0 * s2 * s2))
    }

    pub fn variance_c(&self, q: f64) -> f64 {
        let x = q - self.q0;
        let s2 = self.s * self.s;
        self.hbar * self.hbar * x * x / (4.0 * s2 * s2)
    }

    pub fn variance_s(&self, q: f64) -> f64 {
        self.second_moment_s(q) - self.mean_momentum(q).powi(2)
    }

    pub fn variance_w(&self, _q: f64) -> f64 {
        self.hbar * self.hbar / (4.0 * self.s * self.s)
    }

    /// `⟨p̂²⟩`.
    pub fn mean_square_momentum(&self) -> f64 {
        self.hbar * self.hbar * (self.k0 * self.k0 + 1.0 / (4.0 * self.s * self.s))
    }

    /// Wigner function `(1/πħ) exp(−x²/(2s²) − 2s²(p−ħk0)²/ħ²)`.
    pub fn wigner(&self, q: f64, p: f64) -> f64 {
        let x = q - self.q0;
        let y = p - self.hbar * self.k0;
        let s2 = self.s * self.s;
        (-x * x / (2.0 * s2) - 2.0 * s2 * y * y / (self.hbar * self.hbar)).exp() / (PI * self.hbar)
    }
}
