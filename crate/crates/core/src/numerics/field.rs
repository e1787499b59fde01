use num_complex::Complex64;

use super::GridSpec;
use crate::{Error, Result};

/// Relative density threshold below which local quotients are not reported.
///
/// A point is masked in when `ϱ_j > DEFAULT_MASK_EPS · max_j ϱ_j`.
pub const DEFAULT_MASK_EPS: f64 = 1e-10;

/// A pure state sampled on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: GridSpec,
    amp: Vec<Complex64>,
    mask_eps: f64,
}

impl Wavefunction {
    /// Wraps raw amplitudes without normalizing them.
    pub fn new(grid: GridSpec, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.n() {
            return Err(Error::input(format!(
                "expected {} amplitudes, got {}",
                grid.n(),
                amp.len()
            )));
        }
        if amp.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::input("amplitudes must be finite"));
        }
        Ok(Self {
            grid,
            amp,
            mask_eps: DEFAULT_MASK_EPS,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amp
    }

    pub fn mask_eps(&self) -> f64 {
        self.mask_eps
    }

    /// Replaces the relative mask threshold carried by this state.
    pub fn with_mask_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
            return Err(Error::input("mask epsilon must lie in [0, 1)"));
        }
        self.mask_eps = eps;
        Ok(self)
    }

    /// `Σ |ψ_j|² dq`.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dq()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sq();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::precondition("state has zero norm"));
        }
        let scale = norm.sqrt().recip();
        self.amp.iter_mut().for_each(|z| *z *= scale);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// Probability density `ϱ(q_j) = |ψ(q_j)|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amp.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Points where the density is large enough for local quotients.
    pub fn mask(&self) -> Vec<bool> {
        let rho = self.density();
        let cut = self.mask_eps * rho.iter().cloned().fold(0.0, f64::max);
        rho.iter().map(|&r| r > cut).collect()
    }

    pub fn density_profile(&self) -> RealProfile {
        RealProfile::full(self.grid, self.density())
    }

    /// Largest amplitude modulus at the two window edges.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.amp.len();
        self.amp[0].norm().max(self.amp[n - 1].norm())
    }

    /// `⟨q̂⟩`.
    pub fn mean_position(&self) -> f64 {
        let dq = self.grid.dq();
        self.amp
            .iter()
            .enumerate()
            .map(|(j, z)| self.grid.q(j) * z.norm_sqr())
            .sum::<f64>()
            * dq
    }
}

/// A real function of position with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RealProfile {
    grid: GridSpec,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl RealProfile {
    pub fn new(grid: GridSpec, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.n() || mask.len() != grid.n() {
            return Err(Error::input("profile length does not match grid"));
        }
        Ok(Self { grid, values, mask })
    }

    /// A profile defined at every grid point.
    pub fn full(grid: GridSpec, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n(), "profile length does not match grid");
        let mask = vec![true; values.len()];
        Self { grid, values, mask }
    }

    /// Builds a masked profile; masked-out entries are stored as NaN.
    pub(crate) fn masked(grid: GridSpec, mut values: Vec<f64>, mask: Vec<bool>) -> Self {
        for (v, &m) in values.iter_mut().zip(&mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        Self { grid, values, mask }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at grid index `j`, `None` when masked out.
    pub fn get(&self, j: usize) -> Option<f64> {
        self.mask[j].then(|| self.values[j])
    }

    /// Value at the grid point nearest to `q`.
    pub fn at_q(&self, q: f64) -> Option<f64> {
        let j = ((q - self.grid.q_min()) / self.grid.dq()).round();
        if j < 0.0 || j as usize >= self.grid.n() {
            return None;
        }
        self.get(j as usize)
    }

    /// Iterates `(q_j, value)` over masked-in points.
    pub fn iter_masked(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, &m))| m)
            .map(move |(j, (&v, _))| (j, self.grid.q(j), v))
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}
