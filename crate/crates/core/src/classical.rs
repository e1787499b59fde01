//! Classical phase-space reference: local moments, observable histograms and
//! the law of total variance for a genuine density `F(q, p)`.
//!
//! Densities live on the Wigner lattice so a nonnegative Wigner function can be
//! handed over cell for cell.

use serde::Serialize;

use crate::phase_space::{wigner_transform, QuasiDistribution, QuasiKind};
use crate::states::StateRecipe;
use crate::{par, Error, GridSpec, RealProfile, Result, Wavefunction, DEFAULT_MASK_EPS};

/// Largest tolerated deviation of `Σ F dq dp` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Magnitude below which negative Wigner cells are treated as round-off.
pub const CLIP_LIMIT: f64 = 1e-9;

pub const MIN_BIN_COUNT: usize = 16;

/// A nonnegative, normalized density on `q_i × p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceDensity {
    grid: GridSpec,
    p: Vec<f64>,
    dp: f64,
    values: Vec<f64>,
}

impl PhaseSpaceDensity {
    /// Validates sign and normalization of row-major `values`.
    pub fn new(grid: GridSpec, p: Vec<f64>, dp: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() * p.len() {
            return Err(Error::input("density: shape does not match the lattice"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::input(format!(
                "density: cell value {v} is not a nonnegative number"
            )));
        }
        let total = values.iter().sum::<f64>() * grid.dq() * dp;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::input(format!("density: total mass {total} is not 1")));
        }
        Ok(Self { grid, p, dp, values })
    }

    /// Samples `f(q, p)` on the Wigner lattice of `grid` and rescales to unit mass.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let p = grid.wigner_momenta();
        let dp = grid.wigner_dp();
        let n = grid.n();
        let mut values = par::build_rows(n, p.len(), |i, row| {
            let q = grid.q(i);
            row.iter_mut().zip(&p).for_each(|(v, &pk)| *v = f(q, pk));
        });
        let total = values.iter().sum::<f64>() * grid.dq() * dp;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::input("density: function has no mass on the lattice"));
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(*grid, p, dp, values)
    }

    /// Bivariate normal with correlation `rho`.
    pub fn gaussian(grid: &GridSpec, mean: (f64, f64), sigma_q: f64, sigma_p: f64, rho: f64) -> Result<Self> {
        if !(sigma_q > 0.0 && sigma_p > 0.0 && rho.abs() < 1.0) {
            return Err(Error::input("density: need positive widths and |rho| < 1"));
        }
        let scale = 2.0 * (1.0 - rho * rho);
        Self::from_fn(grid, |q, p| {
            let x = (q - mean.0) / sigma_q;
            let y = (p - mean.1) / sigma_p;
            (-(x * x - 2.0 * rho * x * y + y * y) / scale).exp()
        })
    }

    /// All mass in the single cell `(iq, ip)`.
    pub fn point(grid: &GridSpec, iq: usize, ip: usize) -> Result<Self> {
        let n = grid.n();
        if iq >= n || ip >= n {
            return Err(Error::input("density: cell index outside the lattice"));
        }
        let dp = grid.wigner_dp();
        let mut values = vec![0.0; n * n];
        values[iq * n + ip] = 1.0 / (grid.dq() * dp);
        Self::new(*grid, grid.wigner_momenta(), dp, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, iq: usize) -> &[f64] {
        let w = self.p.len();
        &self.values[iq * w..(iq + 1) * w]
    }

    /// `P(q) = Σ_p F dp`.
    pub fn q_marginal(&self) -> Vec<f64> {
        (0..self.grid.n())
            .map(|i| self.row(i).iter().sum::<f64>() * self.dp)
            .collect()
    }

    /// Same data tagged as a classical [`QuasiDistribution`] for export.
    pub fn to_distribution(&self) -> QuasiDistribution {
        QuasiDistribution::from_parts(
            QuasiKind::Classical,
            self.grid,
            self.p.clone(),
            self.dp,
            self.values.clone(),
        )
    }

    fn mask(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        let marginal = self.q_marginal();
        let max = marginal.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::precondition("density has empty support"));
        }
        let mask = marginal.iter().map(|&m| m > DEFAULT_MASK_EPS * max).collect();
        Ok((marginal, mask))
    }
}

/// A sampled dynamical variable `a(q_i, p_k)` on the same lattice as a density.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalObservable {
    values: Vec<f64>,
}

impl ClassicalObservable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observable: values must be finite"));
        }
        Ok(Self { values })
    }

    pub fn from_fn(f: &PhaseSpaceDensity, a: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let grid = f.grid();
        let values = (0..grid.n())
            .flat_map(|i| f.momenta().iter().map(move |&p| (grid.q(i), p)))
            .map(|(q, p)| a(q, p))
            .collect();
        Self::new(values)
    }

    /// `a = p`.
    pub fn momentum(f: &PhaseSpaceDensity) -> Self {
        Self::from_fn(f, |_, p| p).expect("momentum lattice is finite")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, f: &PhaseSpaceDensity) -> Result<()> {
        if self.values.len() != f.values.len() {
            return Err(Error::input("observable: shape does not match the density"));
        }
        Ok(())
    }
}

fn row_moment(f: &PhaseSpaceDensity, a: &ClassicalObservable, iq: usize, n: u32) -> f64 {
    let w = f.p.len();
    f.row(iq)
        .iter()
        .zip(&a.values[iq * w..(iq + 1) * w])
        .map(|(f, a)| f * a.powi(n as i32))
        .sum::<f64>()
        * f.dp
}

/// `Σ_k a(q,p_k)ⁿ F(q,p_k) dp / P(q)` where `P(q)` clears the mask.
pub fn classical_local_moment(f: &PhaseSpaceDensity, a: &ClassicalObservable, n: u32) -> Result<RealProfile> {
    if !(1..=4).contains(&n) {
        return Err(Error::input(format!("moment order must be 1..4, got {n}")));
    }
    a.check(f)?;
    let (marginal, mask) = f.mask()?;
    let values = par::map_indices(f.grid.n(), |i| row_moment(f, a, i, n) / marginal[i]);
    Ok(RealProfile::masked(f.grid, values, mask))
}

/// Conditional variance of `a` at each `q`; nonnegative up to round-off.
pub fn classical_local_variance(f: &PhaseSpaceDensity, a: &ClassicalObservable) -> Result<RealProfile> {
    let m1 = classical_local_moment(f, a, 1)?;
    let m2 = classical_local_moment(f, a, 2)?;
    let values = m2.values().iter().zip(m1.values()).map(|(b, a)| b - a * a).collect();
    Ok(RealProfile::masked(f.grid, values, m1.mask().to_vec()))
}

/// Histogram realization of `P(a,q)`, `P(a)` and `P(a|q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableDistribution {
    edges: Vec<f64>,
    n_q: usize,
    dq: f64,
    /// Bin-major: `joint[b * n_q + j]`.
    joint: Vec<f64>,
    conditional: Vec<f64>,
    marginal: Vec<f64>,
    q_marginal: Vec<f64>,
    mask: Vec<bool>,
}

impl ObservableDistribution {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// `P(a)` per bin.
    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn joint(&self, bin: usize, iq: usize) -> f64 {
        self.joint[bin * self.n_q + iq]
    }

    pub fn conditional(&self, bin: usize, iq: usize) -> f64 {
        self.conditional[bin * self.n_q + iq]
    }

    /// `P(q)`.
    pub fn q_marginal(&self) -> &[f64] {
        &self.q_marginal
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `Σ_a P(a|q) da`.
    pub fn conditional_mass(&self, iq: usize) -> f64 {
        (0..self.bin_count()).map(|b| self.conditional(b, iq)).sum::<f64>() * self.bin_width()
    }

    /// `∫ a P(a|q) da`, with each bin represented by its center.
    pub fn local_mean(&self, iq: usize) -> f64 {
        let da = self.bin_width();
        self.centers()
            .iter()
            .enumerate()
            .map(|(b, a)| a * self.conditional(b, iq))
            .sum::<f64>()
            * da
    }

    /// `∫ a P(a,q) da / P(q)`, the same quantity through the joint density.
    pub fn local_mean_via_joint(&self, iq: usize) -> f64 {
        let da = self.bin_width();
        self.centers()
            .iter()
            .enumerate()
            .map(|(b, a)| a * self.joint(b, iq))
            .sum::<f64>()
            * da
            / self.q_marginal[iq]
    }

    /// Local means on the masked-in points, via the conditional.
    pub fn local_mean_profile(&self, grid: &GridSpec) -> RealProfile {
        let values = (0..self.n_q).map(|j| self.local_mean(j)).collect();
        RealProfile::masked(*grid, values, self.mask.clone())
    }
}

fn bin_index(a: f64, lo: f64, da: f64, bins: usize) -> usize {
    (((a - lo) / da).floor().max(0.0) as usize).min(bins - 1)
}

/// Deposits `F dq dp` of every cell into the bin holding `a(q, p)`; bins are
/// right-open except the top one. A constant `a` gets a unit-width range
/// centred on the constant.
pub fn observable_distribution(
    f: &PhaseSpaceDensity,
    a: &ClassicalObservable,
    bin_count: usize,
) -> Result<ObservableDistribution> {
    if bin_count < MIN_BIN_COUNT {
        return Err(Error::input(format!("bin count must be at least {MIN_BIN_COUNT}")));
    }
    a.check(f)?;
    let (q_marginal, mask) = f.mask()?;
    let (mut lo, mut hi) = a
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    let da = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..=bin_count).map(|b| lo + b as f64 * da).collect();
    edges[bin_count] = hi;

    let n_q = f.grid.n();
    let dq = f.grid.dq();
    let w = f.p.len();
    let mut joint = vec![0.0; bin_count * n_q];
    for j in 0..n_q {
        for k in 0..w {
            let idx = j * w + k;
            let b = bin_index(a.values[idx], lo, da, bin_count);
            // Mass F·dq·dp spread over the bin area da·dq.
            joint[b * n_q + j] += f.values[idx] * f.dp / da;
        }
    }
    let conditional = joint
        .chunks(n_q)
        .flat_map(|row| {
            row.iter()
                .zip(&q_marginal)
                .zip(&mask)
                .map(|((pj, pq), &m)| if m { pj / pq } else { 0.0 })
        })
        .collect();
    let marginal = joint.chunks(n_q).map(|row| row.iter().sum::<f64>() * dq).collect();
    Ok(ObservableDistribution {
        edges,
        n_q,
        dq,
        joint,
        conditional,
        marginal,
        q_marginal,
        mask,
    })
}

/// Law-of-total-variance split for a classical density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalDecomposition {
    pub avg_local_variance: f64,
    pub variance_of_local_avg: f64,
    pub total: f64,
}

impl ClassicalDecomposition {
    pub fn sum(&self) -> f64 {
        self.avg_local_variance + self.variance_of_local_avg
    }

    pub fn residual(&self) -> f64 {
        (self.sum() - self.total).abs()
    }
}

/// Every row with `P(q) > 0` contributes, which makes the split exact.
pub fn classical_variance_decomposition(
    f: &PhaseSpaceDensity,
    a: &ClassicalObservable,
) -> Result<ClassicalDecomposition> {
    a.check(f)?;
    let marginal = f.q_marginal();
    if marginal.iter().all(|&m| m <= 0.0) {
        return Err(Error::precondition("density has empty support"));
    }
    let dq = f.grid.dq();
    let n = f.grid.n();
    let rows: Vec<(f64, f64, f64)> = par::map_indices(n, |i| {
        let pq = marginal[i];
        if pq <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let mean = row_moment(f, a, i, 1) / pq;
        let second = row_moment(f, a, i, 2) / pq;
        (pq, mean, second - mean * mean)
    });
    let global: f64 = rows.iter().map(|(pq, mean, _)| pq * mean).sum::<f64>() * dq;
    let avg_local_variance = rows.iter().map(|(pq, _, var)| pq * var).sum::<f64>() * dq;
    let variance_of_local_avg = rows
        .iter()
        .map(|(pq, mean, _)| pq * (mean - global).powi(2))
        .sum::<f64>()
        * dq;
    let total = f
        .values
        .iter()
        .zip(&a.values)
        .map(|(fv, av)| fv * (av - global).powi(2))
        .sum::<f64>()
        * dq
        * f.dp;
    Ok(ClassicalDecomposition {
        avg_local_variance,
        variance_of_local_avg,
        total,
    })
}

/// The Wigner function of a Gaussian state, re-labelled as a classical density.
///
/// Cells more negative than `-CLIP_LIMIT` are refused; smaller negatives are
/// round-off and are set to zero.
pub fn wigner_as_classical(psi: &Wavefunction, recipe: &StateRecipe) -> Result<PhaseSpaceDensity> {
    if !matches!(recipe, StateRecipe::Gaussian { .. }) {
        return Err(Error::precondition(format!("Wigner not nonnegative for {recipe}")));
    }
    let w = wigner_transform(psi)?;
    let min = w.min_cell();
    if min.value < -CLIP_LIMIT {
        return Err(Error::precondition(format!(
            "Wigner not nonnegative: {:.3e} at (q={}, p={})",
            min.value, min.q, min.p
        )));
    }
    let values = w.values().iter().map(|v| v.max(0.0)).collect();
    PhaseSpaceDensity::new(*w.grid(), w.momenta().to_vec(), w.dp(), values)
}
