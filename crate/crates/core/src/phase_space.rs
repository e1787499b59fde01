//! Wigner and Margenau–Hill quasi-distributions, their local moments, and the
//! characteristic-function route to the Margenau–Hill function.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::local::{self, per_density, Definition, LocalProfile, MomentOrder, ObservableSpec};
use crate::numerics::{fft_forward, fft_inverse, momentum_density_fine, momentum_representation, momentum_slots};
use crate::par;
use crate::states::EDGE_DECAY_LIMIT;
use crate::{Error, GridSpec, RealProfile, Result, Wavefunction};

/// Highest momentum power accepted by the phase-space local moments.
pub const MAX_PHASE_SPACE_POWER: u32 = 4;

/// Largest per-cell gap tolerated between `ϱ·P^S(p|q)` and `F^MH`.
pub const BAYES_TOLERANCE: f64 = 1e-7;

/// Tolerance for the q-marginal test that ties a distribution to a state.
const SAME_STATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasiKind {
    WeylWigner,
    MargenauHill,
    /// A genuine classical density stored in the same layout.
    Classical,
}

impl QuasiKind {
    pub fn code(self) -> u64 {
        match self {
            QuasiKind::WeylWigner => 0,
            QuasiKind::MargenauHill => 1,
            QuasiKind::Classical => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(QuasiKind::WeylWigner),
            1 => Some(QuasiKind::MargenauHill),
            2 => Some(QuasiKind::Classical),
            _ => None,
        }
    }

    fn definition(self) -> Result<Definition> {
        match self {
            QuasiKind::WeylWigner => Ok(Definition::W),
            QuasiKind::MargenauHill => Ok(Definition::MH),
            QuasiKind::Classical => Err(Error::input(
                "classical densities have no quantum local-moment definition",
            )),
        }
    }
}

impl fmt::Display for QuasiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QuasiKind::WeylWigner => "weyl_wigner",
            QuasiKind::MargenauHill => "margenau_hill",
            QuasiKind::Classical => "classical",
        })
    }
}

impl FromStr for QuasiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weyl_wigner" | "wigner" => Ok(QuasiKind::WeylWigner),
            "margenau_hill" | "mh" => Ok(QuasiKind::MargenauHill),
            "classical" => Ok(QuasiKind::Classical),
            other => Err(Error::input(format!("distribution kind: unknown '{other}'"))),
        }
    }
}

/// Location and value of one cell of a phase-space array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellExtremum {
    pub value: f64,
    pub q: f64,
    pub p: f64,
    pub iq: usize,
    pub ip: usize,
}

/// A real function on the `(q, p)` lattice, row-major with `q` as the row
/// index and momenta ascending along each row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiDistribution {
    kind: QuasiKind,
    grid: GridSpec,
    p: Vec<f64>,
    dp: f64,
    values: Vec<f64>,
}

impl QuasiDistribution {
    pub(crate) fn from_parts(kind: QuasiKind, grid: GridSpec, p: Vec<f64>, dp: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n() * p.len());
        Self {
            kind,
            grid,
            p,
            dp,
            values,
        }
    }

    pub fn kind(&self) -> QuasiKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Ascending momentum axis.
    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.p.len() + ip]
    }

    pub fn row(&self, iq: usize) -> &[f64] {
        let w = self.p.len();
        &self.values[iq * w..(iq + 1) * w]
    }

    /// `Σ_p F dp` per position.
    pub fn q_marginal(&self) -> Vec<f64> {
        (0..self.grid.n())
            .map(|i| self.row(i).iter().sum::<f64>() * self.dp)
            .collect()
    }

    /// `Σ_q F dq` per momentum.
    pub fn p_marginal(&self) -> Vec<f64> {
        let dq = self.grid.dq();
        let mut out = vec![0.0; self.p.len()];
        for i in 0..self.grid.n() {
            out.iter_mut().zip(self.row(i)).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o *= dq);
        out
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dp * self.grid.dq()
    }

    /// `Σ_p pⁿ F(q, p) dp` per position.
    pub fn moment_density(&self, power: u32) -> Vec<f64> {
        (0..self.grid.n())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(&self.p)
                    .map(|(f, p)| f * p.powi(power as i32))
                    .sum::<f64>()
                    * self.dp
            })
            .collect()
    }

    /// Smallest cell; ties resolve to the first cell in row-major order.
    pub fn min_cell(&self) -> CellExtremum {
        self.extremum(|a, b| a < b)
    }

    pub fn max_cell(&self) -> CellExtremum {
        self.extremum(|a, b| a > b)
    }

    fn extremum(&self, better: impl Fn(f64, f64) -> bool) -> CellExtremum {
        let w = self.p.len();
        let mut best = 0;
        for (idx, &v) in self.values.iter().enumerate() {
            if better(v, self.values[best]) {
                best = idx;
            }
        }
        let (iq, ip) = (best / w, best % w);
        CellExtremum {
            value: self.values[best],
            q: self.grid.q(iq),
            p: self.p[ip],
            iq,
            ip,
        }
    }

    /// Compares both marginals with `ϱ(q)` and `|φ(p)|²` and fails when either
    /// deviates by more than `tol`. Returns the two maximum deviations.
    pub fn check_marginals(&self, psi: &Wavefunction, tol: f64) -> Result<(f64, f64)> {
        // Wigner and classical arrays share the half-spacing lattice.
        let momentum_density = match self.kind {
            QuasiKind::MargenauHill => momentum_representation(psi).density(),
            _ => momentum_density_fine(psi).1,
        };
        let q_err = max_abs_diff(&self.q_marginal(), &psi.density());
        let p_err = max_abs_diff(&self.p_marginal(), &momentum_density);
        if q_err > tol || p_err > tol {
            return Err(Error::SelfCheck(format!(
                "{} marginals deviate (q: {q_err:.3e}, p: {p_err:.3e}, tolerance {tol:e}); \
                 the state may exceed the lattice bandwidth",
                self.kind
            )));
        }
        Ok((q_err, p_err))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Builds the quasi-distribution of the requested kind.
pub fn transform(psi: &Wavefunction, kind: QuasiKind) -> Result<QuasiDistribution> {
    match kind {
        QuasiKind::WeylWigner => wigner_transform(psi),
        QuasiKind::MargenauHill => Ok(margenau_hill_transform(psi)),
        QuasiKind::Classical => Err(Error::input("a state has no classical transform")),
    }
}

/// Wigner function on the lattice `q_i × p_m`, `p_m = m·πħ/(n·dq)`.
///
/// `W(q_i, p_m) = (dq/πħ) Σ_j ψ̄(q_{i+j}) ψ(q_{i−j}) e^{2i p_m j dq/ħ}`, with
/// `ψ` taken as zero outside the window so no lag pair wraps around.
pub fn wigner_transform(psi: &Wavefunction) -> Result<QuasiDistribution> {
    let edge = psi.edge_amplitude();
    if edge >= EDGE_DECAY_LIMIT {
        return Err(Error::precondition(format!(
            "edge decay check failed: |ψ| = {edge:.3e} at the window edge would corrupt the correlation product"
        )));
    }
    let grid = *psi.grid();
    let n = grid.n();
    let half = (n / 2) as i64;
    let amp = psi.amplitudes();
    let scale = grid.dq() / (PI * grid.hbar());
    let values = par::build_rows(n, n, |i, row| {
        let mut buf = vec![Complex64::default(); n];
        let i = i as i64;
        for j in -half..half {
            let (a, b) = (i + j, i - j);
            if (0..n as i64).contains(&a) && (0..n as i64).contains(&b) {
                buf[j.rem_euclid(n as i64) as usize] = amp[a as usize].conj() * amp[b as usize];
            }
        }
        fft_inverse(&mut buf);
        for (k, out) in row.iter_mut().enumerate() {
            let m = k as i64 - half;
            *out = buf[m.rem_euclid(n as i64) as usize].re * scale;
        }
    });
    Ok(QuasiDistribution::from_parts(
        QuasiKind::WeylWigner,
        grid,
        grid.wigner_momenta(),
        grid.wigner_dp(),
        values,
    ))
}

/// `F^MH(q_j, p_k) = Re[φ(p_k) ψ̄(q_j) e^{i p_k q_j/ħ}] / √(2πħ)` on the
/// standard momentum grid.
pub fn margenau_hill_transform(psi: &Wavefunction) -> QuasiDistribution {
    let grid = *psi.grid();
    let n = grid.n();
    let slots = momentum_slots(&grid, psi.amplitudes());
    let p = grid.momenta();
    let phi: Vec<Complex64> = (0..n).map(|i| slots[grid.sorted_to_slot(i)]).collect();
    let amp = psi.amplitudes();
    let scale = (2.0 * PI * grid.hbar()).sqrt().recip();
    let hbar = grid.hbar();
    let values = par::build_rows(n, n, |j, row| {
        let q = grid.q(j);
        let conj = amp[j].conj();
        for ((out, &pk), &f) in row.iter_mut().zip(&p).zip(&phi) {
            *out = (f * conj * Complex64::from_polar(1.0, pk * q / hbar)).re * scale;
        }
    });
    QuasiDistribution::from_parts(QuasiKind::MargenauHill, grid, p, grid.dp(), values)
}

fn ensure_same_state(f: &QuasiDistribution, psi: &Wavefunction) -> Result<()> {
    if f.grid() != psi.grid() {
        return Err(Error::input("distribution and state live on different grids"));
    }
    let err = max_abs_diff(&f.q_marginal(), &psi.density());
    if err > SAME_STATE_TOLERANCE {
        return Err(Error::input(format!(
            "distribution was not built from this state (q-marginal off by {err:.3e})"
        )));
    }
    Ok(())
}

/// `Σ_k p_kⁿ F(q, p_k) dp / ϱ(q)`: the local value of `p̂ⁿ`, whose symbol is
/// `pⁿ` for both kernels.
pub fn phase_space_local_moment(f: &QuasiDistribution, psi: &Wavefunction, n: u32) -> Result<LocalProfile> {
    if !(1..=MAX_PHASE_SPACE_POWER).contains(&n) {
        return Err(Error::input(format!(
            "phase-space moment order must be 1..{MAX_PHASE_SPACE_POWER}, got {n}"
        )));
    }
    ensure_same_state(f, psi)?;
    per_density(
        psi,
        &f.moment_density(n),
        f.kind().definition()?,
        MomentOrder::Moment(n),
    )
}

/// Second local moment of `p̂` minus the squared first; may be negative.
pub fn phase_space_local_variance(f: &QuasiDistribution, psi: &Wavefunction) -> Result<LocalProfile> {
    local_variance_of(f, psi, &ObservableSpec::momentum())
}

/// Local moment of order `k` of an observable whose phase-space symbol is
/// known: `pⁿ` for momentum powers, `g(q)` for position functions.
pub fn local_moment_of(f: &QuasiDistribution, psi: &Wavefunction, a: &ObservableSpec, k: u32) -> Result<LocalProfile> {
    match a {
        ObservableSpec::MomentumPower(n) => {
            let mut profile = phase_space_local_moment(f, psi, n * k)?;
            profile.order = MomentOrder::Moment(k);
            Ok(profile)
        }
        ObservableSpec::PositionFunction(g) => {
            ensure_same_state(f, psi)?;
            if g.len() != psi.grid().n() {
                return Err(Error::input("observable: position function does not match grid"));
            }
            // The q-marginal equals ϱ (checked above), so the local value is g(q)ᵏ
            // exactly; using ϱ avoids dividing marginal round-off by tiny densities.
            let density: Vec<f64> = psi.density().iter().zip(g).map(|(r, g)| r * g.powi(k as i32)).collect();
            per_density(psi, &density, f.kind().definition()?, MomentOrder::Moment(k))
        }
        ObservableSpec::LinearAction { .. } => Err(Error::input(
            "observable: no phase-space symbol is available for a linear action",
        )),
    }
}

pub fn local_variance_of(f: &QuasiDistribution, psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    let m1 = local_moment_of(f, psi, a, 1)?;
    let m2 = local_moment_of(f, psi, a, 2)?;
    let values = m2.values().iter().zip(m1.values()).map(|(b, a)| b - a * a).collect();
    Ok(LocalProfile {
        definition: m1.definition,
        order: MomentOrder::Variance,
        profile: RealProfile::masked(*psi.grid(), values, m1.mask().to_vec()),
    })
}

/// `G(τ, q)` sampled at one `τ` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicSlice {
    pub tau: f64,
    /// Zero on masked-out points.
    pub values: Vec<Complex64>,
    pub mask: Vec<bool>,
}

fn lattice_shift(grid: &GridSpec, tau: f64) -> Result<i64> {
    let shift = grid.hbar() * tau / grid.dq();
    let rounded = shift.round();
    if !shift.is_finite() || (shift - rounded).abs() > 1e-9 * rounded.abs().max(1.0) {
        return Err(Error::input(format!(
            "tau: ħτ must be an integer multiple of dq (ħτ/dq = {shift})"
        )));
    }
    Ok(rounded as i64)
}

/// `G(τ,q) = ψ(q+ħτ)/(2ψ(q)) + ψ̄(q−ħτ)/(2ψ̄(q))`, the symmetrized local
/// average of `e^{iτp̂}`, evaluated by periodic grid shifts.
pub fn characteristic_function_s(psi: &Wavefunction, tau: f64) -> Result<CharacteristicSlice> {
    let grid = psi.grid();
    let shift = lattice_shift(grid, tau)?;
    let n = grid.n() as i64;
    let amp = psi.amplitudes();
    let mask = psi.mask();
    let values = (0..n)
        .map(|j| {
            if !mask[j as usize] {
                return Complex64::default();
            }
            let z = amp[j as usize];
            let fwd = amp[(j + shift).rem_euclid(n) as usize];
            let back = amp[(j - shift).rem_euclid(n) as usize];
            fwd / (2.0 * z) + back.conj() / (2.0 * z.conj())
        })
        .collect();
    Ok(CharacteristicSlice { tau, values, mask })
}

/// Symmetrized conditional momentum quasi-density `P^S(p|q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMomentum {
    grid: GridSpec,
    p: Vec<f64>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ConditionalMomentum {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn momenta(&self) -> &[f64] {
        &self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn row(&self, iq: usize) -> &[f64] {
        let n = self.p.len();
        &self.values[iq * n..(iq + 1) * n]
    }

    /// `Σ_p pⁿ P(p|q_j) dp`.
    pub fn moment(&self, iq: usize, power: u32) -> f64 {
        self.row(iq)
            .iter()
            .zip(&self.p)
            .map(|(v, p)| v * p.powi(power as i32))
            .sum::<f64>()
            * self.grid.dp()
    }
}

/// Inverts `G(τ, q)` over the lattice `ħτ ∈ dq·ℤ` (periodic):
/// `P^S(p_k|q) = (dτ/2π) Σ_s e^{−iτ_s p_k} G(τ_s, q)` with `dτ = dq/ħ`.
///
/// Rows are filled wherever `ψ(q) ≠ 0`; the mask marks where they carry a claim.
pub fn conditional_momentum_s(psi: &Wavefunction) -> ConditionalMomentum {
    let grid = *psi.grid();
    let n = grid.n();
    let amp = psi.amplitudes();
    let scale = grid.dq() / (2.0 * PI * grid.hbar());
    let values = par::build_rows(n, n, |j, row| {
        let z = amp[j];
        if z == Complex64::default() {
            return;
        }
        let mut buf: Vec<Complex64> = (0..n)
            .map(|s| {
                let fwd = amp[(j + s) % n];
                let back = amp[(j + n - s) % n];
                fwd / (2.0 * z) + back.conj() / (2.0 * z.conj())
            })
            .collect();
        fft_forward(&mut buf);
        for (i, out) in row.iter_mut().enumerate() {
            *out = buf[grid.sorted_to_slot(i)].re * scale;
        }
    });
    ConditionalMomentum {
        grid,
        p: grid.momenta(),
        values,
        mask: psi.mask(),
    }
}

/// `ϱ(q)·P^S(p|q)`, checked cell by cell against the Margenau–Hill transform.
pub fn bayes_product(psi: &Wavefunction, conditional: &ConditionalMomentum) -> Result<QuasiDistribution> {
    let grid = *psi.grid();
    if conditional.grid() != &grid {
        return Err(Error::input("conditional distribution lives on a different grid"));
    }
    let n = grid.n();
    let rho = psi.density();
    let values: Vec<f64> = conditional
        .values()
        .chunks(n)
        .zip(&rho)
        .flat_map(|(row, r)| row.iter().map(move |v| v * r))
        .collect();
    let reference = margenau_hill_transform(psi);
    let err = max_abs_diff(&values, reference.values());
    if err > BAYES_TOLERANCE {
        return Err(Error::SelfCheck(format!(
            "ϱ·P^S(p|q) deviates from the Margenau–Hill function by {err:.3e}"
        )));
    }
    Ok(QuasiDistribution::from_parts(
        QuasiKind::MargenauHill,
        grid,
        conditional.momenta().to_vec(),
        grid.dp(),
        values,
    ))
}

/// `(2⟨p̂δp̂⟩ − ⟨p̂²δ⟩ − ⟨δp̂²⟩)/(4ϱ)`: the gap `σ²_W − σ²_MH`, equal to `σ²_C − σ²_W`.
pub fn variance_difference_term(psi: &Wavefunction) -> Result<RealProfile> {
    let p = ObservableSpec::momentum();
    let sandwich = local::sandwich_density(psi, &p)?;
    let symmetrized = local::local_density_s_power(psi, &p, 2)?;
    let density: Vec<f64> = sandwich
        .values()
        .iter()
        .zip(symmetrized.values())
        .map(|(a, b)| (2.0 * a - 2.0 * b) / 4.0)
        .collect();
    Ok(per_density(psi, &density, Definition::W, MomentOrder::Variance)?.profile)
}
