use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GridSpec, RealProfile, Wavefunction};
use crate::{Error, Result};

/// Largest momentum power `apply_momentum_power` accepts.
pub const MAX_MOMENTUM_POWER: u32 = 8;

type Plan = Arc<dyn Fft<f64>>;

fn plans(n: usize) -> (Plan, Plan) {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// In-place `X_k = Σ_j x_j e^{−2πi jk/n}`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    plans(buf.len()).0.process(buf);
}

/// In-place unnormalized `x_j = Σ_k X_k e^{+2πi jk/n}`.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    plans(buf.len()).1.process(buf);
}

/// Momentum-space amplitudes `φ(p_k)`, sorted by ascending momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumWavefunction {
    pub grid: GridSpec,
    pub p: Vec<f64>,
    pub amp: Vec<Complex64>,
}

impl MomentumWavefunction {
    /// `Σ_k |φ_k|² dp`.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dp()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amp.iter().map(|z| z.norm_sqr()).collect()
    }
}

fn position_phase(grid: &GridSpec, p: f64) -> Complex64 {
    Complex64::from_polar(1.0, -p * grid.q_min() / grid.hbar())
}

/// FFT-slot-ordered `φ` values for a raw field.
pub(crate) fn momentum_slots(grid: &GridSpec, field: &[Complex64]) -> Vec<Complex64> {
    let mut buf = field.to_vec();
    fft_forward(&mut buf);
    let scale = grid.dq() / (2.0 * PI * grid.hbar()).sqrt();
    let momenta = grid.momenta_wrapped();
    buf.iter_mut()
        .zip(&momenta)
        .for_each(|(x, &p)| *x *= position_phase(grid, p) * scale);
    buf
}

/// `φ(p_k) = dq/√(2πħ) Σ_j ψ(q_j) e^{−i p_k q_j/ħ}`, returned in ascending `p`.
pub fn momentum_representation(psi: &Wavefunction) -> MomentumWavefunction {
    let grid = *psi.grid();
    let slots = momentum_slots(&grid, psi.amplitudes());
    let amp = (0..grid.n()).map(|i| slots[grid.sorted_to_slot(i)]).collect();
    MomentumWavefunction {
        grid,
        p: grid.momenta(),
        amp,
    }
}

/// Inverse of [`momentum_representation`].
pub fn position_representation(phi: &MomentumWavefunction) -> Result<Wavefunction> {
    let grid = phi.grid;
    let n = grid.n();
    if phi.amp.len() != n {
        return Err(Error::input("momentum amplitudes do not match grid"));
    }
    let scale = (2.0 * PI * grid.hbar()).sqrt() / grid.dq() / n as f64;
    let mut buf = vec![Complex64::default(); n];
    for (i, (&a, &p)) in phi.amp.iter().zip(&phi.p).enumerate() {
        buf[grid.sorted_to_slot(i)] = a * position_phase(&grid, p).conj() * scale;
    }
    fft_inverse(&mut buf);
    Wavefunction::new(grid, buf)
}

/// Multiplies the spectrum of `field` by `mult(k)` (wrapped slot index) and transforms back.
fn spectral_multiply(field: &[Complex64], mult: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
    let n = field.len();
    let mut buf = field.to_vec();
    fft_forward(&mut buf);
    buf.iter_mut().enumerate().for_each(|(k, x)| *x *= mult(k));
    fft_inverse(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|x| *x *= inv);
    buf
}

pub(crate) fn momentum_power_field(grid: &GridSpec, field: &[Complex64], power: u32) -> Result<Vec<Complex64>> {
    if power > MAX_MOMENTUM_POWER {
        return Err(Error::input(format!(
            "momentum power {power} exceeds the cap of {MAX_MOMENTUM_POWER}"
        )));
    }
    if power == 0 {
        return Ok(field.to_vec());
    }
    let momenta = grid.momenta_wrapped();
    Ok(spectral_multiply(field, |k| {
        Complex64::new(momenta[k].powi(power as i32), 0.0)
    }))
}

/// `⟨q|p̂ⁿ|ψ⟩`, computed by multiplying by `(ħk)ⁿ` in momentum space.
///
/// The Nyquist slot carries `k = −π/dq`, which keeps `p̂` Hermitian and makes
/// powers compose exactly.
pub fn apply_momentum_power(psi: &Wavefunction, n: u32) -> Result<Vec<Complex64>> {
    momentum_power_field(psi.grid(), psi.amplitudes(), n)
}

fn derivative_multiplier(grid: &GridSpec) -> impl Fn(usize) -> Complex64 + '_ {
    let n = grid.n();
    let dk = 2.0 * PI / grid.length();
    move |k| {
        if k == n / 2 {
            Complex64::default()
        } else {
            Complex64::new(0.0, grid.wrapped_index(k) as f64 * dk)
        }
    }
}

/// Spectral first derivative of a complex field; the Nyquist mode is dropped.
pub fn derivative_complex(grid: &GridSpec, field: &[Complex64]) -> Vec<Complex64> {
    spectral_multiply(field, derivative_multiplier(grid))
}

/// Spectral first derivative of a real field; the Nyquist mode is dropped.
pub fn derivative_real(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let field: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    derivative_complex(grid, &field).into_iter().map(|z| z.re).collect()
}

/// Spectral derivative of a profile. Masked-out entries are read as zero and
/// the mask is carried over.
pub fn spatial_derivative(profile: &RealProfile) -> RealProfile {
    let values: Vec<f64> = profile
        .values()
        .iter()
        .zip(profile.mask())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    let d = derivative_real(profile.grid(), &values);
    RealProfile::masked(*profile.grid(), d, profile.mask().to_vec())
}

/// `Σ_j values_j · dq` over masked-in points.
pub fn integrate(profile: &RealProfile) -> f64 {
    profile.iter_masked().map(|(_, _, v)| v).sum::<f64>() * profile.grid().dq()
}

/// Trigonometric interpolation of a periodic field at an arbitrary `q`.
///
/// Exact for band-limited fields; the Nyquist mode enters as a cosine so the
/// interpolant of real data stays real.
pub fn interpolate(grid: &GridSpec, field: &[Complex64], q: f64) -> Complex64 {
    let n = grid.n();
    let mut buf = field.to_vec();
    fft_forward(&mut buf);
    let dk = 2.0 * PI / grid.length();
    let x = q - grid.q_min();
    let sum: Complex64 = buf
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == n / 2 {
                c * (grid.wrapped_index(k) as f64 * dk * x).cos()
            } else {
                c * Complex64::from_polar(1.0, grid.wrapped_index(k) as f64 * dk * x)
            }
        })
        .sum();
    sum / n as f64
}

/// `|φ(p)|²` on the Wigner momentum lattice (spacing `πħ/(n·dq)`), using a
/// zero-padded transform of length `2n`.
pub fn momentum_density_fine(psi: &Wavefunction) -> (Vec<f64>, Vec<f64>) {
    let grid = psi.grid();
    let n = grid.n();
    let mut buf = vec![Complex64::default(); 2 * n];
    buf[..n].copy_from_slice(psi.amplitudes());
    fft_forward(&mut buf);
    let scale = grid.dq() * grid.dq() / (2.0 * PI * grid.hbar());
    let half = (n / 2) as i64;
    let density = (0..n as i64)
        .map(|i| {
            let m = i - half;
            buf[m.rem_euclid(2 * n as i64) as usize].norm_sqr() * scale
        })
        .collect();
    (grid.wigner_momenta(), density)
}
