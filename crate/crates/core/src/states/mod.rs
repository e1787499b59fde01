//! Analytic test states and their closed-form local moments.

mod oracle;
mod recipe;

pub use oracle::{gaussian_oracle, GaussianOracle};
pub use recipe::StateRecipe;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, GridSpec, Result, Wavefunction};

/// Maximum edge amplitude tolerated for localized states.
pub const EDGE_DECAY_LIMIT: f64 = 1e-12;

/// Highest oscillator level the factory builds.
pub const MAX_OSCILLATOR_LEVEL: u32 = 4;

/// Samples `recipe` on `grid` and normalizes it.
///
/// Localized states (anything without a plane-wave component) must decay
/// below [`EDGE_DECAY_LIMIT`] at both window edges.
pub fn synthesize(recipe: &StateRecipe, grid: &GridSpec) -> Result<Wavefunction> {
    let amp = raw_amplitudes(recipe, grid)?;
    let psi = Wavefunction::new(*grid, amp)?.normalized()?;
    if recipe.is_localized() && psi.edge_amplitude() >= EDGE_DECAY_LIMIT {
        return Err(Error::precondition(format!(
            "edge decay check failed: |ψ| = {:.3e} at the window edge (limit {EDGE_DECAY_LIMIT:e})",
            psi.edge_amplitude()
        )));
    }
    Ok(psi)
}

/// Unnormalized amplitudes; superposition branches are normalized individually
/// before being combined.
fn raw_amplitudes(recipe: &StateRecipe, grid: &GridSpec) -> Result<Vec<Complex64>> {
    match recipe {
        StateRecipe::Gaussian { s, k0, q0 } => {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::input("gaussian: s must be positive"));
            }
            if q0 - 8.0 * s < grid.q_min() || q0 + 8.0 * s > grid.q_max() {
                return Err(Error::precondition(format!(
                    "window check failed: gaussian q0 ± 8s = [{}, {}] leaves [{}, {}]",
                    q0 - 8.0 * s,
                    q0 + 8.0 * s,
                    grid.q_min(),
                    grid.q_max()
                )));
            }
            Ok(grid
                .positions()
                .iter()
                .map(|&q| {
                    let x = q - q0;
                    Complex64::from_polar((-x * x / (4.0 * s * s)).exp(), k0 * q)
                })
                .collect())
        }
        StateRecipe::PlaneWave { k } => {
            let cycles = k * grid.length() / (2.0 * PI);
            if (cycles - cycles.round()).abs() > 1e-9 * cycles.abs().max(1.0) {
                return Err(Error::precondition(format!(
                    "commensurability check failed: k·L/(2π) = {cycles} is not an integer"
                )));
            }
            Ok(grid
                .positions()
                .iter()
                .map(|&q| Complex64::from_polar(1.0, k * q))
                .collect())
        }
        StateRecipe::OscillatorEigenstate { level, omega } => {
            if *level > MAX_OSCILLATOR_LEVEL {
                return Err(Error::input(format!(
                    "oscillator: level must be at most {MAX_OSCILLATOR_LEVEL}"
                )));
            }
            if !(*omega > 0.0 && omega.is_finite()) {
                return Err(Error::input("oscillator: omega must be positive"));
            }
            let scale = (grid.mass() * omega / grid.hbar()).sqrt();
            Ok(grid
                .positions()
                .iter()
                .map(|&q| Complex64::new(hermite_function(*level, q * scale), 0.0))
                .collect())
        }
        StateRecipe::Superposition(branches) => {
            if branches.len() < 2 {
                return Err(Error::input("superposition: at least two branches required"));
            }
            let mut acc = vec![Complex64::default(); grid.n()];
            for (c, branch) in branches {
                let part = synthesize(branch, grid)?;
                acc.iter_mut().zip(part.amplitudes()).for_each(|(a, &b)| *a += c * b);
            }
            Ok(acc)
        }
    }
}

/// Normalized Hermite function `h_n(ξ)` via the stable three-term recurrence.
fn hermite_function(level: u32, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..level {
        let k = k as f64;
        let next = (2.0 / (k + 1.0)).sqrt() * xi * cur - (k / (k + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{apply_momentum_power, make_grid};
    use approx::assert_abs_diff_eq;

    fn desk() -> GridSpec {
        make_grid(512, -20.0, 20.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_is_normalized_and_centered() {
        let psi = synthesize(&StateRecipe::gaussian(1.0, 2.0, 0.0), &desk()).unwrap();
        assert_abs_diff_eq!(psi.norm_sq(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(psi.mean_position(), 0.0, epsilon = 1e-10);
        assert!(psi.edge_amplitude() < EDGE_DECAY_LIMIT);
    }

    #[test]
    fn plane_wave_has_flat_modulus() {
        let k = 2.0 * PI * 4.0 / 40.0;
        let psi = synthesize(&StateRecipe::PlaneWave { k }, &desk()).unwrap();
        for z in psi.amplitudes() {
            assert_abs_diff_eq!(z.norm(), 1.0 / 40f64.sqrt(), epsilon = 1e-14);
        }
        let err = synthesize(&StateRecipe::PlaneWave { k: 0.3 }, &desk()).unwrap_err();
        assert!(err.to_string().contains("commensurability"));
    }

    #[test]
    fn oscillator_kinetic_moment() {
        let psi = synthesize(&StateRecipe::oscillator(1, 1.0), &desk()).unwrap();
        let p2 = apply_momentum_power(&psi, 2).unwrap();
        let mean: f64 = psi
            .amplitudes()
            .iter()
            .zip(&p2)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            * psi.grid().dq();
        assert_abs_diff_eq!(mean, 1.5, epsilon = 1e-8);
    }

    #[test]
    fn oscillator_levels_are_orthonormal() {
        let grid = desk();
        let states: Vec<_> = (0..=4)
            .map(|l| synthesize(&StateRecipe::oscillator(l, 1.3), &grid).unwrap())
            .collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let overlap: f64 = a
                    .amplitudes()
                    .iter()
                    .zip(b.amplitudes())
                    .map(|(x, y)| (x.conj() * y).re)
                    .sum::<f64>()
                    * grid.dq();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(overlap, expect, epsilon = 1e-12);
            }
        }
        assert!(synthesize(&StateRecipe::oscillator(5, 1.0), &grid).is_err());
    }

    #[test]
    fn window_and_decay_checks() {
        let grid = desk();
        let err = synthesize(&StateRecipe::gaussian(1.0, 0.0, 15.0), &grid).unwrap_err();
        assert!(err.to_string().contains("window check"));
        let tight = make_grid(64, -8.0, 8.0, 1.0, 1.0).unwrap();
        let err = synthesize(&StateRecipe::gaussian(1.0, 0.0, 0.0), &tight).unwrap_err();
        assert!(err.to_string().contains("edge decay"));
    }

    #[test]
    fn superposition_is_linear_before_renormalization() {
        let grid = desk();
        let a = StateRecipe::gaussian(1.0, 1.0, -4.0);
        let b = StateRecipe::gaussian(0.7, -2.0, 3.0);
        let (ca, cb) = (Complex64::new(0.3, 0.4), Complex64::new(-1.2, 0.1));
        let sup = StateRecipe::Superposition(vec![(ca, a.clone()), (cb, b.clone())]);
        let raw = raw_amplitudes(&sup, &grid).unwrap();
        let pa = synthesize(&a, &grid).unwrap();
        let pb = synthesize(&b, &grid).unwrap();
        for (j, r) in raw.iter().enumerate() {
            let manual = ca * pa.amplitudes()[j] + cb * pb.amplitudes()[j];
            assert!((r - manual).norm() < 1e-12);
        }
        let psi = synthesize(&sup, &grid).unwrap();
        assert_abs_diff_eq!(psi.norm_sq(), 1.0, epsilon = 1e-12);
        assert!(synthesize(&StateRecipe::Superposition(vec![(ca, a)]), &grid).is_err());
    }
}
