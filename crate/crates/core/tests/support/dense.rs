//! Brute-force operator algebra on small grids.
//!
//! `p̂` is an explicit `n×n` matrix built from its eigen-decomposition in the
//! plane-wave basis, `δ(q̂ − q_j)` is the projector `E_jj/dq`, and every local
//! quantity is a quadratic form `dq Σ ψ̄_l M_lj ψ_j`. Nothing here touches an FFT.

#![allow(dead_code)]

use std::f64::consts::PI;

use locmom_core::local::{
    local_density_s_power, local_moment_s, local_variance_c, local_variance_s, sandwich_density, ObservableSpec,
};
use locmom_core::{GridSpec, Wavefunction};
use num_complex::Complex64 as C;

pub type Matrix = Vec<C>;

pub struct Dense {
    pub n: usize,
    pub dq: f64,
    pub p: Matrix,
    pub p2: Matrix,
}

impl Dense {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n();
        let dp = grid.dp();
        let half = (n / 2) as i64;
        let mut p = vec![C::default(); n * n];
        for l in 0..n {
            for j in 0..n {
                let mut sum = C::default();
                for m in -half..half {
                    let phase = 2.0 * PI * (m as f64) * ((l as f64) - (j as f64)) / n as f64;
                    sum += C::from_polar(m as f64 * dp, phase);
                }
                p[l * n + j] = sum / n as f64;
            }
        }
        let p2 = mul(n, &p, &p);
        Self {
            n,
            dq: grid.dq(),
            p,
            p2,
        }
    }

    pub fn projector(&self, j: usize) -> Matrix {
        let mut d = vec![C::default(); self.n * self.n];
        d[j * self.n + j] = C::new(1.0 / self.dq, 0.0);
        d
    }

    /// `⟨ψ|M|ψ⟩` with quadrature weight `dq`.
    pub fn form(&self, m: &Matrix, psi: &[C]) -> C {
        let n = self.n;
        let mut total = C::default();
        for l in 0..n {
            for j in 0..n {
                total += psi[l].conj() * m[l * n + j] * psi[j];
            }
        }
        total * self.dq
    }

    /// `⟨ψ|½(Â δ_j + δ_j Â)|ψ⟩`.
    pub fn symmetrized(&self, a: &Matrix, psi: &[C], j: usize) -> f64 {
        let d = self.projector(j);
        let left = mul(self.n, a, &d);
        let right = mul(self.n, &d, a);
        let sym: Matrix = left.iter().zip(&right).map(|(x, y)| 0.5 * (x + y)).collect();
        self.form(&sym, psi).re
    }

    /// `⟨ψ|Â δ_j Â|ψ⟩`.
    pub fn sandwich(&self, a: &Matrix, psi: &[C], j: usize) -> f64 {
        let d = self.projector(j);
        let m = mul(self.n, &mul(self.n, a, &d), a);
        self.form(&m, psi).re
    }

    pub fn density(&self, psi: &[C], j: usize) -> f64 {
        self.form(&self.projector(j), psi).re
    }

    /// `(Âψ)_j / ψ_j`.
    pub fn ratio(&self, a: &Matrix, psi: &[C], j: usize) -> C {
        let row: C = (0..self.n).map(|l| a[j * self.n + l] * psi[l]).sum();
        row / psi[j]
    }
}

pub fn mul(n: usize, a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = vec![C::default(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == C::default() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Brute-force local quantities at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct DenseLocal {
    pub value_s: f64,
    pub second_s: f64,
    pub variance_s: f64,
    pub variance_c: f64,
    pub density_sym_sq: f64,
    pub density_sandwich: f64,
}

pub fn local_at(d: &Dense, psi: &[C], j: usize) -> DenseLocal {
    let rho = d.density(psi, j);
    let value_s = d.symmetrized(&d.p, psi, j) / rho;
    let density_sym_sq = d.symmetrized(&d.p2, psi, j);
    let second_s = density_sym_sq / rho;
    DenseLocal {
        value_s,
        second_s,
        variance_s: second_s - value_s * value_s,
        variance_c: d.ratio(&d.p, psi, j).im.powi(2),
        density_sym_sq,
        density_sandwich: d.sandwich(&d.p, psi, j),
    }
}

/// Largest absolute gap between the spectral pipeline and the matrix algebra
/// over the masked-in points, across every S/C quantity of `p̂`.
pub fn worst_gap(psi: &Wavefunction) -> f64 {
    let d = Dense::new(psi.grid());
    let p = ObservableSpec::momentum();
    let m1 = local_moment_s(psi, &p, 1).unwrap();
    let m2 = local_moment_s(psi, &p, 2).unwrap();
    let vs = local_variance_s(psi, &p).unwrap();
    let vc = local_variance_c(psi, &p).unwrap();
    let sym = local_density_s_power(psi, &p, 2).unwrap();
    let sandwich = sandwich_density(psi, &p).unwrap();
    let mut worst: f64 = 0.0;
    for j in (0..d.n).filter(|&j| m1.mask()[j]) {
        let o = local_at(&d, psi.amplitudes(), j);
        for (a, b) in [
            (m1.values()[j], o.value_s),
            (m2.values()[j], o.second_s),
            (vs.values()[j], o.variance_s),
            (vc.values()[j], o.variance_c),
            (sym.values()[j], o.density_sym_sq),
            (sandwich.values()[j], o.density_sandwich),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
