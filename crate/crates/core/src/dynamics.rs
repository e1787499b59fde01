//! Split-step time evolution and the hydrodynamic balance laws checked on its
//! snapshots: continuity, the Euler form for `p̄^W`, and kinetic densities.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::local::{self, Definition, ObservableSpec};
use crate::numerics::{derivative_complex, derivative_real, fft_forward, fft_inverse, momentum_representation};
use crate::phase_space::{margenau_hill_transform, wigner_transform};
use crate::{par, Error, GridSpec, RealProfile, Result, Wavefunction};

/// Upper bound on `dt·E_max/ħ`.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Fraction of the limit used when suggesting a time step.
const SUGGESTED_FRACTION: f64 = 0.8;

/// Momenta with `|φ|² > BANDWIDTH_EPS · max |φ|²` count as occupied.
const BANDWIDTH_EPS: f64 = 1e-10;

pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialShape {
    Free,
    Harmonic { omega: f64 },
    Barrier { height: f64, width: f64, center: f64 },
}

impl fmt::Display for PotentialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialShape::Free => f.write_str("free"),
            PotentialShape::Harmonic { omega } => write!(f, "harmonic:{omega}"),
            PotentialShape::Barrier { height, width, center } => write!(f, "barrier:{height},{width},{center}"),
        }
    }
}

impl std::str::FromStr for PotentialShape {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums = |expect: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = args
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::input(format!("potential: {e}")))?;
            if v.len() != expect || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!(
                    "potential: '{name}' takes {expect} finite parameter(s)"
                )));
            }
            Ok(v)
        };
        match name {
            "free" if args.is_empty() => Ok(PotentialShape::Free),
            "harmonic" => {
                let omega = nums(1)?[0];
                if omega <= 0.0 {
                    return Err(Error::input("potential: harmonic frequency must be positive"));
                }
                Ok(PotentialShape::Harmonic { omega })
            }
            "barrier" => {
                let v = nums(3)?;
                if v[1] <= 0.0 {
                    return Err(Error::input("potential: barrier width must be positive"));
                }
                Ok(PotentialShape::Barrier {
                    height: v[0],
                    width: v[1],
                    center: v[2],
                })
            }
            _ => Err(Error::input(format!("potential: unknown '{text}'"))),
        }
    }
}

/// `V(q_j)` together with its exact gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    shape: PotentialShape,
    grid: GridSpec,
    values: Vec<f64>,
    gradient: Vec<f64>,
}

impl Potential {
    pub fn new(shape: PotentialShape, grid: &GridSpec) -> Self {
        let m = grid.mass();
        let (values, gradient) = grid
            .positions()
            .into_iter()
            .map(|q| match shape {
                PotentialShape::Free => (0.0, 0.0),
                PotentialShape::Harmonic { omega } => (0.5 * m * omega * omega * q * q, m * omega * omega * q),
                PotentialShape::Barrier { height, width, center } => {
                    let x = (q - center) / width;
                    let v = height * (-0.5 * x * x).exp();
                    (v, -v * x / width)
                }
            })
            .unzip();
        Self {
            shape,
            grid: *grid,
            values,
            gradient,
        }
    }

    pub fn free(grid: &GridSpec) -> Self {
        Self::new(PotentialShape::Free, grid)
    }

    pub fn harmonic(grid: &GridSpec, omega: f64) -> Self {
        Self::new(PotentialShape::Harmonic { omega }, grid)
    }

    pub fn gaussian_barrier(grid: &GridSpec, height: f64, width: f64, center: f64) -> Self {
        Self::new(PotentialShape::Barrier { height, width, center }, grid)
    }

    pub fn shape(&self) -> PotentialShape {
        self.shape
    }

    pub fn label(&self) -> String {
        self.shape.to_string()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∂V/∂q` on the grid.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationConfig {
    pub dt: f64,
    pub steps: usize,
    pub snapshot_stride: usize,
}

impl PropagationConfig {
    pub fn new(dt: f64, steps: usize, snapshot_stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::input("dt: must be positive"));
        }
        if steps == 0 || snapshot_stride == 0 {
            return Err(Error::input("steps and stride must be positive"));
        }
        if !steps.is_multiple_of(snapshot_stride) {
            return Err(Error::input("steps: must be a multiple of the snapshot stride"));
        }
        Ok(Self {
            dt,
            steps,
            snapshot_stride,
        })
    }
}

/// Largest kinetic energy among the occupied momenta of `psi`.
pub fn occupied_kinetic_energy(psi: &Wavefunction) -> f64 {
    let phi = momentum_representation(psi);
    let density = phi.density();
    let max = density.iter().cloned().fold(0.0, f64::max);
    let m = psi.grid().mass();
    phi.p
        .iter()
        .zip(&density)
        .filter(|(_, &d)| d > BANDWIDTH_EPS * max)
        .map(|(p, _)| p * p / (2.0 * m))
        .fold(0.0, f64::max)
}

/// A time step comfortably inside the stability guard.
pub fn suggested_dt(psi: &Wavefunction) -> f64 {
    let e = occupied_kinetic_energy(psi);
    SUGGESTED_FRACTION * STABILITY_LIMIT * psi.grid().hbar() / e.max(f64::MIN_POSITIVE)
}

/// Snapshots of a propagated state at uniform time spacing.
#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    potential: Potential,
    config: PropagationConfig,
    times: Vec<f64>,
    snapshots: Vec<Wavefunction>,
}

impl EvolutionTrace {
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.config
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Wavefunction] {
        &self.snapshots
    }

    pub fn grid(&self) -> &GridSpec {
        self.snapshots[0].grid()
    }

    /// Time between consecutive snapshots.
    pub fn interval(&self) -> f64 {
        self.config.dt * self.config.snapshot_stride as f64
    }

    pub fn last(&self) -> &Wavefunction {
        self.snapshots.last().expect("trace is never empty")
    }

    pub fn mean_positions(&self) -> Vec<f64> {
        self.snapshots.iter().map(Wavefunction::mean_position).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        par::map_indices(self.snapshots.len(), |k| energy(&self.snapshots[k], &self.potential))
    }

    pub fn density_profiles(&self) -> Vec<RealProfile> {
        self.snapshots.iter().map(Wavefunction::density_profile).collect()
    }

    /// `p̄(q, t)` per snapshot; identical under S, MH and W.
    pub fn mean_momentum_profiles(&self) -> Result<Vec<RealProfile>> {
        par::map_indices(self.snapshots.len(), |k| {
            local::local_value_s(&self.snapshots[k], &ObservableSpec::momentum()).map(|p| p.profile)
        })
        .into_iter()
        .collect()
    }
}

/// `⟨p̂²⟩/2m + ⟨V⟩`.
pub fn energy(psi: &Wavefunction, v: &Potential) -> f64 {
    let grid = psi.grid();
    let phi = momentum_representation(psi);
    let kinetic = phi
        .p
        .iter()
        .zip(&phi.amp)
        .map(|(p, a)| p * p * a.norm_sqr())
        .sum::<f64>()
        * grid.dp()
        / (2.0 * grid.mass());
    let potential = psi.density().iter().zip(&v.values).map(|(r, v)| r * v).sum::<f64>() * grid.dq();
    kinetic + potential
}

/// Strang splitting `e^{−iVdt/2ħ} e^{−iTdt/ħ} e^{−iVdt/2ħ}` with the kinetic
/// factor applied exactly in momentum space.
pub fn split_step_propagate(psi0: &Wavefunction, v: &Potential, cfg: &PropagationConfig) -> Result<EvolutionTrace> {
    let grid = *psi0.grid();
    if v.grid != grid {
        return Err(Error::input("potential and state live on different grids"));
    }
    let norm = psi0.norm_sq();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::precondition(format!(
            "initial state is not normalized (norm² = {norm})"
        )));
    }
    let hbar = grid.hbar();
    let e_max = occupied_kinetic_energy(psi0);
    let guard = cfg.dt * e_max / hbar;
    if guard >= STABILITY_LIMIT {
        return Err(Error::precondition(format!(
            "stability guard: dt·E_max/ħ = {guard:.3} ≥ {STABILITY_LIMIT}; suggested dt = {:.3e}",
            suggested_dt(psi0)
        )));
    }

    let n = grid.n();
    let half_v: Vec<Complex64> = v
        .values
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -x * cfg.dt / (2.0 * hbar)))
        .collect();
    let inv_n = 1.0 / n as f64;
    let kinetic: Vec<Complex64> = grid
        .momenta_wrapped()
        .iter()
        .map(|&p| Complex64::from_polar(inv_n, -p * p * cfg.dt / (2.0 * grid.mass() * hbar)))
        .collect();

    let mut amp = psi0.amplitudes().to_vec();
    let frames = cfg.steps / cfg.snapshot_stride + 1;
    let mut times = Vec::with_capacity(frames);
    let mut snapshots = Vec::with_capacity(frames);
    times.push(0.0);
    snapshots.push(psi0.clone());
    for step in 1..=cfg.steps {
        amp.iter_mut().zip(&half_v).for_each(|(a, h)| *a *= h);
        fft_forward(&mut amp);
        amp.iter_mut().zip(&kinetic).for_each(|(a, k)| *a *= k);
        fft_inverse(&mut amp);
        amp.iter_mut().zip(&half_v).for_each(|(a, h)| *a *= h);
        if step % cfg.snapshot_stride == 0 {
            let psi = Wavefunction::new(grid, amp.clone())?.with_mask_eps(psi0.mask_eps())?;
            let drift = (psi.norm_sq() - norm).abs();
            if drift > NORM_TOLERANCE {
                return Err(Error::SelfCheck(format!("norm drifted by {drift:.3e} at step {step}")));
            }
            times.push(step as f64 * cfg.dt);
            snapshots.push(psi);
        }
    }
    Ok(EvolutionTrace {
        potential: v.clone(),
        config: *cfg,
        times,
        snapshots,
    })
}

fn interior(trace: &EvolutionTrace) -> Result<std::ops::Range<usize>> {
    if trace.snapshots.len() < 3 {
        return Err(Error::input("trace needs at least 3 snapshots for centred differences"));
    }
    Ok(1..trace.snapshots.len() - 1)
}

/// `ϱ·p̄` under the given definition.
fn current_density(psi: &Wavefunction, definition: Definition) -> Result<Vec<f64>> {
    match definition {
        Definition::S | Definition::C => {
            let dpsi = derivative_complex(psi.grid(), psi.amplitudes());
            let hbar = psi.grid().hbar();
            Ok(psi
                .amplitudes()
                .iter()
                .zip(&dpsi)
                .map(|(z, d)| hbar * (z.conj() * d).im)
                .collect())
        }
        Definition::MH => Ok(margenau_hill_transform(psi).moment_density(1)),
        Definition::W => Ok(wigner_transform(psi)?.moment_density(1)),
    }
}

/// `max |∂ϱ/∂t + ∂(ϱp̄/m)/∂q|` over interior snapshots and masked-in points.
pub fn continuity_residual(trace: &EvolutionTrace) -> Result<f64> {
    continuity_residual_with(trace, Definition::S)
}

/// As [`continuity_residual`] with `p̄` taken from a chosen definition.
pub fn continuity_residual_with(trace: &EvolutionTrace, definition: Definition) -> Result<f64> {
    let range = interior(trace)?;
    let grid = *trace.grid();
    let m = grid.mass();
    let two_dt = 2.0 * trace.interval();
    let snaps = &trace.snapshots;
    let per_frame = par::map_indices(range.len(), |i| -> Result<f64> {
        let k = range.start + i;
        let flux = current_density(&snaps[k], definition)?;
        let divergence = derivative_real(&grid, &flux);
        let (before, after) = (snaps[k - 1].density(), snaps[k + 1].density());
        Ok(snaps[k]
            .mask()
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(j, _)| ((after[j] - before[j]) / two_dt + divergence[j] / m).abs())
            .fold(0.0, f64::max))
    });
    per_frame.into_iter().try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)))
}

/// Local hydrodynamic fields of one snapshot, built from `u = ψ'/ψ` and its
/// spectral relatives so every quotient divides by `ψ` rather than `ϱ`.
struct Hydro {
    mask: Vec<bool>,
    mean: Vec<f64>,
    mean_slope: Vec<f64>,
    variance: Vec<f64>,
    variance_slope: Vec<f64>,
    log_density_slope: Vec<f64>,
}

fn hydro_fields(psi: &Wavefunction) -> Hydro {
    let grid = psi.grid();
    let hbar = grid.hbar();
    let amp = psi.amplitudes();
    let d1 = derivative_complex(grid, amp);
    let d2 = derivative_complex(grid, &d1);
    let d3 = derivative_complex(grid, &d2);
    let mask = psi.mask();
    let n = grid.n();
    let mut h = Hydro {
        mean: vec![f64::NAN; n],
        mean_slope: vec![f64::NAN; n],
        variance: vec![f64::NAN; n],
        variance_slope: vec![f64::NAN; n],
        log_density_slope: vec![f64::NAN; n],
        mask,
    };
    for j in (0..n).filter(|&j| h.mask[j]) {
        let z = amp[j];
        let (u, v, w) = (d1[j] / z, d2[j] / z, d3[j] / z);
        // (ln ψ)'' and (ln ψ)'''.
        let l2 = v - u * u;
        let l3 = w - 3.0 * u * v + 2.0 * u * u * u;
        h.mean[j] = hbar * u.im;
        h.mean_slope[j] = hbar * l2.im;
        h.variance[j] = -0.5 * hbar * hbar * l2.re;
        h.variance_slope[j] = -0.5 * hbar * hbar * l3.re;
        h.log_density_slope[j] = 2.0 * u.re;
    }
    h
}

/// `max |∂p̄/∂t + (p̄/m)∂p̄/∂q + ∂V/∂q + (1/mϱ)∂(ϱσ²_W)/∂q|` on interior,
/// masked-in points.
///
/// The pressure term is expanded as `∂σ² + σ²·∂ ln ϱ`; `σ²_W` itself is the
/// Wigner conditional variance, which for a pure state equals
/// `−(ħ²/2) ∂² Re ln ψ` (see [`wigner_variance_gap`]).
pub fn euler_residual_w(trace: &EvolutionTrace) -> Result<f64> {
    euler_residual(trace, 0.0)
}

/// [`euler_residual_w`] restricted further to `ϱ > floor · max ϱ`.
///
/// Near the mask edge the centred difference of `p̄` divides round-off in `ψ`
/// by `|ψ|·Δt`, which grows as `Δt` shrinks and hides the `Δt²` truncation
/// error; convergence is measured on [`CONVERGENCE_CORE`] instead.
pub fn euler_residual_w_above(trace: &EvolutionTrace, floor: f64) -> Result<f64> {
    euler_residual(trace, floor)
}

/// Relative density above which the Euler residual converges cleanly.
pub const CONVERGENCE_CORE: f64 = 1e-6;

fn euler_residual(trace: &EvolutionTrace, floor: f64) -> Result<f64> {
    let range = interior(trace)?;
    let m = trace.grid().mass();
    let two_dt = 2.0 * trace.interval();
    let grad = trace.potential.gradient();
    let fields = par::map_indices(trace.snapshots.len(), |k| hydro_fields(&trace.snapshots[k]));
    let worst = par::map_indices(range.len(), |i| {
        let k = range.start + i;
        let (prev, cur, next) = (&fields[k - 1], &fields[k], &fields[k + 1]);
        let rho = trace.snapshots[k].density();
        let cut = floor * rho.iter().cloned().fold(0.0, f64::max);
        (0..cur.mask.len())
            .filter(|&j| prev.mask[j] && cur.mask[j] && next.mask[j] && rho[j] > cut)
            .map(|j| {
                let dt_mean = (next.mean[j] - prev.mean[j]) / two_dt;
                let advection = cur.mean[j] * cur.mean_slope[j] / m;
                let pressure = (cur.variance_slope[j] + cur.variance[j] * cur.log_density_slope[j]) / m;
                (dt_mean + advection + grad[j] + pressure).abs()
            })
            .fold(0.0, f64::max)
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Largest gap between the Wigner-transform conditional variance and the
/// closed form used by [`euler_residual_w`], over points where
/// `ϱ > floor · max ϱ`.
pub fn wigner_variance_gap(psi: &Wavefunction, floor: f64) -> Result<f64> {
    let w = wigner_transform(psi)?;
    let sigma = crate::phase_space::phase_space_local_variance(&w, psi)?;
    let h = hydro_fields(psi);
    let rho = psi.density();
    let max = rho.iter().cloned().fold(0.0, f64::max);
    Ok(sigma
        .profile
        .iter_masked()
        .filter(|(j, _, _)| rho[*j] > floor * max)
        .map(|(j, _, x)| (x - h.variance[j]).abs())
        .fold(0.0, f64::max))
}

/// Kinetic-energy densities `ϱ·p̄²/2m` under W and MH, and the sandwich
/// `|p̂ψ|²/2m` that the C definition implies.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticDensities {
    pub w: RealProfile,
    pub mh: RealProfile,
    pub c: RealProfile,
}

/// The W density comes from the Wigner transform when `psi` decays at the
/// window edge; otherwise (plane waves) from its operator form, the mean of the
/// MH and C densities.
pub fn kinetic_energy_densities(psi: &Wavefunction) -> KineticDensities {
    let grid = *psi.grid();
    let two_m = 2.0 * grid.mass();
    let p = ObservableSpec::momentum();
    let mh: Vec<f64> = local::local_density_s_power(psi, &p, 2)
        .expect("momentum powers are always available")
        .values()
        .iter()
        .map(|x| x / two_m)
        .collect();
    let c: Vec<f64> = local::sandwich_density(psi, &p)
        .expect("momentum is always available")
        .values()
        .iter()
        .map(|x| x / two_m)
        .collect();
    let w = match wigner_transform(psi) {
        Ok(dist) => dist.moment_density(2).iter().map(|x| x / two_m).collect(),
        Err(_) => mh.iter().zip(&c).map(|(a, b)| 0.5 * (a + b)).collect(),
    };
    KineticDensities {
        w: RealProfile::full(grid, w),
        mh: RealProfile::full(grid, mh),
        c: RealProfile::full(grid, c),
    }
}

/// Residuals of one trace and of its half-step twin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub continuity: f64,
    pub continuity_half_dt: f64,
    pub continuity_ratio: f64,
    pub euler_w: f64,
    pub euler_w_half_dt: f64,
    pub euler_w_ratio: f64,
    /// Euler residuals on the `CONVERGENCE_CORE` region.
    pub euler_w_core: f64,
    pub euler_w_core_half_dt: f64,
    pub euler_w_core_ratio: f64,
}

/// Runs `cfg` and again at `dt/2` with twice the steps and the same stride,
/// so the snapshot spacing halves too. Returns both traces and the report.
pub fn convergence_study(
    psi0: &Wavefunction,
    v: &Potential,
    cfg: &PropagationConfig,
) -> Result<(EvolutionTrace, EvolutionTrace, ConvergenceReport)> {
    let coarse = split_step_propagate(psi0, v, cfg)?;
    let half = PropagationConfig::new(cfg.dt / 2.0, cfg.steps * 2, cfg.snapshot_stride)?;
    let fine = split_step_propagate(psi0, v, &half)?;
    let (c1, c2) = (continuity_residual(&coarse)?, continuity_residual(&fine)?);
    let (e1, e2) = (euler_residual_w(&coarse)?, euler_residual_w(&fine)?);
    let (k1, k2) = (
        euler_residual_w_above(&coarse, CONVERGENCE_CORE)?,
        euler_residual_w_above(&fine, CONVERGENCE_CORE)?,
    );
    let report = ConvergenceReport {
        dt: cfg.dt,
        continuity: c1,
        continuity_half_dt: c2,
        continuity_ratio: c1 / c2,
        euler_w: e1,
        euler_w_half_dt: e2,
        euler_w_ratio: e1 / e2,
        euler_w_core: k1,
        euler_w_core_half_dt: k2,
        euler_w_core_ratio: k1 / k2,
    };
    Ok((coarse, fine, report))
}
