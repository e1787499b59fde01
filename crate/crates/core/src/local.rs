//! Local values, local variances and variance decompositions under the
//! symmetrized (S) and Cohen (C) prescriptions.
//!
//! Grid realization of `δ(q̂−q_j)`: the symmetrized density
//! `⟨ψ|½(Âδ + δÂ)|ψ⟩` is `Re[ψ̄(q_j)(Âψ)(q_j)]` and the sandwich density
//! `⟨ψ|Âδ Â|ψ⟩` is `|(Âψ)(q_j)|²`; the delta is absorbed analytically.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::{interpolate, momentum_representation, MAX_MOMENTUM_POWER};
use crate::phase_space::{self, QuasiKind};
use crate::{apply_momentum_power, Error, GridSpec, RealProfile, Result, Wavefunction};

/// Probability allowed outside the mask before a decomposition is refused.
pub const MAX_EXCLUDED_PROBABILITY: f64 = 1e-8;

/// Highest power accepted for [`ObservableSpec::MomentumPower`].
pub const MAX_OBSERVABLE_POWER: u32 = 4;

/// The four local-moment prescriptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Definition {
    S,
    C,
    MH,
    W,
}

impl Definition {
    pub const ALL: [Definition; 4] = [Definition::S, Definition::C, Definition::MH, Definition::W];
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Definition::S => "S",
            Definition::C => "C",
            Definition::MH => "MH",
            Definition::W => "W",
        })
    }
}

impl FromStr for Definition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Definition::S),
            "C" => Ok(Definition::C),
            "MH" => Ok(Definition::MH),
            "W" => Ok(Definition::W),
            _ => Err(Error::input(format!("definition: unknown '{s}'"))),
        }
    }
}

/// Moment order of a local profile, or the local variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentOrder {
    Moment(u32),
    Variance,
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentOrder::Moment(n) => write!(f, "{n}"),
            MomentOrder::Variance => f.write_str("variance"),
        }
    }
}

impl FromStr for MomentOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "variance" {
            return Ok(MomentOrder::Variance);
        }
        match s.parse::<u32>() {
            Ok(n @ 1..=4) => Ok(MomentOrder::Moment(n)),
            _ => Err(Error::input(format!("order: expected 1..4 or 'variance', got '{s}'"))),
        }
    }
}

/// A local moment or variance tagged with the prescription that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProfile {
    pub definition: Definition,
    pub order: MomentOrder,
    pub profile: RealProfile,
}

impl LocalProfile {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.profile.get(j)
    }

    pub fn at_q(&self, q: f64) -> Option<f64> {
        self.profile.at_q(q)
    }

    pub fn values(&self) -> &[f64] {
        self.profile.values()
    }

    pub fn mask(&self) -> &[bool] {
        self.profile.mask()
    }
}

/// Action of an operator on a state, returned as a complex field on the grid.
pub type FieldAction = Arc<dyn Fn(&Wavefunction) -> Vec<Complex64> + Send + Sync>;

/// An observable, given through its action on states.
#[derive(Clone)]
pub enum ObservableSpec {
    /// `p̂ⁿ`, `1 ≤ n ≤ 4`.
    MomentumPower(u32),
    /// Multiplication by `g(q_j)`.
    PositionFunction(Vec<f64>),
    /// An arbitrary operator. The action of `Â²` must be supplied separately
    /// for anything that needs the local density of the square.
    LinearAction {
        apply: FieldAction,
        apply_square: Option<FieldAction>,
    },
}

impl fmt::Debug for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableSpec::MomentumPower(n) => write!(f, "MomentumPower({n})"),
            ObservableSpec::PositionFunction(g) => write!(f, "PositionFunction({} points)", g.len()),
            ObservableSpec::LinearAction { apply_square, .. } => {
                write!(f, "LinearAction(square: {})", apply_square.is_some())
            }
        }
    }
}

impl ObservableSpec {
    /// `p̂`.
    pub fn momentum() -> Self {
        ObservableSpec::MomentumPower(1)
    }

    /// `q̂`.
    pub fn position(grid: &GridSpec) -> Self {
        ObservableSpec::PositionFunction(grid.positions())
    }

    /// `g(q̂)` sampled from a closure.
    pub fn position_fn(grid: &GridSpec, g: impl Fn(f64) -> f64) -> Self {
        ObservableSpec::PositionFunction(grid.positions().into_iter().map(g).collect())
    }

    pub fn linear_action(apply: FieldAction, apply_square: Option<FieldAction>) -> Self {
        ObservableSpec::LinearAction { apply, apply_square }
    }

    fn check(&self, psi: &Wavefunction) -> Result<()> {
        match self {
            ObservableSpec::MomentumPower(n) if !(1..=MAX_OBSERVABLE_POWER).contains(n) => Err(Error::input(format!(
                "observable: momentum power must be 1..{MAX_OBSERVABLE_POWER}, got {n}"
            ))),
            ObservableSpec::PositionFunction(g) if g.len() != psi.grid().n() => {
                Err(Error::input("observable: position function does not match grid"))
            }
            _ => Ok(()),
        }
    }

    /// `Âψ`.
    pub fn apply(&self, psi: &Wavefunction) -> Result<Vec<Complex64>> {
        self.apply_power(psi, 1)
    }

    /// `Â²ψ`.
    pub fn apply_square(&self, psi: &Wavefunction) -> Result<Vec<Complex64>> {
        self.apply_power(psi, 2)
    }

    /// `Âᵏψ`; operators given by their action only support `k ≤ 2`.
    pub fn apply_power(&self, psi: &Wavefunction, k: u32) -> Result<Vec<Complex64>> {
        self.check(psi)?;
        if k == 0 {
            return Ok(psi.amplitudes().to_vec());
        }
        match self {
            ObservableSpec::MomentumPower(n) => {
                let power = n * k;
                if power > MAX_MOMENTUM_POWER {
                    return Err(Error::input(format!(
                        "observable: p̂^{power} exceeds the momentum-power cap"
                    )));
                }
                apply_momentum_power(psi, power)
            }
            ObservableSpec::PositionFunction(g) => Ok(psi
                .amplitudes()
                .iter()
                .zip(g)
                .map(|(z, &g)| z * g.powi(k as i32))
                .collect()),
            ObservableSpec::LinearAction { apply, apply_square } => match k {
                1 => Ok(apply(psi)),
                2 => apply_square
                    .as_ref()
                    .map(|sq| sq(psi))
                    .ok_or_else(|| Error::input("square action required")),
                _ => Err(Error::input(
                    "observable: powers above 2 of a linear action are not available",
                )),
            },
        }
    }
}

fn support_mask(psi: &Wavefunction) -> Result<Vec<bool>> {
    let mask = psi.mask();
    if mask.iter().any(|&m| m) {
        Ok(mask)
    } else {
        Err(Error::precondition("state has no support"))
    }
}

/// Divides a density by `ϱ` on the masked-in points.
pub(crate) fn per_density(
    psi: &Wavefunction,
    density: &[f64],
    definition: Definition,
    order: MomentOrder,
) -> Result<LocalProfile> {
    let mask = support_mask(psi)?;
    let values = density.iter().zip(psi.density()).map(|(d, r)| d / r).collect();
    Ok(LocalProfile {
        definition,
        order,
        profile: RealProfile::masked(*psi.grid(), values, mask),
    })
}

fn symmetrized_density_of(psi: &Wavefunction, field: &[Complex64]) -> Vec<f64> {
    psi.amplitudes()
        .iter()
        .zip(field)
        .map(|(a, b)| (a.conj() * b).re)
        .collect()
}

/// `⟨ψ|Â_q|ψ⟩ = Re[ψ̄(q)(Âψ)(q)]`, the local density whose integral is `⟨Â⟩`.
pub fn local_density_s(psi: &Wavefunction, a: &ObservableSpec) -> Result<RealProfile> {
    let field = a.apply(psi)?;
    Ok(RealProfile::full(*psi.grid(), symmetrized_density_of(psi, &field)))
}

/// Symmetrized local density of `Âᵏ`.
pub fn local_density_s_power(psi: &Wavefunction, a: &ObservableSpec, k: u32) -> Result<RealProfile> {
    let field = a.apply_power(psi, k)?;
    Ok(RealProfile::full(*psi.grid(), symmetrized_density_of(psi, &field)))
}

/// Symmetrized local moment `Re[ψ̄ Âᵏψ]/ϱ`.
pub fn local_moment_s(psi: &Wavefunction, a: &ObservableSpec, k: u32) -> Result<LocalProfile> {
    let density = local_density_s_power(psi, a, k)?;
    per_density(psi, density.values(), Definition::S, MomentOrder::Moment(k))
}

/// Local value `Re[⟨q|Â|ψ⟩/⟨q|ψ⟩]`, shared by the S and C prescriptions.
pub fn local_value_s(psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    local_moment_s(psi, a, 1)
}

/// `Im[⟨q|Â|ψ⟩/⟨q|ψ⟩]²`, non-negative by construction.
pub fn local_variance_c(psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    let mask = support_mask(psi)?;
    let field = a.apply(psi)?;
    let values = field
        .iter()
        .zip(psi.amplitudes())
        .map(|(f, z)| (f / z).im.powi(2))
        .collect();
    Ok(LocalProfile {
        definition: Definition::C,
        order: MomentOrder::Variance,
        profile: RealProfile::masked(*psi.grid(), values, mask),
    })
}

/// The C local variance via `|Âψ|²/ϱ − (Ā^S)²`.
pub fn local_variance_c_via_sandwich(psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    let sandwich = per_density(
        psi,
        sandwich_density(psi, a)?.values(),
        Definition::C,
        MomentOrder::Moment(2),
    )?;
    let value = local_value_s(psi, a)?;
    Ok(LocalProfile {
        definition: Definition::C,
        order: MomentOrder::Variance,
        profile: difference_of_square(&sandwich.profile, &value.profile),
    })
}

fn difference_of_square(second: &RealProfile, first: &RealProfile) -> RealProfile {
    let values = second
        .values()
        .iter()
        .zip(first.values())
        .map(|(m2, m1)| m2 - m1 * m1)
        .collect();
    RealProfile::masked(*second.grid(), values, second.mask().to_vec())
}

/// `Re[ψ̄ Â²ψ]/ϱ`.
pub fn local_second_moment_s(psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    local_moment_s(psi, a, 2)
}

/// Second symmetrized moment minus the squared local value; may be negative.
pub fn local_variance_s(psi: &Wavefunction, a: &ObservableSpec) -> Result<LocalProfile> {
    let second = local_second_moment_s(psi, a)?;
    let first = local_value_s(psi, a)?;
    Ok(LocalProfile {
        definition: Definition::S,
        order: MomentOrder::Variance,
        profile: difference_of_square(&second.profile, &first.profile),
    })
}

/// `⟨ψ|Â δ(q̂−q) Â|ψ⟩ = |(Âψ)(q)|²`.
pub fn sandwich_density(psi: &Wavefunction, a: &ObservableSpec) -> Result<RealProfile> {
    let field = a.apply(psi)?;
    Ok(RealProfile::full(
        *psi.grid(),
        field.iter().map(|z| z.norm_sqr()).collect(),
    ))
}

/// Largest pointwise gap between the two local densities of `Â²` over the mask.
pub fn density_inequality_witness(psi: &Wavefunction, a: &ObservableSpec) -> Result<f64> {
    let mask = support_mask(psi)?;
    let sandwich = sandwich_density(psi, a)?;
    let symmetrized = local_density_s_power(psi, a, 2)?;
    Ok(sandwich
        .values()
        .iter()
        .zip(symmetrized.values())
        .zip(mask)
        .filter(|(_, m)| *m)
        .map(|((x, y), _)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// `⟨ψ|Âᵏ|ψ⟩` evaluated without going through local densities: momentum
/// powers are averaged over `|φ(p)|²`, position functions over `ϱ(q)`.
pub(crate) fn direct_moment(psi: &Wavefunction, a: &ObservableSpec, k: u32) -> Result<f64> {
    a.check(psi)?;
    let grid = psi.grid();
    match a {
        ObservableSpec::MomentumPower(n) => {
            let phi = momentum_representation(psi);
            Ok(phi
                .p
                .iter()
                .zip(&phi.amp)
                .map(|(p, z)| p.powi((n * k) as i32) * z.norm_sqr())
                .sum::<f64>()
                * grid.dp())
        }
        ObservableSpec::PositionFunction(g) => Ok(g
            .iter()
            .zip(psi.density())
            .map(|(g, r)| g.powi(k as i32) * r)
            .sum::<f64>()
            * grid.dq()),
        ObservableSpec::LinearAction { apply_square, .. } => {
            let field = match (k, apply_square) {
                (2, None) => {
                    // Hermitian Â: ⟨Â²⟩ = ‖Âψ‖².
                    let f = a.apply(psi)?;
                    return Ok(f.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dq());
                }
                _ => a.apply_power(psi, k)?,
            };
            Ok(psi
                .amplitudes()
                .iter()
                .zip(&field)
                .map(|(x, y)| (x.conj() * y).re)
                .sum::<f64>()
                * grid.dq())
        }
    }
}

/// `⟨ψ|Â|ψ⟩`.
pub fn global_average(psi: &Wavefunction, a: &ObservableSpec) -> Result<f64> {
    direct_moment(psi, a, 1)
}

/// S and C local quantities of `Â` at an arbitrary position, from the
/// trigonometric interpolants of `ψ`, `Âψ` and `Â²ψ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMoments {
    pub q: f64,
    pub density: f64,
    /// `Re[Âψ/ψ]`.
    pub value: f64,
    /// `Re[Â²ψ/ψ]`.
    pub second_moment_s: f64,
    /// `|Âψ|²/ϱ`.
    pub sandwich_moment: f64,
    pub variance_s: f64,
    /// `Im[Âψ/ψ]²`.
    pub variance_c: f64,
}

/// Evaluates [`PointMoments`] at `q`; grid points need not contain `q`.
pub fn local_moments_at(psi: &Wavefunction, a: &ObservableSpec, q: f64) -> Result<PointMoments> {
    let grid = psi.grid();
    let z = interpolate(grid, psi.amplitudes(), q);
    let density = z.norm_sqr();
    let mask_cut = psi.mask_eps() * psi.density().into_iter().fold(0.0, f64::max);
    if density <= mask_cut {
        return Err(Error::precondition(format!("q = {q} lies outside the state's support")));
    }
    let ratio1 = interpolate(grid, &a.apply(psi)?, q) / z;
    let ratio2 = interpolate(grid, &a.apply_square(psi)?, q) / z;
    Ok(PointMoments {
        q,
        density,
        value: ratio1.re,
        second_moment_s: ratio2.re,
        sandwich_moment: ratio1.norm_sqr(),
        variance_s: ratio2.re - ratio1.re * ratio1.re,
        variance_c: ratio1.im * ratio1.im,
    })
}

/// Local profile of any supported prescription and order.
///
/// The C prescription only defines orders 1 and 2 (its implicit second moment
/// is the sandwich density over `ϱ`) and the variance.
pub fn local_profile(
    psi: &Wavefunction,
    a: &ObservableSpec,
    definition: Definition,
    order: MomentOrder,
) -> Result<LocalProfile> {
    match (definition, order) {
        (Definition::S, MomentOrder::Moment(k)) => local_moment_s(psi, a, k),
        (Definition::S, MomentOrder::Variance) => local_variance_s(psi, a),
        (Definition::C, MomentOrder::Moment(1)) => {
            let mut p = local_value_s(psi, a)?;
            p.definition = Definition::C;
            Ok(p)
        }
        (Definition::C, MomentOrder::Moment(2)) => per_density(
            psi,
            sandwich_density(psi, a)?.values(),
            Definition::C,
            MomentOrder::Moment(2),
        ),
        (Definition::C, MomentOrder::Moment(k)) => Err(Error::input(format!(
            "order: the C prescription defines no local moment of order {k}"
        ))),
        (Definition::C, MomentOrder::Variance) => local_variance_c(psi, a),
        (Definition::MH | Definition::W, _) => {
            let kind = if definition == Definition::MH {
                QuasiKind::MargenauHill
            } else {
                QuasiKind::WeylWigner
            };
            let f = phase_space::transform(psi, kind)?;
            match order {
                MomentOrder::Moment(k) => phase_space::local_moment_of(&f, psi, a, k),
                MomentOrder::Variance => phase_space::local_variance_of(&f, psi, a),
            }
        }
    }
}

/// Law-of-total-variance split of `σ²_A` under one prescription.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub definition: Definition,
    /// `∫ σ²_{A|q} ϱ dq`.
    pub avg_local_variance: f64,
    /// `∫ (Ā(q) − ⟨Â⟩)² ϱ dq`.
    pub variance_of_local_avg: f64,
    /// `⟨Â²⟩ − ⟨Â⟩²`, computed directly.
    pub total: f64,
}

impl VarianceDecomposition {
    pub fn sum(&self) -> f64 {
        self.avg_local_variance + self.variance_of_local_avg
    }

    /// `|sum − total|`.
    pub fn residual(&self) -> f64 {
        (self.sum() - self.total).abs()
    }
}

/// The density of `Âᵏ` (`k` = 1 or 2) each prescription integrates to `⟨Âᵏ⟩`.
fn moment_density(psi: &Wavefunction, a: &ObservableSpec, definition: Definition, k: u32) -> Result<Vec<f64>> {
    match (definition, k) {
        (Definition::S | Definition::C, 1) => Ok(local_density_s(psi, a)?.values().to_vec()),
        (Definition::S, _) => Ok(local_density_s_power(psi, a, k)?.values().to_vec()),
        (Definition::C, _) => Ok(sandwich_density(psi, a)?.values().to_vec()),
        (Definition::MH | Definition::W, _) => match a {
            ObservableSpec::MomentumPower(n) => {
                let kind = if definition == Definition::MH {
                    QuasiKind::MargenauHill
                } else {
                    QuasiKind::WeylWigner
                };
                Ok(phase_space::transform(psi, kind)?.moment_density(k * n))
            }
            ObservableSpec::PositionFunction(g) => {
                Ok(psi.density().iter().zip(g).map(|(r, g)| r * g.powi(k as i32)).collect())
            }
            ObservableSpec::LinearAction { .. } => Err(Error::input(
                "observable: no phase-space symbol is available for a linear action",
            )),
        },
    }
}

/// Splits the variance of `Â` into the q-average of local variances and the
/// q-variance of local values.
pub fn variance_decomposition(
    psi: &Wavefunction,
    a: &ObservableSpec,
    definition: Definition,
) -> Result<VarianceDecomposition> {
    let mask = support_mask(psi)?;
    let rho = psi.density();
    let dq = psi.grid().dq();
    let excluded: f64 = rho.iter().zip(&mask).filter(|(_, m)| !**m).map(|(r, _)| r).sum::<f64>() * dq;
    if excluded > MAX_EXCLUDED_PROBABILITY {
        return Err(Error::precondition(format!(
            "decomposition unreliable: mask excludes probability {excluded:.3e}"
        )));
    }
    let mean = direct_moment(psi, a, 1)?;
    let total = direct_moment(psi, a, 2)? - mean * mean;
    let value = local_profile(psi, a, definition, MomentOrder::Moment(1))?;
    let variance = local_profile(psi, a, definition, MomentOrder::Variance)?;
    let first = moment_density(psi, a, definition, 1)?;
    let second = moment_density(psi, a, definition, 2)?;
    let mut avg_local_variance = 0.0;
    let mut variance_of_local_avg = 0.0;
    for j in 0..rho.len() {
        if mask[j] {
            avg_local_variance += variance.values()[j] * rho[j];
            variance_of_local_avg += (value.values()[j] - mean).powi(2) * rho[j];
        } else {
            // No local quotient exists here, yet at an on-grid node the
            // integrand of σ²_A stays finite (|ψ'|² for C). Book it as spread.
            avg_local_variance += second[j] - 2.0 * mean * first[j] + mean * mean * rho[j];
        }
    }
    Ok(VarianceDecomposition {
        definition,
        avg_local_variance: avg_local_variance * dq,
        variance_of_local_avg: variance_of_local_avg * dq,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{gaussian_oracle, synthesize, StateRecipe};
    use crate::{integrate, make_grid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn desk() -> GridSpec {
        make_grid(512, -20.0, 20.0, 1.0, 1.0).unwrap()
    }

    fn gaussian() -> Wavefunction {
        synthesize(&StateRecipe::gaussian(1.0, 2.0, 0.0), &desk()).unwrap()
    }

    fn plane() -> (Wavefunction, f64) {
        let k = 2.0 * PI * 4.0 / 40.0;
        (synthesize(&StateRecipe::PlaneWave { k }, &desk()).unwrap(), k)
    }

    #[test]
    fn plane_wave_profiles() {
        let (psi, k) = plane();
        let p = ObservableSpec::momentum();
        let d = local_density_s(&psi, &p).unwrap();
        assert!(d.values().iter().all(|v| (v - k / 40.0).abs() < 1e-12));
        let v = local_value_s(&psi, &p).unwrap();
        assert!(v.values().iter().all(|x| (x - k).abs() < 1e-10));
        let c = local_variance_c(&psi, &p).unwrap();
        assert!(c.values().iter().all(|x| x.abs() < 1e-12));
        let m2 = local_second_moment_s(&psi, &p).unwrap();
        assert!(m2.values().iter().all(|x| (x - k * k).abs() < 1e-10));
        let s = local_variance_s(&psi, &p).unwrap();
        assert!(s.values().iter().all(|x| x.abs() < 1e-10));
        let sw = sandwich_density(&psi, &p).unwrap();
        assert!(sw.values().iter().all(|x| (x - k * k / 40.0).abs() < 1e-12));
        assert!(density_inequality_witness(&psi, &p).unwrap() < 1e-10);
    }

    #[test]
    fn real_gaussian_has_no_momentum_density() {
        let psi = synthesize(&StateRecipe::gaussian(1.0, 0.0, 0.0), &desk()).unwrap();
        let d = local_density_s(&psi, &ObservableSpec::momentum()).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
        assert!(global_average(&psi, &ObservableSpec::momentum()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn gaussian_spot_values() {
        let psi = gaussian();
        let p = ObservableSpec::momentum();
        let p2 = ObservableSpec::MomentumPower(2);
        assert_abs_diff_eq!(integrate(&local_density_s(&psi, &p2).unwrap()), 4.25, epsilon = 1e-8);
        let v = local_value_s(&psi, &p).unwrap();
        assert!(v.profile.iter_masked().all(|(_, _, x)| (x - 2.0).abs() < 1e-8));
        let c = local_variance_c(&psi, &p).unwrap();
        assert_abs_diff_eq!(
            local_moments_at(&psi, &p, 1.0).unwrap().variance_c,
            0.25,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(c.at_q(0.0).unwrap(), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(
            local_second_moment_s(&psi, &p).unwrap().at_q(0.0).unwrap(),
            4.5,
            epsilon = 1e-8
        );
        let s = local_variance_s(&psi, &p).unwrap();
        assert_abs_diff_eq!(
            local_moments_at(&psi, &p, 2.0).unwrap().variance_s,
            -0.5,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(s.at_q(0.0).unwrap(), 0.5, epsilon = 1e-8);
        // Grid points reproduce the profiles exactly.
        let at = local_moments_at(&psi, &p, 2.5).unwrap();
        assert_abs_diff_eq!(at.variance_s, s.at_q(2.5).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(at.variance_c, c.at_q(2.5).unwrap(), epsilon = 1e-10);
        let sw = sandwich_density(&psi, &p).unwrap();
        assert_abs_diff_eq!(sw.at_q(0.0).unwrap(), 1.5957691216057308, epsilon = 1e-8);
        assert_abs_diff_eq!(
            density_inequality_witness(&psi, &p).unwrap(),
            0.19947114020071635,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(global_average(&psi, &p).unwrap(), 2.0, epsilon = 1e-9);
        let shifted = synthesize(&StateRecipe::gaussian(1.0, 0.0, 1.0), &desk()).unwrap();
        assert_abs_diff_eq!(
            global_average(&shifted, &ObservableSpec::position(&desk())).unwrap(),
            1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn c_variance_routes_agree() {
        let grid = desk();
        let psi = synthesize(
            &"superposition([1,0]gaussian(s=1,k0=1,q0=-4);[0.5,0.5]gaussian(s=0.8,k0=-1,q0=3))"
                .parse()
                .unwrap(),
            &grid,
        )
        .unwrap();
        for a in [ObservableSpec::momentum(), ObservableSpec::MomentumPower(2)] {
            let direct = local_variance_c(&psi, &a).unwrap();
            let via = local_variance_c_via_sandwich(&psi, &a).unwrap();
            for (j, _, x) in direct.profile.iter_masked() {
                let y = via.values()[j];
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "j={j}: {x} vs {y}");
                assert!(x >= -1e-12);
            }
        }
    }

    #[test]
    fn square_action_required() {
        let psi = gaussian();
        let apply: FieldAction = Arc::new(|psi: &Wavefunction| apply_momentum_power(psi, 1).unwrap());
        let a = ObservableSpec::linear_action(apply, None);
        assert!(local_value_s(&psi, &a).is_ok());
        let err = local_second_moment_s(&psi, &a).unwrap_err();
        assert!(err.to_string().contains("square action required"));
    }

    #[test]
    fn linear_action_matches_momentum_power() {
        let psi = gaussian();
        let apply: FieldAction = Arc::new(|psi: &Wavefunction| apply_momentum_power(psi, 1).unwrap());
        let square: FieldAction = Arc::new(|psi: &Wavefunction| apply_momentum_power(psi, 2).unwrap());
        let a = ObservableSpec::linear_action(apply, Some(square));
        let s1 = local_variance_s(&psi, &a).unwrap();
        let s2 = local_variance_s(&psi, &ObservableSpec::momentum()).unwrap();
        let bits = |p: &LocalProfile| p.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&s1), bits(&s2));
        let d = variance_decomposition(&psi, &a, Definition::C).unwrap();
        assert!(d.residual() < 1e-8);
    }

    #[test]
    fn position_observable_is_diagonal() {
        let grid = desk();
        let psi = gaussian();
        let g = ObservableSpec::position_fn(&grid, |q| q.sin() + 0.1 * q * q);
        let v = local_value_s(&psi, &g).unwrap();
        for (_, q, x) in v.profile.iter_masked() {
            assert_abs_diff_eq!(x, q.sin() + 0.1 * q * q, epsilon = 1e-12);
        }
        for d in Definition::ALL {
            let var = local_profile(&psi, &g, d, MomentOrder::Variance).unwrap();
            assert!(var.profile.iter_masked().all(|(_, _, x)| x.abs() < 1e-10), "{d}");
        }
        assert!(density_inequality_witness(&psi, &g).unwrap() < 1e-10);
    }

    #[test]
    fn gaussian_decompositions() {
        let psi = gaussian();
        let p = ObservableSpec::momentum();
        for def in Definition::ALL {
            let d = variance_decomposition(&psi, &p, def).unwrap();
            assert_abs_diff_eq!(d.avg_local_variance, 0.25, epsilon = 1e-8);
            assert_abs_diff_eq!(d.variance_of_local_avg, 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(d.total, 0.25, epsilon = 1e-8);
        }
        let (plane, _) = plane();
        // A plane wave never decays, so there is no Wigner function on the window.
        assert!(variance_decomposition(&plane, &p, Definition::W).is_err());
        for def in [Definition::S, Definition::C, Definition::MH] {
            let d = variance_decomposition(&plane, &p, def).unwrap();
            assert!(d.avg_local_variance.abs() < 1e-9, "{def}: {d:?}");
            assert!(d.variance_of_local_avg.abs() < 1e-9);
            assert!(d.total.abs() < 1e-9);
        }
    }

    #[test]
    fn coarse_mask_is_refused() {
        let psi = gaussian().with_mask_eps(0.5).unwrap();
        let err = variance_decomposition(&psi, &ObservableSpec::momentum(), Definition::S).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn oracle_profiles_match_numerics() {
        let recipe = StateRecipe::gaussian(0.9, -1.3, 0.7);
        let psi = synthesize(&recipe, &desk()).unwrap();
        let o = gaussian_oracle(&recipe, 1.0).unwrap();
        let p = ObservableSpec::momentum();
        let s = local_variance_s(&psi, &p).unwrap();
        let c = local_variance_c(&psi, &p).unwrap();
        for (j, q, x) in s.profile.iter_masked() {
            assert_abs_diff_eq!(x, o.variance_s(q), epsilon = 1e-8);
            assert_abs_diff_eq!(c.values()[j], o.variance_c(q), epsilon = 1e-8);
        }
    }

    #[test]
    fn order_and_definition_text() {
        assert_eq!("variance".parse::<MomentOrder>().unwrap(), MomentOrder::Variance);
        assert_eq!("3".parse::<MomentOrder>().unwrap(), MomentOrder::Moment(3));
        assert!("5".parse::<MomentOrder>().is_err());
        assert_eq!("MH".parse::<Definition>().unwrap(), Definition::MH);
        assert!("X".parse::<Definition>().is_err());
        let psi = gaussian();
        assert!(local_profile(&psi, &ObservableSpec::momentum(), Definition::C, MomentOrder::Moment(3)).is_err());
    }
}
