//! Local averages and local variances of quantum observables in one dimension.
//!
//! The crate computes position-conditioned moments of an observable for a pure
//! state sampled on a uniform periodic grid, under four competing quantum
//! prescriptions:
//!
//! * `S`: expectation of the symmetrized operator `½(Â δ(q̂−q) + δ(q̂−q) Â)`,
//!   applied separately to `Â` and `Â²`;
//! * `C`: real part of `⟨q|Â|ψ⟩/⟨q|ψ⟩` as local value, squared imaginary part
//!   as local spread;
//! * `MH`: local moments of the Margenau–Hill quasi-distribution;
//! * `W`: local moments of the Wigner function.
//!
//! A classical phase-space oracle, a split-step propagator and residual checks
//! for the hydrodynamic equations complete the toolkit.
//!
//! Row-wise work (phase-space transforms, per-snapshot post-processing) runs on
//! rayon when the `parallel` feature is enabled, and sequentially otherwise.

pub mod classical;
pub mod dynamics;
mod error;
pub mod io;
pub mod local;
pub mod numerics;
mod par;
pub mod phase_space;
pub mod states;

pub use error::{Error, Result};
pub use numerics::{
    apply_momentum_power, integrate, make_grid, momentum_representation, position_representation, spatial_derivative,
    GridSpec, MomentumWavefunction, RealProfile, Wavefunction, DEFAULT_MASK_EPS,
};
