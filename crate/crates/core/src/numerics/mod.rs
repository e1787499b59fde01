//! Grid, state containers and spectral machinery shared by every other module.

mod field;
mod grid;
mod spectral;

pub use field::{RealProfile, Wavefunction, DEFAULT_MASK_EPS};
pub use grid::{make_grid, GridSpec};
pub use spectral::{
    apply_momentum_power, derivative_complex, derivative_real, integrate, interpolate, momentum_density_fine,
    momentum_representation, position_representation, spatial_derivative, MomentumWavefunction, MAX_MOMENTUM_POWER,
};
pub(crate) use spectral::{fft_forward, fft_inverse, momentum_slots};
