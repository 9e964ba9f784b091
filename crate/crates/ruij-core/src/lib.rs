//! Special functions, kernels, wave functions and operators of the quantum
//! hyperbolic Ruijsenaars system, with numerical checks of their identities.

pub mod double_sine;
pub mod inequalities;
pub mod integrals;
pub mod kernels;
pub mod operators;
pub mod params;
pub mod quadrature;
pub mod report;
pub mod wavefunction;

pub use num_complex::Complex64 as C64;
