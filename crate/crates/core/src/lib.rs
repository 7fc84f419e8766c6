//! Pseudo-spectral incompressible flow solver in a triply periodic box,
//! built to measure the discrete conservation behaviour of energy and
//! helicity across convective-term formulations, emulated
//! finite-difference accuracy and Runge-Kutta tableaux.

pub mod convect;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod rk;
pub mod scenario;
pub mod spectra;
pub mod testutil;
pub mod verify;

pub use convect::ConvectiveForm;
pub use error::{Error, Result};
pub use field::{Ops, SpectralField, SpectralVelocity, SpectralVorticity};
pub use grid::{DealiasPolicy, DerivativeScheme, GridSpec, WavenumberTable};
pub use rk::{ButcherTableau, Integrator, StepReport, TableauKind};
