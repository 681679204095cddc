//! Boundary-integral simulation and frozen-coefficient spectral analysis of a
//! closed elastic membrane immersed in 3D Stokes flow.
//!
//! The membrane is a map `X: S^2 -> R^3` evolving with the single-layer
//! velocity induced by its own elastic force. The crate provides:
//!
//! - [`atlas`]: stereographic chart system on the unit sphere with a
//!   partition of unity,
//! - [`membrane`]: pseudo-spectral representation of the membrane, elastic
//!   force density and geometric diagnostics,
//! - [`kernels`]: closed-form Stokeslet kernels, their splits, derivatives
//!   and remainder algebra,
//! - [`bie`]: singular quadrature of the boundary-integral velocity and
//!   scalar single-layer operators,
//! - [`spectral`]: frozen-coefficient Fourier multipliers, resolvent and
//!   semigroup-kernel computations,
//! - [`sim`]: explicit time integration with diagnostics,
//! - [`validate`]: self-contained validation suites used by the CLI.

pub mod atlas;
pub mod bie;
pub mod error;
pub mod harmonics;
pub mod kernels;
pub mod membrane;
pub mod sim;
pub mod spectral;
pub mod tension;
pub mod validate;

pub use error::CoreError;

/// Workspace-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
