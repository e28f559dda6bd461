//! Periodic solutions of delay differential equations by spectral-element
//! collocation.
//!
//! The unknown periodic orbit is rescaled to period one and approximated by a
//! continuous piecewise polynomial of degree `m` on a fixed mesh of `L`
//! intervals. The differential equation is enforced at Gauss-type collocation
//! points and the resulting square system is solved by Newton's method.
//! Accuracy improves geometrically in `m` when the orbit is analytic.
//!
//! Modules:
//!
//! - [`nodes`]: node families, barycentric weights, Lebesgue constants.
//! - [`piecewise`]: periodic piecewise polynomials and the interpolation projection.
//! - [`problem`]: right-hand sides in rescaled time and the built-in test problems.
//! - [`collocation`]: the discretized system and the damped Newton solver.
//! - [`oracle`]: fixed-point defect of a discrete state, computed independently
//!   of the collocation residual.
//! - [`continuation`]: Hopf starting guesses and natural-parameter continuation.
//! - [`analysis`]: dense-grid residuals, convergence studies, Bernstein bounds
//!   and the circle-map diagnostic.

pub mod analysis;
pub mod collocation;
pub mod continuation;
mod error;
pub mod nodes;
pub mod oracle;
pub mod piecewise;
pub mod problem;

pub use error::{Error, Result};

/// Version tag written into every JSON and CSV artifact.
pub const FORMAT_VERSION: u32 = 1;
