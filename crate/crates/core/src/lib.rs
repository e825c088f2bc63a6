//! Construction and verification of the low-rank dual certificate for
//! constant-step gradient descent on convex 1-smooth functions.
//!
//! The pipeline is [`rootfinding::solve_root`] → [`altsums::terminal_polynomials`]
//! → [`certificate::build_certificate`], with [`reduced_solver`] and
//! [`dualcheck`] as independent cross-checks and [`lower_bounds`] closing the
//! minimax argument.

pub mod altsums;
pub mod certificate;
pub mod dualcheck;
pub mod error;
pub mod lower_bounds;
pub mod numerics;
pub mod par;
pub mod reduced_solver;
pub mod rootfinding;
pub mod suite;

pub use error::{Error, Result};
pub use numerics::{configure, PrecisionConfig, Scalar, ScaledResidual};
pub use rootfinding::{solve_root, RootParams};
