//! Nonlocal Neumann problems for the Vladimirov–Taibleson operator on the
//! balls of a non-Archimedean local field.
//!
//! Everything is exact on locally constant functions: a [`Grid`] fixes the
//! domain ball `B_N`, the outer radius `Q^M` beyond which functions are
//! constant, and the resolution `Q^{-nu}`. Operators act on [`LCFunction`]s
//! without quadrature error, so the identities checked in [`verify`] hold to
//! rounding.

pub mod error;
pub mod lcfun;
pub mod localfield;
pub mod operators;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use lcfun::{IntegrationRegion, LCFunction, WeightFunction};
pub use localfield::{AbsLevel, CosetId, Distance, FieldModel, Grid, Region};
pub use operators::{coefficient_c, lambda_n, OperatorKind, OperatorMatrix, ResolventMatrix};
pub use solvers::{Gauge, Method, NeumannProblem, Residuals, Solution, Spectrum, Tolerances};
pub use verify::IdentityReport;
