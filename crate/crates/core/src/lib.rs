//! Numerical solver for the thermoforming membrane–mould–temperature
//! system: a quasi-variational inequality in which a membrane is pressed
//! onto a mould whose shape depends, through heat exchange at the contact
//! set, on the membrane itself.

// `!(x > 0)` comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conditions;
pub mod contact;
pub mod discretization;
pub mod elliptic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod quasistatic;
pub mod scalar;
pub mod thermal;
pub mod verify;

pub use conditions::{ConditionReport, Gated};
pub use error::{Error, Result};
pub use scalar::Real;
pub mod prelude {
    pub use crate::discretization::{build_grid, FieldKind, Grid, ScalarField};
    pub use crate::elliptic::{continuation_solve, EllipticSources, EllipticState, RegSchedule, SolverParams};
    pub use crate::quasistatic::{run_quasistatic, Source, TimeGrid, TimeSources, Trajectory};
    pub use crate::thermal::Coefficients;
    pub use crate::verify::{run_elliptic_checks, run_quasistatic_checks, CheckResult, VerifyParams};
}

/// Double-precision instantiations.
pub type Field = discretization::ScalarField<f64>;
pub type Coeffs = thermal::Coefficients<f64>;
pub type Sources = elliptic::EllipticSources<f64>;
pub type State = elliptic::EllipticState<f64>;
pub type Params = elliptic::SolverParams<f64>;
pub type Schedule = elliptic::RegSchedule<f64>;
pub type TimeSources = quasistatic::TimeSources<f64>;
pub type Trajectory = quasistatic::Trajectory<f64>;
