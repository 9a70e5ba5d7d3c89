//! Operator product expansion coefficients of massive Euclidean phi^4 theory.
//!
//! Zeroth-order coefficients are computed exactly via Wick's theorem; first
//! order coefficients follow from a self-consistent deformation recursion
//! whose counter-term-subtracted integrand is integrated over R^4.
//!
//! The `examples/` directory of this crate has one runnable example per major
//! capability; `src/bin/ope.rs` is a thin CLI front end.

pub mod basis;
pub mod deform;
pub mod expr;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod specfun;
pub mod verify;
pub mod wick;

pub use basis::{
    enumerate_basis, multinomial_weight, parse_op, CompositeOp, ModelParams, MultiIndex,
    PointConfig,
};
pub use deform::{coefficient, CoeffKey, CoeffTable, CoeffValue, Integrand, Method, NumericCoeff};
pub use expr::{CoeffExpr, Factor, PointLabel, Term};
pub use quad::{integrate_r4, mc_integrate_r4, QuadPlan};
