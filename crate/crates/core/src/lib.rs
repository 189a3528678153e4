//! Numerical laboratory for fractional Sobolev inequalities on periodic grids.

// NaN must fail range checks, so `!(x > 0.0)` is written on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audits;
pub mod closed_form;
pub mod dislocations;
pub mod error;
pub mod extremals;
pub mod field;
pub mod lab;
pub mod norms;
pub mod profiles;
pub mod subcritical;

pub use error::{LabError, Result};
