//! Fixed-point analysis on perturbed metric spaces: axiom audits for
//! perturbed metrics and F-gauges, F-perturbed contraction certificates,
//! Picard iteration diagnostics and an integral-equation BVP solver.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod bvp;
pub mod cert;
pub mod error;
pub mod expr;
pub mod gauge;
pub mod iteration;
pub mod map;
pub mod metric;
pub mod report;
pub mod run;
pub mod space;
pub mod spec;

pub use error::{Error, Result};
