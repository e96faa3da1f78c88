#![no_std]
// Negated float comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod arrangement;
pub mod certificate;
pub mod conditions;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod instances;
pub mod linalg;
pub mod operators;
pub mod solver;

pub use error::{Error, Result};
