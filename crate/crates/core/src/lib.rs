#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covsel;
pub mod error;
pub mod graphs;
pub mod inference;
pub mod linops;
pub mod mest;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};
