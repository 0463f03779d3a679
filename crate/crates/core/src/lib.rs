// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulant;
pub mod environment;
pub mod linops;
pub mod error;
pub mod io;
pub mod jumplaw;
pub mod numeric;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
