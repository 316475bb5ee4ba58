// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod driver;
mod error;
pub mod fem;
pub mod mesh;
pub mod swe;
pub mod timestepping;

pub use error::{Error, Result};
