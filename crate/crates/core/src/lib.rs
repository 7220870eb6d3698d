// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod frames;
pub mod gaussian;
pub mod linalg;
pub mod mc;
pub mod quadrature;
pub mod scp;
pub mod semigroup;
pub mod serial;
pub mod space;
pub mod verify;

pub use error::{Error, Result};
