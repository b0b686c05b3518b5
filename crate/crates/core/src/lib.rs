#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod closures;
pub mod density;
pub mod error;
pub mod experiments;
pub mod gausskernel;
pub mod momentsystem;
pub mod polyspace;
pub mod projector;

pub use error::{Error, Result};
