#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod error;
pub mod experiments;
pub mod fisher;
pub mod gaussian;
pub mod protocols;
pub mod table;

pub use error::{Error, Result};
