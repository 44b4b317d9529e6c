#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designer;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod model;
pub mod spectra;

pub use error::{Error, Result};
