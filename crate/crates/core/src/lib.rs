//! Characteristic functions of pure 1/k-contractions for unitarily invariant
//! kernels with a complete Nevanlinna-Pick factor.

pub mod charfn;
pub mod dilation;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod multiindex;
pub mod rational;
pub mod tuple;

pub use error::{Error, Result};
