//! Exact distribution of a second-class particle in the asymmetric simple
//! exclusion process, evaluated from contour-integral series and
//! Fredholm-determinant expansions.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod contour;
pub mod error;
pub mod exec;
pub mod finite;
pub mod fredholm;
pub mod graded;
pub mod linalg;
pub mod qcalc;
pub mod real;
pub mod step;
pub mod sum;

pub use error::{Error, Result};
pub use qcalc::RateParams;
pub use real::{Dd, Real};
