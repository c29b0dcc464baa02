//! Numerical core for studying the implicit bias of gradient descent on
//! overparameterized linear classifiers: losses, data ensembles, minimum-norm
//! interpolation, the dual characterization of the limit direction, and
//! gradient-descent dynamics.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod dual;
pub mod error;
pub mod gd;
pub mod interp;
pub mod loss;
pub mod num;

pub use error::{Error, Result};
