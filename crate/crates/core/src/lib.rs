#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Aggregate modelling of heterogeneous flexible loads as stochastic hybrid
//! systems: Monte Carlo simulation, finite-volume density evolution,
//! parameter clustering and demand-response scenarios.

mod clock;
pub mod error;
pub mod hetero;
pub mod mc;
pub mod model;
mod par;
pub mod pde;
pub mod scenario;
pub mod series;

pub use error::{Error, Result};
