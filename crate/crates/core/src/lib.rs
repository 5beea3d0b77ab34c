//! Out-of-time-order (OTO) and time-ordered correlators for collective spin
//! models under unitary and dissipative dynamics.

// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod exec;
pub mod feasibility;
pub mod io;
pub mod model;
pub mod observables;
pub mod open;
pub mod protocols;
pub mod runner;
pub mod semiclassics;
pub mod spin;

pub use error::{Error, Result};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod oracle;
