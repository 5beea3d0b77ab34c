//! Observables computed from states: Clebsch-Gordan tables, spin Wigner functions and
//! decay times.

pub mod cg;
pub mod decay;
pub mod wigner;

pub use cg::{clebsch_gordan, CgTable};
pub use decay::{decay_time, log_fit, DecayTime, LogFit, DEFAULT_THRESHOLD};
pub use wigner::{multipoles, wigner, wigner_normalization, GridSpec, WignerGrid, MAX_WIGNER_DIM};

#[cfg(test)]
use crate::oracle;
