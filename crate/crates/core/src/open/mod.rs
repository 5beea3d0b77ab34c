//! Dissipative implementation of the interferometric protocol: quantum
//! trajectories over a tracked-atom Hilbert space, plus an exact small-N
//! master-equation solver used to validate them.

mod hybrid;
mod master;
mod params;
mod trajectory;

pub use hybrid::{to_full_dicke, Basis, HybridLayout, HybridState};
pub use master::{dicke_sector_oracle, master_equation_oracle, MasterSeries, MAX_ORACLE_ATOMS};
pub use params::{
    dicke_multiplicity, jump_operators, photons_lost, Channel, DissipationParams, JumpOperator,
    PhotonConvention, Rates,
};
pub use trajectory::{
    dissipative_correlators, DissipativeRun, EnsembleEstimate, JumpEvent, OpenProtocol,
    TrajectoryRecord,
};
