//! Model, state and operator descriptors shared by the protocols, the
//! open-system simulator and the run configuration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{coherent_state, Axis, CollectiveOps, DickeState, SpinQuantum, C64};

/// Hamiltonian family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dynamics {
    /// `H = chi S_x^2`; times are physical durations.
    Twisting { chi: f64 },
    /// Floquet map `e^{-i k S_x^2 / 2S} e^{-i p S_z}`; times are kick counts.
    KickedTop { k: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub atoms: usize,
    pub dynamics: Dynamics,
}

impl ModelSpec {
    pub fn twisting(atoms: usize, chi: f64) -> Self {
        Self {
            atoms,
            dynamics: Dynamics::Twisting { chi },
        }
    }

    pub fn kicked_top(atoms: usize, k: f64, p: f64) -> Self {
        Self {
            atoms,
            dynamics: Dynamics::KickedTop { k, p },
        }
    }

    pub fn spin(&self) -> SpinQuantum {
        SpinQuantum::from_atoms(self.atoms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 {
            return Err(Error::InvalidParameter {
                name: "atoms",
                reason: "need at least one atom".into(),
            });
        }
        let finite = match self.dynamics {
            Dynamics::Twisting { chi } => chi.is_finite(),
            Dynamics::KickedTop { k, p } => k.is_finite() && p.is_finite(),
        };
        if !finite {
            return Err(Error::InvalidParameter {
                name: "dynamics",
                reason: "parameters must be finite".into(),
            });
        }
        Ok(())
    }

    /// Number of Floquet periods for a kicked-top time, or an error for a
    /// negative or fractional value.
    pub fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if let Dynamics::KickedTop { .. } = self.dynamics {
            if !t.is_finite() || t.fract() != 0.0 {
                return Err(Error::NonIntegerKicks(t));
            }
        }
        Ok(())
    }
}

/// A global rotation `e^{-i angle S_axis}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub axis: Axis,
    pub angle: f64,
}

impl Rotation {
    pub const fn new(axis: Axis, angle: f64) -> Self {
        Self { axis, angle }
    }

    pub const fn z(angle: f64) -> Self {
        Self::new(Axis::Z, angle)
    }

    pub const fn identity() -> Self {
        Self::new(Axis::Z, 0.0)
    }

    pub fn inverse(self) -> Self {
        Self::new(self.axis, -self.angle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.angle.is_finite() {
            Ok(())
        } else {
            Err(Error::NonUnitary(self.angle))
        }
    }

    pub fn apply(&self, ops: &CollectiveOps, v: &mut [C64]) {
        ops.rotate_amplitudes(v, self.axis, self.angle);
    }

    pub fn commutes_with(&self, other: &Rotation) -> bool {
        self.axis == other.axis || self.angle == 0.0 || other.angle == 0.0
    }
}

/// A coherent state along `(theta, phi)` followed by a list of rotations,
/// applied in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub theta: f64,
    pub phi: f64,
    #[serde(default)]
    pub rotations: Vec<Rotation>,
}

impl InitialState {
    pub fn coherent(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            rotations: Vec::new(),
        }
    }

    /// `|S_z = S>`.
    pub fn along_z() -> Self {
        Self::coherent(0.0, 0.0)
    }

    /// `|S_x = S>`.
    pub fn along_x() -> Self {
        Self::coherent(std::f64::consts::FRAC_PI_2, 0.0)
    }

    /// `|S_y = S>`.
    pub fn along_y() -> Self {
        Self::coherent(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
    }

    pub fn validate(&self) -> Result<()> {
        for a in [self.theta, self.phi] {
            if !a.is_finite() {
                return Err(Error::NonUnitary(a));
            }
        }
        self.rotations.iter().try_for_each(Rotation::validate)
    }

    pub fn then(mut self, rotation: Rotation) -> Self {
        self.rotations.push(rotation);
        self
    }

    pub fn prepare(&self, ops: &CollectiveOps) -> DickeState {
        let mut psi = coherent_state(ops.spin(), self.theta, self.phi);
        for r in &self.rotations {
            ops.rotate(&mut psi, r.axis, r.angle);
        }
        psi
    }
}

/// Forward and reversed evolution for one model.
///
/// Reversal flips the sign of the Hamiltonian: `chi -> -chi` for the
/// twisting model, and for the kicked top the inverse Floquet period
/// (twist with `-k`, then rotate by `-p`).
#[derive(Debug, Clone)]
pub struct Propagator {
    model: ModelSpec,
    ops: Arc<CollectiveOps>,
}

impl Propagator {
    pub fn new(model: ModelSpec) -> Result<Self> {
        model.validate()?;
        Ok(Self {
            ops: Arc::new(CollectiveOps::new(model.spin())),
            model,
        })
    }

    pub fn with_ops(model: ModelSpec, ops: Arc<CollectiveOps>) -> Result<Self> {
        model.validate()?;
        if ops.spin() != model.spin() {
            return Err(Error::DimensionMismatch {
                got: ops.dim(),
                expected: model.spin().dim(),
            });
        }
        Ok(Self { model, ops })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn ops(&self) -> &CollectiveOps {
        &self.ops
    }

    pub fn shared_ops(&self) -> Arc<CollectiveOps> {
        Arc::clone(&self.ops)
    }

    /// `v <- U(t) v`.
    pub fn forward(&self, v: &mut [C64], t: f64) {
        match self.model.dynamics {
            Dynamics::Twisting { chi } => self.ops.twist_amplitudes(v, chi * t),
            Dynamics::KickedTop { k, p } => {
                for _ in 0..t as usize {
                    self.ops.kick_amplitudes(v, k, p);
                }
            }
        }
    }

    /// `v <- U(-t) v`.
    pub fn backward(&self, v: &mut [C64], t: f64) {
        match self.model.dynamics {
            Dynamics::Twisting { chi } => self.ops.twist_amplitudes(v, -chi * t),
            Dynamics::KickedTop { k, p } => {
                for _ in 0..t as usize {
                    self.ops.inverse_kick_amplitudes(v, k, p);
                }
            }
        }
    }
}
