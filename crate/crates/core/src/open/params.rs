//! Dissipation rates, jump operators and photon-loss bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dynamics, ModelSpec};
use crate::spin::ln_binomial;

fn default_budget() -> usize {
    5
}

/// Cavity parameters that fix the two dissipation rates.
///
/// `gamma = 2 chi / d` is the cavity photon loss rate per atom and
/// `mu = chi d / (4 eta)` is half the spontaneous scattering rate per atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationParams {
    pub chi: f64,
    pub eta: f64,
    pub d: f64,
    #[serde(default = "default_budget")]
    pub photon_budget: usize,
}

impl DissipationParams {
    pub fn new(chi: f64, eta: f64, d: f64) -> Result<Self> {
        let p = Self {
            chi,
            eta,
            d,
            photon_budget: default_budget(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Detuning `d_opt = sqrt(8 eta)`, which makes `gamma = mu`.
    pub fn with_optimal_detuning(chi: f64, eta: f64) -> Result<Self> {
        Self::new(chi, eta, (8.0 * eta).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return bad("chi", "must be positive and finite");
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad("eta", "must be positive and finite");
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return bad("d", "must be positive and finite");
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        2.0 * self.chi / self.d
    }

    pub fn mu(&self) -> f64 {
        self.chi * self.d / (4.0 * self.eta)
    }

    pub fn rates(&self) -> Rates {
        Rates {
            chi: self.chi,
            gamma: self.gamma(),
            mu: self.mu(),
            photon_budget: self.photon_budget,
        }
    }
}

/// Rates consumed by the simulators. `chi` sets the time unit of a kick:
/// one torsion of strength `k / N` lasts `k / (N chi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub chi: f64,
    pub gamma: f64,
    pub mu: f64,
    #[serde(default = "default_budget")]
    pub photon_budget: usize,
}

impl Rates {
    /// No dissipation at all.
    pub fn unitary(chi: f64) -> Self {
        Self {
            chi,
            gamma: 0.0,
            mu: 0.0,
            photon_budget: default_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("mu", self.mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "rate must be finite and non-negative".into(),
                });
            }
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: "must be positive and finite".into(),
            });
        }
        Ok(())
    }

    pub fn is_dissipative(&self) -> bool {
        self.gamma > 0.0 || self.mu > 0.0
    }

    /// Duration of one dissipative evolution unit of `model`: the torsion
    /// of one kick, or one unit of time for the twisting model.
    pub fn kick_duration(&self, model: &ModelSpec) -> f64 {
        match model.dynamics {
            Dynamics::KickedTop { k, .. } => k / (model.atoms as f64 * self.chi),
            Dynamics::Twisting { .. } => 1.0,
        }
    }
}

/// Jump channels. Spontaneous channels act on one atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `sqrt(gamma) S_x`.
    Cavity,
    /// `sqrt(mu) |up><down|`.
    SpFlipUp,
    /// `sqrt(mu) |down><up|`.
    SpFlipDown,
    /// `sqrt(mu) |up><up|`.
    SpProjUp,
    /// `sqrt(mu) |down><down|`.
    SpProjDown,
}

impl Channel {
    pub const SPONTANEOUS: [Channel; 4] = [
        Channel::SpFlipUp,
        Channel::SpFlipDown,
        Channel::SpProjUp,
        Channel::SpProjDown,
    ];

    /// Single-atom matrix in the `(up, down)` basis, without the rate.
    pub fn single_atom_matrix(self) -> Option<[[f64; 2]; 2]> {
        match self {
            Channel::Cavity => None,
            Channel::SpFlipUp => Some([[0.0, 1.0], [0.0, 0.0]]),
            Channel::SpFlipDown => Some([[0.0, 0.0], [1.0, 0.0]]),
            Channel::SpProjUp => Some([[1.0, 0.0], [0.0, 0.0]]),
            Channel::SpProjDown => Some([[0.0, 0.0], [0.0, 1.0]]),
        }
    }
}

/// Symbolic jump operator `sqrt(rate) * op`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpOperator {
    pub channel: Channel,
    /// Atom index for spontaneous channels.
    pub atom: Option<usize>,
    pub rate: f64,
}

/// The cavity operator followed by the `4N` single-atom operators; channels
/// with zero rate are omitted.
pub fn jump_operators(atoms: usize, rates: &Rates) -> Vec<JumpOperator> {
    let mut out = Vec::new();
    if rates.gamma > 0.0 {
        out.push(JumpOperator {
            channel: Channel::Cavity,
            atom: None,
            rate: rates.gamma,
        });
    }
    if rates.mu > 0.0 {
        for atom in 0..atoms {
            for channel in Channel::SPONTANEOUS {
                out.push(JumpOperator {
                    channel,
                    atom: Some(atom),
                    rate: rates.mu,
                });
            }
        }
    }
    out
}

/// Convention used by [`photons_lost`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonConvention {
    /// `F(t)` is exposed for forward plus reversed evolution (`2t`).
    EchoF,
    /// `G(t)` is exposed for forward evolution only (`t`).
    ForwardG,
}

impl PhotonConvention {
    pub fn describe(self) -> &'static str {
        match self {
            PhotonConvention::EchoF => {
                "N*(gamma + 2*mu) integrated over forward and reversed evolution (2t); \
                 one system copy, controlled-phase photons excluded"
            }
            PhotonConvention::ForwardG => {
                "N*(gamma + 2*mu) integrated over forward evolution (t); \
                 one system copy, controlled-phase photons excluded"
            }
        }
    }
}

/// Mean number of photons lost while measuring a correlator at time `t`
/// (kicks for the kicked top): the rate `N (gamma + 2 mu)` times the
/// dissipative exposure time.
pub fn photons_lost(model: &ModelSpec, rates: &Rates, t: f64, convention: PhotonConvention) -> f64 {
    let per_unit = model.atoms as f64 * (rates.gamma + 2.0 * rates.mu) * rates.kick_duration(model);
    let exposure = match convention {
        PhotonConvention::EchoF => 2.0 * t,
        PhotonConvention::ForwardG => t,
    };
    per_unit * exposure
}

/// Number `G_S` of spin-`S` subspaces in `N` spin-1/2 atoms:
/// `C(N, N/2 - S) - C(N, N/2 - S - 1)`. `twice_s` is `2S`.
pub fn dicke_multiplicity(atoms: u64, twice_s: u64) -> u64 {
    if twice_s > atoms || !(atoms - twice_s).is_multiple_of(2) {
        return 0;
    }
    let k = (atoms - twice_s) / 2;
    let binom = |n: u64, k: u64| ln_binomial(n, k).exp().round() as u64;
    let a = binom(atoms, k);
    let b = if k == 0 { 0 } else { binom(atoms, k - 1) };
    a - b
}
