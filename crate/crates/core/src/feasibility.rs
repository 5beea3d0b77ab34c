//! Closed-form cavity-QED estimates. The approximate bounds (`≈`, `≳`) are
//! evaluated as exact formulas with the stated constants; treat the outputs as
//! order-of-magnitude figures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::open::DissipationParams;

/// Cavity and atom parameters. `gamma` is the atomic linewidth `Γ` and
/// `delta` half the ground-state splitting, both as rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub eta: f64,
    pub atoms: usize,
    pub k: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("eta", self.eta)?;
        positive("k", self.k)?;
        positive("gamma", self.gamma)?;
        positive("delta", self.delta)?;
        if self.atoms == 0 {
            return Err(Error::InvalidParameter {
                name: "atoms",
                reason: "need at least one atom".into(),
            });
        }
        match (self.g, self.kappa) {
            (Some(g), Some(kappa)) => {
                positive("g", g)?;
                positive("kappa", kappa)?;
                let eta = cooperativity(g, kappa, self.gamma);
                if (eta - self.eta).abs() > 1e-9 * self.eta.max(1.0) {
                    return Err(Error::InvalidParameter {
                        name: "eta",
                        reason: format!(
                            "4g^2/(kappa Gamma) = {eta} disagrees with eta = {}",
                            self.eta
                        ),
                    });
                }
                Ok(())
            }
            (None, None) => Ok(()),
            _ => Err(Error::InvalidParameter {
                name: "g",
                reason: "g and kappa must be given together".into(),
            }),
        }
    }
}

/// `η = 4g²/(κΓ)`.
pub fn cooperativity(g: f64, kappa: f64, gamma: f64) -> f64 {
    4.0 * g * g / (kappa * gamma)
}

/// Largest controlled rotation angle, `sqrt(η/8N)`.
pub fn phi_max(eta: f64, atoms: usize) -> f64 {
    (eta / (8.0 * atoms as f64)).sqrt()
}

/// Success probability `e^{-φ/φ_max}` of a controlled rotation by `phi`.
pub fn gate_contrast(phi: f64, eta: f64, atoms: usize) -> f64 {
    (-phi / phi_max(eta, atoms)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZOpt {
    pub value: f64,
    /// `z_opt <= 1`, i.e. `2Δ >= sqrt(2Nη) Γ`.
    pub valid: bool,
}

/// Optimal excited-state admixture `sqrt(2Nη) Γ/(2Δ)`.
pub fn z_opt(eta: f64, atoms: usize, gamma: f64, delta: f64) -> ZOpt {
    let value = (2.0 * atoms as f64 * eta).sqrt() * gamma / (2.0 * delta);
    ZOpt {
        value,
        valid: value <= 1.0,
    }
}

/// Detuning `sqrt(8η)` (in cavity linewidths) that balances cavity and
/// spontaneous loss.
pub fn d_opt(eta: f64) -> Result<f64> {
    if !(eta > 1.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("optimal detuning needs eta > 1, got {eta}"),
        });
    }
    Ok((8.0 * eta).sqrt())
}

/// Cooperativity needed to resolve chaos, `((k/2) ln N)²`.
pub fn eta_min(k: f64, atoms: usize) -> f64 {
    (0.5 * k * (atoms as f64).ln()).powi(2)
}

/// `γ/μ = 8η/d²` at detuning `d`.
pub fn rate_ratio(eta: f64, d: f64) -> f64 {
    8.0 * eta / (d * d)
}

/// All calculators for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub params: CavityParams,
    pub phi_max: f64,
    /// Contrast at the scrambling-scale angle `1/sqrt(N)`.
    pub contrast_at_inverse_sqrt_n: f64,
    pub z_opt: ZOpt,
    pub d_opt: Option<f64>,
    pub eta_min: f64,
    pub chaos_accessible: bool,
    /// Detuning used for the rate ratio (`d_opt` unless given).
    pub detuning: Option<f64>,
    pub gamma_over_mu: Option<f64>,
    /// `γ/χ` and `μ/χ` at that detuning.
    pub gamma_per_chi: Option<f64>,
    pub mu_per_chi: Option<f64>,
}

pub fn feasibility_report(
    params: &CavityParams,
    detuning: Option<f64>,
) -> Result<FeasibilityReport> {
    params.validate()?;
    let d_opt = d_opt(params.eta).ok();
    let detuning = detuning.or(d_opt);
    let rates = match detuning {
        Some(d) => Some(DissipationParams::new(1.0, params.eta, d)?),
        None => None,
    };
    let eta_min = eta_min(params.k, params.atoms);
    Ok(FeasibilityReport {
        phi_max: phi_max(params.eta, params.atoms),
        contrast_at_inverse_sqrt_n: gate_contrast(
            1.0 / (params.atoms as f64).sqrt(),
            params.eta,
            params.atoms,
        ),
        z_opt: z_opt(params.eta, params.atoms, params.gamma, params.delta),
        d_opt,
        eta_min,
        chaos_accessible: params.eta >= eta_min,
        detuning,
        gamma_over_mu: detuning.map(|d| rate_ratio(params.eta, d)),
        gamma_per_chi: rates.as_ref().map(|r| r.gamma()),
        mu_per_chi: rates.as_ref().map(|r| r.mu()),
        params: params.clone(),
    })
}
