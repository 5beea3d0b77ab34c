//! Spin Wigner function from the multipole expansion
//! `W(θ,φ) = Σ_k Σ_q ρ_kq Y_kq(θ,φ)`, `ρ_kq = Tr(ρ T_kq†)` with
//! `T_kq = Σ (-1)^{S-m'} <S m; S -m' | k q> |m><m'|`.
//!
//! With this normalisation `∫ W dΩ = sqrt(4π/(2S+1)) Tr ρ`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cg::CgTable;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::spin::DickeState;

/// Largest supported dimension `2S+1`.
pub const MAX_WIGNER_DIM: usize = 201;

/// `sqrt(4π/(2S+1))`, the sphere integral of `W` for a unit-trace state.
pub fn wigner_normalization(twice_s: u32) -> f64 {
    (4.0 * PI / (twice_s as f64 + 1.0)).sqrt()
}

/// Grid layout. `θ` nodes are Gauss-Legendre points in `cos θ`, `φ` nodes
/// are uniform from `phi_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(default)]
    pub phi_offset: f64,
}

impl GridSpec {
    /// Smallest grid on which the sphere integral is exact for spin `S`,
    /// with at least 32 polar points.
    pub fn for_spin(twice_s: u32) -> Self {
        let n_theta = (twice_s as usize + 2).max(32);
        Self {
            n_theta,
            n_phi: 2 * n_theta,
            phi_offset: 0.0,
        }
    }

    pub fn with_offset(mut self, phi_offset: f64) -> Self {
        self.phi_offset = phi_offset;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_theta == 0 || self.n_phi == 0 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "grid sizes must be positive".into(),
            });
        }
        if !self.phi_offset.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phi_offset",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub twice_s: u32,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Polar angles, increasing.
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Quadrature weights in `cos θ`.
    pub theta_weights: Vec<f64>,
    /// `W(theta[i], phi[j])` at `i * n_phi + j`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j]
    }

    /// Sphere integral by Gauss-Legendre in `cos θ` and the trapezoid rule
    /// in `φ`.
    pub fn integral(&self) -> f64 {
        let dphi = 2.0 * PI / self.n_phi as f64;
        (0..self.n_theta)
            .map(|i| {
                let row: f64 = self.values[i * self.n_phi..(i + 1) * self.n_phi]
                    .iter()
                    .sum();
                self.theta_weights[i] * row * dphi
            })
            .sum()
    }

    /// Grid indices of the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = idx;
            }
        }
        (best / self.n_phi, best % self.n_phi)
    }
}

/// Multipole moments `ρ_kq` for `q >= 0`, stored as `out[k][q]`. Negative
/// `q` follow from `ρ_{k,-q} = (-1)^q ρ_kq*`.
pub fn multipoles(state: &DickeState) -> Result<Vec<Vec<Complex64>>> {
    let spin = state.spin();
    let dim = spin.dim();
    if dim > MAX_WIGNER_DIM {
        return Err(Error::SpinTooLarge {
            got: dim,
            max: MAX_WIGNER_DIM,
        });
    }
    let sx2 = spin.twice();
    let psi = state.amplitudes();
    let table = CgTable::new(sx2, sx2);
    let s_x2 = sx2 as i64;
    let out = (0..=sx2 as usize)
        .map(|k| {
            (0..=k)
                .map(|q| {
                    // m = S - a, m' = m - q with Dicke index a + q;
                    // (-1)^{S-m'} = (-1)^{a+q}
                    (0..dim - q)
                        .map(|a| {
                            let ap = a + q;
                            let m1x2 = s_x2 - 2 * a as i64;
                            let m2x2 = -(s_x2 - 2 * ap as i64);
                            let c = table.get(2 * k as u32, m1x2, m2x2);
                            let sign = if ap % 2 == 0 { 1.0 } else { -1.0 };
                            psi[a] * psi[ap].conj() * (sign * c)
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(out)
}

/// Fully normalised associated Legendre functions `P̄_k^q(cos θ)` for a
/// fixed `q` and `k = q..=kmax`, with the Condon-Shortley phase, so that
/// `Y_kq = P̄_k^q e^{iqφ}`.
fn legendre_column(q: usize, kmax: usize, x: f64, sin_t: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut pqq = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=q {
        pqq *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_t;
    }
    out.push(pqq);
    if q == kmax {
        return;
    }
    out.push((2.0 * q as f64 + 3.0).sqrt() * x * pqq);
    for k in q + 2..=kmax {
        let (kf, qf) = (k as f64, q as f64);
        let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
        let km = kf - 1.0;
        let a_prev = ((4.0 * km * km - 1.0) / (km * km - qf * qf)).sqrt();
        let n = out.len();
        let v = a * (x * out[n - 1] - out[n - 2] / a_prev);
        out.push(v);
    }
}

/// Evaluates the Wigner function on a grid.
pub fn wigner(state: &DickeState, grid: GridSpec, exec: Exec) -> Result<WignerGrid> {
    grid.validate()?;
    let rho = multipoles(state)?;
    let kmax = state.spin().twice() as usize;
    let rule = GaussLegendre::new(NonZeroUsize::new(grid.n_theta).expect("validated"));
    let mut nodes: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    // cos θ descending, so θ increases
    nodes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let theta: Vec<f64> = nodes.iter().map(|&(x, _)| x.acos()).collect();
    let theta_weights: Vec<f64> = nodes.iter().map(|&(_, w)| w).collect();
    let phi: Vec<f64> = (0..grid.n_phi)
        .map(|j| grid.phi_offset + 2.0 * PI * j as f64 / grid.n_phi as f64)
        .collect();
    let rows = map_indexed(exec, grid.n_theta, |i| {
        let (x, sin_t) = (nodes[i].0, theta[i].sin());
        let mut col = Vec::with_capacity(kmax + 1);
        // f_q = Σ_k ρ_kq P̄_k^q(cos θ)
        let f: Vec<Complex64> = (0..=kmax)
            .map(|q| {
                legendre_column(q, kmax, x, sin_t, &mut col);
                col.iter()
                    .enumerate()
                    .map(|(n, &p)| rho[q + n][q] * p)
                    .sum()
            })
            .collect();
        phi.iter()
            .map(|&ph| {
                let mut w = f[0].re;
                for (q, fq) in f.iter().enumerate().skip(1) {
                    w += 2.0 * (*fq * Complex64::from_polar(1.0, q as f64 * ph)).re;
                }
                w
            })
            .collect::<Vec<f64>>()
    });
    Ok(WignerGrid {
        twice_s: state.spin().twice(),
        n_theta: grid.n_theta,
        n_phi: grid.n_phi,
        theta,
        phi,
        theta_weights,
        values: rows.into_iter().flatten().collect(),
    })
}
