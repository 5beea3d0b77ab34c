//! Collective spin algebra in the Dicke basis.
//!
//! States of a spin `S` are amplitude vectors over `|S, m>` ordered
//! `m = S, S-1, ..., -S` (index `i` holds `m = S - i`). Rotations about `x`
//! and `y` and the `S_x^2` twisting go through a cached eigenbasis of `S_x`,
//! so each application costs `O(dim^2)` and is exactly unitary up to
//! rounding.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Spin magnitude `S`, stored as the integer `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpinQuantum {
    twice: u32,
}

impl SpinQuantum {
    /// Validates `s` as a non-negative half-integer.
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || s < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(s));
        }
        Ok(Self {
            twice: twice.round() as u32,
        })
    }

    pub const fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    /// Total spin of the symmetric sector of `n` spin-1/2 atoms.
    pub const fn from_atoms(n: usize) -> Self {
        Self { twice: n as u32 }
    }

    pub fn s(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `i`.
    pub fn m(self, i: usize) -> f64 {
        self.s() - i as f64
    }
}

impl fmt::Display for SpinQuantum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Rotation / generator axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pure state of the symmetric (Dicke) sector.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    spin: SpinQuantum,
    amps: Vec<C64>,
}

impl DickeState {
    pub fn from_amplitudes(spin: SpinQuantum, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != spin.dim() {
            return Err(Error::DimensionMismatch {
                got: amps.len(),
                expected: spin.dim(),
            });
        }
        Ok(Self { spin, amps })
    }

    /// `|S, m>` for basis index `i` (`m = S - i`).
    pub fn basis(spin: SpinQuantum, i: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); spin.dim()];
        amps[i] = C64::new(1.0, 0.0);
        Self { spin, amps }
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &DickeState) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn scale(&mut self, factor: C64) {
        for a in &mut self.amps {
            *a *= factor;
        }
    }
}

pub fn inner(bra: &[C64], ket: &[C64]) -> C64 {
    debug_assert_eq!(bra.len(), ket.len());
    bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Spin coherent state `e^{-i phi S_z} e^{-i theta S_y} |S, S>` pointing
/// along polar angle `theta` and azimuth `phi`.
pub fn coherent_state(spin: SpinQuantum, theta: f64, phi: f64) -> DickeState {
    let twice = spin.twice() as i64;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let amps = (0..spin.dim())
        .map(|i| {
            // i = number of lowered spins = S - m
            let up = (twice - i as i64) as i32;
            let down = i as i32;
            let mag = ln_binomial(twice as u64, i as u64) * 0.5;
            let magnitude = power_times(mag, c, up) * power_sign(s, down);
            let m = spin.m(i);
            C64::from_polar(magnitude, -m * phi)
        })
        .collect();
    DickeState { spin, amps }
}

// exp(ln_prefactor) * |base|^exp * sign(base)^exp, with 0^0 = 1
fn power_times(ln_prefactor: f64, base: f64, exp: i32) -> f64 {
    if exp == 0 {
        return ln_prefactor.exp();
    }
    if base == 0.0 {
        return 0.0;
    }
    let sign = if base < 0.0 && exp % 2 == 1 {
        -1.0
    } else {
        1.0
    };
    sign * (ln_prefactor + exp as f64 * base.abs().ln()).exp()
}

fn power_sign(base: f64, exp: i32) -> f64 {
    if exp == 0 {
        1.0
    } else if base == 0.0 {
        0.0
    } else {
        let sign = if base < 0.0 && exp % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        sign * (exp as f64 * base.abs().ln()).exp()
    }
}

pub(crate) fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Collective operators `S_x, S_y, S_z` for one spin, plus the cached
/// `S_x` eigenbasis.
///
/// Immutable after construction; share it behind an `Arc` across workers.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    spin: SpinQuantum,
    /// `raise[i] = <m_{i-1}| S_+ |m_i>` for `i >= 1`; `raise[0] = 0`.
    raise: Vec<f64>,
    /// Row-major `dim x dim`; column `j` is the `S_x` eigenvector with
    /// eigenvalue `S - j`.
    x_basis: Vec<f64>,
}

/// Validating constructor: rejects negative, non-half-integer, and `S = 0`.
pub fn make_collective_ops(s: f64) -> Result<CollectiveOps> {
    let spin = SpinQuantum::new(s)?;
    if spin.twice() == 0 {
        return Err(Error::InvalidSpin(s));
    }
    Ok(CollectiveOps::new(spin))
}

impl CollectiveOps {
    /// Builds the operator tables. `S = 0` is accepted (a one-dimensional
    /// sector, used when every atom of an ensemble is tracked separately).
    pub fn new(spin: SpinQuantum) -> Self {
        let dim = spin.dim();
        let s = spin.s();
        let raise: Vec<f64> = (0..dim)
            .map(|i| {
                if i == 0 {
                    0.0
                } else {
                    let m = spin.m(i);
                    (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
                }
            })
            .collect();

        let mut sx = DMatrix::<f64>::zeros(dim, dim);
        for i in 1..dim {
            sx[(i - 1, i)] = raise[i] / 2.0;
            sx[(i, i - 1)] = raise[i] / 2.0;
        }
        let x_basis = if dim == 1 {
            vec![1.0]
        } else {
            let eig = SymmetricEigen::new(sx);
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let mut basis = vec![0.0; dim * dim];
            for (j, &col) in order.iter().enumerate() {
                // fix the arbitrary sign: component along |S,S> is positive
                let sign = if eig.eigenvectors[(0, col)] < 0.0 {
                    -1.0
                } else {
                    1.0
                };
                for i in 0..dim {
                    basis[i * dim + j] = sign * eig.eigenvectors[(i, col)];
                }
            }
            basis
        };
        Self {
            spin,
            raise,
            x_basis,
        }
    }

    pub fn spin(&self) -> SpinQuantum {
        self.spin
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// `<m_{i-1}| S_+ |m_i>` (zero for `i = 0`).
    pub fn raising_element(&self, i: usize) -> f64 {
        self.raise[i]
    }

    /// Dense `S_x`, `S_y`, `S_z` in the Dicke basis.
    pub fn matrix(&self, axis: Axis) -> DMatrix<C64> {
        let dim = self.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        match axis {
            Axis::Z => {
                for i in 0..dim {
                    m[(i, i)] = C64::new(self.spin.m(i), 0.0);
                }
            }
            Axis::X => {
                for i in 1..dim {
                    let v = C64::new(self.raise[i] / 2.0, 0.0);
                    m[(i - 1, i)] = v;
                    m[(i, i - 1)] = v;
                }
            }
            Axis::Y => {
                // S_y = (S_+ - S_-) / 2i
                for i in 1..dim {
                    let v = self.raise[i] / 2.0;
                    m[(i - 1, i)] = C64::new(0.0, -v);
                    m[(i, i - 1)] = C64::new(0.0, v);
                }
            }
        }
        m
    }

    /// Row-major `S_x` eigenvector table (column `j` has eigenvalue `S - j`).
    pub fn x_eigenbasis(&self) -> &[f64] {
        &self.x_basis
    }

    /// In-place `out = S_axis * v`.
    pub fn apply_generator(&self, axis: Axis, v: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        debug_assert_eq!(v.len(), dim);
        match axis {
            Axis::Z => {
                for i in 0..dim {
                    out[i] = v[i] * self.spin.m(i);
                }
            }
            Axis::X | Axis::Y => {
                // (S_+ v)_{i-1} = raise[i] v_i ; (S_- v)_{i} = raise[i] v_{i-1}
                // S_x = (S_+ + S_-)/2, S_y = (S_+ - S_-)/2i
                let (c_up, c_down) = match axis {
                    Axis::X => (C64::new(0.5, 0.0), C64::new(0.5, 0.0)),
                    _ => (-I * 0.5, I * 0.5),
                };
                for o in out.iter_mut() {
                    *o = C64::new(0.0, 0.0);
                }
                for i in 1..dim {
                    let r = self.raise[i];
                    out[i - 1] += c_up * r * v[i];
                    out[i] += c_down * r * v[i - 1];
                }
            }
        }
    }

    pub fn generator(&self, axis: Axis, state: &DickeState) -> DickeState {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_generator(axis, &state.amps, &mut out);
        DickeState {
            spin: self.spin,
            amps: out,
        }
    }

    /// `<psi| S_axis |psi>` (not divided by the norm).
    pub fn expectation(&self, axis: Axis, state: &DickeState) -> f64 {
        let out = self.generator(axis, state);
        inner(&state.amps, &out.amps).re
    }

    /// Transforms Dicke-basis amplitudes into the `S_x` eigenbasis.
    pub fn to_x_basis(&self, v: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        for o in out.iter_mut() {
            *o = C64::new(0.0, 0.0);
        }
        for (i, &a) in v.iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let row = &self.x_basis[i * dim..(i + 1) * dim];
            for (o, &x) in out.iter_mut().zip(row) {
                *o += a * x;
            }
        }
    }

    /// Inverse of [`to_x_basis`](Self::to_x_basis).
    pub fn from_x_basis(&self, c: &[C64], out: &mut [C64]) {
        let dim = self.dim();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.x_basis[i * dim..(i + 1) * dim];
            let mut acc = C64::new(0.0, 0.0);
            for (&x, &cj) in row.iter().zip(c) {
                acc += cj * x;
            }
            *o = acc;
        }
    }

    /// Multiplies each `S_x` eigencomponent `j` by `phase(m_j)`.
    pub fn apply_x_diagonal<F: Fn(f64) -> C64>(&self, v: &mut [C64], phase: F) {
        let mut c = vec![C64::new(0.0, 0.0); self.dim()];
        self.to_x_basis(v, &mut c);
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= phase(self.spin.m(j));
        }
        self.from_x_basis(&c, v);
    }

    /// `v <- e^{-i angle S_axis} v`.
    pub fn rotate_amplitudes(&self, v: &mut [C64], axis: Axis, angle: f64) {
        if angle == 0.0 {
            return;
        }
        match axis {
            Axis::Z => self.rotate_z(v, angle),
            Axis::X => self.apply_x_diagonal(v, |m| C64::from_polar(1.0, -angle * m)),
            Axis::Y => {
                // e^{-i a S_y} = R_z(pi/2) e^{-i a S_x} R_z(-pi/2)
                let half_pi = std::f64::consts::FRAC_PI_2;
                self.rotate_z(v, -half_pi);
                self.apply_x_diagonal(v, |m| C64::from_polar(1.0, -angle * m));
                self.rotate_z(v, half_pi);
            }
        }
    }

    fn rotate_z(&self, v: &mut [C64], angle: f64) {
        for (i, a) in v.iter_mut().enumerate() {
            *a *= C64::from_polar(1.0, -angle * self.spin.m(i));
        }
    }

    /// `e^{-i angle S_axis} |state>`.
    pub fn rotate(&self, state: &mut DickeState, axis: Axis, angle: f64) {
        self.rotate_amplitudes(&mut state.amps, axis, angle);
    }

    /// `v <- e^{-i strength S_x^2} v`; `strength = chi * t`.
    pub fn twist_amplitudes(&self, v: &mut [C64], strength: f64) {
        if strength == 0.0 {
            return;
        }
        self.apply_x_diagonal(v, |m| C64::from_polar(1.0, -strength * m * m));
    }

    pub fn evolve_twisting(&self, state: &mut DickeState, strength: f64) {
        self.twist_amplitudes(&mut state.amps, strength);
    }

    /// One Floquet period `e^{-i k S_x^2 / 2S} e^{-i p S_z}`: the
    /// `z`-rotation by `p` followed by the twist with `chi t = k / 2S`.
    pub fn kicked_top_step(&self, state: &mut DickeState, k: f64, p: f64) {
        self.kick_amplitudes(&mut state.amps, k, p);
    }

    pub fn kick_amplitudes(&self, v: &mut [C64], k: f64, p: f64) {
        self.rotate_amplitudes(v, Axis::Z, p);
        self.twist_amplitudes(v, self.kick_twist_strength(k));
    }

    /// Inverse Floquet period: twist with `-k/2S`, then rotate by `-p`.
    pub fn inverse_kick_amplitudes(&self, v: &mut [C64], k: f64, p: f64) {
        self.twist_amplitudes(v, -self.kick_twist_strength(k));
        self.rotate_amplitudes(v, Axis::Z, -p);
    }

    /// `chi t` of the twist in one kick, `k / (2S)`.
    pub fn kick_twist_strength(&self, k: f64) -> f64 {
        if self.spin.twice() == 0 {
            0.0
        } else {
            k / self.spin.twice() as f64
        }
    }
}

#[cfg(test)]
use crate::oracle;
