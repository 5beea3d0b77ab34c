//! Hilbert space of `N` atoms after `n` of them have scattered a photon:
//! a Dicke sector of the `N - n` untouched atoms times `n` explicit
//! spin-1/2 factors.
//!
//! Amplitude index `bits * (N - n + 1) + i_c`, where `i_c` indexes the
//! collective sector and bit `j` of `bits` is tracked atom `j`. In the `Z`
//! basis `i_c` is the Dicke index (`m = S_c - i_c`) and bit 0 means up; in
//! the `X` basis `i_c` indexes `S_x` eigenvalues `S_c - i_c` and bit 0 means
//! `s_x = +1/2`.

use std::sync::Arc;

use crate::model::Rotation;
use crate::spin::{inner, ln_binomial, Axis, CollectiveOps, SpinQuantum, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridLayout {
    pub atoms: usize,
    pub tracked: usize,
}

impl HybridLayout {
    pub fn collective_twice(&self) -> u32 {
        (self.atoms - self.tracked) as u32
    }

    pub fn collective_dim(&self) -> usize {
        self.atoms - self.tracked + 1
    }

    /// `(N - n + 1) 2^n`.
    pub fn dim(&self) -> usize {
        self.collective_dim() << self.tracked
    }

    /// Eigenvalue of the total spin component along the basis axis for
    /// amplitude `idx`.
    pub fn total_m(&self, idx: usize) -> f64 {
        let dc = self.collective_dim();
        let (bits, ic) = (idx / dc, idx % dc);
        let half_sc = self.collective_twice() as f64 / 2.0;
        let down = bits.count_ones() as f64;
        half_sc - ic as f64 + 0.5 * self.tracked as f64 - down
    }

    /// `2M + N`, an integer in `0..=2N`.
    pub fn twice_m_shifted(&self, idx: usize) -> usize {
        let dc = self.collective_dim();
        let (bits, ic) = (idx / dc, idx % dc);
        // 2M = (N - n) - 2 ic + n - 2 down
        2 * self.atoms - 2 * ic - 2 * bits.count_ones() as usize
    }
}

/// Collective operators for each collective sector size reachable with the
/// photon budget, shared by all trajectories.
#[derive(Debug, Clone)]
pub struct SpinLadder {
    ops: Vec<Arc<CollectiveOps>>,
}

impl SpinLadder {
    pub fn new(atoms: usize, max_tracked: usize, top: Option<Arc<CollectiveOps>>) -> Self {
        let max_tracked = max_tracked.min(atoms);
        let ops = (0..=max_tracked)
            .map(|n| match (&top, n) {
                (Some(t), 0) => Arc::clone(t),
                _ => Arc::new(CollectiveOps::new(SpinQuantum::from_twice(
                    (atoms - n) as u32,
                ))),
            })
            .collect();
        Self { ops }
    }

    pub fn max_tracked(&self) -> usize {
        self.ops.len() - 1
    }

    pub fn get(&self, tracked: usize) -> &CollectiveOps {
        &self.ops[tracked]
    }
}

/// One or more system branches sharing a layout; jumps act on all branches
/// at once.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    layout: HybridLayout,
    basis: Basis,
    branches: Vec<Vec<C64>>,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn single_rotation(axis: Axis, angle: f64) -> [[C64; 2]; 2] {
    let (s, c) = (0.5 * angle).sin_cos();
    let z = C64::new(0.0, 0.0);
    let cc = C64::new(c, 0.0);
    let mis = C64::new(0.0, -s);
    match axis {
        Axis::X => [[cc, mis], [mis, cc]],
        Axis::Y => [[cc, C64::new(-s, 0.0)], [C64::new(s, 0.0), cc]],
        Axis::Z => [
            [C64::from_polar(1.0, -0.5 * angle), z],
            [z, C64::from_polar(1.0, 0.5 * angle)],
        ],
    }
}

impl HybridState {
    /// Symmetric states of `atoms` atoms given as Dicke amplitudes.
    pub fn from_dicke(atoms: usize, branches: Vec<Vec<C64>>) -> Self {
        let layout = HybridLayout { atoms, tracked: 0 };
        debug_assert!(branches.iter().all(|b| b.len() == layout.dim()));
        Self {
            layout,
            basis: Basis::Z,
            branches,
        }
    }

    pub fn layout(&self) -> HybridLayout {
        self.layout
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn branch(&self, i: usize) -> &[C64] {
        &self.branches[i]
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Joint squared norm `sum_b ||b||^2 / n_branches`.
    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self.branches.iter().flatten().map(|a| a.norm_sqr()).sum();
        s / self.branches.len() as f64
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm_sqr();
        if n > 0.0 {
            let f = 1.0 / n.sqrt();
            for a in self.branches.iter_mut().flatten() {
                *a *= f;
            }
        }
        n
    }

    /// `<b_i | b_j>`.
    pub fn overlap(&self, i: usize, j: usize) -> C64 {
        inner(&self.branches[i], &self.branches[j])
    }

    fn hadamard_all(&mut self) {
        let dc = self.layout.collective_dim();
        let dim = self.layout.dim();
        for j in 0..self.layout.tracked {
            let stride = dc << j;
            for b in &mut self.branches {
                for idx in 0..dim {
                    if (idx / dc) & (1 << j) == 0 {
                        let (u, d) = (b[idx], b[idx + stride]);
                        b[idx] = (u + d) * FRAC_1_SQRT_2;
                        b[idx + stride] = (u - d) * FRAC_1_SQRT_2;
                    }
                }
            }
        }
    }

    pub fn to_basis(&mut self, ladder: &SpinLadder, basis: Basis) {
        if basis == self.basis {
            return;
        }
        let ops = ladder.get(self.layout.tracked);
        let dc = self.layout.collective_dim();
        let mut tmp = vec![C64::new(0.0, 0.0); dc];
        for b in &mut self.branches {
            for block in b.chunks_mut(dc) {
                match basis {
                    Basis::X => ops.to_x_basis(block, &mut tmp),
                    Basis::Z => ops.from_x_basis(block, &mut tmp),
                }
                block.copy_from_slice(&tmp);
            }
        }
        self.hadamard_all();
        self.basis = basis;
    }

    /// Applies `m` (in the up/down basis) to tracked atom `j` of every
    /// branch. Requires the `Z` basis.
    pub fn apply_qubit(&mut self, j: usize, m: [[C64; 2]; 2], only: Option<usize>) {
        assert_eq!(self.basis, Basis::Z);
        let dc = self.layout.collective_dim();
        let stride = dc << j;
        let dim = self.layout.dim();
        for (bi, b) in self.branches.iter_mut().enumerate() {
            if only.is_some_and(|o| o != bi) {
                continue;
            }
            for idx in 0..dim {
                if (idx / dc) & (1 << j) == 0 {
                    let (u, d) = (b[idx], b[idx + stride]);
                    b[idx] = m[0][0] * u + m[0][1] * d;
                    b[idx + stride] = m[1][0] * u + m[1][1] * d;
                }
            }
        }
    }

    /// Global rotation `e^{-i angle S_axis}` on one branch or on all.
    pub fn rotate(&mut self, ladder: &SpinLadder, r: Rotation, only: Option<usize>) {
        if r.angle == 0.0 {
            return;
        }
        self.to_basis(ladder, Basis::Z);
        let ops = ladder.get(self.layout.tracked);
        let dc = self.layout.collective_dim();
        for (bi, b) in self.branches.iter_mut().enumerate() {
            if only.is_some_and(|o| o != bi) {
                continue;
            }
            for block in b.chunks_mut(dc) {
                ops.rotate_amplitudes(block, r.axis, r.angle);
            }
        }
        let m = single_rotation(r.axis, r.angle);
        for j in 0..self.layout.tracked {
            self.apply_qubit(j, m, only);
        }
    }

    /// Multiplies every amplitude by `f(M)`, `M` the total `S_x`
    /// eigenvalue. Requires the `X` basis.
    pub fn apply_x_diagonal<F: Fn(f64) -> C64>(&mut self, f: F) {
        assert_eq!(self.basis, Basis::X);
        let layout = self.layout;
        let dim = layout.dim();
        let factors: Vec<C64> = (0..dim).map(|i| f(layout.total_m(i))).collect();
        for b in &mut self.branches {
            for (a, &c) in b.iter_mut().zip(&factors) {
                *a *= c;
            }
        }
    }

    /// Joint weight of each `S_x` eigenvalue, indexed by `2M + N`.
    pub fn x_weights(&self) -> Vec<f64> {
        assert_eq!(self.basis, Basis::X);
        let mut w = vec![0.0; 2 * self.layout.atoms + 1];
        let nb = self.branches.len() as f64;
        for b in &self.branches {
            for (i, a) in b.iter().enumerate() {
                w[self.layout.twice_m_shifted(i)] += a.norm_sqr() / nb;
            }
        }
        w
    }

    /// Joint populations `(up, down)` of tracked atom `j`.
    pub fn qubit_populations(&self, j: usize) -> (f64, f64) {
        assert_eq!(self.basis, Basis::Z);
        let dc = self.layout.collective_dim();
        let nb = self.branches.len() as f64;
        let (mut up, mut down) = (0.0, 0.0);
        for b in &self.branches {
            for (i, a) in b.iter().enumerate() {
                if (i / dc) & (1 << j) == 0 {
                    up += a.norm_sqr();
                } else {
                    down += a.norm_sqr();
                }
            }
        }
        (up / nb, down / nb)
    }

    /// Singles out one untouched atom as tracked atom `n` using
    /// `|S,m> = sqrt((S+m)/2S) |S-1/2, m-1/2>|up> + sqrt((S-m)/2S) |S-1/2, m+1/2>|down>`.
    /// Requires the `Z` basis and at least one untouched atom.
    pub fn promote(&mut self) {
        assert_eq!(self.basis, Basis::Z);
        assert!(self.layout.tracked < self.layout.atoms);
        let old = self.layout;
        let new = HybridLayout {
            atoms: old.atoms,
            tracked: old.tracked + 1,
        };
        let (dc, dn) = (old.collective_dim(), new.collective_dim());
        let twice = old.collective_twice() as f64;
        let top = 1usize << old.tracked;
        for b in &mut self.branches {
            let mut out = vec![C64::new(0.0, 0.0); new.dim()];
            for (idx, &a) in b.iter().enumerate() {
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let (bits, ic) = (idx / dc, idx % dc);
                // S + m = 2S - ic, S - m = ic
                let c_up = ((twice - ic as f64) / twice).sqrt();
                let c_down = (ic as f64 / twice).sqrt();
                if ic < dn {
                    out[bits * dn + ic] += a * c_up;
                }
                if ic > 0 {
                    out[(bits + top) * dn + ic - 1] += a * c_down;
                }
            }
            *b = out;
        }
        self.layout = new;
    }

    /// Embeds branch `i` into the `2^N` product basis (bit `a` of the
    /// index is 1 when atom `a` is down; tracked atom `j` is atom `j`).
    pub fn to_full(&self, ladder: &SpinLadder, i: usize) -> Vec<C64> {
        let mut s = self.clone();
        s.to_basis(ladder, Basis::Z);
        let l = s.layout;
        let rest = l.atoms - l.tracked;
        let dc = l.collective_dim();
        let mut out = vec![C64::new(0.0, 0.0); 1 << l.atoms];
        for (idx, &a) in s.branches[i].iter().enumerate() {
            let (bits, ic) = (idx / dc, idx % dc);
            let norm = (-0.5 * ln_binomial(rest as u64, ic as u64)).exp();
            for pattern in 0..(1usize << rest) {
                if pattern.count_ones() as usize == ic {
                    out[bits | (pattern << l.tracked)] += a * norm;
                }
            }
        }
        out
    }
}

/// Symmetric Dicke amplitudes as a `2^N` product-basis vector.
pub fn to_full_dicke(atoms: usize, amps: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); 1 << atoms];
    for (idx, o) in out.iter_mut().enumerate() {
        let down = idx.count_ones() as usize;
        let norm = (-0.5 * ln_binomial(atoms as u64, down as u64)).exp();
        *o = amps[down] * norm;
    }
    out
}

#[cfg(test)]
use crate::oracle;

#[cfg(test)]
mod tests {
    use super::oracle;
    use super::*;
    use crate::open::params::Channel;

    fn ladder(n: usize) -> SpinLadder {
        SpinLadder::new(n, n, None)
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn random_hybrid(n: usize, promotions: usize, seed: u64) -> (SpinLadder, HybridState) {
        let l = ladder(n);
        let psi = oracle::random_state(n + 1, seed);
        let mut s = HybridState::from_dicke(n, vec![psi]);
        for k in 0..promotions {
            s.promote();
            let r = Rotation::new(Axis::Y, 0.3 + k as f64);
            s.apply_qubit(k, single_rotation(r.axis, 0.7 * r.angle), None);
        }
        (l, s)
    }

    #[test]
    fn dimension_bookkeeping() {
        let (_, s) = random_hybrid(7, 3, 1);
        assert_eq!(s.layout().dim(), (7 - 3 + 1) * 8);
        assert_eq!(s.branch(0).len(), s.layout().dim());
    }

    #[test]
    fn promotion_preserves_full_state() {
        let n = 6;
        let l = ladder(n);
        let psi = oracle::random_state(n + 1, 7);
        let mut s = HybridState::from_dicke(n, vec![psi.clone()]);
        let full = to_full_dicke(n, &psi);
        assert!(max_diff(&s.to_full(&l, 0), &full) < 1e-12);
        for _ in 0..4 {
            s.promote();
            assert!(max_diff(&s.to_full(&l, 0), &full) < 1e-12);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_flip_from_all_up() {
        // N = 4 from |2, 2>: after promoting one atom and flipping it down
        // the tracked factor is |down> and the collective part |3/2, 3/2>
        let l = ladder(4);
        let mut psi = vec![c(0.0); 5];
        psi[0] = c(1.0);
        let mut s = HybridState::from_dicke(4, vec![psi]);
        s.promote();
        let m = Channel::SpFlipDown.single_atom_matrix().unwrap();
        s.apply_qubit(0, m.map(|r| r.map(c)), None);
        let norm = s.normalize();
        assert!((norm - 1.0).abs() < 1e-12);
        let dc = s.layout().collective_dim();
        assert_eq!(dc, 4);
        assert!((s.branch(0)[dc] - 1.0).norm() < 1e-12);
        // full-space check: sigma^- on atom 0 of |up up up up>
        let mut expect = vec![c(0.0); 16];
        expect[1] = c(1.0);
        assert!(max_diff(&s.to_full(&l, 0), &expect) < 1e-12);
    }

    #[test]
    fn rotations_and_basis_change_match_full_space() {
        let n = 5;
        let (l, mut s) = random_hybrid(n, 3, 3);
        let before = s.to_full(&l, 0);
        let (sx, sy, sz) = oracle::total_spin_full(n);
        for (axis, gen) in [(Axis::X, &sx), (Axis::Y, &sy), (Axis::Z, &sz)] {
            let u = oracle::expm_i(gen, 0.83);
            let expect = oracle::matvec(&u, &before);
            let mut t = s.clone();
            t.rotate(&l, Rotation::new(axis, 0.83), None);
            assert!(max_diff(&t.to_full(&l, 0), &expect) < 1e-10, "{axis:?}");
        }
        // S_x diagonal in the X basis
        let expect = oracle::matvec(&sx, &before);
        s.to_basis(&l, Basis::X);
        s.apply_x_diagonal(c);
        assert!(max_diff(&s.to_full(&l, 0), &expect) < 1e-10);
    }

    #[test]
    fn x_weights_match_full_space_sx_distribution() {
        let n = 5;
        let (l, mut s) = random_hybrid(n, 3, 11);
        let full = s.to_full(&l, 0);
        let (sx, _, _) = oracle::total_spin_full(n);
        s.to_basis(&l, Basis::X);
        let w = s.x_weights();
        let mut sx2 = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let m = (i as f64 - n as f64) / 2.0;
            sx2 += wi * m * m;
        }
        let v = oracle::matvec(&sx, &full);
        let expect: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        assert!(
            (sx2 - expect).abs() < 1e-10,
            "{sx2} {expect} {}",
            s.norm_sqr()
        );
    }

    #[test]
    fn qubit_populations_sum_to_norm() {
        let (_, s) = random_hybrid(6, 2, 5);
        for j in 0..2 {
            let (u, d) = s.qubit_populations(j);
            assert!((u + d - s.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_tracked_small_system() {
        let n = 3;
        let l = ladder(n);
        let psi = oracle::random_state(n + 1, 2);
        let full = to_full_dicke(n, &psi);
        let mut s = HybridState::from_dicke(n, vec![psi]);
        for _ in 0..n {
            s.promote();
        }
        assert_eq!(s.layout().collective_dim(), 1);
        assert!(max_diff(&s.to_full(&l, 0), &full) < 1e-12);
    }
}
