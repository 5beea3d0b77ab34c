//! Dense reference computations used only by tests.
//!
//! Nothing here touches the simulator's evolution code: matrix exponentials
//! come from a scaling-and-squaring Taylor series or from a dense Hermitian
//! eigendecomposition, and states are dense vectors.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_state(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= n;
    }
    v
}

pub fn matvec(m: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `exp(-i t H)` by scaling and squaring of a truncated Taylor series.
pub fn expm_i(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let a = h * C64::new(0.0, -t);
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * C64::new(scale, 0.0);
    let n = h.nrows();
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..30 {
        term = &term * &a * C64::new(1.0 / k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `exp(-i t H)` for Hermitian `H` via a dense eigendecomposition.
pub fn expm_i_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = C64::from_polar(1.0, -t * eig.eigenvalues[i]);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Collective spin matrices of a symmetric spin `S = twice/2`, built from
/// the ladder formula independently of the library.
pub fn spin_matrices(twice: u32) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let dim = twice as usize + 1;
    let s = twice as f64 / 2.0;
    let mut sp = DMatrix::<C64>::zeros(dim, dim);
    for i in 1..dim {
        let m = s - i as f64;
        sp[(i - 1, i)] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * C64::new(0.5, 0.0);
    let sy = (&sp - &sm) * C64::new(0.0, -0.5);
    let mut sz = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        sz[(i, i)] = C64::new(s - i as f64, 0.0);
    }
    (sx, sy, sz)
}

/// Single-atom operator `op` on atom `atom` of `n` atoms; bit `atom` of a
/// basis index is 0 for up, 1 for down.
pub fn embed_single(n: usize, atom: usize, op: [[C64; 2]; 2]) -> DMatrix<C64> {
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for col in 0..dim {
        let b = (col >> atom) & 1;
        for (a, row_op) in op.iter().enumerate() {
            let v = row_op[b];
            if v != C64::new(0.0, 0.0) {
                let row = (col & !(1 << atom)) | (a << atom);
                m[(row, col)] += v;
            }
        }
    }
    m
}

/// Total spin components of `n` spin-1/2 atoms in the `2^n` product basis.
pub fn total_spin_full(n: usize) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let h = C64::new(0.5, 0.0);
    let z = C64::new(0.0, 0.0);
    let sx1 = [[z, h], [h, z]];
    let sy1 = [[z, C64::new(0.0, -0.5)], [C64::new(0.0, 0.5), z]];
    let sz1 = [[h, z], [z, -h]];
    let dim = 1usize << n;
    let mut x = DMatrix::<C64>::zeros(dim, dim);
    let mut y = DMatrix::<C64>::zeros(dim, dim);
    let mut zz = DMatrix::<C64>::zeros(dim, dim);
    for a in 0..n {
        x += embed_single(n, a, sx1);
        y += embed_single(n, a, sy1);
        zz += embed_single(n, a, sz1);
    }
    (x, y, zz)
}

/// Symmetric Dicke state `|S = n/2, m>` of `n` atoms in the product basis
/// (`down` = number of down spins = `S - m`).
pub fn dicke_full(n: usize, down: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let mut v = vec![C64::new(0.0, 0.0); dim];
    let mut count = 0usize;
    for (idx, a) in v.iter_mut().enumerate() {
        if (idx as u32).count_ones() as usize == down {
            *a = C64::new(1.0, 0.0);
            count += 1;
        }
    }
    let norm = (count as f64).sqrt();
    for a in &mut v {
        *a /= norm;
    }
    v
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` from the Racah
/// closed-form sum, evaluated with exact factorials in `f64` (small `j`
/// only).
pub fn clebsch_gordan_racah(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    if (m1 + m2 - m).abs() > 1e-9 {
        return 0.0;
    }
    if j < (j1 - j2).abs() - 1e-9 || j > j1 + j2 + 1e-9 {
        return 0.0;
    }
    if m1.abs() > j1 + 1e-9 || m2.abs() > j2 + 1e-9 || m.abs() > j + 1e-9 {
        return 0.0;
    }
    let f = |x: f64| -> f64 {
        let n = x.round() as i64;
        assert!(n >= 0);
        (1..=n).map(|k| k as f64).product::<f64>()
    };
    let pre = ((2.0 * j + 1.0) * f(j + j1 - j2) * f(j - j1 + j2) * f(j1 + j2 - j)
        / f(j1 + j2 + j + 1.0))
    .sqrt()
        * (f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)).sqrt();
    let mut sum = 0.0;
    for k in 0..=((j1 + j2 + j) as i64 + 2) {
        let kf = k as f64;
        let args = [
            kf,
            j1 + j2 - j - kf,
            j1 - m1 - kf,
            j2 + m2 - kf,
            j - j2 + m1 + kf,
            j - j1 - m2 + kf,
        ];
        if args.iter().any(|&a| a < -1e-9) {
            continue;
        }
        let denom: f64 = args.iter().map(|&a| f(a)).product();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    pre * sum
}
