//! Clebsch-Gordan coefficients for fixed `j1, j2`.
//!
//! In each sector of total projection `M` the coupled states are the
//! eigenvectors of the tridiagonal `J²` matrix, which a symmetric eigensolver
//! returns to machine precision even for large spins (where the alternating
//! Racah sum and repeated lowering both lose all digits). Phases follow
//! Condon-Shortley: the highest-weight vector is fixed by its closed form,
//! and each lower `M` is aligned with one application of `J-`.

use nalgebra::{DMatrix, SymmetricEigen};

/// `ln n!` for `n = 0..len`.
fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    out.push(acc);
    for n in 1..len {
        acc += (n as f64).ln();
        out.push(acc);
    }
    out
}

/// Basis of one `M` sector: `m1 = m1_hi - 2a` (twice-valued) for
/// `a = 0..dim`.
#[derive(Debug, Clone)]
struct Sector {
    m1_hi: i64,
    /// Column `c` holds `J = J_min + c` where `J_min = |M|` or
    /// `|j1 - j2|`, whichever is larger.
    jx2_min: i64,
    vectors: DMatrix<f64>,
}

/// All coefficients `<j1 m1; j2 m2 | J M>` for `M >= 0`. Spins and
/// projections are passed as twice their value.
#[derive(Debug, Clone)]
pub struct CgTable {
    j1x2: i64,
    j2x2: i64,
    /// Index `b` holds `Mx2 = j1x2 + j2x2 - 2b`.
    sectors: Vec<Sector>,
}

impl CgTable {
    pub fn new(j1x2: u32, j2x2: u32) -> Self {
        let (a, b) = (j1x2 as i64, j2x2 as i64);
        let lf = ln_factorials((2 * (a + b) + 4) as usize);
        let quarter = |x: i64, y: i64| (x as f64 / 2.0) * (y as f64 / 2.0);
        let top = a + b;
        let mut sectors: Vec<Sector> = Vec::new();
        let mut mx2 = top;
        while mx2 >= 0 {
            let m1_hi = a.min(mx2 + b);
            let m1_lo = (-a).max(mx2 - b);
            let dim = ((m1_hi - m1_lo) / 2 + 1) as usize;
            let jx2_min = mx2.max((a - b).abs());
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                let m1 = m1_hi - 2 * i as i64;
                let m2 = mx2 - m1;
                h[(i, i)] = quarter(a, a + 2) + quarter(b, b + 2) + 2.0 * quarter(m1, m2);
                if i + 1 < dim {
                    // <m1, m2| J1+ J2- |m1 - 1, m2 + 1>
                    let m1l = m1 - 2;
                    let m2l = m2 + 2;
                    let v = (quarter(a - m1l, a + m1l + 2) * quarter(b + m2l, b - m2l + 2)).sqrt();
                    h[(i, i + 1)] = v;
                    h[(i + 1, i)] = v;
                }
            }
            let eig = SymmetricEigen::new(h);
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let mut vectors = DMatrix::<f64>::zeros(dim, dim);
            for (c, &src) in order.iter().enumerate() {
                vectors.set_column(c, &eig.eigenvectors.column(src));
            }
            for c in 0..dim {
                let jx2 = jx2_min + 2 * c as i64;
                let reference: Vec<f64> = if jx2 == mx2 {
                    highest_weight(a, b, jx2, m1_hi, dim, &lf)
                } else {
                    let prev: &Sector = sectors.last().expect("higher sector exists");
                    lower_once(a, b, mx2 + 2, prev, jx2, m1_hi, dim)
                };
                let dot: f64 = (0..dim).map(|i| vectors[(i, c)] * reference[i]).sum();
                if dot < 0.0 {
                    vectors.column_mut(c).neg_mut();
                }
            }
            sectors.push(Sector {
                m1_hi,
                jx2_min,
                vectors,
            });
            mx2 -= 2;
        }
        Self {
            j1x2: a,
            j2x2: b,
            sectors,
        }
    }

    /// `<j1 m1; j2 m2 | J M>` with twice-valued arguments; zero outside the
    /// selection rules.
    pub fn get(&self, jx2: u32, m1x2: i64, m2x2: i64) -> f64 {
        let (a, b, c) = (self.j1x2, self.j2x2, jx2 as i64);
        let mx2 = m1x2 + m2x2;
        if m1x2.abs() > a
            || m2x2.abs() > b
            || mx2.abs() > c
            || (a - m1x2) % 2 != 0
            || (b - m2x2) % 2 != 0
            || c < (a - b).abs()
            || c > a + b
            || (a + b - c) % 2 != 0
        {
            return 0.0;
        }
        if mx2 < 0 {
            // <j1 m1; j2 m2|J M> = (-1)^{j1+j2-J} <j1 -m1; j2 -m2|J -M>
            let sign = if ((a + b - c) / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            return sign * self.get(jx2, -m1x2, -m2x2);
        }
        let s = &self.sectors[((a + b - mx2) / 2) as usize];
        s.vectors[(
            ((s.m1_hi - m1x2) / 2) as usize,
            ((c - s.jx2_min) / 2) as usize,
        )]
    }

    /// Coefficients for one `(J, M)` with `M >= 0`, indexed by `a` where
    /// `m1 = j1 - a`; entries outside the sector are zero.
    pub fn column(&self, jx2: u32, mx2: i64) -> Vec<f64> {
        let len = (self.j1x2 + 1) as usize;
        (0..len)
            .map(|i| {
                let m1 = self.j1x2 - 2 * i as i64;
                self.get(jx2, m1, mx2 - m1)
            })
            .collect()
    }
}

/// Closed form of `<j1 m1; j2 J-m1 | J J>` over the sector basis.
fn highest_weight(a: i64, b: i64, c: i64, m1_hi: i64, dim: usize, lf: &[f64]) -> Vec<f64> {
    let half = |x: i64| (x / 2) as usize;
    let pre = 0.5
        * (lf[(c + 1) as usize] + lf[half(a + b - c)]
            - lf[half(a + b + c) + 1]
            - lf[half(a - b + c)]
            - lf[half(-a + b + c)]);
    (0..dim)
        .map(|i| {
            let m1 = m1_hi - 2 * i as i64;
            let m2 = c - m1;
            let l = pre
                + 0.5 * (lf[half(a + m1)] + lf[half(b + m2)] - lf[half(a - m1)] - lf[half(b - m2)]);
            let sign = if half(a - m1) % 2 == 0 { 1.0 } else { -1.0 };
            sign * l.exp()
        })
        .collect()
}

/// `J- |J, M+1>` expressed in the basis of sector `M` (unnormalised).
fn lower_once(
    a: i64,
    b: i64,
    mx2_prev: i64,
    prev: &Sector,
    jx2: i64,
    m1_hi: i64,
    dim: usize,
) -> Vec<f64> {
    let col = ((jx2 - prev.jx2_min) / 2) as usize;
    let prev_dim = prev.vectors.nrows();
    let coef = |m1: i64| -> f64 {
        let k = prev.m1_hi - m1;
        if k < 0 || k % 2 != 0 || (k / 2) as usize >= prev_dim {
            return 0.0;
        }
        prev.vectors[((k / 2) as usize, col)]
    };
    let q = |x: i64, y: i64| (x as f64 / 2.0) * (y as f64 / 2.0);
    (0..dim)
        .map(|i| {
            let m1 = m1_hi - 2 * i as i64;
            let m2 = mx2_prev - 2 - m1;
            let mut v = 0.0;
            let up1 = m1 + 2;
            if up1 <= a {
                v += coef(up1) * q(a + up1, a - up1 + 2).sqrt();
            }
            let up2 = m2 + 2;
            if up2 <= b {
                v += coef(m1) * q(b + up2, b - up2 + 2).sqrt();
            }
            v
        })
        .collect()
}

/// Single coefficient `<j1 m1; j2 m2 | J M>` (twice-valued arguments).
pub fn clebsch_gordan(j1x2: u32, m1x2: i64, j2x2: u32, m2x2: i64, jx2: u32, mx2: i64) -> f64 {
    if m1x2 + m2x2 != mx2 {
        return 0.0;
    }
    CgTable::new(j1x2, j2x2).get(jx2, m1x2, m2x2)
}
