//! Exact Lindblad evolution of the interferometer for a few atoms.
//!
//! The readout `<X_C> + i<Y_C>` equals `Tr X` for the off-diagonal block
//! `X = |b1><b0|` of the control-system density matrix, which evolves under
//! the system Lindbladian because the control qubit is never dissipated.
//! `X` is stored as a dense `2^N x 2^N` matrix. During the torsion it is
//! held in the product `S_x` basis, where the Hamiltonian and cavity parts
//! act elementwise as
//! `X_ab -> X_ab exp(-i s chi (M_a^2 - M_b^2) t - gamma/2 (M_a - M_b)^2 t)`.
//! The spontaneous part sums to `2 mu sum_i (tau_i - id)` with
//! `tau_i(X) = I/2 (x) Tr_i X`, integrated with a fourth-order
//! integrating-factor Runge-Kutta scheme. The step count per torsion is
//! doubled until two successive results agree to `1e-8`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dynamics, ModelSpec, Rotation};
use crate::protocols::{Protocol, ProtocolSpec};
use crate::spin::{Axis, C64};

use super::hybrid::to_full_dicke;
use super::params::Rates;

pub const MAX_ORACLE_ATOMS: usize = 8;

const TOLERANCE: f64 = 1e-8;
const MAX_STEPS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSeries {
    pub times: Vec<f64>,
    pub f: Vec<C64>,
    pub g: Vec<C64>,
    /// Largest `|Tr rho - 1|` seen for the branch-0 density matrix.
    pub max_trace_error: f64,
    /// Integration steps per torsion that passed the halving check.
    pub steps: usize,
    /// Largest change between the accepted run and the run with half as
    /// many steps.
    pub halving_change: f64,
}

/// Dense square operator on `nq` qubits, row-major.
#[derive(Debug, Clone)]
struct Op {
    nq: usize,
    a: Vec<C64>,
}

fn single_qubit(axis: Axis, angle: f64) -> [[C64; 2]; 2] {
    // exp(-i angle sigma/2) with rows/columns (up, down)
    let (s, c) = (0.5 * angle).sin_cos();
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let sigma = match axis {
        Axis::X => [[zero, one], [one, zero]],
        Axis::Y => [[zero, -i], [i, zero]],
        Axis::Z => [[one, zero], [zero, -one]],
    };
    let mut u = [[zero; 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { c } else { 0.0 };
            u[r][k] = C64::new(id, 0.0) - i * s * sigma[r][k];
        }
    }
    u
}

impl Op {
    fn dim(&self) -> usize {
        1 << self.nq
    }

    fn outer(ket: &[C64], bra: &[C64]) -> Self {
        let d = ket.len();
        let nq = d.trailing_zeros() as usize;
        let mut a = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                a[r * d + c] = ket[r] * bra[c].conj();
            }
        }
        Self { nq, a }
    }

    fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.a[i * d + i]).sum()
    }

    /// `X <- u_q X`.
    fn left(&mut self, q: usize, u: &[[C64; 2]; 2]) {
        let d = self.dim();
        let bit = 1 << q;
        for r in 0..d {
            if r & bit != 0 {
                continue;
            }
            for c in 0..d {
                let (x0, x1) = (self.a[r * d + c], self.a[(r | bit) * d + c]);
                self.a[r * d + c] = u[0][0] * x0 + u[0][1] * x1;
                self.a[(r | bit) * d + c] = u[1][0] * x0 + u[1][1] * x1;
            }
        }
    }

    /// `X <- X u_q^dag`.
    fn right_dag(&mut self, q: usize, u: &[[C64; 2]; 2]) {
        let d = self.dim();
        let bit = 1 << q;
        for r in 0..d {
            let row = &mut self.a[r * d..(r + 1) * d];
            for c in 0..d {
                if c & bit != 0 {
                    continue;
                }
                let (x0, x1) = (row[c], row[c | bit]);
                row[c] = x0 * u[0][0].conj() + x1 * u[0][1].conj();
                row[c | bit] = x0 * u[1][0].conj() + x1 * u[1][1].conj();
            }
        }
    }

    fn rotate_left(&mut self, r: Rotation) {
        let u = single_qubit(r.axis, r.angle);
        for q in 0..self.nq {
            self.left(q, &u);
        }
    }

    fn rotate_right(&mut self, r: Rotation) {
        let u = single_qubit(r.axis, r.angle);
        for q in 0..self.nq {
            self.right_dag(q, &u);
        }
    }

    fn hadamard_both(&mut self) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hm = [
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(-h, 0.0)],
        ];
        for q in 0..self.nq {
            self.left(q, &hm);
            self.right_dag(q, &hm);
        }
    }

    /// `2 mu sum_i (tau_i(X) - X)`.
    fn depolarize(&self, mu: f64, out: &mut [C64]) {
        let d = self.dim();
        for o in out.iter_mut() {
            *o = C64::new(0.0, 0.0);
        }
        for q in 0..self.nq {
            let bit = 1 << q;
            for r in 0..d {
                if r & bit != 0 {
                    continue;
                }
                for c in 0..d {
                    if c & bit != 0 {
                        continue;
                    }
                    // block (r, c) over the four (r_q, c_q) values
                    let x00 = self.a[r * d + c];
                    let x11 = self.a[(r | bit) * d + (c | bit)];
                    let x01 = self.a[r * d + (c | bit)];
                    let x10 = self.a[(r | bit) * d + c];
                    let half = 0.5 * (x00 + x11);
                    out[r * d + c] += half - x00;
                    out[(r | bit) * d + (c | bit)] += half - x11;
                    out[r * d + (c | bit)] -= x01;
                    out[(r | bit) * d + c] -= x10;
                }
            }
        }
        for o in out.iter_mut() {
            *o *= 2.0 * mu;
        }
    }
}

/// Lindblad solver for one model and rate set.
struct Solver {
    nq: usize,
    rates: Rates,
    /// `M` of each product `S_x` basis state.
    m: Vec<f64>,
}

impl Solver {
    fn new(nq: usize, rates: Rates) -> Self {
        let m = (0..1usize << nq)
            .map(|i| 0.5 * nq as f64 - i.count_ones() as f64)
            .collect();
        Self { nq, rates, m }
    }

    fn diag_factor(&self, chi: f64, sign: f64, h: f64) -> Vec<C64> {
        let d = 1 << self.nq;
        let g = self.rates.gamma;
        let mut e = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                let (ma, mb) = (self.m[r], self.m[c]);
                e[r * d + c] = C64::from_polar(
                    (-0.5 * g * (ma - mb).powi(2) * h).exp(),
                    -sign * chi * (ma * ma - mb * mb) * h,
                );
            }
        }
        e
    }

    /// Torsion of length `t` under `sign * chi * S_x^2` with all
    /// dissipators, in `steps` integrating-factor RK4 steps.
    fn torsion(&self, x: &mut Op, chi: f64, sign: f64, t: f64, steps: usize) {
        x.hadamard_both();
        let mu = self.rates.mu;
        if mu == 0.0 {
            let e = self.diag_factor(chi, sign, t);
            for (a, f) in x.a.iter_mut().zip(&e) {
                *a *= f;
            }
        } else {
            let h = t / steps as f64;
            let e = self.diag_factor(chi, sign, 0.5 * h);
            let n = x.a.len();
            let mut k = vec![C64::new(0.0, 0.0); n];
            let mut acc = vec![C64::new(0.0, 0.0); n];
            let mut tmp = Op {
                nq: self.nq,
                a: vec![C64::new(0.0, 0.0); n],
            };
            for _ in 0..steps {
                // k1 = N(y)
                x.depolarize(mu, &mut k);
                // acc collects E^2 k1 + 2E(k2 + k3) + k4
                for i in 0..n {
                    acc[i] = e[i] * e[i] * k[i];
                    tmp.a[i] = e[i] * (x.a[i] + 0.5 * h * k[i]);
                }
                // k2 = N(E(y + h/2 k1))
                tmp.depolarize(mu, &mut k);
                for i in 0..n {
                    acc[i] += 2.0 * e[i] * k[i];
                    tmp.a[i] = e[i] * x.a[i] + 0.5 * h * k[i];
                }
                // k3 = N(E y + h/2 k2)
                tmp.depolarize(mu, &mut k);
                for i in 0..n {
                    acc[i] += 2.0 * e[i] * k[i];
                    tmp.a[i] = e[i] * e[i] * x.a[i] + h * e[i] * k[i];
                }
                // k4 = N(E^2 y + h E k3)
                tmp.depolarize(mu, &mut k);
                for i in 0..n {
                    acc[i] += k[i];
                    x.a[i] = e[i] * e[i] * x.a[i] + h / 6.0 * acc[i];
                }
            }
        }
        x.hadamard_both();
    }
}

/// Evolution of a (system) operator pair: the coherence `X` and the
/// branch-0 density matrix used for the trace check.
#[derive(Clone)]
struct Pair {
    x: Op,
    rho: Op,
}

struct Run<'a> {
    spec: &'a ProtocolSpec,
    solver: Solver,
    steps: usize,
    trace_err: f64,
}

impl Run<'_> {
    fn check_trace(&mut self, p: &Pair) {
        self.trace_err = self.trace_err.max((p.rho.trace() - 1.0).norm());
    }

    /// Both sides get the same unitary (it acts on both branches).
    fn both(p: &mut Pair, r: Rotation) {
        for o in [&mut p.x, &mut p.rho] {
            o.rotate_left(r);
            o.rotate_right(r);
        }
    }

    fn evolve(&mut self, p: &mut Pair, t: f64, sign: f64) {
        let model = self.spec.model;
        let rates = self.solver.rates;
        match model.dynamics {
            Dynamics::KickedTop { p: angle, .. } => {
                let tau = rates.kick_duration(&model);
                for _ in 0..t as usize {
                    if sign > 0.0 {
                        Self::both(p, Rotation::z(angle));
                    }
                    for o in [&mut p.x, &mut p.rho] {
                        self.solver.torsion(o, rates.chi, sign, tau, self.steps);
                    }
                    if sign < 0.0 {
                        Self::both(p, Rotation::z(-angle));
                    }
                    self.check_trace(p);
                }
            }
            Dynamics::Twisting { chi } => {
                if t > 0.0 {
                    for o in [&mut p.x, &mut p.rho] {
                        self.solver.torsion(o, chi, sign, t, self.steps);
                    }
                    self.check_trace(p);
                }
            }
        }
    }

    fn series(&mut self, psi: &[C64], vpsi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let spec = self.spec;
        let mut p = Pair {
            x: Op::outer(vpsi, psi),
            rho: Op::outer(psi, psi),
        };
        let (mut f, mut g) = (Vec::new(), Vec::new());
        let mut elapsed = 0.0;
        for &t in &spec.times {
            self.evolve(&mut p, t - elapsed, 1.0);
            elapsed = t;
            // G: V on branch 0 only, X -> X V^dag
            let mut gx = p.x.clone();
            gx.rotate_right(spec.v);
            g.push(gx.trace());
            // F: W on both branches, reversed evolution, V on branch 0
            let mut e = p.clone();
            Self::both(&mut e, spec.w);
            self.evolve(&mut e, t, -1.0);
            e.x.rotate_right(spec.v);
            e.rho.rotate_left(spec.v);
            e.rho.rotate_right(spec.v);
            self.check_trace(&e);
            f.push(e.x.trace());
        }
        (f, g)
    }
}

/// Exact `F` and `G` from the Lindblad equation in the full `2^N` space.
pub fn master_equation_oracle(spec: &ProtocolSpec, rates: &Rates) -> Result<MasterSeries> {
    rates.validate()?;
    let atoms = spec.model.atoms;
    if atoms > MAX_ORACLE_ATOMS {
        return Err(Error::TooManyAtoms {
            got: atoms,
            max: MAX_ORACLE_ATOMS,
        });
    }
    for (i, pair) in spec.times.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::DecreasingTimes {
                index: i + 1,
                value: pair[1],
                previous: pair[0],
            });
        }
    }
    for &t in &spec.times {
        spec.model.check_time(t)?;
    }
    let proto = Protocol::new(spec.clone())?;
    let dicke = proto.initial_state().amplitudes().to_vec();
    let mut vdicke = dicke.clone();
    spec.v.apply(proto.propagator().ops(), &mut vdicke);
    let psi = to_full_dicke(atoms, &dicke);
    let vpsi = to_full_dicke(atoms, &vdicke);

    let run_with = |steps: usize| {
        let mut run = Run {
            spec,
            solver: Solver::new(atoms, *rates),
            steps,
            trace_err: 0.0,
        };
        let (f, g) = run.series(&psi, &vpsi);
        (f, g, run.trace_err)
    };
    let diff = |a: &[C64], b: &[C64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };

    let mut steps = 2;
    let mut prev = run_with(1);
    loop {
        let cur = run_with(steps);
        let change = diff(&cur.0, &prev.0).max(diff(&cur.1, &prev.1));
        if change < TOLERANCE || rates.mu == 0.0 {
            return Ok(MasterSeries {
                times: spec.times.clone(),
                f: cur.0,
                g: cur.1,
                max_trace_error: cur.2,
                steps,
                halving_change: change,
            });
        }
        if steps >= MAX_STEPS {
            return Err(Error::SelfCheck(format!(
                "master equation did not converge: change {change:.3e} at {steps} steps"
            )));
        }
        prev = cur;
        steps *= 2;
    }
}

/// `F` and `G` from the Lindblad equation restricted to the symmetric
/// (Dicke) sector, valid without spontaneous emission.
pub fn dicke_sector_oracle(spec: &ProtocolSpec, rates: &Rates) -> Result<(Vec<C64>, Vec<C64>)> {
    rates.validate()?;
    if rates.mu != 0.0 {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "the symmetric sector is closed only without spontaneous emission".into(),
        });
    }
    let proto = Protocol::new(spec.clone())?;
    let ops = proto.propagator().ops();
    let dim = ops.dim();
    let model: ModelSpec = spec.model;
    let psi = proto.initial_state().amplitudes().to_vec();
    let mut vpsi = psi.clone();
    spec.v.apply(ops, &mut vpsi);

    // columns of a dim x dim operator as separate vectors
    let outer = |ket: &[C64], bra: &[C64]| -> Vec<Vec<C64>> {
        (0..dim)
            .map(|c| ket.iter().map(|k| k * bra[c].conj()).collect())
            .collect()
    };
    let adjoint = |m: &Vec<Vec<C64>>| -> Vec<Vec<C64>> {
        (0..dim)
            .map(|c| (0..dim).map(|r| m[r][c].conj()).collect())
            .collect()
    };
    // X <- U X (columns) and X <- X U^dag = (U X^dag)^dag
    let left = |m: &mut Vec<Vec<C64>>, r: Rotation| {
        for col in m.iter_mut() {
            r.apply(ops, col);
        }
    };
    let right = |m: &mut Vec<Vec<C64>>, r: Rotation| {
        let mut t = adjoint(m);
        left(&mut t, r);
        *m = adjoint(&t);
    };
    let torsion = |m: &mut Vec<Vec<C64>>, chi: f64, sign: f64, t: f64| {
        // to the S_x eigenbasis on both sides, elementwise factor, back
        let mut cx: Vec<Vec<C64>> = m
            .iter()
            .map(|col| {
                let mut o = vec![C64::new(0.0, 0.0); dim];
                ops.to_x_basis(col, &mut o);
                o
            })
            .collect();
        let mut t2 = adjoint(&cx);
        for col in t2.iter_mut() {
            let mut o = vec![C64::new(0.0, 0.0); dim];
            ops.to_x_basis(col, &mut o);
            *col = o;
        }
        cx = adjoint(&t2);
        let sp = ops.spin();
        for (c, col) in cx.iter_mut().enumerate() {
            let mb = sp.m(c);
            for (r, a) in col.iter_mut().enumerate() {
                let ma = sp.m(r);
                *a *= C64::from_polar(
                    (-0.5 * rates.gamma * (ma - mb).powi(2) * t).exp(),
                    -sign * chi * (ma * ma - mb * mb) * t,
                );
            }
        }
        let back = |m: &mut Vec<Vec<C64>>| {
            for col in m.iter_mut() {
                let mut o = vec![C64::new(0.0, 0.0); dim];
                ops.from_x_basis(col, &mut o);
                *col = o;
            }
        };
        back(&mut cx);
        let mut t3 = adjoint(&cx);
        back(&mut t3);
        *m = adjoint(&t3);
    };
    let evolve = |m: &mut Vec<Vec<C64>>, t: f64, sign: f64| match model.dynamics {
        Dynamics::KickedTop { p, .. } => {
            let tau = rates.kick_duration(&model);
            for _ in 0..t as usize {
                if sign > 0.0 {
                    left(m, Rotation::z(p));
                    right(m, Rotation::z(p));
                }
                torsion(m, rates.chi, sign, tau);
                if sign < 0.0 {
                    left(m, Rotation::z(-p));
                    right(m, Rotation::z(-p));
                }
            }
        }
        Dynamics::Twisting { chi } => torsion(m, chi, sign, t),
    };
    let trace = |m: &Vec<Vec<C64>>| (0..dim).map(|i| m[i][i]).sum::<C64>();

    let mut x = outer(&vpsi, &psi);
    let (mut f, mut g) = (Vec::new(), Vec::new());
    let mut elapsed = 0.0;
    for &t in &spec.times {
        spec.model.check_time(t)?;
        evolve(&mut x, t - elapsed, 1.0);
        elapsed = t;
        let mut gx = x.clone();
        right(&mut gx, spec.v);
        g.push(trace(&gx));
        let mut e = x.clone();
        left(&mut e, spec.w);
        right(&mut e, spec.w);
        evolve(&mut e, t, -1.0);
        right(&mut e, spec.v);
        f.push(trace(&e));
    }
    Ok((f, g))
}
