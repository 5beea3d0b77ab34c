//! Measurement protocols for out-of-time-order and time-ordered
//! correlators, evaluated as explicit branch-state computations.
//!
//! The control qubit is never stored as a tensor factor. A
//! [`ControlledState`] keeps the system state attached to control `|0>` and
//! to control `|1>`; with the joint state `(|b0>|0> + |b1>|1>)/sqrt(2)` the
//! control-qubit expectations are `<X_C> = Re<b0|b1>` and
//! `<Y_C> = Im<b0|b1>`, so `<X_C> + i<Y_C> = <b0|b1>`.
//!
//! Sign convention: every correlator returned here equals its defining
//! expectation value literally, e.g. `F(t) = <W_t^dag V^dag W_t V>` with
//! `W_t = U(-t) W U(t)`, including the sign of the imaginary part.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Exec};
use crate::model::{InitialState, ModelSpec, Propagator, Rotation};
use crate::spin::{inner, norm_sqr, Axis, DickeState, C64};

/// Everything needed to evaluate correlators of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub model: ModelSpec,
    pub initial: InitialState,
    pub v: Rotation,
    pub w: Rotation,
    #[serde(default)]
    pub times: Vec<f64>,
}

/// System states attached to the two control-qubit levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledState {
    pub branch0: DickeState,
    pub branch1: DickeState,
}

impl ControlledState {
    pub fn new(psi: &DickeState) -> Self {
        Self {
            branch0: psi.clone(),
            branch1: psi.clone(),
        }
    }

    /// `<X_C>` of the joint state `(|b0>|0> + |b1>|1>)/sqrt(2)`.
    pub fn control_x(&self) -> f64 {
        let a = self.branch0.inner(&self.branch1);
        let b = self.branch1.inner(&self.branch0);
        (0.5 * (a + b)).re
    }

    /// `<Y_C>`; `Y = [[0, -i], [i, 0]]`.
    pub fn control_y(&self) -> f64 {
        let i = C64::new(0.0, 1.0);
        let a = self.branch0.inner(&self.branch1) * -i;
        let b = self.branch1.inner(&self.branch0) * i;
        (0.5 * (a + b)).re
    }

    pub fn control_expectation(&self) -> C64 {
        C64::new(self.control_x(), self.control_y())
    }
}

/// A Hermitian operator `scale * S_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub axis: Axis,
    pub scale: f64,
}

impl Generator {
    pub const fn new(axis: Axis, scale: f64) -> Self {
        Self { axis, scale }
    }
}

/// Result of the flag-qubit protocol for Hermitian operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermitianOto {
    /// Normalised `Re F`: the `<X_C>` reading after post-selection.
    pub ratio: f64,
    /// Probability that all three flag qubits read 1.
    pub postselection_probability: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// Operator pairs applied at a common, non-decreasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeOrderedSequence {
    pub times: Vec<f64>,
    pub v: Vec<Rotation>,
    pub w: Vec<Rotation>,
}

impl TimeOrderedSequence {
    /// The pairing `G(t) = <V_t^dag V>` on the grid `(0, t)`.
    pub fn loschmidt(v: Rotation, t: f64) -> Self {
        Self {
            times: vec![0.0, t],
            v: vec![Rotation::identity(), v],
            w: vec![v, Rotation::identity()],
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.v.len() != self.w.len() {
            return Err(Error::LengthMismatch {
                left: self.v.len(),
                right: self.w.len(),
            });
        }
        if self.times.len() != self.v.len() {
            return Err(Error::LengthMismatch {
                left: self.times.len(),
                right: self.v.len(),
            });
        }
        for (i, pair) in self.times.windows(2).enumerate() {
            if pair[1] < pair[0] {
                return Err(Error::DecreasingTimes {
                    index: i + 1,
                    value: pair[1],
                    previous: pair[0],
                });
            }
        }
        for &t in &self.times {
            model.check_time(t)?;
        }
        for r in self.v.iter().chain(&self.w) {
            r.validate()?;
        }
        Ok(())
    }
}

/// A ready-to-evaluate protocol: propagator plus prepared initial state.
#[derive(Debug, Clone)]
pub struct Protocol {
    spec: ProtocolSpec,
    prop: Propagator,
    psi: DickeState,
}

impl Protocol {
    pub fn new(spec: ProtocolSpec) -> Result<Self> {
        let prop = Propagator::new(spec.model)?;
        Self::with_propagator(spec, prop)
    }

    pub fn with_propagator(spec: ProtocolSpec, prop: Propagator) -> Result<Self> {
        spec.v.validate()?;
        spec.w.validate()?;
        for &t in &spec.times {
            spec.model.check_time(t)?;
        }
        let psi = spec.initial.prepare(prop.ops());
        Ok(Self { spec, prop, psi })
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn initial_state(&self) -> &DickeState {
        &self.psi
    }

    fn apply(&self, r: Rotation, v: &mut [C64]) {
        r.apply(self.prop.ops(), v);
    }

    /// `v <- W_t v = U(-t) W U(t) v`.
    fn heisenberg(&self, r: Rotation, t: f64, v: &mut [C64]) {
        self.prop.forward(v, t);
        self.apply(r, v);
        self.prop.backward(v, t);
    }

    /// Runs gates [1]-[5] of the interferometer and returns the branches
    /// `(V W_t |psi>, W_t V |psi>)`.
    pub fn interferometric_branches(&self, t: f64) -> Result<ControlledState> {
        self.spec.model.check_time(t)?;
        let mut st = ControlledState::new(&self.psi);
        let (v, w) = (self.spec.v, self.spec.w);
        // [1] controlled V on the |1> branch
        self.apply(v, st.branch1.amplitudes_mut());
        for b in [&mut st.branch0, &mut st.branch1] {
            let amps = b.amplitudes_mut();
            // [2]-[4]
            self.prop.forward(amps, t);
            self.apply(w, amps);
            self.prop.backward(amps, t);
        }
        // [5] V on the |0> branch
        self.apply(v, st.branch0.amplitudes_mut());
        Ok(st)
    }

    /// `F(t) = <X_C> + i<Y_C>` from the interferometric protocol.
    pub fn interferometric_f(&self, t: f64) -> Result<C64> {
        Ok(self.interferometric_branches(t)?.control_expectation())
    }

    /// `|psi_f> = W_t^dag V^dag W_t V |psi>`, applied right to left.
    pub fn echo_state(&self, t: f64) -> Result<DickeState> {
        self.spec.model.check_time(t)?;
        let (v, w) = (self.spec.v, self.spec.w);
        let mut state = self.psi.clone();
        let amps = state.amplitudes_mut();
        self.apply(v, amps);
        self.heisenberg(w, t, amps);
        self.apply(v.inverse(), amps);
        self.heisenberg(w.inverse(), t, amps);
        Ok(state)
    }

    /// `<psi| U(-t) W^dag U(t) V^dag U(-t) W U(t) V |psi>` by direct
    /// application of the operator string.
    pub fn direct_oto_f(&self, t: f64) -> Result<C64> {
        let psi_f = self.echo_state(t)?;
        Ok(self.psi.inner(&psi_f))
    }

    /// Distinguishability protocol: `<psi_f| Pi |psi_f>` with
    /// `Pi = |psi><psi|`.
    pub fn distinguishability(&self, t: f64) -> Result<f64> {
        let psi_f = self.echo_state(t)?;
        let bra = psi_f.inner(&self.psi);
        let ket = self.psi.inner(&psi_f);
        Ok((bra * ket).re)
    }

    /// `<|[W_t, V]|^2> = || (W_t V - V W_t) |psi> ||^2`.
    pub fn commutator_norm_sqr(&self, t: f64) -> Result<f64> {
        self.spec.model.check_time(t)?;
        let (v, w) = (self.spec.v, self.spec.w);
        let mut a = self.psi.amplitudes().to_vec();
        self.apply(v, &mut a);
        self.heisenberg(w, t, &mut a);
        let mut b = self.psi.amplitudes().to_vec();
        self.heisenberg(w, t, &mut b);
        self.apply(v, &mut b);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum())
    }

    /// `G(t) = <V_t^dag V> = <psi| U(-t) V^dag U(t) V |psi>`.
    pub fn time_ordered_g(&self, t: f64) -> Result<C64> {
        self.spec.model.check_time(t)?;
        let v = self.spec.v;
        let mut a = self.psi.amplitudes().to_vec();
        self.apply(v, &mut a);
        self.prop.forward(&mut a, t);
        let mut b = self.psi.amplitudes().to_vec();
        self.prop.forward(&mut b, t);
        self.apply(v, &mut b);
        Ok(inner(&b, &a))
    }

    /// Interferometric measurement of
    /// `<(V_n(t_n)...V_1(t_1))^dag (W_n(t_n)...W_1(t_1))>` using forward
    /// evolution only. `V_i` acts on the control-`|0>` branch and `W_i` on
    /// the control-`|1>` branch, so the returned `<X_C> + i<Y_C>` is the
    /// correlator itself.
    pub fn forward_only_time_ordered(&self, seq: &TimeOrderedSequence) -> Result<C64> {
        seq.validate(&self.spec.model)?;
        let mut st = ControlledState::new(&self.psi);
        let mut elapsed = 0.0;
        for ((&t, &v), &w) in seq.times.iter().zip(&seq.v).zip(&seq.w) {
            let dt = t - elapsed;
            self.prop.forward(st.branch0.amplitudes_mut(), dt);
            self.prop.forward(st.branch1.amplitudes_mut(), dt);
            elapsed = t;
            self.apply(v, st.branch0.amplitudes_mut());
            self.apply(w, st.branch1.amplitudes_mut());
        }
        Ok(st.control_expectation())
    }

    /// Heisenberg-picture evaluation of the same correlator as
    /// [`forward_only_time_ordered`](Self::forward_only_time_ordered),
    /// with every `X(t) = U(-t) X U(t)` applied explicitly.
    pub fn direct_time_ordered(&self, seq: &TimeOrderedSequence) -> Result<C64> {
        seq.validate(&self.spec.model)?;
        let mut a = self.psi.amplitudes().to_vec();
        let mut b = self.psi.amplitudes().to_vec();
        for ((&t, &v), &w) in seq.times.iter().zip(&seq.v).zip(&seq.w) {
            self.heisenberg(w, t, &mut a);
            self.heisenberg(v, t, &mut b);
        }
        Ok(inner(&b, &a))
    }

    fn apply_generator(&self, g: Generator, v: &mut Vec<C64>) {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.prop.ops().apply_generator(g.axis, v, &mut out);
        for o in &mut out {
            *o *= g.scale;
        }
        *v = out;
    }

    /// Normalised `Re F` for Hermitian operators `O^V`, `O^W` from the
    /// flag-qubit protocol, evaluated exactly. `epsilon` only enters the
    /// post-selection probability.
    pub fn hermitian_oto(
        &self,
        o_v: Generator,
        o_w: Generator,
        t: f64,
        epsilon: f64,
    ) -> Result<HermitianOto> {
        self.spec.model.check_time(t)?;
        let heis_w = |v: &mut Vec<C64>| {
            self.prop.forward(v, t);
            self.apply_generator(o_w, v);
            self.prop.backward(v, t);
        };
        // branch0 = O^V O^W_t |psi>, branch1 = O^W_t O^V |psi>
        let mut a = self.psi.amplitudes().to_vec();
        heis_w(&mut a);
        self.apply_generator(o_v, &mut a);
        let mut b = self.psi.amplitudes().to_vec();
        self.apply_generator(o_v, &mut b);
        heis_w(&mut b);

        let numerator = 2.0 * inner(&a, &b).re;
        let denominator = norm_sqr(&a) + norm_sqr(&b);
        if denominator == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(HermitianOto {
            ratio: numerator / denominator,
            postselection_probability: epsilon.powi(3) * denominator / 2.0,
            numerator,
            denominator,
        })
    }
}

/// Correlators on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSeries {
    pub times: Vec<f64>,
    pub f: Vec<C64>,
    #[serde(default)]
    pub g: Option<Vec<C64>>,
}

impl CorrelatorSeries {
    pub fn f_abs(&self) -> Vec<f64> {
        self.f.iter().map(|z| z.norm()).collect()
    }

    pub fn g_abs(&self) -> Option<Vec<f64>> {
        self.g
            .as_ref()
            .map(|g| g.iter().map(|z| z.norm()).collect())
    }
}

/// One time point of a fully cross-checked unitary run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedPoint {
    pub t: f64,
    pub f: C64,
    pub f_direct: C64,
    pub g: C64,
    pub distinguishability: f64,
    pub commutator_norm_sqr: f64,
}

impl Protocol {
    /// `F` (interferometric) and `G` on `self.spec().times`, one worker per
    /// time point.
    pub fn series(&self, exec: Exec) -> Result<CorrelatorSeries> {
        let times = &self.spec.times;
        let pts = try_map_indexed(exec, times.len(), |i| {
            let t = times[i];
            Ok::<_, Error>((self.interferometric_f(t)?, self.time_ordered_g(t)?))
        })?;
        let (f, g) = pts.into_iter().unzip();
        Ok(CorrelatorSeries {
            times: times.clone(),
            f,
            g: Some(g),
        })
    }

    /// Evaluates every route at each time point of `self.spec().times`.
    pub fn checked_series(&self, exec: Exec) -> Result<Vec<CheckedPoint>> {
        let times = &self.spec.times;
        try_map_indexed(exec, times.len(), |i| {
            let t = times[i];
            Ok(CheckedPoint {
                t,
                f: self.interferometric_f(t)?,
                f_direct: self.direct_oto_f(t)?,
                g: self.time_ordered_g(t)?,
                distinguishability: self.distinguishability(t)?,
                commutator_norm_sqr: self.commutator_norm_sqr(t)?,
            })
        })
    }
}

#[cfg(test)]
use crate::oracle;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::CollectiveOps;
    use std::f64::consts::PI;

    fn twisting_spec(atoms: usize, phi: f64) -> ProtocolSpec {
        ProtocolSpec {
            model: ModelSpec::twisting(atoms, 1.0),
            initial: InitialState::along_y(),
            v: Rotation::z(phi),
            w: Rotation::z(phi),
            times: vec![],
        }
    }

    fn kicked_spec(atoms: usize) -> ProtocolSpec {
        let phi = 1.0 / (atoms as f64).sqrt();
        ProtocolSpec {
            model: ModelSpec::kicked_top(atoms, 3.0, PI / 2.0),
            initial: InitialState::along_x()
                .then(Rotation::z(PI / 4.0))
                .then(Rotation::new(Axis::Y, -PI / 4.0)),
            v: Rotation::z(phi),
            w: Rotation::z(phi),
            times: vec![],
        }
    }

    #[test]
    fn f_is_one_at_time_zero() {
        let p = Protocol::new(twisting_spec(20, 0.7)).unwrap();
        let f = p.interferometric_f(0.0).unwrap();
        assert!((f - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((p.distinguishability(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((p.time_ordered_g(0.0).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn identity_operators_give_unity() {
        let mut spec = kicked_spec(30);
        spec.v = Rotation::identity();
        spec.w = Rotation::identity();
        let p = Protocol::new(spec).unwrap();
        for t in [0.0, 1.0, 5.0] {
            assert!((p.interferometric_f(t).unwrap() - 1.0).norm() < 1e-12);
            assert!((p.time_ordered_g(t).unwrap() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn v_identity_keeps_distinguishability_one() {
        let mut spec = kicked_spec(24);
        spec.v = Rotation::identity();
        let p = Protocol::new(spec).unwrap();
        for t in [1.0, 4.0, 9.0] {
            assert!((p.distinguishability(t).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn free_model_commuting_rotations() {
        let mut spec = twisting_spec(16, 0.9);
        spec.model = ModelSpec::twisting(16, 0.0);
        let p = Protocol::new(spec).unwrap();
        for t in [0.1, 1.0, 10.0] {
            assert!((p.direct_oto_f(t).unwrap() - 1.0).norm() < 1e-12);
            assert!((p.interferometric_f(t).unwrap() - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_time_rejected() {
        let p = Protocol::new(twisting_spec(4, 0.3)).unwrap();
        assert_eq!(p.interferometric_f(-1.0), Err(Error::NegativeTime(-1.0)));
        assert_eq!(p.time_ordered_g(-0.5), Err(Error::NegativeTime(-0.5)));
        let mut spec = twisting_spec(4, 0.3);
        spec.v = Rotation::z(f64::INFINITY);
        assert!(matches!(Protocol::new(spec), Err(Error::NonUnitary(_))));
    }

    #[test]
    fn interferometric_matches_direct_and_identities() {
        for spec in [twisting_spec(50, PI / 4.0), kicked_spec(60)] {
            let kicked = matches!(
                spec.model.dynamics,
                crate::model::Dynamics::KickedTop { .. }
            );
            let p = Protocol::new(spec).unwrap();
            for i in 0..8 {
                let t = if kicked { i as f64 } else { 0.011 * i as f64 };
                let f = p.interferometric_f(t).unwrap();
                let fd = p.direct_oto_f(t).unwrap();
                assert!((f - fd).norm() < 1e-10, "t={t}");
                let d = p.distinguishability(t).unwrap();
                assert!((d - f.norm_sqr()).abs() < 1e-9);
                let c = p.commutator_norm_sqr(t).unwrap();
                assert!((c - 2.0 * (1.0 - f.re)).abs() < 1e-9);
                assert!(f.norm() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn oto_against_dense_heisenberg_operators() {
        // W_t built as a dense matrix, independent of the branch code
        let spec = twisting_spec(5, 0.6);
        let p = Protocol::new(spec).unwrap();
        let (sx, _, sz) = oracle::spin_matrices(5);
        let t = 0.8;
        let u = oracle::expm_i(&(&sx * &sx), t);
        let w = oracle::expm_i(&sz, 0.6);
        let wt = u.adjoint() * &w * &u;
        let v = w.clone();
        let op = wt.adjoint() * v.adjoint() * &wt * &v;
        let psi = p.initial_state().amplitudes().to_vec();
        let expect = oracle::inner(&psi, &oracle::matvec(&op, &psi));
        let got = p.interferometric_f(t).unwrap();
        assert!((got - expect).norm() < 1e-10);
        // sign of Im F follows the literal definition
        assert!(expect.im.abs() > 1e-3);
    }

    #[test]
    fn control_qubit_readout_matches_overlap() {
        let p = Protocol::new(kicked_spec(12)).unwrap();
        let st = p.interferometric_branches(3.0).unwrap();
        let ov = st.branch0.inner(&st.branch1);
        assert!((st.control_x() - ov.re).abs() < 1e-14);
        assert!((st.control_y() - ov.im).abs() < 1e-14);
    }

    #[test]
    fn forward_only_single_pair_equal_ops() {
        let p = Protocol::new(twisting_spec(4, 0.5)).unwrap();
        let r = Rotation::z(0.5);
        let seq = TimeOrderedSequence {
            times: vec![0.7],
            v: vec![r],
            w: vec![r],
        };
        let g = p.forward_only_time_ordered(&seq).unwrap();
        assert!((g - 1.0).norm() < 1e-12);
    }

    #[test]
    fn forward_only_matches_heisenberg_oracle_s2() {
        let p = Protocol::new(twisting_spec(4, 0.5)).unwrap();
        let (v1, w1, t1) = (Rotation::z(0.9), Rotation::z(-0.4), 0.63);
        let seq = TimeOrderedSequence {
            times: vec![t1],
            v: vec![v1],
            w: vec![w1],
        };
        let got = p.forward_only_time_ordered(&seq).unwrap();
        // dense oracle: <(V1(t1))^dag W1(t1)>
        let (sx, _, sz) = oracle::spin_matrices(4);
        let u = oracle::expm_i(&(&sx * &sx), t1);
        let vt = u.adjoint() * oracle::expm_i(&sz, 0.9) * &u;
        let wt = u.adjoint() * oracle::expm_i(&sz, -0.4) * &u;
        let psi = p.initial_state().amplitudes().to_vec();
        let expect = oracle::inner(&psi, &oracle::matvec(&(vt.adjoint() * wt), &psi));
        assert!((got - expect).norm() < 1e-10);
        assert!((p.direct_time_ordered(&seq).unwrap() - expect).norm() < 1e-10);
    }

    #[test]
    fn forward_only_padding_reproduces_g() {
        let p = Protocol::new(kicked_spec(40)).unwrap();
        for t in [0.0, 1.0, 3.0, 7.0] {
            let seq = TimeOrderedSequence::loschmidt(p.spec().v, t);
            let a = p.forward_only_time_ordered(&seq).unwrap();
            let b = p.time_ordered_g(t).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn forward_only_multi_step_matches_heisenberg() {
        let p = Protocol::new(kicked_spec(16)).unwrap();
        let seq = TimeOrderedSequence {
            times: vec![1.0, 1.0, 3.0, 6.0],
            v: vec![
                Rotation::z(0.2),
                Rotation::identity(),
                Rotation::new(Axis::X, 0.3),
                Rotation::z(-0.1),
            ],
            w: vec![
                Rotation::new(Axis::Y, 0.4),
                Rotation::z(0.5),
                Rotation::identity(),
                Rotation::z(0.25),
            ],
        };
        let a = p.forward_only_time_ordered(&seq).unwrap();
        let b = p.direct_time_ordered(&seq).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn forward_only_rejects_decreasing_times() {
        let p = Protocol::new(kicked_spec(8)).unwrap();
        let seq = TimeOrderedSequence {
            times: vec![2.0, 1.0],
            v: vec![Rotation::identity(); 2],
            w: vec![Rotation::identity(); 2],
        };
        assert!(matches!(
            p.forward_only_time_ordered(&seq),
            Err(Error::DecreasingTimes { index: 1, .. })
        ));
        let bad = TimeOrderedSequence {
            times: vec![1.0],
            v: vec![Rotation::identity(); 2],
            w: vec![Rotation::identity(); 1],
        };
        assert!(matches!(
            p.forward_only_time_ordered(&bad),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn hermitian_commuting_case_is_one() {
        let p = Protocol::new(twisting_spec(10, 0.1)).unwrap();
        let sz = Generator::new(Axis::Z, 1.0);
        let h = p.hermitian_oto(sz, sz, 0.0, 0.1).unwrap();
        assert!((h.ratio - 1.0).abs() < 1e-14);
        // all four correlators equal <S_z^4>
        let ops = CollectiveOps::new(p.spec().model.spin());
        let psi = p.initial_state();
        let z2 = ops.generator(Axis::Z, &ops.generator(Axis::Z, psi));
        let sz4 = z2.norm_sqr();
        assert!((h.denominator - 2.0 * sz4).abs() < 1e-10);
        assert!((h.postselection_probability - 1e-3 * sz4).abs() < 1e-12);
    }

    #[test]
    fn hermitian_brute_force_spin_one() {
        let spec = ProtocolSpec {
            model: ModelSpec::twisting(2, 1.0),
            initial: InitialState::along_z(),
            v: Rotation::identity(),
            w: Rotation::identity(),
            times: vec![],
        };
        let p = Protocol::new(spec).unwrap();
        let h = p
            .hermitian_oto(
                Generator::new(Axis::Z, 1.0),
                Generator::new(Axis::X, 1.0),
                0.0,
                0.2,
            )
            .unwrap();
        let (sx, _, sz) = oracle::spin_matrices(2);
        let psi = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let ev = |m: nalgebra::DMatrix<C64>| oracle::inner(&psi, &oracle::matvec(&m, &psi)).re;
        let num = ev(&sz * &sx * &sz * &sx) + ev(&sx * &sz * &sx * &sz);
        let den = ev(&sx * &sz * &sz * &sx) + ev(&sz * &sx * &sx * &sz);
        assert!((h.numerator - num).abs() < 1e-12);
        assert!((h.denominator - den).abs() < 1e-12);
        assert!((h.ratio - num / den).abs() < 1e-12);
    }

    #[test]
    fn hermitian_zero_denominator_rejected() {
        // S_z |S, 0> = 0 for integer spin
        let spec = ProtocolSpec {
            model: ModelSpec::twisting(2, 1.0),
            initial: InitialState::coherent(0.0, 0.0).then(Rotation::new(Axis::Y, 0.0)),
            v: Rotation::identity(),
            w: Rotation::identity(),
            times: vec![],
        };
        let mut p = Protocol::new(spec).unwrap();
        p.psi = DickeState::basis(p.psi.spin(), 1);
        let sz = Generator::new(Axis::Z, 1.0);
        assert_eq!(
            p.hermitian_oto(sz, sz, 0.0, 0.1),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn hermitian_ratio_decays_like_f() {
        let s = 25.0;
        let p = Protocol::new(kicked_spec(50)).unwrap();
        let g = Generator::new(Axis::Z, 1.0 / s);
        let early = p.hermitian_oto(g, g, 1.0, 0.1).unwrap().ratio;
        assert!(early > 0.8, "{early}");
        let late: f64 = (6..12)
            .map(|t| p.hermitian_oto(g, g, t as f64, 0.1).unwrap().ratio.abs())
            .fold(0.0, f64::max);
        let f_late: f64 = (6..12)
            .map(|t| p.interferometric_f(t as f64).unwrap().norm())
            .fold(0.0, f64::max);
        assert!(late < 0.8 && f_late < 0.8, "{late} {f_late}");
    }

    #[test]
    fn series_is_exec_independent() {
        let mut spec = kicked_spec(30);
        spec.times = (0..8).map(f64::from).collect();
        let p = Protocol::new(spec).unwrap();
        let a = p.series(Exec::Sequential).unwrap();
        let b = p.series(Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.f_abs().iter().all(|x| *x <= 1.0 + 1e-9));
    }
}
