//! Quantum-trajectory unraveling of the dissipative interferometer.
//!
//! Both interferometer branches are carried in one [`HybridState`]: the
//! control qubit is not dissipated, so a jump acts identically on the
//! system part of both branches. The joint state
//! `(|b0>|0> + |b1>|1>)/sqrt(2)` is renormalised after every step and its
//! control readout `<b0|b1>` is averaged over trajectories.
//!
//! Between jumps the Hamiltonian `+-chi S_x^2` and the cavity term
//! `gamma S_x^2 / 2` are diagonal in the total `S_x` basis, and the
//! spontaneous operators satisfy `sum L^dag L = 2 mu N`, so the no-jump
//! evolution is an exact diagonal factor. Jump times are drawn exactly:
//! spontaneous jumps form a Poisson process of rate `2 mu N`, and the cavity
//! jump fires when its integrated hazard `-ln sum_M w_M e^{-gamma M^2 tau}`
//! reaches an `Exp(1)` threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Exec};
use crate::model::{Dynamics, Rotation};
use crate::protocols::{Protocol, ProtocolSpec};
use crate::spin::C64;

use super::hybrid::{Basis, HybridState, SpinLadder};
use super::params::{Channel, DissipationParams, Rates};

/// States with a joint norm below this are treated as lost.
const NORM_FLOOR: f64 = 1e-14;

/// Words of the RNG stream reserved for each protocol segment.
const SEGMENT_WORDS: u128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Dissipative time since the start of the sequence.
    pub time: f64,
    pub channel: Channel,
    /// Tracked-atom slot for spontaneous channels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<usize>,
}

/// One trajectory: jump record, overflow flags and correlator samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub trajectory: usize,
    pub master_seed: u64,
    /// Jumps during forward evolution, shared by every time point.
    pub forward_jumps: Vec<JumpEvent>,
    /// Jumps during the reversed evolution of the `F` measurement at each
    /// time point (times continue from the forward segment).
    pub echo_jumps: Vec<Vec<JumpEvent>>,
    /// Photon budget exhausted somewhere in this trajectory.
    pub overflowed: bool,
    /// Dissipative time of the forward-segment overflow, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overflow_time: Option<f64>,
    pub f_overflowed: Vec<bool>,
    pub g_overflowed: Vec<bool>,
    pub f: Vec<C64>,
    pub g: Vec<C64>,
}

/// Trajectory average of a complex correlator on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub mean: Vec<C64>,
    /// Sample standard deviation over `sqrt(n_traj)`, real part.
    pub stderr_re: Vec<f64>,
    /// Same for the imaginary part.
    pub stderr_im: Vec<f64>,
    /// First-order propagated error of `|mean|`.
    pub stderr_abs: Vec<f64>,
    pub n_traj: usize,
    /// Largest per-point fraction of trajectories that exhausted the
    /// photon budget.
    pub overflow_fraction: f64,
    pub overflow_by_point: Vec<f64>,
}

impl EnsembleEstimate {
    fn from_samples(samples: &[&[C64]], flags: &[&[bool]]) -> Self {
        let n = samples.len();
        let points = samples.first().map_or(0, |s| s.len());
        let mut mean = vec![C64::new(0.0, 0.0); points];
        for s in samples {
            for (m, z) in mean.iter_mut().zip(s.iter()) {
                *m += z;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var_re = vec![0.0; points];
        let mut var_im = vec![0.0; points];
        for s in samples {
            for i in 0..points {
                let d = s[i] - mean[i];
                var_re[i] += d.re * d.re;
                var_im[i] += d.im * d.im;
            }
        }
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let root_n = (n as f64).sqrt();
        let stderr_re: Vec<f64> = var_re.iter().map(|v| (v / denom).sqrt() / root_n).collect();
        let stderr_im: Vec<f64> = var_im.iter().map(|v| (v / denom).sqrt() / root_n).collect();
        let stderr_abs = (0..points)
            .map(|i| {
                let a = mean[i].norm();
                if a > 1e-12 {
                    ((mean[i].re * stderr_re[i]).powi(2) + (mean[i].im * stderr_im[i]).powi(2))
                        .sqrt()
                        / a
                } else {
                    stderr_re[i].max(stderr_im[i])
                }
            })
            .collect();
        let overflow_by_point: Vec<f64> = (0..points)
            .map(|i| flags.iter().filter(|f| f[i]).count() as f64 / n as f64)
            .collect();
        Self {
            mean,
            stderr_re,
            stderr_im,
            stderr_abs,
            n_traj: n,
            overflow_fraction: overflow_by_point.iter().cloned().fold(0.0, f64::max),
            overflow_by_point,
        }
    }

    pub fn abs(&self) -> Vec<f64> {
        self.mean.iter().map(|z| z.norm()).collect()
    }
}

/// Ensemble results for `F` and `G`, plus the per-trajectory records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativeRun {
    pub times: Vec<f64>,
    pub f: EnsembleEstimate,
    pub g: EnsembleEstimate,
    pub records: Vec<TrajectoryRecord>,
}

/// The interferometric protocol with dissipation during the torsion.
#[derive(Debug, Clone)]
pub struct OpenProtocol {
    protocol: Protocol,
    rates: Rates,
    ladder: SpinLadder,
}

fn exp1(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

fn stream(master_seed: u64, trajectory: usize, segment: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory as u64);
    rng.set_word_pos(segment as u128 * SEGMENT_WORDS);
    rng
}

/// Cavity hazard `-ln sum_M w_M e^{-gamma M^2 tau}` for normalised
/// weights given as `(M^2, w)` pairs.
fn cavity_hazard(weights: &[(f64, f64)], gamma: f64, tau: f64) -> f64 {
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    let surv: f64 = weights
        .iter()
        .map(|&(m2, w)| w * (-gamma * m2 * tau).exp())
        .sum();
    -(surv / total).ln()
}

enum Event {
    None,
    Cavity,
    Spontaneous,
}

/// Mutable trajectory state for one protocol segment.
#[derive(Clone)]
struct Walker {
    state: HybridState,
    photons: usize,
    overflowed: bool,
    time: f64,
    rng: ChaCha8Rng,
    cav_left: f64,
    sp_left: f64,
    jumps: Vec<JumpEvent>,
}

impl Walker {
    fn new(state: HybridState, rng: ChaCha8Rng) -> Self {
        let mut w = Self {
            state,
            photons: 0,
            overflowed: false,
            time: 0.0,
            rng,
            cav_left: 0.0,
            sp_left: 0.0,
            jumps: Vec::new(),
        };
        w.redraw();
        w
    }

    /// Continues from `self` with a fresh RNG stream; thresholds are
    /// redrawn, which is exact because the unraveling is Markov in the
    /// normalised state.
    fn branch(&self, rng: ChaCha8Rng) -> Self {
        let mut w = self.clone();
        w.rng = rng;
        w.jumps = Vec::new();
        w.redraw();
        w
    }

    fn renormalize(&mut self) -> Result<()> {
        let n = self.state.normalize();
        if n < NORM_FLOOR {
            return Err(Error::NormUnderflow(n));
        }
        Ok(())
    }

    fn redraw(&mut self) {
        self.cav_left = exp1(&mut self.rng);
        self.sp_left = exp1(&mut self.rng);
    }

    fn measure(&self) -> Result<C64> {
        let n = self.state.norm_sqr();
        if n < NORM_FLOOR {
            return Err(Error::NormUnderflow(n));
        }
        Ok(self.state.overlap(0, 1) / n)
    }

    /// Evolves for `duration` under `sign * chi * S_x^2` with dissipation.
    fn dissipate(&mut self, p: &OpenProtocol, chi: f64, sign: f64, duration: f64) -> Result<()> {
        let r = &p.rates;
        self.state.to_basis(&p.ladder, Basis::X);
        let mut left = duration;
        while left > 0.0 {
            let active = r.is_dissipative() && !self.overflowed;
            if !active {
                self.state
                    .apply_x_diagonal(|m| C64::from_polar(1.0, -sign * chi * m * m * left));
                self.time += left;
                return Ok(());
            }
            let atoms = self.state.layout().atoms as f64;
            let weights: Vec<(f64, f64)> = self
                .state
                .x_weights()
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| {
                    let m = (i as f64 - atoms) / 2.0;
                    (m * m, w)
                })
                .collect();

            let mut tau = left;
            let mut event = Event::None;
            if r.mu > 0.0 {
                let t_sp = self.sp_left / (2.0 * r.mu * atoms);
                if t_sp < tau {
                    tau = t_sp;
                    event = Event::Spontaneous;
                }
            }
            if r.gamma > 0.0 && cavity_hazard(&weights, r.gamma, tau) >= self.cav_left {
                // bisection for the hazard crossing inside (0, tau]
                let (mut lo, mut hi) = (0.0, tau);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if cavity_hazard(&weights, r.gamma, mid) >= self.cav_left {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                tau = hi;
                event = Event::Cavity;
            }

            let g = r.gamma;
            self.state.apply_x_diagonal(|m| {
                let m2 = m * m;
                C64::from_polar((-0.5 * g * m2 * tau).exp(), -sign * chi * m2 * tau)
            });
            self.renormalize()?;
            self.time += tau;
            left -= tau;
            match event {
                Event::None => {
                    if r.gamma > 0.0 {
                        self.cav_left -= cavity_hazard(&weights, r.gamma, tau);
                    }
                    self.sp_left -= 2.0 * r.mu * atoms * tau;
                }
                Event::Cavity => {
                    self.sp_left -= 2.0 * r.mu * atoms * tau;
                    self.state.apply_x_diagonal(|m| C64::new(m, 0.0));
                    self.renormalize()?;
                    self.jumps.push(JumpEvent {
                        time: self.time,
                        channel: Channel::Cavity,
                        atom: None,
                    });
                    self.cav_left = exp1(&mut self.rng);
                }
                Event::Spontaneous => {
                    if r.gamma > 0.0 {
                        self.cav_left -= cavity_hazard(&weights, r.gamma, tau);
                    }
                    self.spontaneous_jump(p)?;
                    self.sp_left = exp1(&mut self.rng);
                    self.state.to_basis(&p.ladder, Basis::X);
                }
            }
        }
        Ok(())
    }

    fn spontaneous_jump(&mut self, p: &OpenProtocol) -> Result<()> {
        let budget = p.rates.photon_budget;
        if budget == 0 {
            self.overflowed = true;
            return Ok(());
        }
        let layout = self.state.layout();
        let atom = self.rng.random_range(0..layout.atoms);
        self.state.to_basis(&p.ladder, Basis::Z);
        let slot = if atom < layout.tracked {
            atom
        } else {
            // by permutation symmetry any untouched atom will do
            self.state.promote();
            layout.tracked
        };
        let (up, down) = self.state.qubit_populations(slot);
        let weights = [down, up, up, down];
        let total: f64 = weights.iter().sum();
        let mut x = self.rng.random::<f64>() * total;
        let mut channel = Channel::SPONTANEOUS[3];
        for (c, w) in Channel::SPONTANEOUS.iter().zip(weights) {
            if x < w {
                channel = *c;
                break;
            }
            x -= w;
        }
        let m = channel
            .single_atom_matrix()
            .expect("spontaneous channel")
            .map(|row| row.map(|v| C64::new(v, 0.0)));
        self.state.apply_qubit(slot, m, None);
        self.renormalize()?;
        self.jumps.push(JumpEvent {
            time: self.time,
            channel,
            atom: Some(slot),
        });
        self.photons += 1;
        if self.photons >= budget {
            self.overflowed = true;
        }
        Ok(())
    }
}

impl OpenProtocol {
    pub fn new(spec: ProtocolSpec, rates: Rates) -> Result<Self> {
        rates.validate()?;
        let protocol = Protocol::new(spec)?;
        Self::with_protocol(protocol, rates)
    }

    pub fn with_protocol(protocol: Protocol, rates: Rates) -> Result<Self> {
        rates.validate()?;
        let spec = protocol.spec();
        for (i, pair) in spec.times.windows(2).enumerate() {
            if pair[1] < pair[0] {
                return Err(Error::DecreasingTimes {
                    index: i + 1,
                    value: pair[1],
                    previous: pair[0],
                });
            }
        }
        let atoms = spec.model.atoms;
        let ladder = SpinLadder::new(
            atoms,
            rates.photon_budget,
            Some(protocol.propagator().shared_ops()),
        );
        Ok(Self {
            protocol,
            rates,
            ladder,
        })
    }

    pub fn spec(&self) -> &ProtocolSpec {
        self.protocol.spec()
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn unitary(&self) -> &Protocol {
        &self.protocol
    }

    /// Forward evolution from `from` to `to`.
    fn forward(&self, w: &mut Walker, from: f64, to: f64) -> Result<()> {
        let model = self.spec().model;
        match model.dynamics {
            Dynamics::KickedTop { p, .. } => {
                let tau = self.rates.kick_duration(&model);
                for _ in (from as usize)..(to as usize) {
                    w.state.rotate(&self.ladder, Rotation::z(p), None);
                    w.dissipate(self, self.rates.chi, 1.0, tau)?;
                }
            }
            Dynamics::Twisting { chi } => w.dissipate(self, chi, 1.0, to - from)?,
        }
        Ok(())
    }

    /// Reversed-Hamiltonian evolution for `t`; dissipation is unchanged.
    fn backward(&self, w: &mut Walker, t: f64) -> Result<()> {
        let model = self.spec().model;
        match model.dynamics {
            Dynamics::KickedTop { p, .. } => {
                let tau = self.rates.kick_duration(&model);
                for _ in 0..t as usize {
                    w.dissipate(self, self.rates.chi, -1.0, tau)?;
                    w.state.rotate(&self.ladder, Rotation::z(-p), None);
                }
            }
            Dynamics::Twisting { chi } => w.dissipate(self, chi, -1.0, t)?,
        }
        Ok(())
    }

    /// Runs one trajectory. Its random numbers come only from
    /// `(master_seed, index)`, so the result does not depend on scheduling.
    pub fn trajectory(&self, index: usize, master_seed: u64) -> Result<TrajectoryRecord> {
        let spec = self.spec();
        let psi = self.protocol.initial_state().amplitudes().to_vec();
        let mut vpsi = psi.clone();
        spec.v.apply(self.protocol.propagator().ops(), &mut vpsi);
        let atoms = spec.model.atoms;
        let state = HybridState::from_dicke(atoms, vec![psi, vpsi]);
        let mut fwd = Walker::new(state, stream(master_seed, index, 0));

        let n = spec.times.len();
        let mut rec = TrajectoryRecord {
            trajectory: index,
            master_seed,
            forward_jumps: Vec::new(),
            echo_jumps: Vec::with_capacity(n),
            overflowed: false,
            overflow_time: None,
            f_overflowed: Vec::with_capacity(n),
            g_overflowed: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
        };
        let mut elapsed = 0.0;
        for (i, &t) in spec.times.iter().enumerate() {
            spec.model.check_time(t)?;
            let was = fwd.overflowed;
            self.forward(&mut fwd, elapsed, t)?;
            if fwd.overflowed && !was {
                rec.overflow_time = fwd.jumps.last().map(|j| j.time);
            }
            elapsed = t;

            let mut g_state = fwd.state.clone();
            g_state.rotate(&self.ladder, spec.v, Some(0));
            let gw = Walker {
                state: g_state,
                ..fwd.clone()
            };
            rec.g.push(gw.measure()?);
            rec.g_overflowed.push(fwd.overflowed);

            let mut echo = fwd.branch(stream(master_seed, index, i + 1));
            echo.state.rotate(&self.ladder, spec.w, None);
            self.backward(&mut echo, t)?;
            echo.state.rotate(&self.ladder, spec.v, Some(0));
            rec.f.push(echo.measure()?);
            rec.f_overflowed.push(echo.overflowed);
            rec.overflowed |= echo.overflowed;
            rec.echo_jumps.push(echo.jumps);
        }
        rec.overflowed |= fwd.overflowed;
        rec.forward_jumps = fwd.jumps;
        Ok(rec)
    }

    /// Runs `n_traj` trajectories and averages them in index order.
    pub fn run(&self, n_traj: usize, master_seed: u64, exec: Exec) -> Result<DissipativeRun> {
        if n_traj == 0 {
            return Err(Error::NoTrajectories);
        }
        let records = try_map_indexed(exec, n_traj, |i| self.trajectory(i, master_seed))?;
        let f_s: Vec<&[C64]> = records.iter().map(|r| r.f.as_slice()).collect();
        let f_o: Vec<&[bool]> = records.iter().map(|r| r.f_overflowed.as_slice()).collect();
        let g_s: Vec<&[C64]> = records.iter().map(|r| r.g.as_slice()).collect();
        let g_o: Vec<&[bool]> = records.iter().map(|r| r.g_overflowed.as_slice()).collect();
        Ok(DissipativeRun {
            times: self.spec().times.clone(),
            f: EnsembleEstimate::from_samples(&f_s, &f_o),
            g: EnsembleEstimate::from_samples(&g_s, &g_o),
            records,
        })
    }
}

/// Trajectory estimates of `F` and `G` for `spec` under `params`.
pub fn dissipative_correlators(
    spec: ProtocolSpec,
    params: &DissipationParams,
    n_traj: usize,
    master_seed: u64,
    exec: Exec,
) -> Result<DissipativeRun> {
    params.validate()?;
    OpenProtocol::new(spec, params.rates())?.run(n_traj, master_seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialState, ModelSpec};
    use crate::spin::Axis;
    use std::f64::consts::PI;

    fn kicked(atoms: usize, kicks: usize) -> ProtocolSpec {
        let phi = 1.0 / (atoms as f64).sqrt();
        ProtocolSpec {
            model: ModelSpec::kicked_top(atoms, 3.0, PI / 2.0),
            initial: InitialState::along_x()
                .then(Rotation::z(PI / 4.0))
                .then(Rotation::new(Axis::Y, -PI / 4.0)),
            v: Rotation::z(phi),
            w: Rotation::z(phi),
            times: (0..=kicks).map(|t| t as f64).collect(),
        }
    }

    #[test]
    fn zero_dissipation_reproduces_unitary() {
        let spec = kicked(30, 6);
        let unitary = Protocol::new(spec.clone())
            .unwrap()
            .series(Exec::Sequential)
            .unwrap();
        let open = OpenProtocol::new(spec, Rates::unitary(1.0)).unwrap();
        let run = open.run(5, 42, Exec::Sequential).unwrap();
        for i in 0..unitary.times.len() {
            assert!((run.f.mean[i] - unitary.f[i]).norm() < 1e-10);
            assert!((run.g.mean[i] - unitary.g.as_ref().unwrap()[i]).norm() < 1e-10);
            assert!(run.f.stderr_re[i] < 1e-14);
            assert!(run.f.stderr_im[i] < 1e-14);
        }
        let other = open.run(5, 7, Exec::Sequential).unwrap();
        assert_eq!(run.f.mean, other.f.mean);
        assert!(run.records.iter().all(|r| r.forward_jumps.is_empty()));
    }

    #[test]
    fn zero_dissipation_twisting() {
        let spec = ProtocolSpec {
            model: ModelSpec::twisting(20, 1.0),
            initial: InitialState::along_y(),
            v: Rotation::z(PI / 4.0),
            w: Rotation::z(PI / 4.0),
            times: vec![0.0, 0.01, 0.05, 0.1],
        };
        let unitary = Protocol::new(spec.clone())
            .unwrap()
            .series(Exec::Sequential)
            .unwrap();
        let run = OpenProtocol::new(spec, Rates::unitary(1.0))
            .unwrap()
            .run(2, 1, Exec::Sequential)
            .unwrap();
        for i in 0..4 {
            assert!((run.f.mean[i] - unitary.f[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let rates = DissipationParams::new(1.0, 100.0, 20.0).unwrap().rates();
        let open = OpenProtocol::new(kicked(12, 4), rates).unwrap();
        let a = open.run(40, 9, Exec::Sequential).unwrap();
        let b = crate::exec::with_threads(Some(3), || open.run(40, 9, Exec::Parallel).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn jump_times_increase_and_overflow_stops_jumps() {
        let mut rates = DissipationParams::new(1.0, 10.0, 20.0).unwrap().rates();
        rates.photon_budget = 2;
        let open = OpenProtocol::new(kicked(10, 5), rates).unwrap();
        let run = open.run(60, 3, Exec::Sequential).unwrap();
        let mut saw_overflow = false;
        for r in &run.records {
            assert!(r.forward_jumps.windows(2).all(|w| w[1].time > w[0].time));
            let sp = r
                .forward_jumps
                .iter()
                .filter(|j| j.channel != Channel::Cavity)
                .count();
            assert!(sp <= 2);
            if let Some(t) = r.overflow_time {
                saw_overflow = true;
                assert!(r.forward_jumps.iter().all(|j| j.time <= t));
            }
            for (i, e) in r.echo_jumps.iter().enumerate() {
                let t_end = r.forward_jumps.iter().map(|j| j.time).fold(0.0, f64::max);
                assert!(e.windows(2).all(|w| w[1].time > w[0].time));
                if let Some(first) = e.first() {
                    assert!(first.time >= t_end || i > 0);
                }
            }
            assert!(r.f.iter().all(|z| z.norm() <= 1.0 + 1e-9));
        }
        assert!(saw_overflow);
        assert!(run.f.overflow_fraction > 0.0);
    }

    #[test]
    fn zero_trajectories_rejected() {
        let open = OpenProtocol::new(kicked(4, 1), Rates::unitary(1.0)).unwrap();
        assert_eq!(open.run(0, 1, Exec::Sequential), Err(Error::NoTrajectories));
    }
}
