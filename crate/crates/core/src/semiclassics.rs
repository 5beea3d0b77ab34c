//! Classical limit of the kicked top on the unit sphere `S/S`.
//!
//! One map step follows the quantum period `e^{-i k S_x^2/2S} e^{-i p S_z}`:
//! a rotation about `z` by `p`, then a rotation about `x` by `k X`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Exec};
use crate::spin::{Axis, CollectiveOps, DickeState};

/// Smallest accepted number of map steps for a Lyapunov estimate.
pub const MIN_LYAPUNOV_STEPS: usize = 100;

/// Default bound on `lambda` below which an orbit counts as regular.
pub const REGULAR_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    /// Normalises `(x, y, z)` onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        let n = (x * x + y * y + z * z).sqrt();
        Self {
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        )
    }

    /// `<S>/S` of a quantum state.
    pub fn from_state(ops: &CollectiveOps, state: &DickeState) -> Self {
        let s = ops.spin().s();
        let n = state.norm_sqr();
        Self {
            x: ops.expectation(Axis::X, state) / (s * n),
            y: ops.expectation(Axis::Y, state) / (s * n),
            z: ops.expectation(Axis::Z, state) / (s * n),
        }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(self, other: SpherePoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    /// Uniformly distributed points on the sphere.
    pub fn random(n: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                let r = (1.0 - z * z).sqrt();
                Self::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect()
    }
}

/// One kick of the classical top.
pub fn classical_kick_map(pt: SpherePoint, k: f64, p: f64) -> SpherePoint {
    let (sp, cp) = p.sin_cos();
    let x = pt.x * cp - pt.y * sp;
    let y = pt.x * sp + pt.y * cp;
    let z = pt.z;
    let (st, ct) = (k * x).sin_cos();
    SpherePoint::new(x, y * ct - z * st, y * st + z * ct)
}

/// Returns the image of `pt` and applies the map's Jacobian to `v`.
fn kick_with_tangent(pt: SpherePoint, v: [f64; 3], k: f64, p: f64) -> (SpherePoint, [f64; 3]) {
    let (sp, cp) = p.sin_cos();
    let rz = |a: [f64; 3]| [a[0] * cp - a[1] * sp, a[0] * sp + a[1] * cp, a[2]];
    let q = rz(pt.as_array());
    let w = rz(v);
    let (st, ct) = (k * q[0]).sin_cos();
    let img = [q[0], q[1] * ct - q[2] * st, q[1] * st + q[2] * ct];
    // d/dX of the x-rotation: k dX * (0, -Z'', Y'')
    let tw = [
        w[0],
        w[1] * ct - w[2] * st - k * w[0] * img[2],
        w[1] * st + w[2] * ct + k * w[0] * img[1],
    ];
    (SpherePoint::new(img[0], img[1], img[2]), tw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean log stretching per kick.
    pub lambda: f64,
    pub n_steps: usize,
    pub start: SpherePoint,
    pub renorm_interval: usize,
    /// `ln |v|` accumulated between successive renormalisations.
    pub log_stretches: Vec<f64>,
}

impl LyapunovEstimate {
    pub fn is_regular(&self, threshold: f64) -> bool {
        self.lambda <= threshold
    }
}

fn project_tangent(pt: SpherePoint, v: &mut [f64; 3]) {
    let r = pt.as_array();
    let dot: f64 = (0..3).map(|i| r[i] * v[i]).sum();
    for i in 0..3 {
        v[i] -= dot * r[i];
    }
}

/// Largest Lyapunov exponent from the tangent map, renormalising the
/// tangent vector every `renorm_interval` kicks.
pub fn lyapunov_exponent(
    start: SpherePoint,
    k: f64,
    p: f64,
    n_steps: usize,
    renorm_interval: usize,
) -> Result<LyapunovEstimate> {
    if n_steps < MIN_LYAPUNOV_STEPS {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: format!("need at least {MIN_LYAPUNOV_STEPS} steps"),
        });
    }
    if renorm_interval == 0 {
        return Err(Error::InvalidParameter {
            name: "renorm_interval",
            reason: "must be at least 1".into(),
        });
    }
    // any tangent direction; pick the one orthogonal to the largest axis
    let r = start.as_array();
    let mut v = if r[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    project_tangent(start, &mut v);
    let n0 = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    for c in &mut v {
        *c /= n0;
    }
    let mut pt = start;
    let mut log_stretches = Vec::with_capacity(n_steps / renorm_interval + 1);
    for step in 1..=n_steps {
        let (next, w) = kick_with_tangent(pt, v, k, p);
        pt = next;
        v = w;
        project_tangent(pt, &mut v);
        if step % renorm_interval == 0 || step == n_steps {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            log_stretches.push(n.ln());
            for c in &mut v {
                *c /= n;
            }
        }
    }
    let lambda = log_stretches.iter().sum::<f64>() / n_steps as f64;
    Ok(LyapunovEstimate {
        lambda,
        n_steps,
        start,
        renorm_interval,
        log_stretches,
    })
}

/// Lyapunov exponents for many start points, one worker per point.
pub fn lyapunov_ensemble(
    starts: &[SpherePoint],
    k: f64,
    p: f64,
    n_steps: usize,
    renorm_interval: usize,
    exec: Exec,
) -> Result<Vec<LyapunovEstimate>> {
    try_map_indexed(exec, starts.len(), |i| {
        lyapunov_exponent(starts[i], k, p, n_steps, renorm_interval)
    })
}

/// Mean classical orbit of a cloud of sphere points with the Wigner
/// width of a spin coherent state (tangent variance `1/2S` per direction).
/// Entry `t` is the cloud mean after `t` kicks, for `t = 0..=n_kicks`.
pub fn truncated_wigner_mean(
    start: SpherePoint,
    k: f64,
    p: f64,
    s: f64,
    n_kicks: usize,
    n_samples: usize,
    seed: u64,
) -> Vec<[f64; 3]> {
    let r = start.as_array();
    let helper = if r[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut e1 = helper;
    project_tangent(start, &mut e1);
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = e1.map(|c| c / n1);
    let e2 = [
        r[1] * e1[2] - r[2] * e1[1],
        r[2] * e1[0] - r[0] * e1[2],
        r[0] * e1[1] - r[1] * e1[0],
    ];
    let sigma = (0.5 / s).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud: Vec<SpherePoint> = (0..n_samples)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let c = |i: usize| r[i] + sigma * (a * e1[i] + b * e2[i]);
            SpherePoint::new(c(0), c(1), c(2))
        })
        .collect();
    let mean = |cloud: &[SpherePoint]| {
        let n = cloud.len() as f64;
        cloud.iter().fold([0.0; 3], |m, q| {
            [m[0] + q.x / n, m[1] + q.y / n, m[2] + q.z / n]
        })
    };
    let mut out = vec![mean(&cloud)];
    for _ in 0..n_kicks {
        for q in cloud.iter_mut() {
            *q = classical_kick_map(*q, k, p);
        }
        out.push(mean(&cloud));
    }
    out
}

/// `ln S / lambda`, in kicks.
pub fn ehrenfest_time(lambda: f64, s: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveExponent(lambda));
    }
    Ok(s.ln() / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialState, Rotation};
    use crate::spin::SpinQuantum;
    use std::f64::consts::PI;

    fn fig4_start() -> SpherePoint {
        SpherePoint::new(0.5, 0.5f64.sqrt(), 0.5)
    }

    #[test]
    fn zero_torsion_is_z_rotation() {
        let pt = SpherePoint::new(0.3, -0.4, 0.75f64.sqrt());
        let q = classical_kick_map(pt, 0.0, 0.7);
        let (s, c) = 0.7f64.sin_cos();
        assert!((q.x - (0.3 * c + 0.4 * s)).abs() < 1e-12);
        assert!((q.y - (0.3 * s - 0.4 * c)).abs() < 1e-12);
        assert!((q.z - pt.z).abs() < 1e-12);
    }

    #[test]
    fn x_axis_with_quarter_turn() {
        let q = classical_kick_map(SpherePoint::new(1.0, 0.0, 0.0), 3.0, PI / 2.0);
        assert!(q.distance(SpherePoint::new(0.0, 1.0, 0.0)) < 1e-12);
    }

    #[test]
    fn map_preserves_sphere() {
        let mut pt = fig4_start();
        for _ in 0..10_000 {
            pt = classical_kick_map(pt, 3.0, PI / 2.0);
            let n = pt.x * pt.x + pt.y * pt.y + pt.z * pt.z;
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_map_matches_finite_difference() {
        let pt = SpherePoint::new(0.2, 0.7, -0.5);
        let v = [0.1, -0.3, 0.4];
        let (_, jv) = kick_with_tangent(pt, v, 2.3, 0.9);
        let h = 1e-6;
        let f = |s: f64| {
            // map on R^3 without renormalisation
            let (sp, cp) = 0.9f64.sin_cos();
            let a = [pt.x + s * v[0], pt.y + s * v[1], pt.z + s * v[2]];
            let q = [a[0] * cp - a[1] * sp, a[0] * sp + a[1] * cp, a[2]];
            let (st, ct) = (2.3 * q[0]).sin_cos();
            [q[0], q[1] * ct - q[2] * st, q[1] * st + q[2] * ct]
        };
        let (a, b) = (f(h), f(-h));
        for i in 0..3 {
            assert!(((a[i] - b[i]) / (2.0 * h) - jv[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn no_torsion_has_zero_exponent() {
        let est = lyapunov_exponent(fig4_start(), 0.0, PI / 2.0, 2000, 1).unwrap();
        assert!(est.lambda.abs() < 1e-6);
    }

    #[test]
    fn chaotic_and_regular_regimes() {
        let chaotic = lyapunov_exponent(fig4_start(), 3.0, PI / 2.0, 20_000, 1).unwrap();
        assert!(chaotic.lambda > 0.1, "{}", chaotic.lambda);
        let regular =
            lyapunov_exponent(SpherePoint::new(0.3, 0.2, 0.93), 0.5, PI / 2.0, 20_000, 1).unwrap();
        assert!(regular.is_regular(REGULAR_THRESHOLD), "{}", regular.lambda);
    }

    #[test]
    fn renormalisation_interval_does_not_matter() {
        let a = lyapunov_exponent(fig4_start(), 3.0, PI / 2.0, 5000, 1).unwrap();
        let b = lyapunov_exponent(fig4_start(), 3.0, PI / 2.0, 5000, 10).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-3);
        assert_eq!(b.log_stretches.len(), 500);
    }

    #[test]
    fn exponent_grows_with_kick_strength_on_average() {
        let starts = SpherePoint::random(60, 4);
        let mean = |k: f64| {
            let est = lyapunov_ensemble(&starts, k, PI / 2.0, 2000, 5, Exec::Parallel).unwrap();
            est.iter().map(|e| e.lambda).sum::<f64>() / est.len() as f64
        };
        let ks = [0.0, 1.0, 2.5, 4.0, 6.0];
        let lams: Vec<f64> = ks.iter().map(|&k| mean(k)).collect();
        assert!(lams.windows(2).all(|w| w[1] > w[0]), "{lams:?}");
    }

    #[test]
    fn too_few_steps_rejected() {
        assert!(lyapunov_exponent(fig4_start(), 3.0, 1.0, 99, 1).is_err());
    }

    #[test]
    fn ehrenfest_examples() {
        assert!((ehrenfest_time(1.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
        assert!((ehrenfest_time(0.5, 100.0).unwrap() - 9.2103).abs() < 1e-4);
        assert_eq!(
            ehrenfest_time(0.0, 10.0),
            Err(Error::NonPositiveExponent(0.0))
        );
    }

    #[test]
    fn quantum_classical_correspondence() {
        let spin = SpinQuantum::from_twice(1000);
        let ops = CollectiveOps::new(spin);
        let init = InitialState::along_x()
            .then(Rotation::z(PI / 4.0))
            .then(Rotation::new(Axis::Y, -PI / 4.0));
        let mut psi = init.prepare(&ops);
        let mut pt = SpherePoint::from_state(&ops, &psi);
        assert!(pt.distance(fig4_start()) < 1e-3);
        // a single orbit only follows the packet centre until it spreads
        for _ in 0..3 {
            ops.kicked_top_step(&mut psi, 3.0, PI / 2.0);
            pt = classical_kick_map(pt, 3.0, PI / 2.0);
            let q = SpherePoint::from_state(&ops, &psi);
            assert!(q.distance(pt) < 0.05, "{q:?} {pt:?}");
        }
    }

    #[test]
    fn wigner_cloud_tracks_quantum_mean() {
        let spin = SpinQuantum::from_twice(1000);
        let ops = CollectiveOps::new(spin);
        let init = InitialState::along_x()
            .then(Rotation::z(PI / 4.0))
            .then(Rotation::new(Axis::Y, -PI / 4.0));
        let mut psi = init.prepare(&ops);
        let cloud = truncated_wigner_mean(fig4_start(), 3.0, PI / 2.0, 500.0, 8, 20_000, 3);
        for m in cloud.iter().skip(1) {
            ops.kicked_top_step(&mut psi, 3.0, PI / 2.0);
            let q = SpherePoint::from_state(&ops, &psi).as_array();
            let d = ((0..3).map(|i| (q[i] - m[i]).powi(2)).sum::<f64>()).sqrt();
            assert!(d < 0.03, "{d}");
        }
    }
}
