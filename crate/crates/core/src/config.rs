//! Run configuration, read from TOML. A run is reproducible from its config
//! and seed alone; thread count and output location are not part of it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::CavityParams;
use crate::model::{Dynamics, InitialState, ModelSpec, Rotation};
use crate::open::DissipationParams;
use crate::protocols::ProtocolSpec;
use crate::spin::Axis;

pub const DEFAULT_SEED: u64 = 1;

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ModelConfig {
    pub atoms: usize,
    #[serde(flatten)]
    pub dynamics: Dynamics,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Twisting,
    KickedTop,
}

/// The `[model]` table as written; flattening the tagged enum directly
/// would silently accept unknown keys.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    atoms: usize,
    kind: ModelKind,
    chi: Option<f64>,
    k: Option<f64>,
    p: Option<f64>,
}

impl TryFrom<RawModel> for ModelConfig {
    type Error = String;

    fn try_from(raw: RawModel) -> std::result::Result<Self, String> {
        let dynamics = match (raw.kind, raw.chi, raw.k, raw.p) {
            (ModelKind::Twisting, Some(chi), None, None) => Dynamics::Twisting { chi },
            (ModelKind::Twisting, None, _, _) => return Err("twisting needs `chi`".into()),
            (ModelKind::Twisting, ..) => return Err("twisting takes only `chi`".into()),
            (ModelKind::KickedTop, None, Some(k), Some(p)) => Dynamics::KickedTop { k, p },
            (ModelKind::KickedTop, Some(_), ..) => {
                return Err("the kicked top takes `k` and `p`, not `chi`".into())
            }
            (ModelKind::KickedTop, ..) => return Err("the kicked top needs `k` and `p`".into()),
        };
        Ok(Self {
            atoms: raw.atoms,
            dynamics,
        })
    }
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            atoms: self.atoms,
            dynamics: self.dynamics,
        }
    }
}

/// Rotation angle, either a number or a rule evaluated for the atom count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Value(f64),
    Rule(AngleRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRule {
    /// `1/sqrt(N)`.
    InvSqrtN,
}

impl Angle {
    pub fn resolve(self, atoms: usize) -> f64 {
        match self {
            Angle::Value(v) => v,
            Angle::Rule(AngleRule::InvSqrtN) => 1.0 / (atoms as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_axis")]
    pub axis: Axis,
    pub angle: Angle,
}

fn default_axis() -> Axis {
    Axis::Z
}

impl OperatorConfig {
    pub fn rotation(&self, atoms: usize) -> Rotation {
        Rotation::new(self.axis, self.angle.resolve(atoms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorsConfig {
    pub v: OperatorConfig,
    pub w: OperatorConfig,
}

impl Default for OperatorsConfig {
    fn default() -> Self {
        let op = OperatorConfig {
            axis: Axis::Z,
            angle: Angle::Rule(AngleRule::InvSqrtN),
        };
        Self { v: op, w: op }
    }
}

/// Either an explicit list or `start, start + step, ..., stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl TimeGrid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Self {
            values: None,
            start,
            stop: Some(stop),
            step: Some(step),
        }
    }

    pub fn list(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    pub fn kicks(n: usize) -> Self {
        Self::range(0.0, n as f64, 1.0)
    }

    /// Grid points; `path` names the table in errors.
    pub fn points(&self, path: &str) -> Result<Vec<f64>> {
        match (&self.values, self.stop, self.step) {
            (Some(v), None, None) => Ok(v.clone()),
            (None, Some(stop), step) => {
                let step = step.unwrap_or(1.0);
                if !(step > 0.0) || !step.is_finite() {
                    return Err(config_err(&format!("{path}.step"), "must be positive"));
                }
                if !(stop >= self.start) {
                    return Err(config_err(
                        &format!("{path}.stop"),
                        "must not precede start",
                    ));
                }
                let n = ((stop - self.start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| self.start + i as f64 * step).collect())
            }
            (Some(_), _, _) => Err(config_err(
                path,
                "give either `values` or `stop`/`step`, not both",
            )),
            (None, None, _) => Err(config_err(
                &format!("{path}.stop"),
                "missing (or give `values`)",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationConfig {
    pub eta: f64,
    /// Cavity detuning in linewidths; `sqrt(8 eta)` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default = "default_budget")]
    pub photon_budget: usize,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    /// Write one JSON line per trajectory.
    #[serde(default = "default_true")]
    pub trajectory_log: bool,
}

fn default_budget() -> usize {
    5
}
fn default_n_traj() -> usize {
    200
}
fn default_true() -> bool {
    true
}

impl DissipationConfig {
    /// Rates for a model; the twisting model supplies its own `chi`, the
    /// kicked top works in units of `chi = 1`.
    pub fn params(&self, model: &ModelSpec) -> Result<DissipationParams> {
        let chi = match model.dynamics {
            Dynamics::Twisting { chi } => chi,
            Dynamics::KickedTop { .. } => 1.0,
        };
        let d = match self.d {
            Some(d) => d,
            None => crate::feasibility::d_opt(self.eta)
                .map_err(|e| config_err("dissipation.d", format!("no detuning given and {e}")))?,
        };
        let mut p = DissipationParams::new(chi, self.eta, d)
            .map_err(|e| config_err("dissipation", e.to_string()))?;
        p.photon_budget = self.photon_budget;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    /// Snapshot times; the main time grid if empty.
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_phi: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_one")]
    pub renorm_interval: usize,
    /// Random start points in addition to the initial-state direction.
    #[serde(default = "default_starts")]
    pub n_random: usize,
}

fn default_steps() -> usize {
    10_000
}
fn default_one() -> usize {
    1
}
fn default_starts() -> usize {
    64
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            n_steps: default_steps(),
            renorm_interval: 1,
            n_random: default_starts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityConfig {
    pub cavity: CavityParams,
    /// Detuning for the loss-rate ratio; `d_opt` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    crate::observables::DEFAULT_THRESHOLD
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default = "InitialState::along_x")]
    pub initial: InitialState,
    #[serde(default)]
    pub operators: OperatorsConfig,
    #[serde(default)]
    pub times: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<DissipationConfig>,
    #[serde(default)]
    pub wigner: WignerConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityConfig>,
    #[serde(default)]
    pub decay: DecayConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| config_err("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(
                if path.is_empty() { "." } else { &path },
                e.into_inner().message().trim(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(&path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Semantic checks, reported with the offending field path.
    pub fn validate(&self) -> Result<()> {
        let model = self.model.spec();
        model
            .validate()
            .map_err(|e| config_err("model", e.to_string()))?;
        self.initial
            .validate()
            .map_err(|e| config_err("initial", e.to_string()))?;
        for (name, op) in [
            ("operators.v", &self.operators.v),
            ("operators.w", &self.operators.w),
        ] {
            op.rotation(self.model.atoms)
                .validate()
                .map_err(|e| config_err(&format!("{name}.angle"), e.to_string()))?;
        }
        let times = self.time_points()?;
        for (i, &t) in times.iter().enumerate() {
            model
                .check_time(t)
                .map_err(|e| config_err(&format!("times[{i}]"), e.to_string()))?;
        }
        for (i, pair) in times.windows(2).enumerate() {
            if pair[1] < pair[0] {
                return Err(config_err(
                    &format!("times[{}]", i + 1),
                    "times must be non-decreasing",
                ));
            }
        }
        if let Some(d) = &self.dissipation {
            if d.n_traj == 0 {
                return Err(config_err(
                    "dissipation.n_traj",
                    "at least one trajectory is required",
                ));
            }
            d.params(&model)?;
        }
        for (i, &t) in self.wigner.times.iter().enumerate() {
            model
                .check_time(t)
                .map_err(|e| config_err(&format!("wigner.times[{i}]"), e.to_string()))?;
        }
        if let Some(f) = &self.feasibility {
            f.cavity
                .validate()
                .map_err(|e| config_err("feasibility.cavity", e.to_string()))?;
        }
        if !(self.decay.threshold > 0.0 && self.decay.threshold <= 1.0) {
            return Err(config_err("decay.threshold", "must lie in (0, 1]"));
        }
        if self.lyapunov.renorm_interval == 0 {
            return Err(config_err("lyapunov.renorm_interval", "must be at least 1"));
        }
        if self.lyapunov.n_steps < crate::semiclassics::MIN_LYAPUNOV_STEPS {
            return Err(config_err(
                "lyapunov.n_steps",
                format!("need at least {}", crate::semiclassics::MIN_LYAPUNOV_STEPS),
            ));
        }
        Ok(())
    }

    pub fn time_points(&self) -> Result<Vec<f64>> {
        self.times.points("times")
    }

    pub fn protocol_spec(&self) -> Result<ProtocolSpec> {
        let atoms = self.model.atoms;
        Ok(ProtocolSpec {
            model: self.model.spec(),
            initial: self.initial.clone(),
            v: self.operators.v.rotation(atoms),
            w: self.operators.w.rotation(atoms),
            times: self.time_points()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [model]
        atoms = 20
        kind = "kicked_top"
        k = 3.0
        p = 1.5707963267948966

        [times]
        stop = 4
    "#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.time_points().unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let spec = cfg.protocol_spec().unwrap();
        assert!((spec.v.angle - 1.0 / 20f64.sqrt()).abs() < 1e-15);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn type_errors_name_the_field() {
        let text = MINIMAL.replace("atoms = 20", "atoms = \"many\"");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "model.atoms"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[dissipation]\neta = 100.0\nn_trajs = 3\n");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, message }) => {
                assert!(path.starts_with("dissipation"), "{path}");
                assert!(message.contains("n_trajs"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = MINIMAL.replace("stop = 4", "values = [0.0, 1.5]");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "times[1]"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[dissipation]\neta = 100.0\nn_traj = 0\n");
        match RunConfig::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "dissipation.n_traj"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[decay]\nthreshold = 1.5\n");
        assert!(
            matches!(RunConfig::from_toml_str(&text), Err(Error::Config { path, .. }) if path == "decay.threshold")
        );
    }

    #[test]
    fn detuning_defaults_to_optimum() {
        let text = format!("{MINIMAL}\n[dissipation]\neta = 100.0\n");
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let p = cfg.dissipation.unwrap().params(&cfg.model.spec()).unwrap();
        assert!((p.gamma() - p.mu()).abs() < 1e-15);
        assert_eq!(p.photon_budget, 5);
    }
}
