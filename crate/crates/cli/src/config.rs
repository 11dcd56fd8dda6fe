use carleman_core::carleman::S0Policy;
use carleman_core::coefficients::{CoefficientDescriptor, DegeneracyCoefficient};
use carleman_core::functionals::HardyCase;
use carleman_core::pde_solver::{BoundaryRegime, ExactSolution, Scheme};
use carleman_core::weights::BridgeKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Classify,
    Hardy,
    Energy,
    CarlemanSweep,
    LemmaChecks,
    Observability,
    NullControl,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Classify => "classify",
            Experiment::Hardy => "hardy",
            Experiment::Energy => "energy",
            Experiment::CarlemanSweep => "carleman_sweep",
            Experiment::LemmaChecks => "lemma_checks",
            Experiment::Observability => "observability",
            Experiment::NullControl => "null_control",
            Experiment::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_intervals")]
    pub intervals: usize,
    #[serde(default = "default_intervals")]
    pub time_steps: usize,
    /// Nodes `x_i = (i/N)^p`.
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "one", rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            intervals: default_intervals(),
            time_steps: default_intervals(),
            grading: default_grading(),
            horizon: 1.0,
            scheme: Scheme::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightParams {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_multipliers")]
    pub s_multipliers: Vec<f64>,
    #[serde(default)]
    pub s0_policy: S0Policy,
    /// Smallest λ of the stable region.
    #[serde(default)]
    pub lambda0: Option<f64>,
    /// Defaults to the middle half of ω.
    #[serde(default)]
    pub alpha_prime: Option<f64>,
    #[serde(default)]
    pub beta_prime: Option<f64>,
    #[serde(default)]
    pub bridge: BridgeKind,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            lambdas: default_lambdas(),
            s_multipliers: default_multipliers(),
            s0_policy: S0Policy::default(),
            lambda0: None,
            alpha_prime: None,
            beta_prime: None,
            bridge: BridgeKind::default(),
            quad_points: default_quad_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    #[serde(default)]
    pub initial_state: InitialState,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            cg_tol: default_cg_tol(),
            cg_max_iter: default_cg_max_iter(),
            initial_state: InitialState::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// First eigenfunction of the Laplacian compatible with the regime.
    #[default]
    Smooth,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    #[serde(default = "default_spatial")]
    pub spatial_intervals: Vec<usize>,
    #[serde(default = "default_spatial_steps")]
    pub spatial_time_steps: usize,
    #[serde(default = "default_temporal")]
    pub temporal_steps: Vec<usize>,
    #[serde(default = "default_temporal_intervals")]
    pub temporal_intervals: usize,
    #[serde(default)]
    pub exact: Option<ExactSolution>,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        Self {
            spatial_intervals: default_spatial(),
            spatial_time_steps: default_spatial_steps(),
            temporal_steps: default_temporal(),
            temporal_intervals: default_temporal_intervals(),
            exact: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub coefficient: CoefficientDescriptor,
    /// Condition at `x = 0`; inferred from the coefficient when absent.
    #[serde(default)]
    pub regime: Option<BoundaryRegime>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default = "default_omega")]
    pub omega: [f64; 2],
    #[serde(default)]
    pub weights: WeightParams,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub convergence: ConvergenceParams,
    #[serde(default)]
    pub hardy_cases: Option<Vec<HardyCase>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}
fn default_intervals() -> usize {
    128
}
fn default_grading() -> f64 {
    2.0
}
fn default_lambdas() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn default_multipliers() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}
fn default_quad_points() -> usize {
    16
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-4, 1e-6, 1e-8]
}
fn default_cg_tol() -> f64 {
    carleman_core::control::DEFAULT_CG_TOL
}
fn default_cg_max_iter() -> usize {
    carleman_core::control::DEFAULT_CG_MAX_ITER
}
fn default_spatial() -> Vec<usize> {
    vec![64, 128, 256]
}
fn default_spatial_steps() -> usize {
    1024
}
fn default_temporal() -> Vec<usize> {
    vec![16, 32, 64, 128]
}
fn default_temporal_intervals() -> usize {
    128
}
fn default_omega() -> [f64; 2] {
    [0.3, 0.7]
}
fn default_seed() -> u64 {
    20_240_917
}
fn default_samples() -> usize {
    20
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A config that failed to parse or validate, with one message per field.
#[derive(Debug)]
pub struct ConfigError {
    pub messages: Vec<String>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for m in &self.messages {
            writeln!(f, "  {m}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(msg: String) -> Self {
        Self { messages: vec![msg] }
    }
}

/// Raw bytes and parsed config. The bytes are kept for hashing.
pub fn load(path: &Path) -> Result<(Vec<u8>, ExperimentConfig), ConfigError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ConfigError::single(format!("config: cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_slice(&bytes).map_err(|e| ConfigError::single(format!("config: {e}")))?;
    Ok((bytes, cfg))
}

fn positive_grid(name: &str, v: &[f64], errs: &mut Vec<String>) {
    if v.is_empty() {
        errs.push(format!("{name}: must be nonempty"));
    } else if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        errs.push(format!("{name}: entry {x} must be positive and finite"));
    }
}

fn increasing(name: &str, v: &[usize], min_len: usize, errs: &mut Vec<String>) {
    if v.len() < min_len {
        errs.push(format!("{name}: needs at least {min_len} entries"));
    } else if v.windows(2).any(|w| w[1] <= w[0]) || v.iter().any(|n| *n < 2) {
        errs.push(format!("{name}: entries must be >= 2 and strictly increasing"));
    }
}

impl ExperimentConfig {
    /// Field-level checks beyond what the JSON schema enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if let Err(e) = DegeneracyCoefficient::from_descriptor(&self.coefficient) {
            errs.push(format!("coefficient: {e}"));
        }
        let m = &self.mesh;
        if m.intervals < 2 {
            errs.push(format!("mesh.intervals: {} must be >= 2", m.intervals));
        }
        if m.time_steps < 1 {
            errs.push("mesh.time_steps: must be >= 1".into());
        }
        if !(m.grading >= 1.0 && m.grading.is_finite()) {
            errs.push(format!("mesh.grading: {} must be >= 1", m.grading));
        }
        if !(m.horizon > 0.0 && m.horizon.is_finite()) {
            errs.push(format!("mesh.T: {} must be positive", m.horizon));
        }
        let [a, b] = self.omega;
        if !(0.0 < a && a < b && b < 1.0) {
            errs.push(format!("omega: ({a}, {b}) must satisfy 0 < alpha < beta < 1"));
        }
        let w = &self.weights;
        positive_grid("weights.lambdas", &w.lambdas, &mut errs);
        positive_grid("weights.s_multipliers", &w.s_multipliers, &mut errs);
        match w.s0_policy {
            S0Policy::PeakExponent { target } | S0Policy::LocalScale { target } if !(target > 0.0 && target.is_finite()) => {
                errs.push(format!("weights.s0_policy.target: {target} must be positive"))
            }
            S0Policy::Fixed { s0 } if !(s0 > 0.0 && s0.is_finite()) => {
                errs.push(format!("weights.s0_policy.s0: {s0} must be positive"))
            }
            _ => {}
        }
        let (ap, bp) = self.omega_prime();
        if 0.0 < a && a < b && b < 1.0 && !(a < ap && ap < bp && bp < b) {
            errs.push(format!("weights.alpha_prime/beta_prime: ({ap}, {bp}) must lie strictly inside omega"));
        }
        if w.quad_points < 2 {
            errs.push("weights.quad_points: must be >= 2".into());
        }
        positive_grid("control.epsilons", &self.control.epsilons, &mut errs);
        if !(self.control.cg_tol.is_finite() && self.control.cg_tol > 0.0) {
            errs.push("control.cg_tol: must be positive".into());
        }
        if self.control.cg_max_iter == 0 {
            errs.push("control.cg_max_iter: must be >= 1".into());
        }
        let c = &self.convergence;
        increasing("convergence.spatial_intervals", &c.spatial_intervals, 2, &mut errs);
        increasing("convergence.temporal_steps", &c.temporal_steps, 3, &mut errs);
        if c.temporal_steps.windows(2).any(|w| w[1] % w[0] != 0) {
            errs.push("convergence.temporal_steps: each entry must divide the next".into());
        }
        if c.temporal_intervals < 2 || c.spatial_time_steps < 1 {
            errs.push("convergence: temporal_intervals must be >= 2 and spatial_time_steps >= 1".into());
        }
        if matches!(&self.hardy_cases, Some(v) if v.is_empty()) {
            errs.push("hardy_cases: must be nonempty when given".into());
        }
        if self.samples == 0 {
            errs.push("samples: must be >= 1".into());
        }
        if self.output_dir.as_os_str().is_empty() {
            errs.push("output_dir: must be nonempty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { messages: errs })
        }
    }

    pub fn omega_prime(&self) -> (f64, f64) {
        let (ap, bp) = carleman_core::weights::default_omega_prime(self.omega[0], self.omega[1]);
        (self.weights.alpha_prime.unwrap_or(ap), self.weights.beta_prime.unwrap_or(bp))
    }
}

/// Fails with a field message if `dir` cannot be created or written.
pub fn check_writable(dir: &Path) -> Result<(), ConfigError> {
    let fail = |e: std::io::Error| ConfigError::single(format!("output_dir: {} is not writable: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(fail)?;
    std::fs::remove_file(&probe).map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentConfig, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(r#"{"experiment":"classify","coefficient":{"kind":"power","params":{"gamma":0.5}}}"#).unwrap();
        assert_eq!(cfg.mesh.intervals, 128);
        assert_eq!(cfg.weights.s0_policy, S0Policy::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_coefficient_is_named() {
        let err = parse(r#"{"experiment":"classify"}"#).unwrap_err();
        assert!(err.contains("coefficient"), "{err}");
    }

    #[test]
    fn validation_collects_every_bad_field() {
        let mut cfg = parse(r#"{"experiment":"hardy","coefficient":{"kind":"power","params":{"gamma":0.5}}}"#).unwrap();
        cfg.omega = [0.6, 0.4];
        cfg.weights.lambdas.clear();
        cfg.samples = 0;
        let msgs = cfg.validate().unwrap_err().messages;
        for field in ["omega", "weights.lambdas", "samples"] {
            assert!(msgs.iter().any(|m| m.starts_with(field)), "{field} not in {msgs:?}");
        }
    }

    #[test]
    fn omega_prime_defaults_inside_omega() {
        let cfg = parse(r#"{"experiment":"hardy","coefficient":{"kind":"power","params":{"gamma":1.5}}}"#).unwrap();
        let (ap, bp) = cfg.omega_prime();
        assert!(0.3 < ap && ap < bp && bp < 0.7);
    }
}
