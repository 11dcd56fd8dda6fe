//! Degenerate diffusion coefficients `a(x)` and grid certification of the
//! structural hypothesis `x a'(x) ≤ K a(x)` (plus the lower bound
//! `θ a ≤ x a'` near zero in the strongly degenerate case).

mod table;

pub use table::MonotoneCubic;

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Width of the band around `K = 1` treated as exactly one.
pub const K_ONE_TOL: f64 = 1e-9;
/// `theta_hyp` reported when `K = 1` and the ratio never dips below one.
pub const BOUNDARY_THETA: f64 = 0.99;
/// Left end of the logarithmic certification grid.
pub const LOG_GRID_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCosParams {
    pub gamma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub theta: f64,
}

/// JSON exchange form: `{"kind": "...", "params": {...}}` or
/// `{"kind": "table", "x": [...], "a": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientDescriptor {
    Power { params: PowerParams },
    PowerCos { params: PowerCosParams },
    PowerMinusX { params: ThetaParams },
    PowerPlusX { params: ThetaParams },
    Table { x: Vec<f64>, a: Vec<f64> },
}

/// The example families with their admissible parameter ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleCoefficient {
    /// `x^γ cos(βx)` with `β = arctan α`.
    PowerCos { gamma: f64, alpha: f64 },
    /// `x^θ − x`, `θ ∈ (0,1)`.
    PowerMinusX { theta: f64 },
    /// `x^θ + x`, `θ ∈ (1,2)`.
    PowerPlusX { theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Power { gamma: f64 },
    PowerCos { gamma: f64, alpha: f64, beta: f64 },
    PowerMinusX { theta: f64 },
    PowerPlusX { theta: f64 },
    Table(MonotoneCubic),
}

/// A diffusion coefficient vanishing at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyCoefficient {
    shape: Shape,
    label: String,
}

pub fn make_power_coefficient(gamma: f64) -> Result<DegeneracyCoefficient> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(LabError::OutOfRange(format!(
            "power exponent gamma = {gamma} must lie in (0, 2)"
        )));
    }
    Ok(DegeneracyCoefficient {
        shape: Shape::Power { gamma },
        label: format!("x^{gamma}"),
    })
}

pub fn make_example_coefficient(example: ExampleCoefficient) -> Result<DegeneracyCoefficient> {
    match example {
        ExampleCoefficient::PowerCos { gamma, alpha } => {
            if !(gamma > 0.0 && gamma < 2.0) || gamma == 1.0 {
                return Err(LabError::OutOfRange(format!(
                    "power_cos: gamma = {gamma} must lie in (0,1) ∪ (1,2)"
                )));
            }
            if !(alpha >= 0.0) || !alpha.is_finite() {
                return Err(LabError::OutOfRange(format!(
                    "power_cos: alpha = {alpha} must be >= 0"
                )));
            }
            // a' ≥ 0 on [0,1] ⇔ γ ≥ βx·tan(βx) for x ≤ 1, and β·tan β = α·arctan α
            if alpha * alpha.atan() > gamma {
                return Err(LabError::OutOfRange(format!(
                    "power_cos: alpha·arctan(alpha) = {:.4} exceeds gamma = {gamma}; a would decrease near x = 1",
                    alpha * alpha.atan()
                )));
            }
            Ok(DegeneracyCoefficient {
                shape: Shape::PowerCos {
                    gamma,
                    alpha,
                    beta: alpha.atan(),
                },
                label: format!("x^{gamma}·cos(arctan({alpha})·x)"),
            })
        }
        ExampleCoefficient::PowerMinusX { theta } => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(LabError::OutOfRange(format!(
                    "power_minus_x: theta = {theta} must lie in (0, 1)"
                )));
            }
            Ok(DegeneracyCoefficient {
                shape: Shape::PowerMinusX { theta },
                label: format!("x^{theta} - x"),
            })
        }
        ExampleCoefficient::PowerPlusX { theta } => {
            if !(theta > 1.0 && theta < 2.0) {
                return Err(LabError::OutOfRange(format!(
                    "power_plus_x: theta = {theta} must lie in (1, 2)"
                )));
            }
            Ok(DegeneracyCoefficient {
                shape: Shape::PowerPlusX { theta },
                label: format!("x^{theta} + x"),
            })
        }
    }
}

/// Tabulated coefficient with monotone cubic interpolation.
pub fn make_table_coefficient(x: Vec<f64>, a: Vec<f64>) -> Result<DegeneracyCoefficient> {
    if x.first() != Some(&0.0) || x.last() != Some(&1.0) {
        return Err(LabError::InvalidTable("x must start at 0 and end at 1".into()));
    }
    if a.first() != Some(&0.0) {
        return Err(LabError::InvalidTable("a(0) must be 0".into()));
    }
    if a.iter().skip(1).any(|v| *v <= 0.0) {
        return Err(LabError::InvalidTable("a must be positive on (0, 1]".into()));
    }
    if a.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::InvalidTable("a must be nondecreasing".into()));
    }
    let n = x.len();
    Ok(DegeneracyCoefficient {
        shape: Shape::Table(MonotoneCubic::new(x, a)?),
        label: format!("table[{n}]"),
    })
}

impl DegeneracyCoefficient {
    pub fn from_descriptor(desc: &CoefficientDescriptor) -> Result<Self> {
        match desc {
            CoefficientDescriptor::Power { params } => make_power_coefficient(params.gamma),
            CoefficientDescriptor::PowerCos { params } => {
                make_example_coefficient(ExampleCoefficient::PowerCos {
                    gamma: params.gamma,
                    alpha: params.alpha,
                })
            }
            CoefficientDescriptor::PowerMinusX { params } => {
                make_example_coefficient(ExampleCoefficient::PowerMinusX {
                    theta: params.theta,
                })
            }
            CoefficientDescriptor::PowerPlusX { params } => {
                make_example_coefficient(ExampleCoefficient::PowerPlusX {
                    theta: params.theta,
                })
            }
            CoefficientDescriptor::Table { x, a } => make_table_coefficient(x.clone(), a.clone()),
        }
    }

    pub fn descriptor(&self) -> CoefficientDescriptor {
        match &self.shape {
            Shape::Power { gamma } => CoefficientDescriptor::Power {
                params: PowerParams { gamma: *gamma },
            },
            Shape::PowerCos { gamma, alpha, .. } => CoefficientDescriptor::PowerCos {
                params: PowerCosParams {
                    gamma: *gamma,
                    alpha: *alpha,
                },
            },
            Shape::PowerMinusX { theta } => CoefficientDescriptor::PowerMinusX {
                params: ThetaParams { theta: *theta },
            },
            Shape::PowerPlusX { theta } => CoefficientDescriptor::PowerPlusX {
                params: ThetaParams { theta: *theta },
            },
            Shape::Table(c) => {
                let (x, a) = c.nodes();
                CoefficientDescriptor::Table {
                    x: x.to_vec(),
                    a: a.to_vec(),
                }
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        match &self.shape {
            Shape::Power { gamma } => x.powf(*gamma),
            Shape::PowerCos { gamma, beta, .. } => x.powf(*gamma) * (beta * x).cos(),
            Shape::PowerMinusX { theta } => x.powf(*theta) - x,
            Shape::PowerPlusX { theta } => x.powf(*theta) + x,
            Shape::Table(c) => c.eval_all(x).0,
        }
    }

    /// `a'(x)` for `x ∈ (0, 1]`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { gamma } => gamma * x.powf(gamma - 1.0),
            Shape::PowerCos { gamma, beta, .. } => {
                gamma * x.powf(gamma - 1.0) * (beta * x).cos()
                    - beta * x.powf(*gamma) * (beta * x).sin()
            }
            Shape::PowerMinusX { theta } => theta * x.powf(theta - 1.0) - 1.0,
            Shape::PowerPlusX { theta } => theta * x.powf(theta - 1.0) + 1.0,
            Shape::Table(c) => c.eval_all(x).1,
        }
    }

    /// `a''(x)` for `x ∈ (0, 1]`; piecewise for tables.
    pub fn eval_deriv2(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { gamma } => gamma * (gamma - 1.0) * x.powf(gamma - 2.0),
            Shape::PowerCos { gamma, beta, .. } => {
                let (s, c) = (beta * x).sin_cos();
                gamma * (gamma - 1.0) * x.powf(gamma - 2.0) * c
                    - 2.0 * gamma * beta * x.powf(gamma - 1.0) * s
                    - beta * beta * x.powf(*gamma) * c
            }
            Shape::PowerMinusX { theta } | Shape::PowerPlusX { theta } => {
                theta * (theta - 1.0) * x.powf(theta - 2.0)
            }
            Shape::Table(c) => c.eval_all(x).2,
        }
    }

    /// `x a'(x) / a(x)`, the local degeneracy exponent.
    pub fn log_slope(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { gamma } => *gamma,
            _ => x * self.eval_deriv(x) / self.eval(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "WDC")]
    Wdc,
    #[serde(rename = "SDC")]
    Sdc,
    Violation,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Wdc => "WDC",
            Regime::Sdc => "SDC",
            Regime::Violation => "Violation",
        })
    }
}

/// Grid certificate of the structural hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    #[serde(rename = "K_est")]
    pub k_est: f64,
    pub regime: Regime,
    pub theta_hyp: Option<f64>,
    /// `K = 1` with a deterministic choice of `theta_hyp`.
    pub boundary_case: bool,
    pub neighborhood_radius: f64,
    pub grid_size: usize,
    pub positive_on_grid: bool,
    pub nondecreasing_on_grid: bool,
    pub violation: Option<String>,
}

impl HypothesisReport {
    /// Regime is WDC/SDC and `a` is positive and nondecreasing on the grid.
    pub fn admissible(&self) -> bool {
        self.regime != Regime::Violation && self.positive_on_grid && self.nondecreasing_on_grid
    }
}

/// `n` logarithmically spaced points in `[lo, 1]`.
pub fn log_grid(lo: f64, n: usize) -> Vec<f64> {
    let l = lo.ln();
    (0..n)
        .map(|i| {
            if i + 1 == n {
                1.0
            } else {
                (l * (1.0 - i as f64 / (n - 1) as f64)).exp()
            }
        })
        .collect()
}

/// Certifies `x a' ≤ K a` on a log grid and, for `K ≥ 1`, the lower bound
/// `θ a ≤ x a'` on `(0, zero_neighborhood]`.
///
/// Points where `a` vanishes only constrain `x a' ≤ 0`; the positivity and
/// monotonicity of `a` are reported as separate flags.
pub fn classify(
    coef: &DegeneracyCoefficient,
    grid_size: usize,
    zero_neighborhood: f64,
) -> Result<HypothesisReport> {
    if grid_size < 64 {
        return Err(LabError::OutOfRange(format!(
            "grid_size = {grid_size} must be >= 64"
        )));
    }
    if !(zero_neighborhood > 0.0 && zero_neighborhood <= 0.5) {
        return Err(LabError::OutOfRange(format!(
            "zero_neighborhood = {zero_neighborhood} must lie in (0, 0.5]"
        )));
    }
    let grid = log_grid(LOG_GRID_MIN, grid_size);
    let mut report = HypothesisReport {
        k_est: f64::NEG_INFINITY,
        regime: Regime::Violation,
        theta_hyp: None,
        boundary_case: false,
        neighborhood_radius: zero_neighborhood,
        grid_size,
        positive_on_grid: true,
        nondecreasing_on_grid: true,
        violation: None,
    };
    let a_max = grid.iter().map(|&x| coef.eval(x).abs()).fold(0.0, f64::max);
    let mut prev_a = 0.0;
    let mut min_near_zero = f64::INFINITY;
    for &x in &grid {
        let a = coef.eval(x);
        let da = coef.eval_deriv(x);
        if !a.is_finite() || !da.is_finite() {
            report.violation = Some(format!("non-finite a or a' at x = {x:e}"));
            return Ok(report);
        }
        if a < prev_a - 1e-12 * a_max {
            report.nondecreasing_on_grid = false;
        }
        prev_a = a;
        if a < 0.0 {
            report.positive_on_grid = false;
            report.violation = Some(format!("a({x:e}) = {a:e} < 0"));
            return Ok(report);
        }
        if a == 0.0 {
            report.positive_on_grid = false;
            if x * da > 0.0 {
                report.violation =
                    Some(format!("a({x:e}) = 0 with x a' > 0: no finite K exists"));
                return Ok(report);
            }
            continue;
        }
        let ratio = coef.log_slope(x);
        if !ratio.is_finite() {
            report.violation = Some(format!("non-finite x a'/a at x = {x:e}"));
            return Ok(report);
        }
        report.k_est = report.k_est.max(ratio);
        if x <= zero_neighborhood {
            min_near_zero = min_near_zero.min(ratio);
        }
    }
    let k = report.k_est;
    if (k - 1.0).abs() <= K_ONE_TOL {
        if min_near_zero > 0.0 {
            report.regime = Regime::Sdc;
            report.theta_hyp = Some(min_near_zero.min(BOUNDARY_THETA));
            report.boundary_case = true;
        } else {
            report.violation = Some("K = 1 but x a'/a ≤ 0 near zero".into());
        }
    } else if (0.0..1.0).contains(&k) || (k < 0.0 && k > -1e-12) {
        report.regime = Regime::Wdc;
    } else if k > 1.0 && k < 2.0 {
        if min_near_zero > 1.0 {
            report.regime = Regime::Sdc;
            report.theta_hyp = Some(min_near_zero);
        } else {
            report.violation = Some(format!(
                "no theta in (1, K] with theta·a ≤ x a' on (0, {zero_neighborhood}]: min ratio = {min_near_zero}"
            ));
        }
    } else {
        report.violation = Some(format!("K_est = {k} outside [0, 2)"));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub holds: bool,
    pub violating_x: Option<f64>,
}

/// Checks that `x ↦ x^r / a(x)` is nondecreasing on a log grid and that
/// `x² / a(x) ≤ 1 / a(1)`.
pub fn monotone_ratio_check(coef: &DegeneracyCoefficient, r: f64) -> MonotoneCheck {
    let grid = log_grid(LOG_GRID_MIN, 2048);
    let a1 = coef.eval(1.0);
    let mut prev = f64::NEG_INFINITY;
    for &x in &grid {
        let a = coef.eval(x);
        let g = x.powf(r) / a;
        if g < prev * (1.0 - 1e-10) || !g.is_finite() {
            return MonotoneCheck {
                holds: false,
                violating_x: Some(x),
            };
        }
        prev = g;
        if x * x / a > (1.0 / a1) * (1.0 + 1e-10) {
            return MonotoneCheck {
                holds: false,
                violating_x: Some(x),
            };
        }
    }
    MonotoneCheck {
        holds: true,
        violating_x: None,
    }
}
