use super::{build_mesh, mesh_inner, solve_forward_with_source, BoundaryRegime, Field, ProblemSpec, Scheme};
use crate::coefficients::DegeneracyCoefficient;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Closed-form solutions for convergence studies: `[u, u_t, u_x, u_xx]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    /// `t·x(1 − x)`, linear in time.
    LinearInTime,
    /// `cos(2t)·sin(πx)`.
    Oscillating,
    /// `cos(2t)·cos(πx/2)`, zero slope at `x = 0`.
    OscillatingFlux,
}

impl ExactSolution {
    pub fn jet(self, t: f64, x: f64) -> [f64; 4] {
        match self {
            ExactSolution::LinearInTime => {
                let p = x * (1.0 - x);
                [t * p, p, t * (1.0 - 2.0 * x), -2.0 * t]
            }
            ExactSolution::Oscillating => {
                let (s, c) = (PI * x).sin_cos();
                let (ct, st) = ((2.0 * t).cos(), (2.0 * t).sin());
                [ct * s, -2.0 * st * s, ct * PI * c, -ct * PI * PI * s]
            }
            ExactSolution::OscillatingFlux => {
                let (s, c) = (0.5 * PI * x).sin_cos();
                let (ct, st) = ((2.0 * t).cos(), (2.0 * t).sin());
                [ct * c, -2.0 * st * c, -0.5 * PI * ct * s, -0.25 * PI * PI * ct * c]
            }
        }
    }
}

/// `u_t − (a u_x)_x + c u` at the nodes and time levels of `spec`. Nodes
/// with a Dirichlet condition get 0 (the solver never reads them, and `a′`
/// may be infinite at `x = 0`).
pub fn manufactured_source(spec: &ProblemSpec, exact: ExactSolution) -> Field {
    let coef = spec.coefficient();
    let first = spec.regime().first_unknown();
    let last = spec.mesh().intervals();
    spec.times()
        .iter()
        .map(|&t| {
            spec.mesh()
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    if i < first || i == last {
                        return 0.0;
                    }
                    let [u, ut, ux, uxx] = exact.jet(t, x);
                    let c = spec.potential().eval(t, x);
                    ut - coef.eval_deriv(x) * ux - coef.eval(x) * uxx + c * u
                })
                .collect()
        })
        .collect()
}

fn solve_manufactured(spec: &ProblemSpec, exact: ExactSolution) -> Result<Field> {
    let u0: Vec<f64> = spec.mesh().nodes().iter().map(|&x| exact.jet(0.0, x)[0]).collect();
    let f = manufactured_source(spec, exact);
    Ok(solve_forward_with_source(spec, &u0, None, Some(&f))?.values)
}

/// Discrete `L²(Q)` norm with trapezoid weights in both variables.
pub fn spacetime_l2(spec: &ProblemSpec, field: &Field) -> f64 {
    spec.time_weights()
        .iter()
        .zip(field)
        .map(|(tau, row)| tau * mesh_inner(spec.mesh(), row, row))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub intervals: usize,
    pub time_steps: usize,
    pub error: f64,
    /// `log2` of the error ratio to the previous row.
    pub order: Option<f64>,
}

fn with_orders(mut rows: Vec<RefinementRow>) -> Vec<RefinementRow> {
    for k in 1..rows.len() {
        rows[k].order = Some((rows[k - 1].error / rows[k].error).log2());
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySetup {
    pub coefficient: DegeneracyCoefficient,
    pub regime: BoundaryRegime,
    pub horizon: f64,
    pub grading: f64,
    pub scheme: Scheme,
    pub exact: ExactSolution,
}

impl StudySetup {
    fn spec(&self, n: usize, m: usize) -> Result<ProblemSpec> {
        let mesh = build_mesh(n, self.grading)?;
        Ok(ProblemSpec::with_regime_override(&self.coefficient, self.regime, &mesh, self.horizon, m)?
            .with_scheme(self.scheme))
    }
}

/// Error against the exact solution for each `N` (doubling), with `M`
/// fixed and large enough that the time error is negligible.
pub fn spatial_study(setup: &StudySetup, intervals: &[usize], time_steps: usize) -> Result<Vec<RefinementRow>> {
    let rows = intervals
        .iter()
        .map(|&n| {
            let spec = setup.spec(n, time_steps)?;
            let u = solve_manufactured(&spec, setup.exact)?;
            let err: Field = spec
                .times()
                .iter()
                .zip(&u)
                .map(|(&t, row)| {
                    spec.mesh()
                        .nodes()
                        .iter()
                        .zip(row)
                        .map(|(&x, v)| v - setup.exact.jet(t, x)[0])
                        .collect()
                })
                .collect();
            Ok(RefinementRow {
                intervals: n,
                time_steps,
                error: spacetime_l2(&spec, &err),
                order: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(with_orders(rows))
}

/// Time-refinement study on a fixed mesh: the error of row `M` is
/// `‖u_M − u_{2M}‖` at the common time levels, so the spatial error
/// cancels. Needs one more resolution than rows returned.
pub fn temporal_study(setup: &StudySetup, intervals: usize, time_steps: &[usize]) -> Result<Vec<RefinementRow>> {
    let sols = time_steps
        .iter()
        .map(|&m| Ok((setup.spec(intervals, m)?, solve_manufactured(&setup.spec(intervals, m)?, setup.exact)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = sols
        .windows(2)
        .map(|w| {
            let (coarse, uc) = &w[0];
            let (_, uf) = &w[1];
            let stride = uf.len().saturating_sub(1) / uc.len().saturating_sub(1).max(1);
            let diff: Field = uc
                .iter()
                .enumerate()
                .map(|(m, row)| row.iter().zip(&uf[m * stride]).map(|(a, b)| a - b).collect())
                .collect();
            RefinementRow {
                intervals,
                time_steps: coarse.time_steps(),
                error: spacetime_l2(coarse, &diff),
                order: None,
            }
        })
        .collect();
    Ok(with_orders(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;

    fn setup(exact: ExactSolution) -> StudySetup {
        StudySetup {
            coefficient: make_power_coefficient(1.0).unwrap(),
            regime: BoundaryRegime::DirichletZero,
            horizon: 1.0,
            grading: 1.0,
            scheme: Scheme::CrankNicolson,
            exact,
        }
    }

    #[test]
    fn source_matches_hand_derivative() {
        let s = setup(ExactSolution::LinearInTime);
        let spec = s.spec(4, 2).unwrap();
        let f = manufactured_source(&spec, ExactSolution::LinearInTime);
        // a = x: u_t − (x u_x)_x = x(1 − x) − t(1 − 4x)
        for (m, t) in spec.times().iter().enumerate() {
            for (i, x) in spec.mesh().nodes().iter().enumerate().take(4).skip(1) {
                assert!((f[m][i] - (x * (1.0 - x) - t * (1.0 - 4.0 * x))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_jets_match_differences() {
        let h = 1e-6;
        for e in [ExactSolution::LinearInTime, ExactSolution::Oscillating, ExactSolution::OscillatingFlux] {
            let (t, x) = (0.3, 0.4);
            let j = e.jet(t, x);
            assert!(((e.jet(t + h, x)[0] - e.jet(t - h, x)[0]) / (2.0 * h) - j[1]).abs() < 1e-8);
            assert!(((e.jet(t, x + h)[0] - e.jet(t, x - h)[0]) / (2.0 * h) - j[2]).abs() < 1e-8);
            assert!(((e.jet(t, x + h)[2] - e.jet(t, x - h)[2]) / (2.0 * h) - j[3]).abs() < 1e-7);
        }
    }

    #[test]
    fn quadratic_profile_is_reproduced_on_uniform_mesh() {
        let rows = spatial_study(&setup(ExactSolution::LinearInTime), &[8, 16], 4).unwrap();
        assert!(rows.iter().all(|r| r.error < 1e-13));
    }

    #[test]
    fn spatial_error_decreases() {
        let rows = spatial_study(&setup(ExactSolution::Oscillating), &[8, 16, 32], 256).unwrap();
        assert!(rows[2].error < rows[1].error && rows[1].error < rows[0].error);
        assert!(rows[2].order.unwrap() >= 1.0);
    }
}
