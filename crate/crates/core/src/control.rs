//! Approximate null controls by penalized dual minimization.
//!
//! For terminal adjoint data `v_T` let `h(v_T)` be the control field
//! representing `g ↦ ⟨u_g(T), v_T⟩` (the exact discrete transpose of the
//! control-to-state map) and `Λ v_T = u_{h(v_T)}(T)` with `u0 = 0`. The dual
//! functional
//!
//! `J_ε(v_T) = ½‖h(v_T)‖²_{Q_ω} + ε/2 ‖v_T‖² + ⟨u0, v(0)⟩`
//!
//! has gradient `Λ v_T + ε v_T + U(T) u0` in the mass inner product, so CG
//! on `(Λ + ε) v_T = −U(T) u0` minimizes it and the optimal control drives
//! the state to `u(T) = −ε v_T`.

use crate::error::{LabError, Result};
use crate::pde_solver::{
    control_inner, mesh_inner, solve_adjoint_with_control, solve_forward, Field,
    ProblemSpec,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CG_TOL: f64 = 1e-8;
pub const DEFAULT_CG_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    #[serde(skip)]
    pub h: Field,
    /// Minimizing terminal adjoint datum.
    #[serde(skip)]
    pub v_t: Vec<f64>,
    pub terminal_norm: f64,
    pub control_cost: f64,
    pub epsilon: f64,
    pub cg_iterations: usize,
    pub converged: bool,
    /// Final `‖r‖ / ‖b‖` of the CG iteration.
    pub relative_residual: f64,
}

/// `Λ v_T` together with the control that produces it.
fn gramian(spec: &ProblemSpec, v_t: &[f64]) -> Result<(Vec<f64>, Field)> {
    let (_, h) = solve_adjoint_with_control(spec, v_t)?;
    let zero = vec![0.0; v_t.len()];
    let u = solve_forward(spec, &zero, Some(&h))?;
    Ok((u.terminal().to_vec(), h))
}

fn dot(spec: &ProblemSpec, a: &[f64], b: &[f64]) -> f64 {
    mesh_inner(spec.mesh(), a, b)
}

/// `J_ε(v_T)`.
pub fn dual_functional(spec: &ProblemSpec, u0: &[f64], epsilon: f64, v_t: &[f64]) -> Result<f64> {
    let v_t = spec.project(v_t);
    let (v, h) = solve_adjoint_with_control(spec, &v_t)?;
    Ok(0.5 * control_inner(spec, &h, &h)
        + 0.5 * epsilon * dot(spec, &v_t, &v_t)
        + dot(spec, &spec.project(u0), v.initial()))
}

/// Gradient of `J_ε` as a nodal field: the directional derivative along
/// `d` is `⟨gradient, d⟩` in the mass inner product.
pub fn dual_gradient(spec: &ProblemSpec, u0: &[f64], epsilon: f64, v_t: &[f64]) -> Result<Vec<f64>> {
    let v_t = spec.project(v_t);
    let (lv, _) = gramian(spec, &v_t)?;
    let free = solve_forward(spec, u0, None)?;
    Ok(lv
        .iter()
        .zip(&v_t)
        .zip(free.terminal())
        .map(|((l, v), f)| l + epsilon * v + f)
        .collect())
}

/// Runs CG for the minimizer of `J_ε` and verifies the control with a
/// forward solve.
pub fn synthesize_null_control(
    spec: &ProblemSpec,
    u0: &[f64],
    epsilon: f64,
    cg_tol: f64,
    cg_max_iter: usize,
) -> Result<ControlResult> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LabError::OutOfRange(format!("epsilon = {epsilon} must be positive")));
    }
    if !(cg_tol > 0.0) {
        return Err(LabError::OutOfRange(format!("cg_tol = {cg_tol} must be positive")));
    }
    let u0 = spec.project(u0);
    let n1 = u0.len();
    let free = solve_forward(spec, &u0, None)?;
    let b: Vec<f64> = free.terminal().iter().map(|x| -x).collect();
    let b_norm = dot(spec, &b, &b).sqrt();
    if b_norm == 0.0 {
        let h = vec![vec![0.0; n1]; spec.time_steps() + 1];
        return Ok(ControlResult {
            terminal_norm: verify_control(spec, &u0, &h)?,
            h,
            v_t: vec![0.0; n1],
            control_cost: 0.0,
            epsilon,
            cg_iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }

    // Rayleigh quotient of Λ along the right-hand side sets the scale below
    // which ε is lost in rounding.
    let (lb, _) = gramian(spec, &b)?;
    let scale = dot(spec, &lb, &b) / (b_norm * b_norm);
    if epsilon < 64.0 * f64::EPSILON * scale {
        return Err(LabError::PenaltyUnderflow { epsilon, scale });
    }

    let mut x = vec![0.0; n1];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(spec, &r, &r);
    let mut iterations = 0;
    let mut rel = rr.sqrt() / b_norm;
    while rel > cg_tol && iterations < cg_max_iter {
        let (lp, _) = gramian(spec, &p)?;
        let ap: Vec<f64> = lp.iter().zip(&p).map(|(l, pi)| l + epsilon * pi).collect();
        let pap = dot(spec, &p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n1 {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(spec, &r, &r);
        for i in 0..n1 {
            p[i] = r[i] + rr_new / rr * p[i];
        }
        rr = rr_new;
        iterations += 1;
        rel = rr.sqrt() / b_norm;
    }

    let (_, h) = solve_adjoint_with_control(spec, &x)?;
    let chi = spec.omega_indicator();
    assert!(
        h.iter().all(|row| row.iter().zip(&chi).all(|(v, c)| *c != 0.0 || *v == 0.0)),
        "control leaks outside the control region"
    );
    Ok(ControlResult {
        terminal_norm: verify_control(spec, &u0, &h)?,
        control_cost: control_inner(spec, &h, &h),
        h,
        v_t: x,
        epsilon,
        cg_iterations: iterations,
        converged: rel <= cg_tol,
        relative_residual: rel,
    })
}

/// `‖u(T)‖_{L²}` for the forward solve from `u0` with control `h`.
pub fn verify_control(spec: &ProblemSpec, u0: &[f64], h: &Field) -> Result<f64> {
    Ok(solve_forward(spec, u0, Some(h))?.l2_norm_at(spec.time_steps()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use crate::pde_solver::{build_mesh, BoundaryRegime};
    use std::f64::consts::PI;

    fn spec(gamma: f64, regime: BoundaryRegime) -> ProblemSpec {
        let a = make_power_coefficient(gamma).unwrap();
        let mesh = build_mesh(32, 1.0).unwrap();
        ProblemSpec::new(&a, regime, &mesh, 1.0, 32).unwrap()
    }

    #[test]
    fn zero_initial_state_needs_no_control() {
        let sp = spec(0.5, BoundaryRegime::DirichletZero);
        let r = synthesize_null_control(&sp, &vec![0.0; 33], 1e-4, 1e-8, 10).unwrap();
        assert_eq!(r.terminal_norm, 0.0);
        assert_eq!(r.cg_iterations, 0);
        assert!(r.h.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn optimal_state_is_minus_epsilon_times_multiplier() {
        let sp = spec(0.5, BoundaryRegime::DirichletZero);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (PI * x).sin()).collect();
        let eps = 1e-3;
        let r = synthesize_null_control(&sp, &u0, eps, 1e-12, 500).unwrap();
        assert!(r.converged);
        let u = solve_forward(&sp, &u0, Some(&r.h)).unwrap();
        for (ut, v) in u.terminal().iter().zip(&r.v_t) {
            assert!((ut + eps * v).abs() < 1e-8 * (1.0 + v.abs()));
        }
        let verified = verify_control(&sp, &u0, &r.h).unwrap();
        assert!((verified - r.terminal_norm).abs() <= 1e-12 * r.terminal_norm.max(1e-300));
    }

    #[test]
    fn gradient_vanishes_at_minimizer_and_matches_differences() {
        let sp = spec(1.5, BoundaryRegime::ZeroFlux);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (0.5 * PI * x).cos()).collect();
        let eps = 1e-2;
        let r = synthesize_null_control(&sp, &u0, eps, 1e-12, 500).unwrap();
        let g = dual_gradient(&sp, &u0, eps, &r.v_t).unwrap();
        let gn = mesh_inner(sp.mesh(), &g, &g).sqrt();
        assert!(gn < 1e-9, "gradient norm {gn}");
        let d: Vec<f64> = sp.mesh().nodes().iter().map(|x| x * (1.0 - x)).collect();
        let v: Vec<f64> = d.iter().map(|x| 0.3 * x).collect();
        let h = 1e-3;
        let plus: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a - h * b).collect();
        let fd = (dual_functional(&sp, &u0, eps, &plus).unwrap()
            - dual_functional(&sp, &u0, eps, &minus).unwrap())
            / (2.0 * h);
        let exact = mesh_inner(sp.mesh(), &dual_gradient(&sp, &u0, eps, &v).unwrap(), &d);
        assert!((fd - exact).abs() <= 1e-8 * exact.abs());
    }

    #[test]
    fn uncontrolled_decay_stays_positive() {
        let sp = spec(0.5, BoundaryRegime::DirichletZero);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (PI * x).sin()).collect();
        let h = vec![vec![0.0; 33]; 33];
        assert!(verify_control(&sp, &u0, &h).unwrap() > 0.0);
    }

    #[test]
    fn tiny_penalty_is_rejected() {
        let sp = spec(0.5, BoundaryRegime::DirichletZero);
        let u0: Vec<f64> = sp.mesh().nodes().iter().map(|x| (PI * x).sin()).collect();
        assert!(matches!(
            synthesize_null_control(&sp, &u0, 1e-30, 1e-8, 10),
            Err(LabError::PenaltyUnderflow { .. })
        ));
    }
}
