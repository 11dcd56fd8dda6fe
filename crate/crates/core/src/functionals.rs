//! Discrete weighted norms, space-time integrals against Carleman weights,
//! and Hardy–Poincaré ratios.

use crate::coefficients::DegeneracyCoefficient;
use crate::error::{LabError, Result};
use crate::pde_solver::{
    assemble_diffusion, mesh_inner, BoundaryRegime, DiffusionOperator, Field, Mesh, Trajectory,
};
use crate::quadrature::{gauss_legendre, tanh_sinh};
use crate::weights::CarlemanWeights;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    H1a,
    H2a,
}

/// Norms of nodal functions on a fixed mesh and coefficient.
#[derive(Debug, Clone)]
pub struct WeightedNorms {
    op: DiffusionOperator,
}

impl WeightedNorms {
    pub fn new(coef: &DegeneracyCoefficient, mesh: &Mesh, regime: BoundaryRegime) -> Result<Self> {
        Ok(Self {
            op: assemble_diffusion(coef, mesh, regime)?,
        })
    }

    pub fn from_operator(op: DiffusionOperator) -> Self {
        Self { op }
    }

    /// `Σ_faces a(x_{i+1/2}) (u_{i+1} − u_i)² / (x_{i+1} − x_i)`, i.e. `‖√a u_x‖²`.
    pub fn seminorm_sq(&self, u: &[f64]) -> f64 {
        self.op
            .face_conductance()
            .iter()
            .zip(u.windows(2))
            .map(|(k, w)| k * (w[1] - w[0]).powi(2))
            .sum()
    }

    /// `‖(a u_x)_x‖²` over the unknown nodes.
    pub fn second_sq(&self, u: &[f64]) -> f64 {
        let au = self.op.apply(u);
        let cells = self.op.mesh().cell_widths();
        self.op.unknowns().map(|i| cells[i] * au[i] * au[i]).sum()
    }

    pub fn norm_sq(&self, kind: NormKind, u: &[f64]) -> f64 {
        let l2 = mesh_inner(self.op.mesh(), u, u);
        match kind {
            NormKind::L2 => l2,
            NormKind::H1a => l2 + self.seminorm_sq(u),
            NormKind::H2a => l2 + self.seminorm_sq(u) + self.second_sq(u),
        }
    }

    /// The norm itself (square root of [`Self::norm_sq`]).
    pub fn weighted_norm(&self, kind: NormKind, u: &[f64]) -> f64 {
        self.norm_sq(kind, u).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `v²` at the nodes.
    VSq,
    /// `a v_x²` at the faces.
    AVxSq,
    /// `F²` at the nodes (pass the source field as the trajectory).
    SourceSq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Q,
    /// Points strictly inside the control interval `ω`.
    QOmega,
    /// `α′ ≤ x ≤ β′`.
    QOmegaPrime,
    /// `x < α′`.
    LeftOfAlphaPrime,
    /// `x > β′`.
    RightOfBetaPrime,
}

impl Region {
    fn contains(self, x: f64, omega: (f64, f64), omega_prime: (f64, f64)) -> bool {
        match self {
            Region::Q => true,
            Region::QOmega => omega.0 < x && x < omega.1,
            Region::QOmegaPrime => omega_prime.0 <= x && x <= omega_prime.1,
            Region::LeftOfAlphaPrime => x < omega_prime.0,
            Region::RightOfBetaPrime => x > omega_prime.1,
        }
    }
}

/// `ψ` sampled at the nodes and faces of a mesh, so that repeated weighted
/// integrals skip the branch quadrature.
#[derive(Debug, Clone)]
pub struct WeightGrid {
    weights: CarlemanWeights,
    mesh: Mesh,
    face_a: Vec<f64>,
    psi_nodes: Vec<f64>,
    psi_faces: Vec<f64>,
}

impl WeightGrid {
    pub fn new(weights: &CarlemanWeights, mesh: &Mesh) -> Result<Self> {
        let psi = weights.psi();
        let psi_nodes = mesh
            .nodes()
            .iter()
            .map(|&x| psi.eval(x))
            .collect::<Result<Vec<_>>>()?;
        let psi_faces = mesh
            .faces()
            .iter()
            .map(|&x| psi.eval(x))
            .collect::<Result<Vec<_>>>()?;
        let face_a = mesh
            .faces()
            .iter()
            .map(|&x| psi.coefficient().eval(x))
            .collect();
        Ok(Self {
            weights: weights.clone(),
            mesh: mesh.clone(),
            face_a,
            psi_nodes,
            psi_faces,
        })
    }

    /// Same `ψ` samples with another `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(Self {
            weights: self.weights.with_lambda(lambda)?,
            ..self.clone()
        })
    }

    pub fn weights(&self) -> &CarlemanWeights {
        &self.weights
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn psi_nodes(&self) -> &[f64] {
        &self.psi_nodes
    }

    /// Tensor trapezoid (midpoint for face quantities) of
    /// `e^{2sφ} σ^k · integrand` over `region × (0, T)`.
    #[allow(clippy::too_many_arguments)]
    pub fn integral(
        &self,
        values: &Field,
        times: &[f64],
        s: f64,
        k: f64,
        integrand: Integrand,
        region: Region,
        omega: (f64, f64),
    ) -> f64 {
        self.scaled_integral(values, times, s, k, integrand, region, omega, 0.0)
    }

    /// [`Self::integral`] times `e^{−log_shift}`, with the shift applied
    /// inside the exponent so that large `s` does not underflow.
    #[allow(clippy::too_many_arguments)]
    pub fn scaled_integral(
        &self,
        values: &Field,
        times: &[f64],
        s: f64,
        k: f64,
        integrand: Integrand,
        region: Region,
        omega: (f64, f64),
        log_shift: f64,
    ) -> f64 {
        let w = &self.weights;
        let op = (w.psi().alpha_prime(), w.psi().beta_prime());
        let nodes = self.mesh.nodes();
        let faces = self.mesh.faces();
        let cells = self.mesh.cell_widths();
        let steps = times.len() - 1;
        let mut total = 0.0;
        for (m, row) in values.iter().enumerate() {
            let tau = if m == 0 || m == steps {
                0.5 * (times[1] - times[0])
            } else {
                0.5 * (times[m + 1] - times[m - 1])
            };
            let t = times[m];
            let mut acc = 0.0;
            match integrand {
                Integrand::VSq | Integrand::SourceSq => {
                    for i in 0..nodes.len() {
                        if row[i] != 0.0 && region.contains(nodes[i], omega, op) {
                            let wt = w.shifted_weight_from_psi(t, self.psi_nodes[i], s, k, log_shift);
                            acc += cells[i] * wt * row[i] * row[i];
                        }
                    }
                }
                Integrand::AVxSq => {
                    for i in 0..faces.len() {
                        let dx = self.mesh.spacing(i);
                        let d = row[i + 1] - row[i];
                        if d != 0.0 && region.contains(faces[i], omega, op) {
                            let wt = w.shifted_weight_from_psi(t, self.psi_faces[i], s, k, log_shift);
                            acc += wt * self.face_a[i] * d * d / dx;
                        }
                    }
                }
            }
            total += tau * acc;
        }
        total
    }
}

/// One-shot weighted integral over a trajectory (or a source field wrapped
/// as one).
pub fn spacetime_weighted_integral(
    traj: &Trajectory,
    weights: &CarlemanWeights,
    s: f64,
    k: f64,
    integrand: Integrand,
    region: Region,
    omega: (f64, f64),
) -> Result<f64> {
    if (traj.horizon() - weights.horizon()).abs() > 1e-12 * weights.horizon() {
        return Err(LabError::Precondition(format!(
            "trajectory horizon {} differs from weight horizon {}",
            traj.horizon(),
            weights.horizon()
        )));
    }
    let grid = WeightGrid::new(weights, &traj.mesh)?;
    Ok(grid.integral(&traj.values, &traj.times, s, k, integrand, region, omega))
}

/// Which weight the Hardy ratio uses and which end `w` must vanish at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardyCase {
    /// Weight `a`, `w(0) = 0`.
    #[serde(rename = "case_a_theta_lt_1")]
    CaseAThetaLt1,
    /// Weight `a`, `w(1) = 0`.
    #[serde(rename = "case_b_theta_in_1_2")]
    CaseBThetaIn1To2,
    /// Weight `p = (a x⁴)^{1/3}`, `w(1) = 0`.
    #[serde(rename = "auxiliary_p")]
    AuxiliaryP,
    /// Weight `b = √a · x`, `w(1) = 0`.
    #[serde(rename = "auxiliary_b")]
    AuxiliaryB,
}

impl HardyCase {
    fn weight(self, coef: &DegeneracyCoefficient, x: f64) -> f64 {
        let a = coef.eval(x);
        match self {
            HardyCase::CaseAThetaLt1 | HardyCase::CaseBThetaIn1To2 => a,
            HardyCase::AuxiliaryP => (a * x.powi(4)).cbrt(),
            HardyCase::AuxiliaryB => a.sqrt() * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    /// `∫ (p/x²) w²`
    pub lhs: f64,
    /// `∫ p |w′|²`
    pub rhs: f64,
    pub ratio: f64,
    pub case: HardyCase,
    /// `rhs = 0` while `lhs > 0`.
    pub violation: bool,
}

const HARDY_GAUSS_POINTS: usize = 8;

/// Hardy ratio `∫ (p/x²) w² / ∫ p |w′|²` for the piecewise-linear
/// interpolant of nodal `w`, with `p` the case's weight. Cell integrals use
/// Gauss–Legendre; the first cell, where `p/x²` may be singular, uses
/// tanh–sinh so the node `x = 0` is never evaluated.
pub fn hardy_ratio(
    coef: &DegeneracyCoefficient,
    mesh: &Mesh,
    w: &[f64],
    case: HardyCase,
) -> Result<HardyReport> {
    let nodes = mesh.nodes();
    if w.len() != nodes.len() {
        return Err(LabError::Shape(format!(
            "w has {} entries, mesh has {} nodes",
            w.len(),
            nodes.len()
        )));
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    match case {
        HardyCase::CaseAThetaLt1 if w[0].abs() > tol => {
            return Err(LabError::Precondition("case A requires w(0) = 0".into()))
        }
        HardyCase::CaseAThetaLt1 => {}
        _ if w[w.len() - 1].abs() > tol => {
            return Err(LabError::Precondition(format!("{case:?} requires w(1) = 0")))
        }
        _ => {}
    }
    let (gx, gw) = gauss_legendre(HARDY_GAUSS_POINTS);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        let (w0, w1) = (w[i], w[i + 1]);
        if w0 == 0.0 && w1 == 0.0 {
            continue;
        }
        let slope = (w1 - w0) / (x1 - x0);
        let interp = |x: f64| w0 + slope * (x - x0);
        let lhs_f = |x: f64| case.weight(coef, x) / (x * x) * interp(x).powi(2);
        let rhs_f = |x: f64| case.weight(coef, x) * slope * slope;
        if i == 0 {
            lhs += tanh_sinh(lhs_f, x0, x1, 1e-12)?;
            rhs += tanh_sinh(rhs_f, x0, x1, 1e-12)?;
        } else {
            let half = 0.5 * (x1 - x0);
            let mid = 0.5 * (x0 + x1);
            for (g, wt) in gx.iter().zip(&gw) {
                let x = mid + half * g;
                lhs += half * wt * lhs_f(x);
                rhs += half * wt * rhs_f(x);
            }
        }
    }
    let (ratio, violation) = if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs > 0.0 {
        (f64::INFINITY, true)
    } else {
        (0.0, false)
    };
    Ok(HardyReport {
        lhs,
        rhs,
        ratio,
        case,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use crate::pde_solver::build_mesh;
    use crate::weights::build_psi;

    #[test]
    fn seminorm_of_parabola() {
        let a = make_power_coefficient(1.0).unwrap();
        let mesh = build_mesh(256, 1.0).unwrap();
        let norms = WeightedNorms::new(&a, &mesh, BoundaryRegime::DirichletZero).unwrap();
        let u: Vec<f64> = mesh.nodes().iter().map(|x| x * (1.0 - x)).collect();
        assert!((norms.seminorm_sq(&u) - 1.0 / 6.0).abs() < 1e-5);
        assert!(norms.norm_sq(NormKind::H1a, &u) >= norms.norm_sq(NormKind::L2, &u));
        assert!(norms.norm_sq(NormKind::H2a, &u) >= norms.norm_sq(NormKind::H1a, &u));
        let zero = vec![0.0; 257];
        for kind in [NormKind::L2, NormKind::H1a, NormKind::H2a] {
            assert_eq!(norms.weighted_norm(kind, &zero), 0.0);
        }
    }

    #[test]
    fn hardy_linear_test_function_is_exact() {
        let a = make_power_coefficient(0.5).unwrap();
        let mesh = build_mesh(64, 2.0).unwrap();
        let w: Vec<f64> = mesh.nodes().to_vec();
        let r = hardy_ratio(&a, &mesh, &w, HardyCase::CaseAThetaLt1).unwrap();
        assert!((r.lhs - 2.0 / 3.0).abs() < 1e-10);
        assert!((r.rhs - 2.0 / 3.0).abs() < 1e-10);
        assert!((r.ratio - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hardy_preconditions_and_zero() {
        let a = make_power_coefficient(1.5).unwrap();
        let mesh = build_mesh(32, 2.0).unwrap();
        let ones = vec![1.0; 33];
        assert!(hardy_ratio(&a, &mesh, &ones, HardyCase::CaseAThetaLt1).is_err());
        assert!(hardy_ratio(&a, &mesh, &ones, HardyCase::CaseBThetaIn1To2).is_err());
        let zero = vec![0.0; 33];
        let r = hardy_ratio(&a, &mesh, &zero, HardyCase::CaseBThetaIn1To2).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(!r.violation);
    }

    #[test]
    fn weighted_integral_regions_partition() {
        let a = make_power_coefficient(0.5).unwrap();
        let w = CarlemanWeights::new(build_psi(&a, 0.35, 0.6, 16).unwrap(), 1.0, 1.0).unwrap();
        let mesh = build_mesh(40, 2.0).unwrap();
        let grid = WeightGrid::new(&w, &mesh).unwrap();
        let times: Vec<f64> = (0..=20).map(|m| m as f64 / 20.0).collect();
        let field: Field = times
            .iter()
            .map(|t| mesh.nodes().iter().map(|x| (1.0 + t) * (3.0 * x).sin()).collect())
            .collect();
        for integrand in [Integrand::VSq, Integrand::AVxSq] {
            let whole = grid.integral(&field, &times, 0.01, 1.0, integrand, Region::Q, (0.3, 0.7));
            let parts: f64 = [
                Region::LeftOfAlphaPrime,
                Region::QOmegaPrime,
                Region::RightOfBetaPrime,
            ]
            .iter()
            .map(|r| grid.integral(&field, &times, 0.01, 1.0, integrand, *r, (0.3, 0.7)))
            .sum();
            assert!(whole > 0.0);
            assert!((whole - parts).abs() <= 1e-12 * whole);
        }
    }
}
