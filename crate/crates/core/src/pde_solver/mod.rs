//! Flux-form finite differences for `u_t − (a u_x)_x + c u = h χ_ω` and its
//! backward adjoint, with θ-scheme time stepping whose adjoint is the exact
//! transpose of the forward step map.

mod convergence;
mod io;
mod mesh;
mod operator;

pub use convergence::{
    manufactured_source, spacetime_l2, spatial_study, temporal_study, ExactSolution, RefinementRow,
    StudySetup,
};
pub use io::{read_binary, write_binary, write_binary_to, write_csv, write_csv_to};
pub use mesh::{build_mesh, BoundaryRegime, Mesh};
pub use operator::{
    assemble_diffusion, assemble_with, mesh_inner, solve_symmetric_tridiagonal, DiffusionOperator,
};

use crate::coefficients::{classify, DegeneracyCoefficient, Regime};
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Space-time nodal field: one row of `N + 1` values per time node.
pub type Field = Vec<Vec<f64>>;

/// Bounded zeroth-order coefficient `c(t, x)`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    Constant(f64),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Potential {
    pub fn function<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Potential::Function(Arc::new(f))
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant(c) => *c,
            Potential::Function(f) => f(t, x),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => f.write_str("Zero"),
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    /// Crank–Nicolson with two backward-Euler half steps on the first and
    /// last intervals, so that rough initial and terminal data are damped.
    #[default]
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Problem data shared by forward and adjoint solves.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    horizon: f64,
    coef: DegeneracyCoefficient,
    coef_regime: Regime,
    regime: BoundaryRegime,
    potential: Potential,
    omega: (f64, f64),
    time_steps: usize,
    scheme: Scheme,
    operator: DiffusionOperator,
}

impl ProblemSpec {
    /// Requires the boundary regime to match the coefficient's class
    /// (Dirichlet at 0 for weak, zero flux for strong degeneracy).
    pub fn new(
        coef: &DegeneracyCoefficient,
        regime: BoundaryRegime,
        mesh: &Mesh,
        horizon: f64,
        time_steps: usize,
    ) -> Result<Self> {
        let spec = Self::with_regime_override(coef, regime, mesh, horizon, time_steps)?;
        let expected = match spec.coef_regime {
            Regime::Wdc => Some(BoundaryRegime::DirichletZero),
            Regime::Sdc => Some(BoundaryRegime::ZeroFlux),
            Regime::Violation => None,
        };
        if expected != Some(regime) {
            return Err(LabError::RegimeMismatch {
                regime: regime.to_string(),
                coefficient: spec.coef_regime.to_string(),
            });
        }
        Ok(spec)
    }

    /// Accepts any boundary regime for the coefficient.
    pub fn with_regime_override(
        coef: &DegeneracyCoefficient,
        regime: BoundaryRegime,
        mesh: &Mesh,
        horizon: f64,
        time_steps: usize,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LabError::OutOfRange(format!("T = {horizon} must be > 0")));
        }
        if time_steps == 0 {
            return Err(LabError::OutOfRange("time_steps must be >= 1".into()));
        }
        let coef_regime = classify(coef, 256, 0.1)?.regime;
        Ok(Self {
            horizon,
            coef: coef.clone(),
            coef_regime,
            regime,
            potential: Potential::Zero,
            omega: (0.3, 0.7),
            time_steps,
            scheme: Scheme::default(),
            operator: assemble_diffusion(coef, mesh, regime)?,
        })
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Control region `ω = (α, β)`, `0 < α < β < 1`.
    pub fn with_omega(mut self, alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0 < alpha && alpha < beta && beta < 1.0) {
            return Err(LabError::OutOfRange(format!(
                "omega = ({alpha}, {beta}) must satisfy 0 < alpha < beta < 1"
            )));
        }
        self.omega = (alpha, beta);
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn coefficient(&self) -> &DegeneracyCoefficient {
        &self.coef
    }

    pub fn coefficient_regime(&self) -> Regime {
        self.coef_regime
    }

    pub fn regime(&self) -> BoundaryRegime {
        self.regime
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn omega(&self) -> (f64, f64) {
        self.omega
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn mesh(&self) -> &Mesh {
        self.operator.mesh()
    }

    pub fn operator(&self) -> &DiffusionOperator {
        &self.operator
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.time_steps)
            .map(|m| self.horizon * m as f64 / self.time_steps as f64)
            .collect()
    }

    /// `1` at nodes strictly inside `ω`, else `0`.
    pub fn omega_indicator(&self) -> Vec<f64> {
        let (a, b) = self.omega;
        self.mesh()
            .nodes()
            .iter()
            .map(|&x| if a < x && x < b { 1.0 } else { 0.0 })
            .collect()
    }

    /// Trapezoid weights in time for pairing control fields.
    pub fn time_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.time_steps)
            .map(|m| {
                if m == 0 || m == self.time_steps {
                    0.5 * dt
                } else {
                    dt
                }
            })
            .collect()
    }

    /// Zeroes the Dirichlet nodes.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        let n = self.mesh().intervals();
        out[n] = 0.0;
        if self.regime == BoundaryRegime::DirichletZero {
            out[0] = 0.0;
        }
        out
    }

    fn check_vector(&self, u: &[f64], what: &str) -> Result<()> {
        let n = self.mesh().intervals() + 1;
        if u.len() != n {
            return Err(LabError::Shape(format!("{what} has {} entries, mesh has {n} nodes", u.len())));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Precondition(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    fn check_field(&self, f: &Field, what: &str) -> Result<()> {
        if f.len() != self.time_steps + 1 {
            return Err(LabError::Shape(format!(
                "{what} has {} time rows, expected {}",
                f.len(),
                self.time_steps + 1
            )));
        }
        f.iter().try_for_each(|row| self.check_vector(row, what))
    }

    /// Substeps of the time march in forward order.
    fn substeps(&self) -> Vec<Substep> {
        let dt = self.dt();
        let mut out = Vec::new();
        for m in 0..self.time_steps {
            let ta = m as f64 * dt;
            let tb = (m + 1) as f64 * dt;
            let tm = 0.5 * (ta + tb);
            let rannacher = m == 0 || m + 1 == self.time_steps;
            match self.scheme {
                Scheme::BackwardEuler => out.push(Substep {
                    t_a: ta,
                    t_b: tb,
                    implicitness: 1.0,
                    c_time: tb,
                    forward_source: [(m + 1, 1.0), (m + 1, 0.0)],
                    adjoint_source: [(m, 1.0), (m, 0.0)],
                    start_node: Some(m),
                    end_node: Some(m + 1),
                }),
                Scheme::CrankNicolson if rannacher => {
                    out.push(Substep {
                        t_a: ta,
                        t_b: tm,
                        implicitness: 1.0,
                        c_time: tm,
                        forward_source: [(m, 0.5), (m + 1, 0.5)],
                        adjoint_source: [(m, 1.0), (m, 0.0)],
                        start_node: Some(m),
                        end_node: None,
                    });
                    out.push(Substep {
                        t_a: tm,
                        t_b: tb,
                        implicitness: 1.0,
                        c_time: tb,
                        forward_source: [(m + 1, 1.0), (m + 1, 0.0)],
                        adjoint_source: [(m, 0.5), (m + 1, 0.5)],
                        start_node: None,
                        end_node: Some(m + 1),
                    });
                }
                Scheme::CrankNicolson => out.push(Substep {
                    t_a: ta,
                    t_b: tb,
                    implicitness: 0.5,
                    c_time: tm,
                    forward_source: [(m, 0.5), (m + 1, 0.5)],
                    adjoint_source: [(m, 0.5), (m + 1, 0.5)],
                    start_node: Some(m),
                    end_node: Some(m + 1),
                }),
            }
        }
        out
    }

    /// Step matrices `L = M + θΔt B` and `R = M − (1−θ)Δt B` with
    /// `B = S + M C` restricted to the unknowns.
    fn step_matrices(&self, sub: &Substep) -> StepMatrices {
        let dt = sub.t_b - sub.t_a;
        let (_, sdiag, soff) = self.operator.stiffness_rows();
        let range = self.operator.unknowns();
        let cells = self.mesh().cell_widths();
        let nodes = self.mesh().nodes();
        let th = sub.implicitness;
        let mut ld = Vec::with_capacity(range.len());
        let mut rd = Vec::with_capacity(range.len());
        for (r, i) in range.clone().enumerate() {
            let b = sdiag[r] + cells[i] * self.potential.eval(sub.c_time, nodes[i]);
            ld.push(cells[i] + th * dt * b);
            rd.push(cells[i] - (1.0 - th) * dt * b);
        }
        let n_off = range.len().saturating_sub(1);
        let lo: Vec<f64> = soff[..n_off].iter().map(|s| th * dt * s).collect();
        let ro: Vec<f64> = soff[..n_off].iter().map(|s| -(1.0 - th) * dt * s).collect();
        StepMatrices {
            first: range.start,
            dt,
            l_diag: ld,
            l_off: lo,
            r_diag: rd,
            r_off: ro,
        }
    }
}

#[derive(Debug, Clone)]
struct Substep {
    t_a: f64,
    t_b: f64,
    implicitness: f64,
    c_time: f64,
    forward_source: [(usize, f64); 2],
    adjoint_source: [(usize, f64); 2],
    start_node: Option<usize>,
    end_node: Option<usize>,
}

struct StepMatrices {
    first: usize,
    dt: f64,
    l_diag: Vec<f64>,
    l_off: Vec<f64>,
    r_diag: Vec<f64>,
    r_off: Vec<f64>,
}

impl StepMatrices {
    fn apply_r(&self, u: &[f64]) -> Vec<f64> {
        let n = self.r_diag.len();
        (0..n)
            .map(|r| {
                let i = self.first + r;
                let mut v = self.r_diag[r] * u[i];
                if r > 0 {
                    v += self.r_off[r - 1] * u[i - 1];
                }
                if r + 1 < n {
                    v += self.r_off[r] * u[i + 1];
                }
                v
            })
            .collect()
    }

    fn solve_l(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        solve_symmetric_tridiagonal(&self.l_diag, &self.l_off, rhs)
    }
}

/// Discrete space-time solution at the nodes `t_m = mT/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub values: Field,
    pub times: Vec<f64>,
    pub mesh: Mesh,
    pub direction: Direction,
}

impl Trajectory {
    pub fn time_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// `‖u(t_m)‖_{L²}` by the trapezoid rule.
    pub fn l2_norm_at(&self, m: usize) -> f64 {
        mesh_inner(&self.mesh, &self.values[m], &self.values[m]).sqrt()
    }
}

fn weighted_source(
    spec: &ProblemSpec,
    field: &Field,
    taps: &[(usize, f64); 2],
    mask: Option<&[f64]>,
) -> Vec<f64> {
    let cells = spec.mesh().cell_widths();
    let range = spec.operator.unknowns();
    range
        .map(|i| {
            let g = taps[0].1 * field[taps[0].0][i] + taps[1].1 * field[taps[1].0][i];
            let chi = mask.map_or(1.0, |m| m[i]);
            cells[i] * chi * g
        })
        .collect()
}

/// Forward solve from `u0` with control `h` (sampled at the time nodes and
/// multiplied by `χ_ω`).
pub fn solve_forward(spec: &ProblemSpec, u0: &[f64], h: Option<&Field>) -> Result<Trajectory> {
    solve_forward_with_source(spec, u0, h, None)
}

/// Forward solve with an additional source `f` acting on the whole domain,
/// used by manufactured-solution studies.
pub fn solve_forward_with_source(
    spec: &ProblemSpec,
    u0: &[f64],
    h: Option<&Field>,
    f: Option<&Field>,
) -> Result<Trajectory> {
    spec.check_vector(u0, "u0")?;
    if let Some(h) = h {
        spec.check_field(h, "control")?;
    }
    if let Some(f) = f {
        spec.check_field(f, "source")?;
    }
    let chi = spec.omega_indicator();
    let mut u = spec.project(u0);
    let mut values = Vec::with_capacity(spec.time_steps + 1);
    values.push(u.clone());
    for sub in spec.substeps() {
        let mats = spec.step_matrices(&sub);
        let mut rhs = mats.apply_r(&u);
        let sources = [(h, Some(chi.as_slice())), (f, None)];
        for (field, mask) in sources {
            if let Some(field) = field {
                let src = weighted_source(spec, field, &sub.forward_source, mask);
                for (r, s) in rhs.iter_mut().zip(src) {
                    *r += mats.dt * s;
                }
            }
        }
        let sol = mats.solve_l(&rhs)?;
        u[mats.first..mats.first + sol.len()].copy_from_slice(&sol);
        if sub.end_node.is_some() {
            values.push(u.clone());
        }
    }
    Ok(Trajectory {
        values,
        times: spec.times(),
        mesh: spec.mesh().clone(),
        direction: Direction::Forward,
    })
}

/// Adjoint solve of `v_t + (a v_x)_x − c v = F` backward from `v(T) = v_T`,
/// using the transposed forward step maps.
pub fn solve_adjoint(spec: &ProblemSpec, v_t: &[f64], f: Option<&Field>) -> Result<Trajectory> {
    Ok(adjoint_march(spec, v_t, f, false)?.0)
}

/// Adjoint solve with `F = 0` that also returns `L^# v_T`, the control
/// field representing `h ↦ ⟨u_h(T), v_T⟩` (with `u0 = 0`) in the control
/// inner product `Σ_m τ_m ⟨h^m, g^m⟩_{M_ω}`.
pub fn solve_adjoint_with_control(spec: &ProblemSpec, v_t: &[f64]) -> Result<(Trajectory, Field)> {
    let (traj, control) = adjoint_march(spec, v_t, None, true)?;
    Ok((traj, control.expect("requested")))
}

fn adjoint_march(
    spec: &ProblemSpec,
    v_t: &[f64],
    f: Option<&Field>,
    want_control: bool,
) -> Result<(Trajectory, Option<Field>)> {
    spec.check_vector(v_t, "v_T")?;
    if let Some(f) = f {
        spec.check_field(f, "source")?;
    }
    let n1 = spec.mesh().intervals() + 1;
    let steps = spec.time_steps;
    let mut v = spec.project(v_t);
    let mut values = vec![Vec::new(); steps + 1];
    values[steps] = v.clone();
    let mut control = want_control.then(|| vec![vec![0.0; n1]; steps + 1]);
    let cells = spec.mesh().cell_widths();
    for sub in spec.substeps().iter().rev() {
        let mats = spec.step_matrices(sub);
        let mut rhs = mats.apply_r(&v);
        if let Some(f) = f {
            let src = weighted_source(spec, f, &sub.adjoint_source, None);
            for (r, s) in rhs.iter_mut().zip(src) {
                *r -= mats.dt * s;
            }
        }
        if let Some(ctrl) = control.as_mut() {
            // z = L⁻¹ M v_b pairs with the forward source of this substep
            let mv: Vec<f64> = (0..mats.l_diag.len())
                .map(|r| cells[mats.first + r] * v[mats.first + r])
                .collect();
            let z = mats.solve_l(&mv)?;
            for (m, w) in sub.forward_source {
                if w != 0.0 {
                    for (r, zr) in z.iter().enumerate() {
                        ctrl[m][mats.first + r] += mats.dt * w * zr;
                    }
                }
            }
        }
        let sol = mats.solve_l(&rhs)?;
        v[mats.first..mats.first + sol.len()].copy_from_slice(&sol);
        if let Some(m) = sub.start_node {
            values[m] = v.clone();
        }
    }
    if let Some(ctrl) = control.as_mut() {
        let chi = spec.omega_indicator();
        let tau = spec.time_weights();
        for (m, row) in ctrl.iter_mut().enumerate() {
            for (i, c) in row.iter_mut().enumerate() {
                *c *= chi[i] / tau[m];
            }
        }
    }
    Ok((
        Trajectory {
            values,
            times: spec.times(),
            mesh: spec.mesh().clone(),
            direction: Direction::Backward,
        },
        control,
    ))
}

/// `Σ_m τ_m ⟨h^m, g^m⟩_{M_ω}`, the discrete `L²(Q_ω)` pairing.
pub fn control_inner(spec: &ProblemSpec, h: &Field, g: &Field) -> f64 {
    let chi = spec.omega_indicator();
    let cells = spec.mesh().cell_widths();
    spec.time_weights()
        .iter()
        .zip(h.iter().zip(g))
        .map(|(tau, (hr, gr))| {
            tau * hr
                .iter()
                .zip(gr)
                .enumerate()
                .map(|(i, (a, b))| chi[i] * cells[i] * a * b)
                .sum::<f64>()
        })
        .sum()
}

/// Both sides of the discrete energy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `sup_m ‖u^m‖²_{H¹_a} + Σ Δt (‖δ_t u‖² + ‖A ū‖²)` against
/// `‖u0‖²_{H¹_a} + ‖h‖²_{L²(Q_ω)}`, with `ū` the step average.
pub fn energy_report(spec: &ProblemSpec, u0: &[f64], h: Option<&Field>) -> Result<EnergyReport> {
    let traj = solve_forward(spec, u0, h)?;
    let op = spec.operator();
    let h1a = |u: &[f64]| -> f64 { mesh_inner(op.mesh(), u, u) + op.inner(&op.apply(u), u) };
    let cells = op.mesh().cell_widths();
    let mut sup: f64 = 0.0;
    for row in &traj.values {
        sup = sup.max(h1a(row));
    }
    let mut integral = 0.0;
    for w in traj.values.windows(2) {
        let dt = spec.dt();
        let du: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| (b - a) / dt).collect();
        let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        let au = op.apply(&mid);
        let au_sq: f64 = op.unknowns().map(|i| cells[i] * au[i] * au[i]).sum();
        integral += dt * (mesh_inner(op.mesh(), &du, &du) + au_sq);
    }
    let lhs = sup + integral;
    let u0p = spec.project(u0);
    let mut rhs = h1a(&u0p);
    if let Some(h) = h {
        rhs += control_inner(spec, h, h);
    }
    let scale = 1e-14;
    if rhs == 0.0 {
        if lhs > scale {
            return Err(LabError::EnergyInconsistency { lhs });
        }
        return Ok(EnergyReport {
            lhs,
            rhs,
            ratio: 0.0,
        });
    }
    Ok(EnergyReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn spec(gamma: f64, regime: BoundaryRegime, n: usize, m: usize) -> ProblemSpec {
        let a = make_power_coefficient(gamma).unwrap();
        let mesh = build_mesh(n, 2.0).unwrap();
        ProblemSpec::with_regime_override(&a, regime, &mesh, 0.5, m).unwrap()
    }

    fn random_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn regime_consistency_is_enforced() {
        let a = make_power_coefficient(0.5).unwrap();
        let mesh = build_mesh(16, 2.0).unwrap();
        assert!(ProblemSpec::new(&a, BoundaryRegime::DirichletZero, &mesh, 1.0, 10).is_ok());
        assert!(matches!(
            ProblemSpec::new(&a, BoundaryRegime::ZeroFlux, &mesh, 1.0, 10),
            Err(LabError::RegimeMismatch { .. })
        ));
        let b = make_power_coefficient(1.5).unwrap();
        assert!(ProblemSpec::new(&b, BoundaryRegime::ZeroFlux, &mesh, 1.0, 10).is_ok());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let s = spec(0.5, BoundaryRegime::DirichletZero, 16, 8);
        let u = solve_forward(&s, &vec![0.0; 17], None).unwrap();
        assert!(u.values.iter().flatten().all(|v| *v == 0.0));
        let v = solve_adjoint(&s, &vec![0.0; 17], None).unwrap();
        assert!(v.values.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn duality_with_sources() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for regime in [BoundaryRegime::DirichletZero, BoundaryRegime::ZeroFlux] {
            for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
                let s = spec(0.7, regime, 24, 9)
                    .with_scheme(scheme)
                    .with_potential(Potential::function(|t, x| 1.0 + t * (3.0 * x).sin()));
                let u0 = random_vec(&mut rng, 25);
                let vt = random_vec(&mut rng, 25);
                let h: Field = (0..10).map(|_| random_vec(&mut rng, 25)).collect();
                let u = solve_forward(&s, &u0, Some(&h)).unwrap();
                let (v, lsharp) = solve_adjoint_with_control(&s, &vt).unwrap();
                let lhs = mesh_inner(s.mesh(), u.terminal(), &s.project(&vt))
                    - mesh_inner(s.mesh(), &s.project(&u0), v.initial());
                let rhs = control_inner(&s, &h, &lsharp);
                assert!((lhs - rhs).abs() < 1e-12 * (lhs.abs() + 1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn time_reversal_symmetry() {
        let s = spec(1.5, BoundaryRegime::ZeroFlux, 20, 7);
        let x = s.mesh().nodes().to_vec();
        let data: Vec<f64> = x.iter().map(|x| (1.0 - x) * (1.0 + x * x)).collect();
        let u = solve_forward(&s, &data, None).unwrap();
        let v = solve_adjoint(&s, &data, None).unwrap();
        for m in 0..=7 {
            for i in 0..=20 {
                assert!((u.values[m][i] - v.values[7 - m][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l2_norm_decays_without_forcing() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = spec(0.5, BoundaryRegime::DirichletZero, 32, 20);
        let u0 = random_vec(&mut rng, 33);
        let u = solve_forward(&s, &u0, None).unwrap();
        for m in 0..20 {
            assert!(u.l2_norm_at(m + 1) <= u.l2_norm_at(m) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn backward_euler_max_principle() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s = spec(1.5, BoundaryRegime::ZeroFlux, 32, 20)
            .with_scheme(Scheme::BackwardEuler)
            .with_potential(Potential::Constant(0.5));
        let u0 = s.project(&random_vec(&mut rng, 33));
        let (lo, hi) = u0
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        let u = solve_forward(&s, &u0, None).unwrap();
        for v in u.values.iter().flatten() {
            assert!(*v >= lo - 1e-14 && *v <= hi + 1e-14);
        }
    }

    #[test]
    fn strongly_negative_potential_breaks_spd() {
        let s = spec(0.5, BoundaryRegime::DirichletZero, 8, 1)
            .with_scheme(Scheme::BackwardEuler)
            .with_potential(Potential::Constant(-1e4));
        let err = solve_forward(&s, &vec![1.0; 9], None).unwrap_err();
        assert!(matches!(err, LabError::NonSpdStep { .. }));
    }

    #[test]
    fn energy_report_zero_data() {
        let s = spec(0.5, BoundaryRegime::DirichletZero, 16, 8);
        let r = energy_report(&s, &vec![0.0; 17], None).unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn dirichlet_nodes_stay_zero() {
        let s = spec(0.5, BoundaryRegime::DirichletZero, 16, 8);
        let u = solve_forward(&s, &vec![1.0; 17], None).unwrap();
        for row in &u.values {
            assert_eq!(row[0], 0.0);
            assert_eq!(row[16], 0.0);
        }
    }
}
