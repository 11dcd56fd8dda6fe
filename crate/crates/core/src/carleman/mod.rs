//! Both sides of the Carleman inequality for adjoint solutions, seeded
//! `(s, λ)` sweeps, the conjugated operators `L^±` under `w = e^{sφ}v`, and
//! the observability ratio.

mod identity;
mod jet;

pub use identity::{
    identity_sides, product_identity_residual, IdentityCheck, Manufactured, Profile,
    IDENTITY_GAUSS_POINTS,
    SpaceTimeFunction, ENVELOPE_POWER,
};
pub use jet::{phi_jet, PhiJet, SpatialPhi};

use crate::error::{LabError, Result};
use crate::functionals::{Integrand, Region, WeightGrid};
use crate::pde_solver::{mesh_inner, solve_adjoint, BoundaryRegime, Field, ProblemSpec, Trajectory};
use crate::sampling::{random_series, random_source, Basis};
use crate::weights::{eval_theta_time, theta_time_derivs, CarlemanWeights, PsiFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Denominators below this mark a sample as degenerate.
pub const DEGENERATE_THRESHOLD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    pub s: f64,
    pub lambda: f64,
}

impl CarlemanParams {
    pub fn new(s: f64, lambda: f64) -> Result<Self> {
        if !(s > 0.0 && lambda > 0.0 && s.is_finite() && lambda.is_finite()) {
            return Err(LabError::OutOfRange(format!(
                "s = {s} and lambda = {lambda} must be positive"
            )));
        }
        Ok(Self { s, lambda })
    }
}

/// The four integrals of the inequality for one adjoint solution. All four
/// are stored multiplied by `e^{−log_scale}`, where `log_scale` is the peak
/// of `2sφ`; the ratios do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub sample_id: u64,
    #[serde(flatten)]
    pub params: CarlemanParams,
    pub log_scale: f64,
    /// `(sλ) ∫∫ e^{2sφ} σ a v_x²`
    pub lhs_grad: f64,
    /// `(sλ)^{5/3} ∫∫ e^{2sφ} σ^{5/3} v²`
    pub lhs_zero: f64,
    /// `∫∫ e^{2sφ} F²`
    pub rhs_source: f64,
    /// `(sλ)³ ∫∫_{Q_ω} e^{2sφ} σ³ v²`
    pub rhs_local: f64,
    pub ratio: f64,
    /// Same ratio with `(sλ)² ∫∫ e^{2sφ} σ² v²` as the zeroth-order term.
    pub ratio_beta2: f64,
    pub degenerate: bool,
}

/// Evaluates the report for an already solved adjoint trajectory.
pub fn report_for(
    grid: &WeightGrid,
    v: &Trajectory,
    f: Option<&Field>,
    omega: (f64, f64),
    params: CarlemanParams,
    sample: u64,
) -> CarlemanReport {
    let CarlemanParams { s, lambda } = params;
    let sl = s * lambda;
    let times = &v.times;
    let log_scale = grid.weights().peak_exponent(s);
    let integral = |field: &Field, k: f64, what: Integrand, region: Region| {
        grid.scaled_integral(field, times, s, k, what, region, omega, log_scale)
    };
    let lhs_grad = sl * integral(&v.values, 1.0, Integrand::AVxSq, Region::Q);
    let lhs_zero = sl.powf(5.0 / 3.0) * integral(&v.values, 5.0 / 3.0, Integrand::VSq, Region::Q);
    let lhs_zero2 = sl * sl * integral(&v.values, 2.0, Integrand::VSq, Region::Q);
    let rhs_source = f.map_or(0.0, |f| integral(f, 0.0, Integrand::SourceSq, Region::Q));
    let rhs_local = sl.powi(3) * integral(&v.values, 3.0, Integrand::VSq, Region::QOmega);
    let den = rhs_source + rhs_local;
    let degenerate = !(den >= DEGENERATE_THRESHOLD);
    let (ratio, ratio_beta2) = if degenerate {
        (f64::NAN, f64::NAN)
    } else {
        ((lhs_grad + lhs_zero) / den, (lhs_grad + lhs_zero2) / den)
    };
    CarlemanReport {
        sample_id: sample,
        params,
        log_scale,
        lhs_grad,
        lhs_zero,
        rhs_source,
        rhs_local,
        ratio,
        ratio_beta2,
        degenerate,
    }
}

/// Solves the adjoint for `(v_T, F)` and evaluates the inequality's sides.
pub fn carleman_sides(
    spec: &ProblemSpec,
    v_t: &[f64],
    f: Option<&Field>,
    grid: &WeightGrid,
    params: CarlemanParams,
) -> Result<CarlemanReport> {
    check_grid(spec, grid)?;
    let grid = if grid.weights().lambda() == params.lambda {
        grid.clone()
    } else {
        grid.with_lambda(params.lambda)?
    };
    let v = solve_adjoint(spec, v_t, f)?;
    Ok(report_for(&grid, &v, f, spec.omega(), params, 0))
}

fn check_grid(spec: &ProblemSpec, grid: &WeightGrid) -> Result<()> {
    if grid.mesh() != spec.mesh() {
        return Err(LabError::Precondition("weight grid and problem use different meshes".into()));
    }
    if (grid.weights().horizon() - spec.horizon()).abs() > 1e-12 * spec.horizon() {
        return Err(LabError::Precondition("weights and problem use different horizons".into()));
    }
    Ok(())
}

/// How the base Carleman parameter `s0(λ)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum S0Policy {
    /// `2·max(1, T²)·e^{2λ‖ψ‖_∞}`.
    Heuristic,
    /// The `s` at which the weight exponent `2sφ(T/2, ·)` reaches
    /// `−target` at its most negative point.
    PeakExponent { target: f64 },
    /// The `s` at which `sλσ` reaches `target` where the weight peaks
    /// (`t = T/2`, largest `ψ`): past it the powers of `sλσ` in the
    /// inequality dominate.
    LocalScale { target: f64 },
    Fixed { s0: f64 },
}

/// `sλσ` at the weight peak for the default policy. Individual samples
/// show a hump in their ratio where the local term overtakes the source
/// term, typically near `sλσ ≈ 8`; the default starts past it.
pub const DEFAULT_LOCAL_SCALE: f64 = 16.0;

impl Default for S0Policy {
    fn default() -> Self {
        S0Policy::LocalScale {
            target: DEFAULT_LOCAL_SCALE,
        }
    }
}

impl S0Policy {
    pub fn s0(&self, weights: &CarlemanWeights) -> f64 {
        let big_t = weights.horizon();
        let psi_sup = weights.psi().psi_sup();
        match *self {
            S0Policy::Heuristic => {
                2.0 * (big_t * big_t).max(1.0) * (2.0 * weights.lambda() * psi_sup).exp()
            }
            S0Policy::PeakExponent { target } => {
                let theta_mid = eval_theta_time(0.5 * big_t, big_t).expect("interior time");
                // ρ is increasing in ψ, most negative at ψ = −‖ψ‖_∞ at worst
                let worst = weights.rho_from_psi(-psi_sup).abs();
                target / (2.0 * theta_mid * worst)
            }
            S0Policy::LocalScale { target } => {
                let theta_mid = eval_theta_time(0.5 * big_t, big_t).expect("interior time");
                let eta = weights.eta_from_psi(weights.psi().psi_max());
                target / (weights.lambda() * theta_mid * eta)
            }
            S0Policy::Fixed { s0 } => s0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_samples: usize,
    pub lambdas: Vec<f64>,
    /// `s = s0(λ) · multiplier`.
    pub s_multipliers: Vec<f64>,
    pub s0_policy: S0Policy,
    /// Rows with `λ ≥ lambda0` and multiplier `≥ 1` form the stable region.
    pub lambda0: f64,
    pub seed: u64,
    /// Include a random source `F` (otherwise `F = 0`).
    pub with_source: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub s: f64,
    pub lambda: f64,
    pub multiplier: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio_beta2: f64,
    pub samples: usize,
    pub excluded: usize,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub reports: Vec<CarlemanReport>,
    pub summaries: Vec<SweepSummary>,
    /// Max ratio over the stable region.
    pub empirical_c: f64,
    pub excluded_count: usize,
}

/// Basis for random adjoint data compatible with the boundary regime.
pub fn basis_for(regime: BoundaryRegime) -> Basis {
    match regime {
        BoundaryRegime::DirichletZero => Basis::Sine,
        BoundaryRegime::ZeroFlux => Basis::HalfCosine,
    }
}

/// Seeded `(v_T, F)` for one sample on the spec's grid.
pub fn sample_adjoint_data(spec: &ProblemSpec, seed: u64, sample: u64) -> (Vec<f64>, Field) {
    let basis = basis_for(spec.regime());
    let nodes = spec.mesh().nodes();
    let v_t = random_series(seed, sample, basis, nodes);
    let f = random_source(seed, sample, basis, nodes, &spec.times());
    (v_t, f)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cross product samples × s × λ. Each sample's adjoint is solved once;
/// the result is independent of the thread count.
pub fn carleman_sweep(spec: &ProblemSpec, psi: &PsiFunction, cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.n_samples == 0 || cfg.lambdas.is_empty() || cfg.s_multipliers.is_empty() {
        return Err(LabError::OutOfRange("sweep grids and sample count must be nonempty".into()));
    }
    let base = CarlemanWeights::new(psi.clone(), cfg.lambdas[0], spec.horizon())?;
    let base_grid = WeightGrid::new(&base, spec.mesh())?;
    let grids: Vec<(f64, WeightGrid)> = cfg
        .lambdas
        .iter()
        .map(|&l| {
            let g = base_grid.with_lambda(l)?;
            Ok((cfg.s0_policy.s0(g.weights()), g))
        })
        .collect::<Result<_>>()?;

    let per_sample: Vec<Vec<CarlemanReport>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|sample| {
            let (v_t, f) = sample_adjoint_data(spec, cfg.seed, sample);
            let f = cfg.with_source.then_some(f);
            let v = solve_adjoint(spec, &v_t, f.as_ref())?;
            let mut out = Vec::new();
            for (s0, grid) in &grids {
                for &mult in &cfg.s_multipliers {
                    let params = CarlemanParams::new(s0 * mult, grid.weights().lambda())?;
                    out.push(report_for(grid, &v, f.as_ref(), spec.omega(), params, sample));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let reports: Vec<CarlemanReport> = per_sample.into_iter().flatten().collect();

    let mut summaries = Vec::new();
    let mut empirical_c: f64 = 0.0;
    let mut excluded_count = 0;
    for (s0, grid) in &grids {
        let lambda = grid.weights().lambda();
        for &mult in &cfg.s_multipliers {
            let s = s0 * mult;
            let rows: Vec<&CarlemanReport> = reports
                .iter()
                .filter(|r| r.params.lambda == lambda && r.params.s == s)
                .collect();
            let excluded = rows.iter().filter(|r| r.degenerate).count();
            excluded_count += excluded;
            let mut ratios: Vec<f64> = rows.iter().filter(|r| !r.degenerate).map(|r| r.ratio).collect();
            let max_ratio = ratios.iter().cloned().fold(f64::NAN, f64::max);
            let max_ratio_beta2 = rows
                .iter()
                .filter(|r| !r.degenerate)
                .map(|r| r.ratio_beta2)
                .fold(f64::NAN, f64::max);
            let stable = lambda >= cfg.lambda0 && mult >= 1.0;
            if stable && max_ratio.is_finite() {
                empirical_c = empirical_c.max(max_ratio);
            }
            summaries.push(SweepSummary {
                s,
                lambda,
                multiplier: mult,
                max_ratio,
                median_ratio: median(&mut ratios),
                max_ratio_beta2,
                samples: rows.len() - excluded,
                excluded,
                stable,
            });
        }
    }
    Ok(SweepTable {
        reports,
        summaries,
        empirical_c,
        excluded_count,
    })
}

/// `w = e^{sφ} v` with the conjugated operators evaluated on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WTransform {
    pub w: Field,
    /// `−sφ_t w + s² aφ_x² w + (a w_x)_x`
    pub l_plus: Field,
    /// `w_t − s(aφ_x)_x w − 2s aφ_x w_x`
    pub l_minus: Field,
    pub times: Vec<f64>,
    pub s: f64,
}

/// Conjugates an adjoint trajectory. `(a w_x)_x` uses the flux-form
/// operator, `w_x` a three-point difference on the nonuniform mesh, and
/// `w_t` central differences; the weight derivatives are analytic.
pub fn transform_to_w(
    spec: &ProblemSpec,
    v: &Trajectory,
    grid: &WeightGrid,
    params: CarlemanParams,
) -> Result<WTransform> {
    check_grid(spec, grid)?;
    let grid = grid.with_lambda(params.lambda)?;
    let weights = grid.weights();
    let s = params.s;
    let mesh = spec.mesh();
    let nodes = mesh.nodes();
    let n1 = nodes.len();
    let horizon = spec.horizon();
    let spatial: Vec<SpatialPhi> = nodes
        .iter()
        .map(|&x| Ok(SpatialPhi::new(weights, weights.psi().jet(x)?)))
        .collect::<Result<_>>()?;
    let steps = v.time_steps();
    let mut w = vec![vec![0.0; n1]; steps + 1];
    for (m, row) in w.iter_mut().enumerate() {
        let t = v.times[m];
        if t <= 0.0 || t >= horizon {
            continue;
        }
        for i in 0..n1 {
            let e = weights.weight_from_psi(t, grid.psi_nodes()[i], 0.5 * s, 0.0);
            row[i] = e * v.values[m][i];
        }
    }
    let op = spec.operator();
    let mut l_plus = vec![vec![0.0; n1]; steps + 1];
    let mut l_minus = vec![vec![0.0; n1]; steps + 1];
    for m in 1..steps {
        let t = v.times[m];
        let th = theta_time_derivs(t, horizon)?;
        let div = op.apply(&w[m]);
        let dt2 = v.times[m + 1] - v.times[m - 1];
        for i in op.unknowns() {
            if i == 0 {
                continue;
            }
            let j = spatial[i].at(th);
            let wv = w[m][i];
            let (hl, hr) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
            let wx = (w[m][i + 1] - w[m][i]) * hl / (hr * (hl + hr))
                + (w[m][i] - w[m][i - 1]) * hr / (hl * (hl + hr));
            let wt = (w[m + 1][i] - w[m - 1][i]) / dt2;
            l_plus[m][i] = -s * j.phi_t * wv + s * s * j.a_phi_x_sq * wv - div[i];
            l_minus[m][i] = wt - s * j.a_phi_x_x * wv - 2.0 * s * j.a_phi_x * wx;
        }
    }
    Ok(WTransform {
        w,
        l_plus,
        l_minus,
        times: v.times.clone(),
        s,
    })
}

impl WTransform {
    /// `v = e^{−sφ} w` where the weight is resolvable, else `None`.
    pub fn recover(&self, grid: &WeightGrid) -> Vec<Vec<Option<f64>>> {
        let weights = grid.weights();
        self.w
            .iter()
            .enumerate()
            .map(|(m, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, wv)| {
                        let e = weights.weight_from_psi(self.times[m], grid.psi_nodes()[i], 0.5 * self.s, 0.0);
                        (e > 1e-250).then(|| wv / e)
                    })
                    .collect()
            })
            .collect()
    }

    /// `‖L⁺w + L⁻w − e^{sφ}(F + c v)‖ / ‖e^{sφ}F‖` in the space-time
    /// trapezoid norm over interior nodes and times with `c = 0`.
    pub fn source_residual(&self, grid: &WeightGrid, f: &Field, regime: BoundaryRegime) -> f64 {
        let mesh = grid.mesh();
        let cells = mesh.cell_widths();
        let weights = grid.weights();
        let n = mesh.intervals();
        let first = regime.first_unknown().max(1);
        let mut num = 0.0;
        let mut den = 0.0;
        for m in 1..self.times.len() - 1 {
            for i in first..n {
                let e = weights.weight_from_psi(self.times[m], grid.psi_nodes()[i], 0.5 * self.s, 0.0);
                let target = e * f[m][i];
                let r = self.l_plus[m][i] + self.l_minus[m][i] - target;
                num += cells[i] * r * r;
                den += cells[i] * target * target;
            }
        }
        (num / den).sqrt()
    }
}

/// The boundary term `−s ∫₀ᵀ [a² φ_x w_x²]₀¹` and a scale for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTerm {
    pub value: f64,
    pub scale: f64,
}

/// Boundary term from one-sided differences of `w = e^{sφ} v` at both ends.
pub fn weighted_boundary_term(
    v: &Trajectory,
    grid: &WeightGrid,
    params: CarlemanParams,
) -> Result<BoundaryTerm> {
    let grid = grid.with_lambda(params.lambda)?;
    let weights = grid.weights();
    let psi = weights.psi();
    let coef = psi.coefficient();
    let s = params.s;
    let nodes = v.mesh.nodes();
    let n = nodes.len() - 1;
    let ends = [
        (0usize, 1usize, 1.0f64, psi.jet(0.0)?),
        (n, n - 1, -1.0, psi.jet(1.0)?),
    ];
    let horizon = v.horizon();
    let steps = v.time_steps();
    let mut value = 0.0;
    let mut scale = 0.0;
    for m in 1..steps {
        let t = v.times[m];
        let tau = 0.5 * (v.times[m + 1] - v.times[m - 1]);
        let th = theta_time_derivs(t, horizon)?;
        for (edge, inner, orientation, jet) in ends {
            let sp = SpatialPhi::new(weights, jet).at(th);
            let a = coef.eval(nodes[edge]);
            let e_edge = weights.weight_from_psi(t, grid.psi_nodes()[edge], 0.5 * s, 0.0);
            let e_in = weights.weight_from_psi(t, grid.psi_nodes()[inner], 0.5 * s, 0.0);
            let wx = (e_in * v.values[m][inner] - e_edge * v.values[m][edge])
                / (nodes[inner] - nodes[edge]);
            // a²φ_x = a · (aφ_x); the bracket is (value at 1) − (value at 0)
            let term = a * sp.a_phi_x * wx * wx;
            value += tau * -s * -orientation * term;
            scale += tau * s * term.abs();
        }
    }
    Ok(BoundaryTerm { value, scale })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub constant: f64,
    pub ratios: Vec<f64>,
    pub excluded: usize,
}

/// `‖v(0)‖² / ∫∫_{Q_ω} v²` for one terminal datum with `F = 0`.
pub fn observability_sample(spec: &ProblemSpec, v_t: &[f64]) -> Result<Option<f64>> {
    let v = solve_adjoint(spec, v_t, None)?;
    let chi = spec.omega_indicator();
    let cells = spec.mesh().cell_widths();
    let tau = spec.time_weights();
    let local: f64 = v
        .values
        .iter()
        .zip(&tau)
        .map(|(row, t)| {
            t * row
                .iter()
                .enumerate()
                .map(|(i, x)| chi[i] * cells[i] * x * x)
                .sum::<f64>()
        })
        .sum();
    if !(local > DEGENERATE_THRESHOLD) {
        return Ok(None);
    }
    Ok(Some(mesh_inner(spec.mesh(), v.initial(), v.initial()) / local))
}

/// Max over seeded terminal data of the observability ratio.
pub fn observability_ratio(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Result<ObservabilityReport> {
    let basis = basis_for(spec.regime());
    let results: Vec<Option<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let v_t = random_series(seed, k, basis, spec.mesh().nodes());
            observability_sample(spec, &v_t)
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = results.iter().flatten().cloned().collect();
    Ok(ObservabilityReport {
        constant: ratios.iter().cloned().fold(f64::NAN, f64::max),
        excluded: results.len() - ratios.len(),
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use crate::pde_solver::build_mesh;
    use crate::weights::build_psi;

    fn setup(gamma: f64, regime: BoundaryRegime, n: usize) -> (ProblemSpec, WeightGrid) {
        let a = make_power_coefficient(gamma).unwrap();
        let mesh = build_mesh(n, 2.0).unwrap();
        let spec = ProblemSpec::new(&a, regime, &mesh, 1.0, n)
            .unwrap()
            .with_omega(0.2, 0.7)
            .unwrap();
        let psi = build_psi(&a, 0.325, 0.575, 16).unwrap();
        let w = CarlemanWeights::new(psi, 2.0, 1.0).unwrap();
        let grid = WeightGrid::new(&w, &mesh).unwrap();
        (spec, grid)
    }

    #[test]
    fn zero_data_is_degenerate() {
        let (spec, grid) = setup(0.5, BoundaryRegime::DirichletZero, 32);
        let params = CarlemanParams::new(1e-3, 2.0).unwrap();
        let r = carleman_sides(&spec, &vec![0.0; 33], None, &grid, params).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.lhs_grad + r.lhs_zero + r.rhs_local + r.rhs_source, 0.0);
    }

    #[test]
    fn source_scaling_is_quadratic() {
        let (spec, grid) = setup(0.5, BoundaryRegime::DirichletZero, 32);
        let (_, f) = sample_adjoint_data(&spec, 9, 0);
        let f2: Field = f.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        let s0 = S0Policy::PeakExponent { target: 1.0 }.s0(grid.weights());
        let params = CarlemanParams::new(s0, 2.0).unwrap();
        let zero = vec![0.0; 33];
        let r1 = carleman_sides(&spec, &zero, Some(&f), &grid, params).unwrap();
        let r2 = carleman_sides(&spec, &zero, Some(&f2), &grid, params).unwrap();
        assert!((r2.rhs_source / r1.rhs_source - 4.0).abs() < 1e-12);
        assert!((r2.ratio / r1.ratio - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sweep_is_deterministic() {
        let (spec, grid) = setup(1.5, BoundaryRegime::ZeroFlux, 24);
        let cfg = SweepConfig {
            n_samples: 3,
            lambdas: vec![2.0],
            s_multipliers: vec![1.0, 2.0],
            s0_policy: S0Policy::PeakExponent { target: 1.0 },
            lambda0: 2.0,
            seed: 4,
            with_source: true,
        };
        let a = carleman_sweep(&spec, grid.weights().psi(), &cfg).unwrap();
        let b = carleman_sweep(&spec, grid.weights().psi(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reports.len(), 6);
        assert!(a.empirical_c.is_finite() && a.empirical_c > 0.0);
    }

    #[test]
    fn transform_vanishes_at_time_ends_and_round_trips() {
        let (spec, grid) = setup(0.5, BoundaryRegime::DirichletZero, 32);
        let (v_t, _) = sample_adjoint_data(&spec, 1, 0);
        let v = solve_adjoint(&spec, &v_t, None).unwrap();
        let s0 = S0Policy::PeakExponent { target: 1.0 }.s0(grid.weights());
        let params = CarlemanParams::new(s0, 2.0).unwrap();
        let wt = transform_to_w(&spec, &v, &grid, params).unwrap();
        assert!(wt.w[0].iter().all(|x| *x == 0.0));
        assert!(wt.w[32].iter().all(|x| *x == 0.0));
        let g = grid.with_lambda(2.0).unwrap();
        for (m, row) in wt.recover(&g).iter().enumerate() {
            for (i, val) in row.iter().enumerate() {
                if let Some(val) = val {
                    assert!((val - v.values[m][i]).abs() <= 1e-12 * (1.0 + v.values[m][i].abs()));
                }
            }
        }
    }

    #[test]
    fn boundary_term_of_zero_is_zero() {
        let (spec, grid) = setup(0.5, BoundaryRegime::DirichletZero, 16);
        let v = solve_adjoint(&spec, &vec![0.0; 17], None).unwrap();
        let params = CarlemanParams::new(1.0, 2.0).unwrap();
        let b = weighted_boundary_term(&v, &grid, params).unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn observability_is_scale_invariant() {
        let (spec, _) = setup(0.5, BoundaryRegime::DirichletZero, 32);
        let v_t: Vec<f64> = spec.mesh().nodes().iter().map(|x| (std::f64::consts::PI * x).sin()).collect();
        let v2: Vec<f64> = v_t.iter().map(|v| 2.0 * v).collect();
        let r1 = observability_sample(&spec, &v_t).unwrap().unwrap();
        let r2 = observability_sample(&spec, &v2).unwrap().unwrap();
        assert!((r1 - r2).abs() <= 1e-10 * r1);
        assert!(observability_sample(&spec, &vec![0.0; 33]).unwrap().is_none());
    }
}
