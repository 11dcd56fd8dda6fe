//! Carleman weights: the spatial profile `ψ` (two integral branches joined
//! by a Hermite bridge on `[α′, β′]`), the time blow-up `θ(t) = [t(T−t)]⁻⁴`,
//! and the composed weights `η`, `σ`, `φ` with log-space evaluation.

use crate::coefficients::{CoefficientDescriptor, DegeneracyCoefficient};
use crate::error::{LabError, Result};
use crate::quadrature::{adaptive_gk, tanh_sinh};
use serde::{Deserialize, Serialize};

/// Exponents below this are flushed to an exact zero weight.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;
/// Dense samples used for `‖ψ‖_∞` on the bridge.
pub const SUP_SAMPLES: usize = 10_000;

const BRANCH_RTOL: f64 = 1e-13;

/// Polynomial joining the two branches on `[α′, β′]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeKind {
    /// Degree 5, matches value, first and second derivative at both ends.
    #[default]
    Quintic,
    /// Degree 7, additionally matches the third derivative.
    Septic,
}

/// Polynomial in the local variable `u = (x − x0)/len`, coefficients in
/// increasing degree.
#[derive(Debug, Clone, PartialEq)]
struct LocalPoly {
    x0: f64,
    len: f64,
    c: Vec<f64>,
}

impl LocalPoly {
    /// Hermite interpolant with `left[j] = p^{(j)}(x0)` and `right[j] = p^{(j)}(x0 + len)`.
    fn hermite(x0: f64, len: f64, left: &[f64], right: &[f64]) -> Self {
        let m = left.len();
        let deg = 2 * m - 1;
        let mut c = vec![0.0; deg + 1];
        let mut fact = 1.0;
        let mut scale = 1.0;
        for j in 0..m {
            if j > 0 {
                fact *= j as f64;
            }
            c[j] = left[j] * scale / fact;
            scale *= len;
        }
        // remaining coefficients c_m..c_deg from the conditions at u = 1
        let mut mat = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        let mut scale = 1.0;
        for j in 0..m {
            let mut known = 0.0;
            for (k, ck) in c.iter().enumerate().take(m).skip(j) {
                known += falling(k, j) * ck;
            }
            rhs[j] = right[j] * scale - known;
            for (col, k) in (m..=deg).enumerate() {
                mat[j][col] = falling(k, j);
            }
            scale *= len;
        }
        let upper = solve_dense(mat, rhs);
        c[m..].copy_from_slice(&upper);
        Self { x0, len, c }
    }

    /// Derivatives 0..=3 at `x`.
    fn eval(&self, x: f64) -> [f64; 4] {
        let u = (x - self.x0) / self.len;
        let mut out = [0.0; 4];
        let mut scale = 1.0;
        for (d, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in (d..self.c.len()).rev() {
                acc = acc * u + falling(k, d) * self.c[k];
            }
            *slot = acc / scale;
            scale *= self.len;
        }
        out
    }
}

/// `k (k−1) ⋯ (k−j+1)`.
fn falling(k: usize, j: usize) -> f64 {
    (0..j).map(|i| (k - i) as f64).product()
}

/// Gaussian elimination with partial pivoting for the small bridge systems.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// `ψ` and its first three derivatives at a point, plus the flux
/// quantities `q = aψ′`, `q′`, `q″`, which stay finite at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PsiJet {
    pub psi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiFunction {
    coef: DegeneracyCoefficient,
    alpha_prime: f64,
    beta_prime: f64,
    bridge_kind: BridgeKind,
    left_anchors: Vec<(f64, f64)>,
    right_anchors: Vec<(f64, f64)>,
    bridge: LocalPoly,
    psi_sup: f64,
    psi_max: f64,
}

/// Builds `ψ` with the default quintic bridge. `quad_points` is the number
/// of anchor subintervals per branch for the cumulative quadrature.
pub fn build_psi(
    coef: &DegeneracyCoefficient,
    alpha_prime: f64,
    beta_prime: f64,
    quad_points: usize,
) -> Result<PsiFunction> {
    PsiFunction::with_bridge(coef, alpha_prime, beta_prime, quad_points, BridgeKind::Quintic)
}

impl PsiFunction {
    pub fn with_bridge(
        coef: &DegeneracyCoefficient,
        alpha_prime: f64,
        beta_prime: f64,
        quad_points: usize,
        bridge_kind: BridgeKind,
    ) -> Result<Self> {
        if !(0.0 < alpha_prime && alpha_prime < beta_prime && beta_prime < 1.0) {
            return Err(LabError::OutOfRange(format!(
                "need 0 < alpha' < beta' < 1, got alpha' = {alpha_prime}, beta' = {beta_prime}"
            )));
        }
        if quad_points < 2 {
            return Err(LabError::OutOfRange(format!(
                "quad_points = {quad_points} must be >= 2"
            )));
        }
        let integrand = |y: f64| y / coef.eval(y);

        // quadratic anchor spacing crowds the degenerate end
        let mut left_anchors = vec![(0.0, 0.0)];
        let mut acc = 0.0;
        let mut prev = 0.0;
        for j in 1..=quad_points {
            let x = alpha_prime * (j as f64 / quad_points as f64).powi(2);
            acc += if j == 1 {
                tanh_sinh(integrand, 0.0, x, BRANCH_RTOL)?
            } else {
                adaptive_gk(integrand, prev, x, 0.0, BRANCH_RTOL, 2000)?
            };
            left_anchors.push((x, acc));
            prev = x;
        }
        let mut right_anchors = vec![(beta_prime, 0.0)];
        let mut acc = 0.0;
        let mut prev = beta_prime;
        for j in 1..=quad_points {
            let x = beta_prime + (1.0 - beta_prime) * j as f64 / quad_points as f64;
            let piece = if j == quad_points {
                // a(1) may vanish for inadmissible inputs; tanh-sinh avoids evaluating it
                tanh_sinh(integrand, prev, x, BRANCH_RTOL)?
            } else {
                adaptive_gk(integrand, prev, x, 0.0, BRANCH_RTOL, 2000)?
            };
            acc -= piece;
            if !acc.is_finite() {
                return Err(LabError::NotIntegrable { lo: prev, hi: x });
            }
            right_anchors.push((x, acc));
            prev = x;
        }

        let mut psi = Self {
            coef: coef.clone(),
            alpha_prime,
            beta_prime,
            bridge_kind,
            left_anchors,
            right_anchors,
            bridge: LocalPoly {
                x0: alpha_prime,
                len: beta_prime - alpha_prime,
                c: vec![0.0],
            },
            psi_sup: 0.0,
            psi_max: 0.0,
        };
        let l = psi.left_jet(alpha_prime)?;
        let r = psi.right_jet(beta_prime)?;
        let m = match bridge_kind {
            BridgeKind::Quintic => 3,
            BridgeKind::Septic => 4,
        };
        let left = [l.psi, l.d1, l.d2, l.d3];
        let right = [r.psi, r.d1, r.d2, r.d3];
        psi.bridge = LocalPoly::hermite(alpha_prime, beta_prime - alpha_prime, &left[..m], &right[..m]);

        let branch_scale = l.psi.abs().max(psi.right_value(1.0)?.abs());
        let step = (beta_prime - alpha_prime) / SUP_SAMPLES as f64;
        let mut bridge_max: f64 = 0.0;
        let mut best_abs = alpha_prime;
        let mut signed_max = f64::NEG_INFINITY;
        let mut best_signed = alpha_prime;
        for i in 0..=SUP_SAMPLES {
            let x = alpha_prime + step * i as f64;
            let v = psi.bridge.eval(x)[0];
            if v.abs() > bridge_max {
                bridge_max = v.abs();
                best_abs = x;
            }
            if v > signed_max {
                signed_max = v;
                best_signed = x;
            }
        }
        // polish the sampled extrema with Newton on ψ′ = 0; the weights are
        // exponentially sensitive to them
        let polish = |start: f64| {
            let mut x = start;
            for _ in 0..20 {
                let [_, d1, d2, _] = psi.bridge.eval(x);
                if d2 == 0.0 {
                    break;
                }
                let next = (x - d1 / d2).clamp(alpha_prime, beta_prime);
                if (next - x).abs() < 1e-15 {
                    x = next;
                    break;
                }
                x = next;
            }
            ((x - start).abs() <= 2.0 * step).then(|| psi.bridge.eval(x)[0])
        };
        if let Some(v) = polish(best_abs) {
            bridge_max = bridge_max.max(v.abs());
        }
        if let Some(v) = polish(best_signed) {
            signed_max = signed_max.max(v);
        }
        if !(bridge_max <= 10.0 * branch_scale) {
            return Err(LabError::BridgeOvershoot {
                bridge_max,
                branch_scale,
            });
        }
        psi.psi_sup = branch_scale.max(bridge_max);
        // the left branch increases to ψ(α′), the right one decreases from 0
        psi.psi_max = signed_max.max(l.psi).max(0.0);
        Ok(psi)
    }

    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }

    pub fn beta_prime(&self) -> f64 {
        self.beta_prime
    }

    pub fn bridge_kind(&self) -> BridgeKind {
        self.bridge_kind
    }

    pub fn coefficient(&self) -> &DegeneracyCoefficient {
        &self.coef
    }

    /// `‖ψ‖_∞` on `[0, 1]`.
    pub fn psi_sup(&self) -> f64 {
        self.psi_sup
    }

    /// Largest value of `ψ` (not of `|ψ|`).
    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }

    fn left_value(&self, x: f64) -> Result<f64> {
        let integrand = |y: f64| y / self.coef.eval(y);
        let idx = self.left_anchors.partition_point(|(ax, _)| *ax <= x) - 1;
        let (ax, av) = self.left_anchors[idx];
        if x == ax {
            return Ok(av);
        }
        if idx == 0 {
            tanh_sinh(integrand, 0.0, x, BRANCH_RTOL)
        } else {
            Ok(av + adaptive_gk(integrand, ax, x, 0.0, BRANCH_RTOL, 2000)?)
        }
    }

    fn right_value(&self, x: f64) -> Result<f64> {
        let integrand = |y: f64| y / self.coef.eval(y);
        let idx = self.right_anchors.partition_point(|(ax, _)| *ax <= x).max(1) - 1;
        let (ax, av) = self.right_anchors[idx];
        if x == ax {
            return Ok(av);
        }
        Ok(av - adaptive_gk(integrand, ax, x, 0.0, BRANCH_RTOL, 2000)?)
    }

    fn left_jet(&self, x: f64) -> Result<PsiJet> {
        let psi = self.left_value(x)?;
        let (a, a1, a2) = (
            self.coef.eval(x),
            self.coef.eval_deriv(x),
            self.coef.eval_deriv2(x),
        );
        let d1 = x / a;
        let d2 = (a - x * a1) / (a * a);
        let d3 = (-x * a2 * a - 2.0 * a1 * (a - x * a1)) / (a * a * a);
        Ok(PsiJet {
            psi,
            d1,
            d2,
            d3,
            q: x,
            q1: 1.0,
            q2: 0.0,
        })
    }

    fn right_jet(&self, x: f64) -> Result<PsiJet> {
        let psi = self.right_value(x)?;
        let (a, a1, a2) = (
            self.coef.eval(x),
            self.coef.eval_deriv(x),
            self.coef.eval_deriv2(x),
        );
        Ok(PsiJet {
            psi,
            d1: -x / a,
            d2: -(a - x * a1) / (a * a),
            d3: (x * a2 * a + 2.0 * a1 * (a - x * a1)) / (a * a * a),
            q: -x,
            q1: -1.0,
            q2: 0.0,
        })
    }

    fn bridge_jet(&self, x: f64) -> PsiJet {
        let [psi, d1, d2, d3] = self.bridge.eval(x);
        let (a, a1, a2) = (
            self.coef.eval(x),
            self.coef.eval_deriv(x),
            self.coef.eval_deriv2(x),
        );
        PsiJet {
            psi,
            d1,
            d2,
            d3,
            q: a * d1,
            q1: a1 * d1 + a * d2,
            q2: a2 * d1 + 2.0 * a1 * d2 + a * d3,
        }
    }

    /// `ψ(x)` for `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.jet(x)?.psi)
    }

    /// `ψ` with derivatives. At `x = 0` only `psi` and the flux quantities
    /// are meaningful when the degeneracy makes `x/a` blow up.
    pub fn jet(&self, x: f64) -> Result<PsiJet> {
        if !(0.0..=1.0).contains(&x) {
            return Err(LabError::OutOfRange(format!("x = {x} outside [0, 1]")));
        }
        if x < self.alpha_prime {
            if x == 0.0 {
                return Ok(PsiJet {
                    q1: 1.0,
                    ..PsiJet::default()
                });
            }
            self.left_jet(x)
        } else if x <= self.beta_prime {
            if x == self.alpha_prime {
                // branch formula on the closed interval; equals the bridge
                return self.left_jet(x);
            }
            Ok(self.bridge_jet(x))
        } else {
            self.right_jet(x)
        }
    }

    /// One-sided jets at `α′` and `β′`: (branch, bridge) pairs.
    pub fn stitch_jets(&self) -> Result<[(PsiJet, PsiJet); 2]> {
        Ok([
            (self.left_jet(self.alpha_prime)?, self.bridge_jet(self.alpha_prime)),
            (self.right_jet(self.beta_prime)?, self.bridge_jet(self.beta_prime)),
        ])
    }

    /// Largest one-sided mismatch of value, first and second derivative at
    /// the stitch points, relative to `1 + |·|`.
    pub fn stitch_mismatch(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (branch, bridge) in self.stitch_jets()? {
            for (u, v) in [
                (branch.psi, bridge.psi),
                (branch.d1, bridge.d1),
                (branch.d2, bridge.d2),
            ] {
                worst = worst.max((u - v).abs() / (1.0 + u.abs()));
            }
        }
        Ok(worst)
    }
}

/// Serializable weight configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub lambda: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub alpha_prime: f64,
    pub beta_prime: f64,
    pub coefficient: CoefficientDescriptor,
    #[serde(default)]
    pub bridge: BridgeKind,
}

/// `θ(t) = 1/[t(T−t)]⁴`.
pub fn eval_theta_time(t: f64, horizon: f64) -> Result<f64> {
    if !(t > 0.0 && t < horizon) {
        return Err(LabError::SingularEndpoint { t, horizon });
    }
    Ok((t * (horizon - t)).powi(-4))
}

/// `θ`, `θ′`, `θ″` at an interior time.
pub fn theta_time_derivs(t: f64, horizon: f64) -> Result<[f64; 3]> {
    let th = eval_theta_time(t, horizon)?;
    let g = t * (horizon - t);
    let g1 = horizon - 2.0 * t;
    Ok([
        th,
        -4.0 * th / g * g1,
        20.0 * th / (g * g) * g1 * g1 + 8.0 * th / g,
    ])
}

/// Default `ω′ ⊂⊂ ω`: the middle half of `(α, β)`.
pub fn default_omega_prime(alpha: f64, beta: f64) -> (f64, f64) {
    let q = (beta - alpha) / 4.0;
    (alpha + q, beta - q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanWeights {
    psi: PsiFunction,
    lambda: f64,
    horizon: f64,
}

impl CarlemanWeights {
    pub fn new(psi: PsiFunction, lambda: f64, horizon: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LabError::OutOfRange(format!("lambda = {lambda} must be > 0")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LabError::OutOfRange(format!("T = {horizon} must be > 0")));
        }
        Ok(Self {
            psi,
            lambda,
            horizon,
        })
    }

    pub fn from_config(cfg: &WeightConfig, quad_points: usize) -> Result<Self> {
        let coef = DegeneracyCoefficient::from_descriptor(&cfg.coefficient)?;
        let psi = PsiFunction::with_bridge(
            &coef,
            cfg.alpha_prime,
            cfg.beta_prime,
            quad_points,
            cfg.bridge,
        )?;
        Self::new(psi, cfg.lambda, cfg.horizon)
    }

    /// Same `ψ`, different `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.psi.clone(), lambda, self.horizon)
    }

    pub fn psi(&self) -> &PsiFunction {
        &self.psi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `η = e^{λ(‖ψ‖_∞ + ψ)}` from a value of `ψ`.
    pub fn eta_from_psi(&self, psi: f64) -> f64 {
        (self.lambda * (self.psi.psi_sup + psi)).exp()
    }

    /// `η − e^{3λ‖ψ‖_∞}`, the (negative) spatial factor of `φ`.
    pub fn rho_from_psi(&self, psi: f64) -> f64 {
        let big = 3.0 * self.lambda * self.psi.psi_sup;
        big.exp() * (self.lambda * (psi - 2.0 * self.psi.psi_sup)).exp_m1()
    }

    pub fn eta(&self, x: f64) -> Result<f64> {
        Ok(self.eta_from_psi(self.psi.eval(x)?))
    }

    pub fn sigma(&self, t: f64, x: f64) -> Result<f64> {
        Ok(eval_theta_time(t, self.horizon)? * self.eta(x)?)
    }

    pub fn phi(&self, t: f64, x: f64) -> Result<f64> {
        Ok(eval_theta_time(t, self.horizon)? * self.rho_from_psi(self.psi.eval(x)?))
    }

    /// `2sφ + k ln σ`, or `None` at `t ∈ {0, T}`.
    pub fn log_weight_from_psi(&self, t: f64, psi: f64, s: f64, k: f64) -> Option<f64> {
        if !(t > 0.0 && t < self.horizon) {
            return None;
        }
        let g = t * (self.horizon - t);
        let theta = g.powi(-4);
        let ln_theta = -4.0 * g.ln();
        let ln_eta = self.lambda * (self.psi.psi_sup + psi);
        let mut e = 2.0 * s * theta * self.rho_from_psi(psi);
        if k != 0.0 {
            e += k * (ln_theta + ln_eta);
        }
        Some(e)
    }

    /// `e^{2sφ} σ^k` from a value of `ψ`; exactly zero at the time endpoints
    /// and below the underflow clamp.
    pub fn weight_from_psi(&self, t: f64, psi: f64, s: f64, k: f64) -> f64 {
        match self.log_weight_from_psi(t, psi, s, k) {
            Some(e) if e >= UNDERFLOW_EXPONENT => e.exp(),
            _ => 0.0,
        }
    }

    /// `e^{2sφ − shift} σ^k`, with the same clamp applied after the shift.
    pub fn shifted_weight_from_psi(&self, t: f64, psi: f64, s: f64, k: f64, shift: f64) -> f64 {
        match self.log_weight_from_psi(t, psi, s, k) {
            Some(e) if e - shift >= UNDERFLOW_EXPONENT => (e - shift).exp(),
            _ => 0.0,
        }
    }

    /// Largest value of `2sφ` over the space-time domain, attained at
    /// `t = T/2` where `ψ` is largest.
    pub fn peak_exponent(&self, s: f64) -> f64 {
        let mid = eval_theta_time(0.5 * self.horizon, self.horizon).expect("interior time");
        2.0 * s * mid * self.rho_from_psi(self.psi.psi_max)
    }

    /// `e^{2sφ(t,x)} σ(t,x)^k`.
    pub fn eval_weight(&self, t: f64, x: f64, s: f64, k: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(LabError::OutOfRange(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        if t == 0.0 || t == self.horizon {
            return Ok(0.0);
        }
        Ok(self.weight_from_psi(t, self.psi.eval(x)?, s, k))
    }

    /// Evaluates `ψ` jets on a set of points, for repeated weight evaluation.
    pub fn profile(&self, xs: &[f64]) -> Result<Vec<PsiJet>> {
        xs.iter().map(|&x| self.psi.jet(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;

    #[test]
    fn linear_coefficient_branches() {
        let a = make_power_coefficient(1.0).unwrap();
        let psi = build_psi(&a, 0.3, 0.7, 16).unwrap();
        for x in [0.0, 0.05, 0.1, 0.29] {
            assert!((psi.eval(x).unwrap() - x).abs() < 1e-13);
        }
        assert!((psi.eval(1.0).unwrap() + 0.3).abs() < 1e-13);
        assert!(psi.eval(0.7).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sqrt_coefficient_left_branch() {
        let a = make_power_coefficient(0.5).unwrap();
        let psi = build_psi(&a, 0.3, 0.7, 16).unwrap();
        let expected = 0.25f64.powf(1.5) / 1.5;
        assert!((psi.eval(0.25).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn bridge_is_c2() {
        for gamma in [0.3, 0.5, 1.0, 1.5, 1.9] {
            let a = make_power_coefficient(gamma).unwrap();
            for kind in [BridgeKind::Quintic, BridgeKind::Septic] {
                let psi = PsiFunction::with_bridge(&a, 0.35, 0.6, 16, kind)
                    .unwrap_or_else(|e| panic!("gamma {gamma} {kind:?}: {e}"));
                assert!(psi.stitch_mismatch().unwrap() < 1e-10, "gamma {gamma} {kind:?}");
            }
        }
        let a = make_power_coefficient(0.5).unwrap();
        let psi = PsiFunction::with_bridge(&a, 0.35, 0.6, 16, BridgeKind::Septic).unwrap();
        for (branch, bridge) in psi.stitch_jets().unwrap() {
            assert!((branch.d3 - bridge.d3).abs() < 1e-8 * (1.0 + branch.d3.abs()));
        }
    }

    #[test]
    fn theta_time_values() {
        assert_eq!(eval_theta_time(0.5, 1.0).unwrap(), 256.0);
        assert_eq!(eval_theta_time(1.0, 2.0).unwrap(), 1.0);
        assert!((eval_theta_time(0.1, 1.0).unwrap() - 0.09f64.powi(-4)).abs() < 1e-9);
        assert!(matches!(
            eval_theta_time(0.0, 1.0),
            Err(LabError::SingularEndpoint { .. })
        ));
    }

    #[test]
    fn theta_derivatives_match_differences() {
        let t = 0.37;
        let h = 1e-6;
        let [_, d1, d2] = theta_time_derivs(t, 1.0).unwrap();
        let f = |t| eval_theta_time(t, 1.0).unwrap();
        assert!(((f(t + h) - f(t - h)) / (2.0 * h) - d1).abs() < 1e-6 * d1.abs());
        let [_, p, _] = theta_time_derivs(t + h, 1.0).unwrap();
        let [_, m, _] = theta_time_derivs(t - h, 1.0).unwrap();
        assert!(((p - m) / (2.0 * h) - d2).abs() < 1e-6 * d2.abs());
    }

    #[test]
    fn weight_limits() {
        let a = make_power_coefficient(0.5).unwrap();
        let w = CarlemanWeights::new(build_psi(&a, 0.3, 0.7, 16).unwrap(), 1.0, 1.0).unwrap();
        assert_eq!(w.eval_weight(0.0, 0.2, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(w.eval_weight(1.0, 0.2, 1.0, 3.0).unwrap(), 0.0);
        let v = w.eval_weight(0.5, 0.2, 1.0, 0.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn weight_matches_extended_precision() {
        // 50-digit evaluation: a = x, ω′ = (0.3, 0.7), λ = 1, T = 1, t = 0.5, x = 0.1, s = 1.
        // The quintic bridge peaks at u = 0.23397… giving ‖ψ‖_∞ = 0.35833939139394590…
        let a = make_power_coefficient(1.0).unwrap();
        let w = CarlemanWeights::new(build_psi(&a, 0.3, 0.7, 16).unwrap(), 1.0, 1.0).unwrap();
        assert!((w.psi().psi_sup() - 0.358_339_391_393_945_9).abs() < 1e-15);
        assert!((w.phi(0.5, 0.1).unwrap() + 345.241_730_613_677_56).abs() < 1e-10);
        let cases = [
            (0.0, 1.339_192_299_763_430_9e-300),
            (1.0, 5.421_721_151_907_994e-298),
            (3.0, 8.886_395_640_248_288e-293),
        ];
        for (k, expected) in cases {
            let v = w.eval_weight(0.5, 0.1, 1.0, k).unwrap();
            assert!(((v - expected) / expected).abs() < 1e-10, "k = {k}: {v:e}");
        }
    }

    #[test]
    fn default_omega_prime_is_middle_half() {
        let (l, r) = default_omega_prime(0.2, 0.6);
        assert!((l - 0.3).abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
    }
}
