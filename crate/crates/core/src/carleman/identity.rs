//! The exact product identity for the conjugated operators
//!
//! ```text
//! (L⁺w, L⁻w) = s/2 ∫∫φ_tt w² − 2s² ∫∫φ_tx aφ_x w² + s³ ∫∫aφ_x(aφ_x²)_x w²
//!            + s ∫∫(aφ_x)_xx a w w_x + 2s ∫∫(aφ_x)_x a w_x² − s ∫∫aφ_x a_x w_x²
//!            − s ∫₀ᵀ [a²φ_x w_x²]₀¹
//! ```
//!
//! checked on smooth manufactured `w` by quadrature of both sides.

use super::jet::SpatialPhi;
use crate::error::{LabError, Result};
use crate::pde_solver::BoundaryRegime;
use crate::quadrature::gauss_legendre;
use crate::weights::{theta_time_derivs, CarlemanWeights};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A smooth space-time test function: `[w, w_t, w_x, w_xx]` at `(t, x)`.
pub trait SpaceTimeFunction: Sync {
    fn jet(&self, t: f64, x: f64) -> [f64; 4];
}

/// Spatial profiles of the standard manufactured suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `sin(πx)`
    SinPi,
    /// `x(1 − x)(1 + x)`
    CubicDirichlet,
    /// `sin(πx)(1 + x t)`
    SinPiModulated,
    /// `cos(πx/2)`
    HalfCos,
    /// `1 − x²`
    OneMinusXSq,
    /// `cos(πx/2)(1 + t x²)`
    HalfCosModulated,
}

impl Profile {
    pub fn suite(regime: BoundaryRegime) -> [Profile; 3] {
        match regime {
            BoundaryRegime::DirichletZero => {
                [Profile::SinPi, Profile::CubicDirichlet, Profile::SinPiModulated]
            }
            BoundaryRegime::ZeroFlux => {
                [Profile::HalfCos, Profile::OneMinusXSq, Profile::HalfCosModulated]
            }
        }
    }

    /// `[S, S_t, S_x, S_xx]`.
    fn jet(self, t: f64, x: f64) -> [f64; 4] {
        match self {
            Profile::SinPi => {
                let (s, c) = (PI * x).sin_cos();
                [s, 0.0, PI * c, -PI * PI * s]
            }
            Profile::CubicDirichlet => [
                x * (1.0 - x) * (1.0 + x),
                0.0,
                1.0 - 3.0 * x * x,
                -6.0 * x,
            ],
            Profile::SinPiModulated => {
                let (s, c) = (PI * x).sin_cos();
                let m = 1.0 + x * t;
                [
                    s * m,
                    s * x,
                    PI * c * m + s * t,
                    -PI * PI * s * m + 2.0 * PI * c * t,
                ]
            }
            Profile::HalfCos => {
                let (s, c) = (0.5 * PI * x).sin_cos();
                [c, 0.0, -0.5 * PI * s, -0.25 * PI * PI * c]
            }
            Profile::OneMinusXSq => [1.0 - x * x, 0.0, -2.0 * x, -2.0],
            Profile::HalfCosModulated => {
                let (s, c) = (0.5 * PI * x).sin_cos();
                let m = 1.0 + t * x * x;
                [
                    c * m,
                    c * x * x,
                    -0.5 * PI * s * m + 2.0 * t * x * c,
                    -0.25 * PI * PI * c * m - 2.0 * PI * s * t * x + 2.0 * t * c,
                ]
            }
        }
    }
}

/// `w(t, x) = (4t(T − t)/T²)^8 · S(t, x)`. The high power of the time
/// envelope keeps every term of the identity integrable against the
/// `θ(t)³` blow-up of the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub profile: Profile,
    pub horizon: f64,
}

pub const ENVELOPE_POWER: i32 = 8;

impl SpaceTimeFunction for Manufactured {
    fn jet(&self, t: f64, x: f64) -> [f64; 4] {
        let big_t = self.horizon;
        let g = 4.0 * t * (big_t - t) / (big_t * big_t);
        let g1 = 4.0 * (big_t - 2.0 * t) / (big_t * big_t);
        let env = g.powi(ENVELOPE_POWER);
        let env_t = ENVELOPE_POWER as f64 * g.powi(ENVELOPE_POWER - 1) * g1;
        let [s, s_t, s_x, s_xx] = self.profile.jet(t, x);
        [env * s, env_t * s + env * s_t, env * s_x, env * s_xx]
    }
}

/// The two sides of the identity and the relative residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    /// The seven right-hand terms in the order of the identity.
    pub terms: [f64; 7],
    pub residual: f64,
}

/// Quadrature nodes on `[0, 1]` with breakpoints at `α′` and `β′`:
/// half the budget graded quadratically on `[0, α′]`, a quarter on each of
/// the other two pieces. Returns (nodes, weights) of the chosen rule.
fn x_rule(alpha_p: f64, beta_p: f64, n: usize, gauss: usize) -> (Vec<f64>, Vec<f64>) {
    let n_left = (n / 2).max(1);
    let n_mid = (n / 4).max(1);
    let n_right = (n - n_left - n_mid).max(1);
    let mut edges: Vec<f64> = (0..=n_left)
        .map(|i| alpha_p * (i as f64 / n_left as f64).powi(2))
        .collect();
    edges.extend((1..=n_mid).map(|i| alpha_p + (beta_p - alpha_p) * i as f64 / n_mid as f64));
    edges.extend((1..=n_right).map(|i| beta_p + (1.0 - beta_p) * i as f64 / n_right as f64));
    *edges.last_mut().unwrap() = 1.0;
    composite(&edges, gauss)
}

/// Composite rule over consecutive `edges`: midpoint when `gauss == 0`,
/// else `gauss`-point Gauss–Legendre per cell.
fn composite(edges: &[f64], gauss: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    let (gx, gw) = if gauss == 0 {
        (vec![0.0], vec![2.0])
    } else {
        gauss_legendre(gauss)
    };
    for e in edges.windows(2) {
        let half = 0.5 * (e[1] - e[0]);
        let mid = 0.5 * (e[0] + e[1]);
        for (g, w) in gx.iter().zip(&gw) {
            xs.push(mid + half * g);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

fn check_boundary_conditions<W: SpaceTimeFunction>(
    w: &W,
    horizon: f64,
    regime: BoundaryRegime,
) -> Result<()> {
    let samples = 33;
    let mut scale: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    let mut worst_x: f64 = 0.0;
    for i in 0..=samples {
        let u = i as f64 / samples as f64;
        for j in 1..samples {
            let t = horizon * j as f64 / samples as f64;
            scale = scale.max(w.jet(t, u)[0].abs());
        }
        worst_t = worst_t
            .max(w.jet(0.0, u)[0].abs())
            .max(w.jet(horizon, u)[0].abs());
        let t = horizon * u;
        worst_x = worst_x.max(w.jet(t, 1.0)[0].abs());
        if regime == BoundaryRegime::DirichletZero {
            worst_x = worst_x.max(w.jet(t, 0.0)[0].abs());
        }
    }
    let tol = 1e-12 * scale.max(1.0);
    if worst_t > tol {
        return Err(LabError::Precondition(format!(
            "w does not vanish at t = 0 and t = T (|w| up to {worst_t:e})"
        )));
    }
    if worst_x > tol {
        return Err(LabError::Precondition(format!(
            "w violates the {regime} boundary conditions (|w| up to {worst_x:e})"
        )));
    }
    Ok(())
}

/// Both sides of the identity by tensor quadrature with `n` space cells
/// and `m` time cells; `gauss = 0` selects the midpoint rule, otherwise a
/// composite Gauss–Legendre rule with that many points per cell.
pub fn identity_sides<W: SpaceTimeFunction>(
    w: &W,
    weights: &CarlemanWeights,
    s: f64,
    regime: BoundaryRegime,
    n: usize,
    m: usize,
    gauss: usize,
) -> Result<IdentityCheck> {
    if n < 4 || m < 2 {
        return Err(LabError::OutOfRange(format!(
            "resolution ({n}, {m}) too coarse"
        )));
    }
    let horizon = weights.horizon();
    check_boundary_conditions(w, horizon, regime)?;
    let psi = weights.psi();
    let coef = psi.coefficient();
    let (xs, xw) = x_rule(psi.alpha_prime(), psi.beta_prime(), n, gauss);
    let t_edges: Vec<f64> = (0..=m).map(|k| horizon * k as f64 / m as f64).collect();
    let (ts, tw) = composite(&t_edges, gauss);

    let spatial: Vec<(SpatialPhi, f64, f64)> = xs
        .iter()
        .map(|&x| {
            Ok((
                SpatialPhi::new(weights, psi.jet(x)?),
                coef.eval(x),
                coef.eval_deriv(x),
            ))
        })
        .collect::<Result<_>>()?;
    let times: Vec<[f64; 3]> = ts
        .iter()
        .map(|&t| theta_time_derivs(t, horizon))
        .collect::<Result<_>>()?;

    let mut lhs = 0.0;
    let mut terms = [0.0; 7];
    for (ti, &t) in ts.iter().enumerate() {
        let th = times[ti];
        let mut row_lhs = 0.0;
        let mut row = [0.0; 6];
        for (xi, &x) in xs.iter().enumerate() {
            let (sp, a, a1) = &spatial[xi];
            let j = sp.at(th);
            let [wv, wt, wx, wxx] = w.jet(t, x);
            let div_flux = a1 * wx + a * wxx;
            let lplus = -s * j.phi_t * wv + s * s * j.a_phi_x_sq * wv + div_flux;
            let lminus = wt - s * j.a_phi_x_x * wv - 2.0 * s * j.a_phi_x * wx;
            let q = xw[xi];
            row_lhs += q * lplus * lminus;
            row[0] += q * 0.5 * s * j.phi_tt * wv * wv;
            row[1] += q * -2.0 * s * s * j.phi_tx * j.a_phi_x * wv * wv;
            row[2] += q * s.powi(3) * j.a_phi_x * j.a_phi_x_sq_x * wv * wv;
            row[3] += q * s * j.a_phi_x_xx * a * wv * wx;
            row[4] += q * 2.0 * s * j.a_phi_x_x * a * wx * wx;
            row[5] += q * -s * j.a_phi_x * a1 * wx * wx;
        }
        lhs += tw[ti] * row_lhs;
        for (acc, r) in terms.iter_mut().zip(row) {
            *acc += tw[ti] * r;
        }
        // −s [a² φ_x w_x²] at x = 1 minus x = 0; a(0) = 0 removes the left end
        let a_one = coef.eval(1.0);
        let right = SpatialPhi::new(weights, psi.jet(1.0)?).at(th);
        let w_x_one = w.jet(t, 1.0)[2];
        terms[6] += tw[ti] * -s * a_one * right.a_phi_x * w_x_one * w_x_one;
    }
    let rhs: f64 = terms.iter().sum();
    let magnitude: f64 = terms.iter().map(|v| v.abs()).sum::<f64>() + lhs.abs();
    Ok(IdentityCheck {
        lhs,
        terms,
        residual: (lhs - rhs).abs() / (magnitude + 1.0),
    })
}

/// Gauss points per cell used by [`product_identity_residual`].
pub const IDENTITY_GAUSS_POINTS: usize = 2;

/// Relative residual of the identity at `(n, m)` cells with the two-point
/// Gauss rule per cell. The weight concentrates sharply in `x` once `s` is
/// in the swept range, and the midpoint rule needs several times more
/// cells for the same accuracy.
pub fn product_identity_residual<W: SpaceTimeFunction>(
    w: &W,
    weights: &CarlemanWeights,
    s: f64,
    regime: BoundaryRegime,
    n: usize,
    m: usize,
) -> Result<f64> {
    Ok(identity_sides(w, weights, s, regime, n, m, IDENTITY_GAUSS_POINTS)?.residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use crate::weights::build_psi;

    struct Zero;
    impl SpaceTimeFunction for Zero {
        fn jet(&self, _: f64, _: f64) -> [f64; 4] {
            [0.0; 4]
        }
    }

    struct NotVanishing;
    impl SpaceTimeFunction for NotVanishing {
        fn jet(&self, _: f64, x: f64) -> [f64; 4] {
            [(PI * x).sin(), 0.0, PI * (PI * x).cos(), 0.0]
        }
    }

    fn weights(gamma: f64) -> CarlemanWeights {
        let a = make_power_coefficient(gamma).unwrap();
        CarlemanWeights::new(build_psi(&a, 0.35, 0.6, 16).unwrap(), 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_function_has_zero_residual() {
        let r =
            product_identity_residual(&Zero, &weights(0.5), 1.0, BoundaryRegime::DirichletZero, 16, 16)
                .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn rejects_functions_not_vanishing_in_time() {
        let err = product_identity_residual(
            &NotVanishing,
            &weights(0.5),
            1.0,
            BoundaryRegime::DirichletZero,
            16,
            16,
        )
        .unwrap_err();
        assert!(matches!(err, LabError::Precondition(_)));
    }

    #[test]
    fn rejects_dirichlet_violation() {
        let w = Manufactured {
            profile: Profile::HalfCos,
            horizon: 1.0,
        };
        assert!(product_identity_residual(&w, &weights(0.5), 1.0, BoundaryRegime::DirichletZero, 16, 16)
            .is_err());
        assert!(
            product_identity_residual(&w, &weights(1.5), 1.0, BoundaryRegime::ZeroFlux, 16, 16).is_ok()
        );
    }

    #[test]
    fn manufactured_jets_match_differences() {
        for profile in [
            Profile::SinPi,
            Profile::CubicDirichlet,
            Profile::SinPiModulated,
            Profile::HalfCos,
            Profile::OneMinusXSq,
            Profile::HalfCosModulated,
        ] {
            let w = Manufactured {
                profile,
                horizon: 1.3,
            };
            let (t, x, h) = (0.45, 0.37, 1e-5);
            let j = w.jet(t, x);
            let dt = (w.jet(t + h, x)[0] - w.jet(t - h, x)[0]) / (2.0 * h);
            let dx = (w.jet(t, x + h)[0] - w.jet(t, x - h)[0]) / (2.0 * h);
            let dxx = (w.jet(t, x + h)[2] - w.jet(t, x - h)[2]) / (2.0 * h);
            assert!((dt - j[1]).abs() < 1e-7, "{profile:?}");
            assert!((dx - j[2]).abs() < 1e-7, "{profile:?}");
            assert!((dxx - j[3]).abs() < 1e-6, "{profile:?}");
        }
    }
}
