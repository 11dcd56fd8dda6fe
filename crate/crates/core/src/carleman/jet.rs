use crate::error::Result;
use crate::weights::{theta_time_derivs, CarlemanWeights, PsiJet};

/// `φ` and the derivative combinations entering the conjugated operators,
/// all from analytic formulas (no differencing of the weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiJet {
    pub phi: f64,
    pub phi_t: f64,
    pub phi_tt: f64,
    pub phi_x: f64,
    pub phi_tx: f64,
    /// `a φ_x`
    pub a_phi_x: f64,
    /// `(a φ_x)_x`
    pub a_phi_x_x: f64,
    /// `(a φ_x)_xx`
    pub a_phi_x_xx: f64,
    /// `a φ_x²`
    pub a_phi_x_sq: f64,
    /// `(a φ_x²)_x`
    pub a_phi_x_sq_x: f64,
}

/// Spatial part of the jet: everything that does not depend on `t`,
/// to be scaled by `θ`, `θ′` or `θ″`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialPhi {
    rho: f64,
    eta: f64,
    lam: f64,
    p: PsiJet,
}

impl SpatialPhi {
    pub fn new(weights: &CarlemanWeights, p: PsiJet) -> Self {
        Self {
            rho: weights.rho_from_psi(p.psi),
            eta: weights.eta_from_psi(p.psi),
            lam: weights.lambda(),
            p,
        }
    }

    pub fn at(&self, th: [f64; 3]) -> PhiJet {
        let [theta, theta1, theta2] = th;
        let (lam, eta, p) = (self.lam, self.eta, &self.p);
        let lin = theta * lam * eta;
        PhiJet {
            phi: theta * self.rho,
            phi_t: theta1 * self.rho,
            phi_tt: theta2 * self.rho,
            phi_x: lin * p.d1,
            phi_tx: theta1 * lam * eta * p.d1,
            a_phi_x: lin * p.q,
            a_phi_x_x: lin * (lam * p.d1 * p.q + p.q1),
            a_phi_x_xx: lin
                * ((lam * p.d2 + lam * lam * p.d1 * p.d1) * p.q + 2.0 * lam * p.d1 * p.q1 + p.q2),
            a_phi_x_sq: lin * lin * p.d1 * p.q,
            a_phi_x_sq_x: lin
                * lin
                * (2.0 * lam * p.d1 * p.d1 * p.q + p.d1 * p.q1 + p.d2 * p.q),
        }
    }
}

/// Convenience: the full jet at `(t, x)`.
pub fn phi_jet(weights: &CarlemanWeights, t: f64, x: f64) -> Result<PhiJet> {
    let p = weights.psi().jet(x)?;
    let th = theta_time_derivs(t, weights.horizon())?;
    Ok(SpatialPhi::new(weights, p).at(th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::make_power_coefficient;
    use crate::weights::build_psi;

    fn fd_check(gamma: f64, x: f64) {
        let a = make_power_coefficient(gamma).unwrap();
        let w = CarlemanWeights::new(build_psi(&a, 0.3, 0.6, 16).unwrap(), 1.5, 1.0).unwrap();
        let t = 0.4;
        let j = phi_jet(&w, t, x).unwrap();
        let h = 1e-5;
        let jp = phi_jet(&w, t, x + h).unwrap();
        let jm = phi_jet(&w, t, x - h).unwrap();
        let tp = phi_jet(&w, t + h, x).unwrap();
        let tm = phi_jet(&w, t - h, x).unwrap();
        let close = |num: f64, exact: f64| (num - exact).abs() <= 1e-5 * (1.0 + exact.abs());
        assert!(close((jp.phi - jm.phi) / (2.0 * h), j.phi_x), "phi_x at {x}");
        assert!(close((tp.phi - tm.phi) / (2.0 * h), j.phi_t), "phi_t at {x}");
        assert!(close((tp.phi_t - tm.phi_t) / (2.0 * h), j.phi_tt), "phi_tt at {x}");
        assert!(close((tp.phi_x - tm.phi_x) / (2.0 * h), j.phi_tx), "phi_tx at {x}");
        assert!(close((jp.a_phi_x - jm.a_phi_x) / (2.0 * h), j.a_phi_x_x), "(a phi_x)_x at {x}");
        assert!(close((jp.a_phi_x_x - jm.a_phi_x_x) / (2.0 * h), j.a_phi_x_xx), "(a phi_x)_xx at {x}");
        assert!(close((jp.a_phi_x_sq - jm.a_phi_x_sq) / (2.0 * h), j.a_phi_x_sq_x), "(a phi_x^2)_x at {x}");
        let ax = a.eval(x);
        assert!(close(j.a_phi_x, ax * j.phi_x));
        assert!(close(j.a_phi_x_sq, ax * j.phi_x * j.phi_x));
    }

    #[test]
    fn jet_matches_finite_differences_on_all_pieces() {
        for gamma in [0.5, 1.0, 1.5] {
            for x in [0.1, 0.25, 0.4, 0.5, 0.8] {
                fd_check(gamma, x);
            }
        }
    }
}
