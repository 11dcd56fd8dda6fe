//! One-dimensional quadrature: adaptive Gauss–Kronrod for smooth integrands,
//! double-exponential (tanh–sinh) for integrable endpoint singularities, and
//! Gauss–Legendre rules for composite tensor quadrature.

use crate::error::{LabError, Result};
use std::f64::consts::FRAC_PI_2;

// Kronrod 15-point abscissae (non-negative half) and weights; the
// embedded 7-point Gauss rule uses every other abscissa.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (G7/K15) with interval bisection.
///
/// Fails with [`LabError::NotIntegrable`] when the error estimate does not
/// reach `abs_tol + rel_tol·|I|` within `max_intervals` subintervals or the
/// integrand produces non-finite values.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(LabError::NotIntegrable { lo: a, hi: b });
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= max_intervals {
            return Err(LabError::NotIntegrable { lo: a, hi: b });
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(LabError::NotIntegrable { lo: a, hi: b });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Tanh–sinh quadrature on `[a, b]`, tolerant of integrable singularities
/// at either endpoint. Abscissae are formed as offsets from the nearer
/// endpoint so that points crowding `a = 0` keep full relative precision.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let term = |u: f64| -> f64 {
        let v = FRAC_PI_2 * u.sinh();
        let dv = FRAC_PI_2 * u.cosh();
        // distance to the nearer endpoint, 2·half/(1 + e^{2|v|})
        let e = (2.0 * v.abs()).min(1400.0).exp();
        let delta = 2.0 * half / (1.0 + e);
        if delta == 0.0 {
            return 0.0;
        }
        let x = if v < 0.0 { a + delta } else { b - delta };
        if x <= a || x >= b {
            return 0.0;
        }
        // weight: half · dv · sech²(v) = half·dv·4e^{2|v|}/(1+e^{2|v|})²
        let w = half * dv * 4.0 / (e + 2.0 + 1.0 / e);
        if w == 0.0 {
            return 0.0;
        }
        let fx = f(x);
        if !fx.is_finite() && delta < 1e-30 * half {
            // the integrand overflowed right at the endpoint: truncate there
            return 0.0;
        }
        w * fx
    };
    let u_max = 6.5;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= u_max {
        let u = k as f64 * h;
        sum += term(u) + term(-u);
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= u_max {
            let u = k as f64 * h;
            sum += term(u) + term(-u);
            k += 2;
        }
        let next = sum * h;
        if !next.is_finite() {
            return Err(LabError::NotIntegrable { lo: a, hi: b });
        }
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            // a non-integrable endpoint shows up as tail terms that refuse to decay
            let mut k_last = (u_max / h).floor();
            while k_last * h > u_max {
                k_last -= 1.0;
            }
            let edge = term(k_last * h).abs().max(term(-k_last * h).abs());
            if edge * h > rel_tol.max(1e-10) * next.abs() {
                return Err(LabError::NotIntegrable { lo: a, hi: b });
            }
            return Ok(next);
        }
    }
    Err(LabError::NotIntegrable { lo: a, hi: b })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let v = adaptive_gk(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14, 50).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫₀¹ y^{-1/2} dy = 2
        let v = tanh_sinh(|y| y.powf(-0.5), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-11, "{v}");
        // ∫₀¹ y^{-0.9} dy = 10
        let v = tanh_sinh(|y| y.powf(-0.9), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 10.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn tanh_sinh_detects_divergence() {
        assert!(tanh_sinh(|y| 1.0 / y, 0.0, 1.0, 1e-12).is_err());
        assert!(tanh_sinh(|y| y / (y * y * y), 0.0, 0.1, 1e-12).is_err());
        assert!(tanh_sinh(|y| 1.0 / (1.0 - y), 0.5, 1.0, 1e-12).is_err());
        // integrand underflowing to 0/0-free infinities at the endpoint
        let v = tanh_sinh(|y| y / y.powf(1.5), 0.0, 0.001, 1e-13).unwrap();
        assert!((v - 2.0 * 0.001f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((approx - exact).abs() < 1e-13, "n={n}");
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }
}
