//! Shape-preserving (Fritsch–Carlson / PCHIP) cubic interpolation for
//! tabulated coefficients.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(LabError::InvalidTable(format!(
                "x has {} entries but a has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(LabError::InvalidTable("need at least two points".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::InvalidTable("x must be strictly increasing".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(LabError::InvalidTable("non-finite entry".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    slopes[i] = 0.0;
                } else {
                    // weighted harmonic mean
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, slopes })
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `t` (extrapolates the end cubics).
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64) {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        let dd = (12.0 * s - 6.0) * y0
            + (6.0 * s - 4.0) * m0
            + (-12.0 * s + 6.0) * y1
            + (6.0 * s - 2.0) * m1;
        (value, d / h, dd / (h * h))
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_stays_monotone() {
        let x = vec![0.0, 0.1, 0.3, 0.6, 1.0];
        let y = vec![0.0, 0.2, 0.25, 0.9, 1.0];
        let c = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((c.eval_all(*xi).0 - yi).abs() < 1e-14);
        }
        let mut prev = -1.0;
        for k in 0..=1000 {
            let v = c.eval_all(k as f64 / 1000.0).0;
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn linear_data_is_exact() {
        let x: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let c = MonotoneCubic::new(x, y).unwrap();
        let (v, d, dd) = c.eval_all(0.37);
        assert!((v - 1.11).abs() < 1e-13);
        assert!((d - 3.0).abs() < 1e-12);
        assert!(dd.abs() < 1e-10);
    }
}
