//! Chebyshev series on an interval with least-squares fitting.

use serde::{Deserialize, Serialize};

use crate::numeric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chebyshev {
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Chebyshev {
    pub fn new(coeffs: Vec<f64>, lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "empty Chebyshev domain");
        assert!(!coeffs.is_empty());
        Self { coeffs, lo, hi }
    }

    pub fn constant(c: f64, lo: f64, hi: f64) -> Self {
        Self::new(vec![c], lo, hi)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn to_unit(&self, u: f64) -> f64 {
        (2.0 * u - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Clenshaw evaluation; valid for any `u` but meaningful on the domain.
    pub fn eval(&self, u: f64) -> f64 {
        let s = self.to_unit(u);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * s * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        s * b1 - b2 + self.coeffs[0]
    }

    /// Series of the derivative with respect to `u`.
    pub fn derivative(&self) -> Chebyshev {
        let n = self.coeffs.len();
        if n == 1 {
            return Chebyshev::constant(0.0, self.lo, self.hi);
        }
        let mut d = vec![0.0; n - 1];
        for k in (0..n - 1).rev() {
            let next = if k + 2 < n - 1 { d[k + 2] } else { 0.0 };
            d[k] = next + 2.0 * (k + 1) as f64 * self.coeffs[k + 1];
        }
        d[0] *= 0.5;
        let scale = 2.0 / (self.hi - self.lo);
        for c in &mut d {
            *c *= scale;
        }
        Chebyshev::new(d, self.lo, self.hi)
    }

    /// Values `T_0(s) … T_deg(s)` at the unit-interval image of `u`.
    fn basis_row(&self, u: f64, deg: usize, row: &mut [f64]) {
        let s = self.to_unit(u);
        row[0] = 1.0;
        if deg >= 1 {
            row[1] = s;
        }
        for k in 2..=deg {
            row[k] = 2.0 * s * row[k - 1] - row[k - 2];
        }
    }

    /// Least-squares fit of the given degree on `[lo, hi]`.
    pub fn fit(us: &[f64], vs: &[f64], deg: usize, lo: f64, hi: f64) -> Chebyshev {
        let proto = Chebyshev::constant(0.0, lo, hi);
        let cols = deg + 1;
        let mut a = vec![0.0; us.len() * cols];
        for (i, &u) in us.iter().enumerate() {
            proto.basis_row(u, deg, &mut a[i * cols..(i + 1) * cols]);
        }
        let c = numeric::lstsq(us.len(), cols, &a, vs);
        Chebyshev::new(c, lo, hi)
    }

    pub fn rms_residual(&self, us: &[f64], vs: &[f64]) -> f64 {
        let ss: f64 = us
            .iter()
            .zip(vs)
            .map(|(&u, &v)| (self.eval(u) - v).powi(2))
            .sum();
        (ss / us.len() as f64).sqrt()
    }
}

/// Degree chosen by interleaved k-fold cross-validation: the smallest degree
/// whose validation error is within 10% of the best.
pub fn fit_cross_validated(
    us: &[f64],
    vs: &[f64],
    max_degree: usize,
    folds: usize,
) -> (Chebyshev, Vec<f64>) {
    let lo = us.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = us.len();
    let mut cv = Vec::with_capacity(max_degree + 1);
    for deg in 0..=max_degree {
        let mut ss = 0.0;
        let mut count = 0usize;
        for f in 0..folds {
            let (mut tu, mut tv, mut hu, mut hv) = (vec![], vec![], vec![], vec![]);
            for i in 0..n {
                if i % folds == f {
                    hu.push(us[i]);
                    hv.push(vs[i]);
                } else {
                    tu.push(us[i]);
                    tv.push(vs[i]);
                }
            }
            if tu.len() <= deg || hu.is_empty() {
                ss = f64::INFINITY;
                break;
            }
            let c = Chebyshev::fit(&tu, &tv, deg, lo, hi);
            ss += hu
                .iter()
                .zip(&hv)
                .map(|(&u, &v)| (c.eval(u) - v).powi(2))
                .sum::<f64>();
            count += hu.len();
        }
        cv.push(if count > 0 {
            (ss / count as f64).sqrt()
        } else {
            f64::INFINITY
        });
    }
    let best = cv.iter().copied().fold(f64::INFINITY, f64::min);
    let deg = cv
        .iter()
        .position(|&e| e <= 1.1 * best + 1e-12)
        .unwrap_or(0);
    (Chebyshev::fit(us, vs, deg, lo, hi), cv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluates_and_differentiates_polynomial() {
        let us = numeric::linspace(-2.0, 3.0, 40);
        let p = |x: f64| 0.5 - x + 0.25 * x * x * x;
        let vs: Vec<f64> = us.iter().map(|&u| p(u)).collect();
        let c = Chebyshev::fit(&us, &vs, 3, -2.0, 3.0);
        let d = c.derivative();
        let dd = d.derivative();
        for &u in &[-1.9, 0.0, 1.3, 2.9] {
            assert_relative_eq!(c.eval(u), p(u), epsilon = 1e-12);
            assert_relative_eq!(d.eval(u), -1.0 + 0.75 * u * u, epsilon = 1e-11);
            assert_relative_eq!(dd.eval(u), 1.5 * u, epsilon = 1e-10);
        }
    }

    #[test]
    fn cross_validation_prefers_low_degree_for_lines() {
        let us = numeric::linspace(0.0, 1.0, 60);
        let vs: Vec<f64> = us.iter().map(|&u| 2.0 + 0.0 * u).collect();
        let (c, _) = fit_cross_validated(&us, &vs, 12, 5);
        assert_eq!(c.degree(), 0);
    }
}
