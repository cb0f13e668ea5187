//! Small numerical kernels shared by the solvers.

use faer::prelude::*;
use faer::Mat;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("root not bracketed: f({a}) = {fa}, f({b}) = {fb}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("root finder did not converge in {0} iterations")]
    MaxIterations(usize),
    #[error("function returned a non-finite value at {0}")]
    NonFinite(f64),
}

/// Brent's method for a bracketed root of `f` on `[a, b]`.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    let fa = f(a);
    let fb = f(b);
    brent_root_with(&mut f, a, b, fa, fb, xtol, max_iter)
}

/// [`brent_root`] with the endpoint values already known.
pub fn brent_root_with<F: FnMut(f64) -> f64>(
    f: &mut F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64, RootError> {
    if !fa.is_finite() {
        return Err(RootError::NonFinite(a));
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite(b));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite(b));
        }
    }
    Err(RootError::MaxIterations(max_iter))
}

/// Scan `n` equal steps of `[a, b]` for the first sign change of `f` and
/// refine it with Brent. Returns `None` when no sign change is seen.
pub fn first_root_in<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    xtol: f64,
) -> Option<f64> {
    let h = (b - a) / n as f64;
    let mut x0 = a;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = a + h * i as f64;
        let f1 = f(x1);
        if f0 == 0.0 {
            return Some(x0);
        }
        if f0.is_finite() && f1.is_finite() && f0.signum() != f1.signum() {
            return brent_root_with(&mut f, x0, x1, f0, f1, xtol, 200).ok();
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

/// Dense least-squares solve of `A x ≈ b` with `A` given row-major.
pub fn lstsq(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    assert!(rows >= cols);
    let m = Mat::from_fn(rows, cols, |i, j| a[i * cols + j]);
    let rhs = Mat::from_fn(rows, 1, |i, _| b[i]);
    let x = m.qr().solve_lstsq(&rhs);
    (0..cols).map(|i| x[(i, 0)]).collect()
}

/// Composite trapezoid rule on arbitrary abscissae.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Remove 2π jumps from a phase sequence.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d: f64 = p + offset - out[i - 1];
            offset -= tau * (d / tau).round();
        }
        out.push(p + offset);
    }
    out
}

/// Linear interpolation in a table with increasing abscissae, clamped.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let j = xs.partition_point(|&v| v <= x).min(n - 1);
    let i = j - 1;
    let t = (x - xs[i]) / (xs[j] - xs[i]);
    ys[i] + t * (ys[j] - ys[i])
}

/// Cubic Hermite interpolant on `[0, h]` from values and slopes at both ends.
pub fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t = s / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Derivative of [`hermite`] with respect to `s`.
pub fn hermite_slope(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t = s / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * d0
        + (3.0 * t2 - 2.0 * t) * d1
}

/// Value at quantile `q ∈ [0, 1]` (nearest rank on a sorted copy).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let idx = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    v[idx]
}

/// Evenly spaced samples including both ends.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Derivatives of tabulated data on a uniform grid by fourth-order central
/// differences (one-sided at the ends). Returns first and second derivatives.
pub fn fd_derivatives(y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    assert!(n >= 7, "need at least 7 samples");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        if i >= 2 && i + 2 < n {
            d1[i] = (-y[i + 2] + 8.0 * y[i + 1] - 8.0 * y[i - 1] + y[i - 2]) / (12.0 * h);
            d2[i] = (-y[i + 2] + 16.0 * y[i + 1] - 30.0 * y[i] + 16.0 * y[i - 1] - y[i - 2])
                / (12.0 * h * h);
        } else {
            // Five-point one-sided stencils, mirrored at the right end.
            let (s, base) = if i < 2 { (1.0, i) } else { (-1.0, n - 1 - i) };
            let at = |k: usize| if s > 0.0 { y[k] } else { y[n - 1 - k] };
            let j = base;
            let (f0, f1, f2) = (at(j), at(j + 1), at(j + 2));
            let (f3, f4, f5) = (at(j + 3), at(j + 4), at(j + 5));
            d1[i] = s * (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * h);
            d2[i] = (45.0 * f0 - 154.0 * f1 + 214.0 * f2 - 156.0 * f3 + 61.0 * f4 - 10.0 * f5)
                / (12.0 * h * h);
        }
    }
    (d1, d2)
}

/// Run dense and sparse factorizations on one thread so repeated runs give
/// bit-identical results.
pub fn sequential_linear_algebra() {
    faer::set_global_parallelism(faer::Par::Seq);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14, 100).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), epsilon = 1e-13);
        assert!(matches!(
            brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 50),
            Err(RootError::NotBracketed { .. })
        ));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn lstsq_recovers_line() {
        let xs = linspace(0.0, 1.0, 11);
        let a: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x]).collect();
        let b: Vec<f64> = xs.iter().map(|&x| 3.0 - 2.0 * x).collect();
        let c = lstsq(11, 2, &a, &b);
        assert_relative_eq!(c[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let raw: Vec<f64> = (0..50)
            .map(|i| (0.3 * i as f64).sin().atan2((0.3 * i as f64).cos()))
            .collect();
        let u = unwrap_phase(&raw);
        for (i, v) in u.iter().enumerate() {
            assert_relative_eq!(*v, 0.3 * i as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn fd_derivatives_of_sine() {
        let h = 0.01;
        let y: Vec<f64> = (0..200).map(|i| (i as f64 * h).sin()).collect();
        let (d1, d2) = fd_derivatives(&y, h);
        for i in 0..200 {
            let x = i as f64 * h;
            assert!((d1[i] - x.cos()).abs() < 1e-7, "{i}");
            assert!((d2[i] + x.sin()).abs() < 1e-5, "{i}");
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let p = |x: f64| 1.0 - x + 2.0 * x * x - 0.5 * x * x * x;
        let dp = |x: f64| -1.0 + 4.0 * x - 1.5 * x * x;
        let h = 0.7;
        for s in linspace(0.0, h, 9) {
            assert_relative_eq!(
                hermite(s, h, p(0.0), dp(0.0), p(h), dp(h)),
                p(s),
                epsilon = 1e-13
            );
            assert_relative_eq!(
                hermite_slope(s, h, p(0.0), dp(0.0), p(h), dp(h)),
                dp(s),
                epsilon = 1e-12
            );
        }
    }
}
