//! Quantum Hamilton–Jacobi description of the arc problem.
//!
//! With `ψ = exp(i(X + iY)/ħ)` the arc equation splits into
//!
//! ```text
//! X′² − Y′² − ħ(g′/g)Y′ + ħY″ = 2m(E − U_k)g²
//! ħX″ − 2X′Y′ − ħ(g′/g)X′ = 0
//! ```
//!
//! (primes are `d/du`). A real bound state is written in the trigonometric
//! form `ψ = c/√(X′/g) · sin(X/ħ + π/4)`. `X` is built as the Milne phase of
//! the pair `(ψ_reg, ψ₂)` where `ψ₂` is the solution equal to `ψ_reg` at the
//! start vertex and to `−ψ_reg` at the end vertex. This pins `X = 0` at the
//! start and `X = πħ(n + ½)` at the end, and `X′/g = ħW/a²` with `W` the
//! Wronskian and `a² = ψ_reg² + ψ₂²`.
//!
//! On the continuation the action is purely imaginary and the second
//! equation is void; the first becomes a Riccati equation for `Y′`, which
//! supplies the tail data of the quantization test.

use serde::{Deserialize, Serialize};

use super::se::solve_arc_se;
use super::{count_nodes, ArcError, ArcGrid, ArcOptions, ArcWave, Method};
use crate::caustic::CausticArc;
use crate::numeric;
use crate::potential::Model;

/// Phase count with Riccati tails: `Y′` is integrated inward on both
/// continuations (where `X = 0`), converted to a phase at each vertex and
/// carried across the span.
pub fn qhje_phase_count(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    opts: &ArcOptions,
) -> Result<f64, ArcError> {
    let grid = ArcGrid::new(model, arc, energy, opts);
    let s = grid.scale;
    // L = ψ_s/ψ = −Y_s/ħ.
    let mut l = grid.kappa(0);
    for i in 0..grid.i_start {
        l = grid.step_riccati(i, i + 1, l);
    }
    let mut tl = s.atan2(l);
    for i in grid.i_start..grid.i_mid {
        tl = grid.step_phase(i, i + 1, tl);
    }
    let last = grid.last();
    let mut l = -grid.kappa(last);
    for i in (grid.i_end + 1..=last).rev() {
        l = grid.step_riccati(i, i - 1, l);
    }
    let mut tr = s.atan2(l);
    for i in (grid.i_mid + 1..=grid.i_end).rev() {
        tr = grid.step_phase(i, i - 1, tr);
    }
    let n = (tl - tr) / std::f64::consts::PI;
    if n.is_finite() {
        Ok(n)
    } else {
        Err(ArcError::StiffnessFailure { arc: arc.k })
    }
}

/// Pointwise residuals of the two arc equations, relative to the size of
/// their largest terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QhjeResiduals {
    pub real_part: f64,
    pub imaginary_part: f64,
}

/// Solve the arc problem in quantum Hamilton–Jacobi form at `energy`.
///
/// `X`, `Y` and `A` are filled on the span, `X` measured from the arc's
/// start vertex per its orientation. `c` stays 1 (the amplitude carries
/// `√(ħW)`); the sign of `ψ` is kept in `psi`.
pub fn solve_arc_qhje(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    opts: &ArcOptions,
) -> Result<ArcWave, ArcError> {
    let mut wave = solve_arc_se(model, arc, energy, opts)?;
    let grid = ArcGrid::new(model, arc, energy, opts);
    let hbar = model.hbar;
    let (i0, i1) = (grid.i_start, grid.i_end);
    let last = grid.last();
    let o = if arc.orientation >= 0 { 1.0 } else { -1.0 };
    let (start, end) = if o > 0.0 { (i0, i1) } else { (i1, i0) };
    let n = grid.u.len();
    let next = |i: usize| if o > 0.0 { i + 1 } else { i - 1 };
    // Decaying solution from the tail behind the start vertex, carried
    // through the whole span without a matching point.
    let mut p1 = vec![0.0; n];
    let mut c1 = vec![0.0; n];
    let tail = if o > 0.0 { 0 } else { last };
    p1[tail] = 1.0;
    c1[tail] = o * grid.kappa(tail);
    let mut i = tail;
    while i != end {
        let j = next(i);
        let (p, c) = grid.step_linear(i, j, p1[i], c1[i]);
        p1[j] = p;
        c1[j] = c;
        i = j;
    }
    // Scale onto the normalized SE solution over the span.
    let (num, den) = (i0..=i1).fold((0.0, 0.0), |(a, b), k| {
        (a + p1[k] * wave.psi[k], b + p1[k] * p1[k])
    });
    let fac = num / den;
    if !fac.is_finite() || fac == 0.0 {
        return Err(ArcError::StiffnessFailure { arc: arc.k });
    }
    for k in 0..n {
        p1[k] *= fac;
        c1[k] *= fac;
    }
    let sgn = if p1[start] < 0.0 { -1.0 } else { 1.0 };
    let scale = p1[i0..=i1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p1[start].abs() <= 1e-10 * scale {
        return Err(ArcError::ZeroAtVertex { arc: arc.k });
    }
    // φ(start) = 0, dφ/dσ = 1 with σ the oriented arc length.
    let mut phi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    dphi[start] = o;
    let mut i = start;
    while i != end {
        let j = next(i);
        let (p, c) = grid.step_linear(i, j, phi[i], dphi[i]);
        phi[j] = p;
        dphi[j] = c;
        i = j;
    }
    let pt: Vec<f64> = p1.iter().map(|v| sgn * v).collect();
    let ct: Vec<f64> = c1.iter().map(|v| sgn * v).collect();
    if phi[end].abs() < 1e-300 {
        return Err(ArcError::NewtonDivergence {
            arc: arc.k,
            reason: "auxiliary solution vanishes at end vertex".into(),
        });
    }
    let b = -2.0 * pt[end] / phi[end];
    let span = i0..=i1;
    let psi2: Vec<f64> = span.clone().map(|i| pt[i] + b * phi[i]).collect();
    let chi2: Vec<f64> = span.clone().map(|i| ct[i] + b * dphi[i]).collect();
    let pr: Vec<f64> = pt[i0..=i1].to_vec();
    let cr: Vec<f64> = ct[i0..=i1].to_vec();
    // Wronskian in σ: (ψ₂ ψ_σ − ψ ψ₂_σ) = o (ψ₂ χ − ψ χ₂).
    let w_samples: Vec<f64> = (0..pr.len())
        .map(|k| o * (psi2[k] * cr[k] - pr[k] * chi2[k]))
        .collect();
    let w = w_samples.iter().sum::<f64>() / w_samples.len() as f64;
    if !(w > 0.0) {
        return Err(ArcError::NewtonDivergence {
            arc: arc.k,
            reason: format!("phase is not monotone (W = {w:e})"),
        });
    }
    // Θ = atan2(ψ, ψ₂), unwrapped in traversal order.
    let mut order: Vec<usize> = (0..pr.len()).collect();
    if o < 0.0 {
        order.reverse();
    }
    let raw: Vec<f64> = order.iter().map(|&k| pr[k].atan2(psi2[k])).collect();
    let unwrapped = numeric::unwrap_phase(&raw);
    let mut theta = vec![0.0; pr.len()];
    for (pos, &k) in order.iter().enumerate() {
        theta[k] = unwrapped[pos];
    }
    let t0 = theta[order[0]];
    let quarter = std::f64::consts::FRAC_PI_4;
    // Θ(start) = π/4 exactly by construction; remove round-off.
    let x: Vec<f64> = theta.iter().map(|t| hbar * (t - t0)).collect();
    let a2: Vec<f64> = pr.iter().zip(&psi2).map(|(p, q)| p * p + q * q).collect();
    let pmom: Vec<f64> = a2.iter().map(|a| hbar * w / a).collect();
    let y: Vec<f64> = pmom.iter().map(|p| hbar * p.sqrt().ln()).collect();
    let amp: Vec<f64> = a2.iter().map(|a| a.sqrt()).collect();
    if (t0 - quarter).abs() > 1e-6 {
        return Err(ArcError::NewtonDivergence {
            arc: arc.k,
            reason: format!("start phase {t0} differs from π/4"),
        });
    }
    let far = wave.psi[end];
    let k_far = if far.abs() > 1e-12 * scale {
        p1[end] / far
    } else {
        1.0
    };
    for k in 0..n {
        let on_span = (i0..=i1).contains(&k);
        let behind = if o > 0.0 { k < i0 } else { k > i1 };
        if on_span || behind {
            wave.psi[k] = p1[k];
            wave.dpsi_ds[k] = c1[k];
        } else {
            wave.psi[k] *= k_far;
            wave.dpsi_ds[k] *= k_far;
        }
    }
    wave.method = Method::Qhje;
    wave.x = x;
    wave.y = y;
    wave.a = amp;
    wave.nodes = count_nodes(&wave.psi[i0..=i1]);
    let count = qhje_phase_count(model, arc, energy, opts)?;
    wave.phase_count = count;
    wave.regularity = (count - count.round()).abs();
    Ok(wave)
}

/// Residuals of the two arc equations for the `X`, `Y` stored in `wave`,
/// using fourth-order finite differences on each uniform half of the span.
pub fn qhje_residuals(model: &Model, arc: &CausticArc, wave: &ArcWave) -> QhjeResiduals {
    let hbar = model.hbar;
    let u = wave.span_u();
    let mid = u.len() / 2;
    // Split at the grid's matching point so each piece is uniform.
    let split = (1..u.len() - 1)
        .find(|&k| ((u[k + 1] - u[k]) - (u[k] - u[k - 1])).abs() > 1e-9 * (u[k + 1] - u[k]).abs())
        .unwrap_or(mid);
    let mut worst_r: f64 = 0.0;
    let mut worst_i: f64 = 0.0;
    let mut scale_r: f64 = 0.0;
    let mut scale_i: f64 = 0.0;
    for (lo, hi) in [(0usize, split), (split, u.len() - 1)] {
        if hi - lo < 8 {
            continue;
        }
        let h = (u[hi] - u[lo]) / (hi - lo) as f64;
        let (x1, x2) = numeric::fd_derivatives(&wave.x[lo..=hi], h);
        let (y1, y2) = numeric::fd_derivatives(&wave.y[lo..=hi], h);
        let m = hi - lo;
        let [dlo, dhi] = arc.data_range();
        for k in 0..=m {
            let uu = u[lo + k];
            // Skip stencils that straddle the end of the fitted data, where
            // the continuation makes f″ jump.
            let (a, b) = if k < 2 {
                (k, k + 5)
            } else if k + 2 > m {
                (k - 5, k)
            } else {
                (k - 2, k + 2)
            };
            let (ua, ub) = (u[lo + a], u[lo + b]);
            if (ua < dlo && ub > dlo) || (ua < dhi && ub > dhi) {
                continue;
            }
            let g = arc.scale_factor(uu);
            let gg = arc.scale_factor_slope(uu) / g;
            let rhs =
                2.0 * model.mass * (wave.energy - arc.restricted_potential(model, uu)) * g * g;
            let r = x1[k] * x1[k] - y1[k] * y1[k] - hbar * gg * y1[k] + hbar * y2[k] - rhs;
            let im = hbar * x2[k] - 2.0 * x1[k] * y1[k] - hbar * gg * x1[k];
            worst_r = worst_r.max(r.abs());
            worst_i = worst_i.max(im.abs());
            scale_r = scale_r.max(x1[k] * x1[k] + y1[k] * y1[k] + rhs.abs());
            scale_i = scale_i
                .max(hbar * x2[k].abs() + 2.0 * (x1[k] * y1[k]).abs() + hbar * (gg * x1[k]).abs());
        }
    }
    QhjeResiduals {
        real_part: worst_r / scale_r.max(f64::MIN_POSITIVE),
        imaginary_part: worst_i / scale_i.max(f64::MIN_POSITIVE),
    }
}

/// Quantize a fixed arc at each `ħ` near `energy` and report
/// `max |X − X_cl|` over the span.
pub fn classical_limit_deviation(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    hbars: &[f64],
    opts: &ArcOptions,
) -> Result<Vec<f64>, ArcError> {
    let mut out = Vec::with_capacity(hbars.len());
    for &hbar in hbars {
        let m = model.with_hbar(hbar);
        let q = super::wkb::wkb_quantum_number(&m, arc, energy)?;
        let n = q.round().max(0.0);
        let f = |e: f64| {
            super::se::arc_phase_count(&m, arc, e, opts)
                .map(|c| c - n)
                .unwrap_or(f64::NAN)
        };
        let spacing = hbar * m.max_omega();
        let e_star = bracket_root(f, energy, spacing).ok_or_else(|| ArcError::NotConverged {
            reason: format!("no quantized level near E = {energy} for hbar = {hbar}"),
            best_residual: f64::NAN,
        })?;
        let wave = solve_arc_qhje(&m, arc, e_star, opts)?;
        let wk = super::wkb::wkb_arc(&m, arc, e_star, 0.0, 801)?;
        let dev = wave
            .span_u()
            .iter()
            .zip(&wave.x)
            .map(|(&u, &x)| (x - numeric::interp_linear(&wk.u, &wk.x_cl, u)).abs())
            .fold(0.0, f64::max);
        out.push(dev);
    }
    Ok(out)
}

/// Expand a bracket around `x0` in steps of `step` and refine with Brent.
pub(crate) fn bracket_root<F: FnMut(f64) -> f64>(mut f: F, x0: f64, step: f64) -> Option<f64> {
    let f0 = f(x0);
    if f0 == 0.0 {
        return Some(x0);
    }
    for k in 1..=8 {
        let d = step * 0.25 * k as f64;
        for x in [x0 - d, x0 + d] {
            let fx = f(x);
            if fx.is_finite() && f0.is_finite() && fx.signum() != f0.signum() {
                let (a, b, fa, fb) = if x < x0 {
                    (x, x0, fx, f0)
                } else {
                    (x0, x, f0, fx)
                };
                return numeric::brent_root_with(&mut f, a, b, fa, fb, 1e-12, 200).ok();
            }
        }
    }
    None
}
