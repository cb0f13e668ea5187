//! Checks on computed fields.

use serde::{Deserialize, Serialize};

use super::{FieldSolution, Locator};
use crate::caustic::Caustic;
use crate::numeric;
use crate::potential::{Model, Point2};

/// Second derivative along `dir` at `p` from a least-squares quadratic over
/// seven samples spaced `delta`. `None` if a sample falls off the mesh.
pub fn second_derivative(
    f: &FieldSolution,
    loc: &Locator,
    p: Point2,
    dir: Point2,
    delta: f64,
) -> Option<f64> {
    let ts: Vec<f64> = (-3..=3).map(|i| i as f64 * delta).collect();
    let mut vals = Vec::with_capacity(7);
    for &t in &ts {
        vals.push(f.value_at(loc, p + dir * t)?);
    }
    let a: Vec<f64> = ts.iter().flat_map(|&t| [1.0, t, t * t]).collect();
    let c = numeric::lstsq(7, 3, &a, &vals);
    Some(2.0 * c[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningSurface {
    /// Share of caustic samples with `|∂²ₙψ| ≤ 0.1·max |∂²ψ|` inside.
    pub fraction: f64,
    /// `|∂²ₙψ|` per sample relative to the interior maximum.
    pub ratios: Vec<f64>,
    pub interior_max: f64,
}

/// Second normal derivative of a welded field across the caustic.
pub fn turning_surface(
    f: &FieldSolution,
    caustic: &Caustic,
    per_arc: usize,
    delta: f64,
) -> TurningSurface {
    let loc = Locator::new(&f.mesh);
    let poly = caustic.polygon(400);
    // Interior reference: axis-aligned second derivatives on a raster at
    // least 3δ from the caustic.
    let (lo, hi) = super::bounding_box(&poly);
    let mut interior_max: f64 = 0.0;
    let n = 60;
    for j in 0..n {
        for i in 0..n {
            let p = Point2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if !point_in_polygon(&poly, p) || distance_to_polygon(&poly, p) < 3.0 * delta {
                continue;
            }
            for dir in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)] {
                if let Some(d) = second_derivative(f, &loc, p, dir, delta) {
                    interior_max = interior_max.max(d.abs());
                }
            }
        }
    }
    let mut ratios = Vec::new();
    for arc in &caustic.arcs {
        for i in 0..per_arc {
            let s = 0.025 + 0.95 * (i as f64 + 0.5) / per_arc as f64;
            let u = arc.span[0] + s * (arc.span[1] - arc.span[0]);
            let t = arc.tangent(u);
            let normal = Point2::new(-t.y, t.x);
            if let Some(d) = second_derivative(f, &loc, arc.point(u), normal, delta) {
                ratios.push(d.abs() / interior_max.max(f64::MIN_POSITIVE));
            }
        }
    }
    let ok = ratios.iter().filter(|&&r| r <= 0.1).count();
    TurningSurface {
        fraction: ok as f64 / ratios.len().max(1) as f64,
        ratios,
        interior_max,
    }
}

pub fn point_in_polygon(poly: &[Point2], q: Point2) -> bool {
    let mut c = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > q.y) != (b.y > q.y) && q.x < a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            c = !c;
        }
    }
    c
}

pub fn distance_to_polygon(poly: &[Point2], q: Point2) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let ab = b - a;
            let t = ((q - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            q.dist(a + ab * t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest relative growth of `|ψ|` along rays from the origin beyond the
/// equipotential `U = E`; zero for monotone decay.
pub fn radial_growth(model: &Model, f: &FieldSolution, rays: usize, samples: usize) -> f64 {
    let loc = Locator::new(&f.mesh);
    let scale = f.max_abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for r in 0..rays {
        let dir = Point2::from_angle(std::f64::consts::TAU * r as f64 / rays as f64);
        let Ok(start) = model.equipotential_point(f.energy, dir) else {
            continue;
        };
        let r0 = start.norm();
        let mut prev: Option<f64> = None;
        for i in 0..samples {
            let p = dir * (r0 * (1.0 + 2.0 * i as f64 / samples as f64));
            let Some(v) = f.value_at(&loc, p) else { break };
            if let Some(pv) = prev {
                worst = worst.max((v.abs() - pv) / scale);
            }
            prev = Some(v.abs());
        }
    }
    worst
}

/// Slope of `log e` against `log h` by least squares.
pub fn convergence_order(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Sign changes of `f` along the segment `a → b` sampled at `n` points,
/// ignoring values below `10⁻³` of the field maximum.
pub fn sign_changes_along(f: &FieldSolution, a: Point2, b: Point2, n: usize) -> usize {
    let loc = Locator::new(&f.mesh);
    let floor = 1e-3 * f.max_abs();
    let vals: Vec<f64> = (0..n)
        .filter_map(|i| f.value_at(&loc, a + (b - a) * (i as f64 / (n - 1) as f64)))
        .map(|v| if v.abs() < floor { 0.0 } else { v })
        .collect();
    crate::arc1d::count_nodes(&vals)
}
