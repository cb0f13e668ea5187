//! Caustic geometry: four fitted arcs meeting the equipotential at four
//! vertices.
//!
//! Arcs and vertices use a fixed labelling. Vertices run counter-clockwise
//! from the lower-left one: `v1` lower-left, `v2` lower-right, `v3`
//! upper-right, `v4` upper-left. Arc 1 is the left side (`v1`–`v4`), arc 2
//! the upper side (`v4`–`v3`), arc 3 the right side (`v2`–`v3`) and arc 4 the
//! lower side (`v1`–`v2`). Upper and lower arcs are graphs `y = f(x)`, the
//! lateral ones graphs `x = f(y)`, each with the parameter increasing from
//! its first to its second listed vertex.

pub mod chebyshev;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, CausticPoint, CausticScanner, DynamicsError};
use crate::numeric;
use crate::potential::{Model, Point2};
pub use chebyshev::Chebyshev;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausticError {
    #[error("found {found} vertex candidates instead of 4")]
    ClusterCountMismatch { found: usize },
    #[error("arc fit residual {rms:e} exceeds {limit:e}")]
    FitResidualExceeded { rms: f64, limit: f64 },
    #[error("cluster too small to fit ({0} points)")]
    TooFewPoints(usize),
    #[error("arc {arc} never reaches the equipotential near its end")]
    VertexNotFound { arc: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// `y = f(x)`.
    X,
    /// `x = f(y)`.
    Y,
}

/// Vertex pairs `(at u_i, at u_f)` for arcs 1..4, as 0-based vertex indices.
pub const ARC_VERTICES: [(usize, usize); 4] = [(0, 3), (3, 2), (1, 2), (0, 1)];

/// Axis of each arc in the fixed labelling.
pub const ARC_AXES: [Axis; 4] = [Axis::Y, Axis::X, Axis::Y, Axis::X];

pub const ARC_NAMES: [&str; 4] = ["left", "upper", "right", "lower"];

/// RMS limit on the fit residual of each arc.
pub const FIT_RMS_LIMIT: f64 = 1e-3;

/// Largest Chebyshev degree tried by the cross-validated fit.
pub const MAX_FIT_DEGREE: usize = 24;

/// One smooth arc of the caustic.
///
/// The fitted series is only trusted on its data range; outside it the
/// curve continues along the end tangent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausticArc {
    /// 1-based arc label.
    pub k: usize,
    pub axis: Axis,
    pub series: Chebyshev,
    /// Parameter interval `[u_i, u_f]` between the two vertices.
    pub span: [f64; 2],
    /// Curve points at `u_i` and `u_f`.
    pub endpoints: [Point2; 2],
    /// +1 when the action grows with `u`, −1 otherwise.
    pub orientation: i8,
    pub rms: f64,
    pub n_points: usize,
    #[serde(skip)]
    derivs: Option<Box<(Chebyshev, Chebyshev)>>,
}

impl CausticArc {
    pub fn new(k: usize, axis: Axis, series: Chebyshev, rms: f64, n_points: usize) -> Self {
        let span = [series.lo, series.hi];
        let mut arc = Self {
            k,
            axis,
            series,
            span,
            endpoints: [Point2::ORIGIN; 2],
            orientation: 1,
            rms,
            n_points,
            derivs: None,
        };
        arc.prepare();
        arc.endpoints = [arc.point(span[0]), arc.point(span[1])];
        arc
    }

    /// Rebuild cached derivative series (needed after deserializing).
    pub fn prepare(&mut self) {
        let d1 = self.series.derivative();
        let d2 = d1.derivative();
        self.derivs = Some(Box::new((d1, d2)));
    }

    fn d(&self) -> &(Chebyshev, Chebyshev) {
        self.derivs
            .as_deref()
            .expect("arc derivatives not prepared")
    }

    pub fn data_range(&self) -> [f64; 2] {
        [self.series.lo, self.series.hi]
    }

    pub fn span_length(&self) -> f64 {
        self.span[1] - self.span[0]
    }

    pub fn is_extrapolated(&self, u: f64) -> bool {
        u < self.series.lo || u > self.series.hi
    }

    /// Transverse coordinate `f(u)`.
    pub fn f(&self, u: f64) -> f64 {
        let (lo, hi) = (self.series.lo, self.series.hi);
        if u < lo {
            self.series.eval(lo) + self.d().0.eval(lo) * (u - lo)
        } else if u > hi {
            self.series.eval(hi) + self.d().0.eval(hi) * (u - hi)
        } else {
            self.series.eval(u)
        }
    }

    pub fn df(&self, u: f64) -> f64 {
        self.d().0.eval(u.clamp(self.series.lo, self.series.hi))
    }

    pub fn d2f(&self, u: f64) -> f64 {
        if self.is_extrapolated(u) {
            0.0
        } else {
            self.d().1.eval(u)
        }
    }

    pub fn point(&self, u: f64) -> Point2 {
        match self.axis {
            Axis::X => Point2::new(u, self.f(u)),
            Axis::Y => Point2::new(self.f(u), u),
        }
    }

    /// Unit tangent in the direction of increasing `u`.
    pub fn tangent(&self, u: f64) -> Point2 {
        let d = self.df(u);
        match self.axis {
            Axis::X => Point2::new(1.0, d),
            Axis::Y => Point2::new(d, 1.0),
        }
        .normalized()
    }

    /// Parameter of a plane point along this arc's axis.
    pub fn param_of(&self, p: Point2) -> f64 {
        match self.axis {
            Axis::X => p.x,
            Axis::Y => p.y,
        }
    }

    /// Transverse coordinate of a plane point.
    pub fn transverse_of(&self, p: Point2) -> f64 {
        match self.axis {
            Axis::X => p.y,
            Axis::Y => p.x,
        }
    }

    /// Arc-length metric `g = √(1 + f′²)`.
    pub fn scale_factor(&self, u: f64) -> f64 {
        self.df(u).hypot(1.0)
    }

    /// `dg/du = f′ f″ / g`.
    pub fn scale_factor_slope(&self, u: f64) -> f64 {
        let d = self.df(u);
        d * self.d2f(u) / d.hypot(1.0)
    }

    /// Potential restricted to the arc (and its continuation).
    pub fn restricted_potential(&self, model: &Model, u: f64) -> f64 {
        model.potential(self.point(u))
    }

    /// Arc length between two parameters by Gauss–Legendre quadrature.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        let (x, w) = numeric::gauss_legendre(32);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter()
            .zip(&w)
            .map(|(&s, &wi)| wi * h * self.scale_factor(c + h * s))
            .sum()
    }

    /// Parameter at which the action starts (the `u` of the start vertex).
    pub fn start_param(&self) -> f64 {
        if self.orientation >= 0 {
            self.span[0]
        } else {
            self.span[1]
        }
    }

    pub fn end_param(&self) -> f64 {
        if self.orientation >= 0 {
            self.span[1]
        } else {
            self.span[0]
        }
    }
}

/// `g_k(u) = √(1 + f_k′(u)²)`.
pub fn arc_scale_factor(arc: &CausticArc, u: f64) -> f64 {
    arc.scale_factor(u)
}

/// `U_k(u)`: the potential evaluated on the arc.
pub fn restrict_potential(model: &Model, arc: &CausticArc, u: f64) -> f64 {
    arc.restricted_potential(model, u)
}

/// Fit one cluster. The axis follows the longer extent of the cluster.
pub fn fit_arc(cluster: &[CausticPoint]) -> Result<CausticArc, CausticError> {
    let xs: Vec<f64> = cluster.iter().map(|p| p.position.x).collect();
    let ys: Vec<f64> = cluster.iter().map(|p| p.position.y).collect();
    let extent = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let axis = if extent(&xs) >= extent(&ys) {
        Axis::X
    } else {
        Axis::Y
    };
    fit_arc_along(cluster, axis, 0, FIT_RMS_LIMIT)
}

/// Fit a cluster along a prescribed axis with a cross-validated degree.
pub fn fit_arc_along(
    cluster: &[CausticPoint],
    axis: Axis,
    k: usize,
    rms_limit: f64,
) -> Result<CausticArc, CausticError> {
    let (mut us, mut vs): (Vec<f64>, Vec<f64>) = cluster
        .iter()
        .map(|p| match axis {
            Axis::X => (p.position.x, p.position.y),
            Axis::Y => (p.position.y, p.position.x),
        })
        .unzip();
    let mut distinct = us.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    if distinct.len() < 2 {
        return Err(CausticError::TooFewPoints(distinct.len()));
    }
    // Sort so the interleaved folds sample the whole range evenly.
    let mut idx: Vec<usize> = (0..us.len()).collect();
    idx.sort_by(|&a, &b| us[a].total_cmp(&us[b]));
    us = idx.iter().map(|&i| us[i]).collect();
    vs = idx.iter().map(|&i| vs[i]).collect();
    let max_deg = MAX_FIT_DEGREE.min(distinct.len() / 2);
    let (series, _) = chebyshev::fit_cross_validated(&us, &vs, max_deg, 5);
    let rms = series.rms_residual(&us, &vs);
    if !(rms <= rms_limit) {
        return Err(CausticError::FitResidualExceeded {
            rms,
            limit: rms_limit,
        });
    }
    Ok(CausticArc::new(k, axis, series, rms, cluster.len()))
}

/// Fit with a fixed degree (no cross-validation).
pub fn fit_arc_with_degree(cluster: &[CausticPoint], axis: Axis, degree: usize) -> CausticArc {
    let (us, vs): (Vec<f64>, Vec<f64>) = cluster
        .iter()
        .map(|p| match axis {
            Axis::X => (p.position.x, p.position.y),
            Axis::Y => (p.position.y, p.position.x),
        })
        .unzip();
    let lo = us.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let series = Chebyshev::fit(&us, &vs, degree, lo, hi);
    let rms = series.rms_residual(&us, &vs);
    CausticArc::new(0, axis, series, rms, cluster.len())
}

/// Caustic points split into the four arcs plus vertex estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcClusters {
    /// Arcs 1..4 in the fixed labelling.
    pub clusters: [Vec<CausticPoint>; 4],
    /// `v1..v4`, taken as the cluster points closest to the equipotential.
    pub vertices: [Point2; 4],
}

const CLUSTER_BINS: usize = 72;

/// Split caustic points at the four places where they come closest to the
/// equipotential.
pub fn cluster_arcs(
    points: &[CausticPoint],
    energy: f64,
    model: &Model,
) -> Result<ArcClusters, CausticError> {
    if points.is_empty() {
        return Err(CausticError::ClusterCountMismatch { found: 0 });
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Point2::ORIGIN, |acc, p| acc + p.position)
        * (1.0 / n);
    let angle = |p: Point2| (p - centroid).angle();
    let bin_of = |a: f64| {
        let b = ((a + std::f64::consts::PI) / std::f64::consts::TAU * CLUSTER_BINS as f64) as usize;
        b % CLUSTER_BINS
    };
    let mut best = vec![(f64::NEG_INFINITY, usize::MAX); CLUSTER_BINS];
    for (i, p) in points.iter().enumerate() {
        let r = model.potential(p.position) / energy;
        let b = bin_of(angle(p.position));
        if r > best[b].0 {
            best[b] = (r, i);
        }
    }
    // Local maxima over ±3 bins, above 0.75 of the energy, at least 30° apart.
    let mut order: Vec<usize> = (0..CLUSTER_BINS).filter(|&b| best[b].0 > 0.75).collect();
    order.sort_by(|&a, &b| best[b].0.total_cmp(&best[a].0));
    let circ = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(CLUSTER_BINS - d)
    };
    let mut peaks: Vec<usize> = Vec::new();
    for b in order {
        let is_local_max = (1..=3).all(|d| {
            best[(b + d) % CLUSTER_BINS].0 <= best[b].0
                && best[(b + CLUSTER_BINS - d) % CLUSTER_BINS].0 <= best[b].0
        });
        if is_local_max && peaks.iter().all(|&p| circ(p, b) > 6) {
            peaks.push(b);
        }
    }
    if peaks.len() != 4 {
        return Err(CausticError::ClusterCountMismatch { found: peaks.len() });
    }
    let mut vert: Vec<Point2> = peaks.iter().map(|&b| points[best[b].1].position).collect();
    vert.sort_by(|a, b| angle(*a).total_cmp(&angle(*b)));
    let first = (0..4).min_by(|&a, &b| (vert[a].x + vert[a].y).total_cmp(&(vert[b].x + vert[b].y)));
    let first = first.unwrap();
    let vertices: [Point2; 4] = std::array::from_fn(|i| vert[(first + i) % 4]);
    let vang: [f64; 4] = vertices.map(angle);
    let within = |a: f64, from: f64, to: f64| {
        let tau = std::f64::consts::TAU;
        let span = (to - from).rem_euclid(tau);
        let off = (a - from).rem_euclid(tau);
        off > 0.0 && off < span
    };
    // Sector from v_i to v_{i+1} counter-clockwise, mapped to arc labels.
    let sector_arc = [3usize, 2, 1, 0];
    let mut clusters: [Vec<CausticPoint>; 4] = Default::default();
    for p in points {
        let a = angle(p.position);
        let s = (0..4)
            .find(|&i| within(a, vang[i], vang[(i + 1) % 4]))
            .unwrap_or_else(|| {
                // On a vertex ray: attach to the sector that starts there.
                (0..4)
                    .min_by(|&i, &j| {
                        (a - vang[i])
                            .sin()
                            .abs()
                            .total_cmp(&(a - vang[j]).sin().abs())
                    })
                    .unwrap()
            });
        let mut q = *p;
        q.arc_hint = Some(sector_arc[s] + 1);
        clusters[sector_arc[s]].push(q);
    }
    if clusters.iter().any(|c| c.len() < 3) {
        return Err(CausticError::ClusterCountMismatch { found: 4 });
    }
    // Points near a vertex may fall on the wrong side of the vertex ray;
    // move a point only when another arc's guide fit is clearly closer.
    let guides: Vec<Option<CausticArc>> = (0..4).map(|k| trimmed_guide(&clusters[k], k)).collect();
    if guides.iter().all(Option::is_some) {
        let guides: Vec<CausticArc> = guides.into_iter().flatten().collect();
        let mut moved: [Vec<CausticPoint>; 4] = Default::default();
        for (k, cluster) in clusters.iter().enumerate() {
            for p in cluster {
                let own = guide_distance(&guides[k], p.position);
                let (j, other) = (0..4)
                    .filter(|&j| j != k)
                    .map(|j| (j, guide_distance(&guides[j], p.position)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                let target = if own > 1e-3 && other < 0.2 * own {
                    j
                } else {
                    k
                };
                let mut q = *p;
                q.arc_hint = Some(target + 1);
                moved[target].push(q);
            }
        }
        clusters = moved;
    }
    Ok(ArcClusters { clusters, vertices })
}

/// Fit, drop points far above the median residual, and refit.
fn trimmed_guide(cluster: &[CausticPoint], k: usize) -> Option<CausticArc> {
    let first = fit_arc_along(cluster, ARC_AXES[k], k + 1, f64::INFINITY).ok()?;
    let res: Vec<f64> = cluster
        .iter()
        .map(|p| guide_distance(&first, p.position))
        .collect();
    let cut = (5.0 * numeric::quantile(&res, 0.5)).max(1e-9);
    let kept: Vec<CausticPoint> = cluster
        .iter()
        .zip(&res)
        .filter(|(_, &r)| r <= cut)
        .map(|(p, _)| *p)
        .collect();
    if kept.len() < 3 {
        return Some(first);
    }
    fit_arc_along(&kept, ARC_AXES[k], k + 1, f64::INFINITY).ok()
}

/// Transverse distance to a guide arc, penalized well outside its data range.
fn guide_distance(arc: &CausticArc, p: Point2) -> f64 {
    let u = arc.param_of(p);
    let [lo, hi] = arc.data_range();
    let outside = ((lo - u).max(u - hi) - 0.25 * (hi - lo)).max(0.0);
    (arc.transverse_of(p) - arc.f(u)).abs() + outside
}

/// One entry of the action-accumulation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalStep {
    /// 0-based arc index.
    pub arc: usize,
    pub orientation: i8,
    /// Arc whose final action seeds this one.
    pub predecessor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caustic {
    pub arcs: [CausticArc; 4],
    /// `v1..v4`.
    pub vertices: [Point2; 4],
    pub energy: f64,
    /// 0-based index of the start vertex.
    pub start_vertex: usize,
    pub traversal: Vec<TraversalStep>,
    /// Largest distance between the two arc ends meeting at a vertex.
    pub closure_gap: f64,
}

impl Caustic {
    pub fn prepare(&mut self) {
        for a in &mut self.arcs {
            a.prepare();
        }
    }

    pub fn opposite_vertex(&self) -> usize {
        (self.start_vertex + 2) % 4
    }

    /// Sampled closed boundary polygon, counter-clockwise from `v1`.
    pub fn polygon(&self, per_arc: usize) -> Vec<Point2> {
        // Counter-clockwise walk: lower (v1→v2), right (v2→v3),
        // upper (v3→v4), left (v4→v1).
        let walk = [(3usize, false), (2, false), (1, true), (0, true)];
        let mut out = Vec::with_capacity(4 * per_arc);
        for (k, rev) in walk {
            let arc = &self.arcs[k];
            for i in 0..per_arc {
                let t = i as f64 / per_arc as f64;
                let t = if rev { 1.0 - t } else { t };
                out.push(arc.point(arc.span[0] + t * arc.span_length()));
            }
        }
        out
    }

    /// Area enclosed by the arcs (shoelace on a fine polygon).
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon(800))
    }

    pub fn max_fit_rms(&self) -> f64 {
        self.arcs.iter().map(|a| a.rms).fold(0.0, f64::max)
    }
}

pub fn polygon_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
}

/// Root of `U_k(u) = E` closest to the data end `end` (0 = low, 1 = high).
fn vertex_param(arc: &CausticArc, model: &Model, energy: f64, end: usize) -> Option<f64> {
    let [lo, hi] = arc.data_range();
    let w = hi - lo;
    let h = |u: f64| arc.restricted_potential(model, u) - energy;
    let (inner, outer) = if end == 0 {
        (lo + 0.25 * w, lo - 0.5 * w)
    } else {
        (hi - 0.25 * w, hi + 0.5 * w)
    };
    // Walk outward from well inside the allowed region to the first crossing.
    if h(inner) >= 0.0 {
        return None;
    }
    numeric::first_root_in(h, inner, outer, 4000, 1e-14 * w.max(1.0))
}

/// Fit all four clusters, refine vertices on the equipotential and orient the
/// caustic from `start_vertex`.
pub fn build_caustic(
    clusters: &ArcClusters,
    energy: f64,
    model: &Model,
    start_vertex: usize,
) -> Result<Caustic, CausticError> {
    let mut arcs: Vec<CausticArc> = Vec::with_capacity(4);
    for k in 0..4 {
        let mut arc = fit_arc_along(&clusters.clusters[k], ARC_AXES[k], k + 1, FIT_RMS_LIMIT)?;
        let ui = vertex_param(&arc, model, energy, 0)
            .ok_or(CausticError::VertexNotFound { arc: k + 1 })?;
        let uf = vertex_param(&arc, model, energy, 1)
            .ok_or(CausticError::VertexNotFound { arc: k + 1 })?;
        arc.span = [ui, uf];
        arc.endpoints = [arc.point(ui), arc.point(uf)];
        arcs.push(arc);
    }
    let mut vertices = [Point2::ORIGIN; 4];
    let mut gap: f64 = 0.0;
    for v in 0..4 {
        let ends: Vec<Point2> = (0..4)
            .flat_map(|k| {
                let (a, b) = ARC_VERTICES[k];
                let arc = &arcs[k];
                [(a, arc.endpoints[0]), (b, arc.endpoints[1])]
            })
            .filter(|(i, _)| *i == v)
            .map(|(_, p)| p)
            .collect();
        vertices[v] = (ends[0] + ends[1]) * 0.5;
        gap = gap.max(ends[0].dist(ends[1]));
    }
    let arcs: [CausticArc; 4] = arcs.try_into().expect("four arcs");
    let mut caustic = Caustic {
        arcs,
        vertices,
        energy,
        start_vertex: 0,
        traversal: vec![],
        closure_gap: gap,
    };
    orient_caustic(&mut caustic, start_vertex);
    Ok(caustic)
}

/// Analytic caustic of the separable oscillator for the torus with actions
/// `ħ(n1 + ½)` and `ħ(n2 + ½)`: the rectangle `|x| ≤ x_A`, `|y| ≤ y_A`.
pub fn separable_caustic(model: &Model, n1: usize, n2: usize, start_vertex: usize) -> Caustic {
    let ex = model.hbar * model.omega_x * (n1 as f64 + 0.5);
    let ey = model.hbar * model.omega_y * (n2 as f64 + 0.5);
    let xa = (2.0 * ex / model.mass).sqrt() / model.omega_x;
    let ya = (2.0 * ey / model.mass).sqrt() / model.omega_y;
    let arc = |k: usize, axis: Axis, value: f64, half: f64| {
        CausticArc::new(k, axis, Chebyshev::constant(value, -half, half), 0.0, 0)
    };
    let arcs = [
        arc(1, Axis::Y, -xa, ya),
        arc(2, Axis::X, ya, xa),
        arc(3, Axis::Y, xa, ya),
        arc(4, Axis::X, -ya, xa),
    ];
    let vertices = [
        Point2::new(-xa, -ya),
        Point2::new(xa, -ya),
        Point2::new(xa, ya),
        Point2::new(-xa, ya),
    ];
    let mut caustic = Caustic {
        arcs,
        vertices,
        energy: ex + ey,
        start_vertex: 0,
        traversal: vec![],
        closure_gap: 0.0,
    };
    orient_caustic(&mut caustic, start_vertex);
    caustic
}

/// Orient arcs away from `start_vertex` and record the traversal order.
pub fn orient_caustic(caustic: &mut Caustic, start_vertex: usize) {
    let s = start_vertex % 4;
    let o = (s + 2) % 4;
    caustic.start_vertex = s;
    let mut first = vec![];
    let mut second = vec![];
    for (k, &(vi, vf)) in ARC_VERTICES.iter().enumerate() {
        let orientation = if vi == s || vf == o { 1 } else { -1 };
        caustic.arcs[k].orientation = orientation;
        if vi == s || vf == s {
            first.push(k);
        } else {
            second.push(k);
        }
    }
    let mut traversal: Vec<TraversalStep> = first
        .iter()
        .map(|&k| TraversalStep {
            arc: k,
            orientation: caustic.arcs[k].orientation,
            predecessor: None,
        })
        .collect();
    for &k in &second {
        // The arc leaving `s` that ends where this one starts.
        let start_of_k = if caustic.arcs[k].orientation > 0 {
            ARC_VERTICES[k].0
        } else {
            ARC_VERTICES[k].1
        };
        let pred = first.iter().copied().find(|&j| {
            let (a, b) = ARC_VERTICES[j];
            let end_of_j = if caustic.arcs[j].orientation > 0 {
                b
            } else {
                a
            };
            end_of_j == start_of_k
        });
        traversal.push(TraversalStep {
            arc: k,
            orientation: caustic.arcs[k].orientation,
            predecessor: pred,
        });
    }
    caustic.traversal = traversal;
}

/// Options for harvesting caustic points from one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Length of one harvesting chunk between refits.
    pub chunk: f64,
    /// Stop once a refit moves every arc by less than this (sup-norm).
    pub stop_tol: f64,
    pub min_points: usize,
}

impl HarvestOptions {
    pub fn for_model(model: &Model) -> Self {
        let tmin = model.min_period();
        Self {
            dt: dynamics::default_dt(model),
            t_max: dynamics::default_t_max(model),
            chunk: 20.0 * tmin,
            stop_tol: 1e-4,
            min_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    pub points: Vec<CausticPoint>,
    pub caustic: Caustic,
    pub t_end: f64,
    pub stopped_early: bool,
    pub last_change: f64,
}

fn arc_change(a: &Caustic, b: &Caustic) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..4 {
        let (x, y) = (&a.arcs[k], &b.arcs[k]);
        let lo = x.data_range()[0].max(y.data_range()[0]);
        let hi = x.data_range()[1].min(y.data_range()[1]);
        if hi <= lo {
            return f64::INFINITY;
        }
        for u in numeric::linspace(lo, hi, 200) {
            worst = worst.max((x.f(u) - y.f(u)).abs());
        }
    }
    worst
}

/// Integrate the trajectory from a vertex at rest, collecting caustic points
/// until the fitted arcs stop moving or `t_max` is reached.
pub fn harvest_caustic(
    model: &Model,
    vertex: Point2,
    opts: &HarvestOptions,
) -> Result<Harvest, CausticError> {
    let mut scanner = CausticScanner::new(model, vertex, Point2::ORIGIN, opts.dt)?;
    let energy = scanner.energy();
    let mut points = Vec::new();
    let mut prev: Option<Caustic> = None;
    let mut last_change = f64::INFINITY;
    let mut t = 0.0;
    let mut last_err = None;
    while t < opts.t_max - 1e-12 {
        t = (t + opts.chunk).min(opts.t_max);
        scanner.advance_to(t, &mut points)?;
        if points.len() < opts.min_points {
            continue;
        }
        let fitted =
            cluster_arcs(&points, energy, model).and_then(|c| build_caustic(&c, energy, model, 0));
        match fitted {
            Ok(c) => {
                last_err = None;
                if let Some(p) = &prev {
                    last_change = arc_change(p, &c);
                    if last_change < opts.stop_tol {
                        return Ok(Harvest {
                            points,
                            caustic: c,
                            t_end: t,
                            stopped_early: true,
                            last_change,
                        });
                    }
                }
                prev = Some(c);
            }
            Err(e) => {
                last_err = Some(e);
                prev = None;
            }
        }
    }
    if let Some(e) = last_err {
        return Err(e);
    }
    match prev {
        Some(caustic) => Ok(Harvest {
            points,
            caustic,
            t_end: t,
            stopped_early: false,
            last_change,
        }),
        None => {
            let c = cluster_arcs(&points, energy, model)?;
            let caustic = build_caustic(&c, energy, model, 0)?;
            Ok(Harvest {
                points,
                caustic,
                t_end: t,
                stopped_early: false,
                last_change,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pts(v: &[(f64, f64)]) -> Vec<CausticPoint> {
        v.iter()
            .map(|&(x, y)| CausticPoint {
                position: Point2::new(x, y),
                momentum: Point2::ORIGIN,
                t: 0.0,
                arc_hint: None,
            })
            .collect()
    }

    #[test]
    fn straight_cluster_fits_constant() {
        let c = pts(&(0..50)
            .map(|i| (-1.0 + 0.04 * i as f64, 0.7))
            .collect::<Vec<_>>());
        let arc = fit_arc(&c).unwrap();
        assert_eq!(arc.axis, Axis::X);
        assert_eq!(arc.series.degree(), 0);
        assert!(arc.rms <= 1e-10);
        assert_relative_eq!(arc.scale_factor(0.3), 1.0);
    }

    #[test]
    fn semicircle_fit_degree_12() {
        let a0 = 0.9f64.acos();
        let c: Vec<(f64, f64)> = numeric::linspace(a0, std::f64::consts::PI - a0, 400)
            .into_iter()
            .map(|t| (t.cos(), t.sin()))
            .collect();
        let arc = fit_arc_with_degree(&pts(&c), Axis::X, 12);
        for x in numeric::linspace(-0.9, 0.9, 1001) {
            assert!((arc.f(x) - (1.0 - x * x).sqrt()).abs() <= 1e-4, "x = {x}");
        }
        assert!((arc.scale_factor(0.5) - 1.0 / 0.75f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn diagonal_line_scale_factor() {
        let c = pts(&(0..30)
            .map(|i| (i as f64 * 0.1, i as f64 * 0.1))
            .collect::<Vec<_>>());
        let arc = fit_arc_with_degree(&c, Axis::X, 1);
        assert_relative_eq!(arc.scale_factor(1.0), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn collinear_points_do_not_cluster() {
        let c = pts(&(0..100)
            .map(|i| (i as f64 * 0.03 - 1.5, 0.5 * (i as f64 * 0.03 - 1.5)))
            .collect::<Vec<_>>());
        let err = cluster_arcs(&c, 5.0, &Model::barbanis());
        assert!(matches!(
            err,
            Err(CausticError::ClusterCountMismatch { .. })
        ));
    }

    fn rectangle_points(xa: f64, ya: f64) -> Vec<CausticPoint> {
        let mut v = vec![];
        for i in 1..60 {
            let s = -1.0 + 2.0 * i as f64 / 60.0;
            v.push((s * xa, ya));
            v.push((s * xa, -ya));
            v.push((xa, s * ya));
            v.push((-xa, s * ya));
        }
        pts(&v)
    }

    #[test]
    fn separable_rectangle_caustic() {
        let m = Model::separable(1.1, 1.0);
        let (xa, ya) = (2.2, 1.9);
        let e = 0.5 * 1.21 * xa * xa + 0.5 * ya * ya;
        let cl = cluster_arcs(&rectangle_points(xa, ya), e, &m).unwrap();
        let c = build_caustic(&cl, e, &m, 0).unwrap();
        let expected = [(-xa, -ya), (xa, -ya), (xa, ya), (-xa, ya)];
        for (v, (x, y)) in c.vertices.iter().zip(expected) {
            assert!((v.x - x).abs() < 1e-9 && (v.y - y).abs() < 1e-9, "{v:?}");
        }
        for arc in &c.arcs {
            assert_eq!(arc.series.degree(), 0);
        }
        assert_eq!(c.arcs[1].axis, Axis::X);
        assert_eq!(c.arcs[0].axis, Axis::Y);
        assert!(c.closure_gap < 1e-9);
        assert_relative_eq!(c.area(), 4.0 * xa * ya, max_relative = 1e-3);
        // Restricted potential on the upper side.
        let u = 0.4;
        assert_relative_eq!(
            restrict_potential(&m, &c.arcs[1], u),
            0.5 * 1.21 * u * u + 0.5 * ya * ya,
            epsilon = 1e-12
        );
    }

    #[test]
    fn orientation_from_each_lower_vertex() {
        let m = Model::separable(1.1, 1.0);
        let (xa, ya) = (2.0, 1.5);
        let e = 0.5 * 1.21 * xa * xa + 0.5 * ya * ya;
        let cl = cluster_arcs(&rectangle_points(xa, ya), e, &m).unwrap();
        let mut c = build_caustic(&cl, e, &m, 0).unwrap();
        let o: Vec<i8> = c.arcs.iter().map(|a| a.orientation).collect();
        assert_eq!(o, vec![1, 1, 1, 1]);
        assert_eq!(
            c.traversal[2],
            TraversalStep {
                arc: 1,
                orientation: 1,
                predecessor: Some(0)
            }
        );
        assert_eq!(
            c.traversal[3],
            TraversalStep {
                arc: 2,
                orientation: 1,
                predecessor: Some(3)
            }
        );
        orient_caustic(&mut c, 1);
        let o: Vec<i8> = c.arcs.iter().map(|a| a.orientation).collect();
        assert_eq!(o, vec![1, -1, 1, -1]);
        let upper = c.traversal.iter().find(|s| s.arc == 1).unwrap();
        assert_eq!(upper.predecessor, Some(2));
        let left = c.traversal.iter().find(|s| s.arc == 0).unwrap();
        assert_eq!(left.predecessor, Some(3));
    }
}
