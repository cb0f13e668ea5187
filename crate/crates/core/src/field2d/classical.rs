//! Classical action inside the caustic by characteristics, and the WKB
//! field built from it.
//!
//! Trajectories of the oriented sub-family leave the start arcs tangentially
//! with momentum `p_cl` and carry `X = X_cl,k(u) + ∫ p·dq` until they touch a
//! far arc. The scattered samples are interpolated onto the mesh.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, HasPosition, PositionInTriangulation, Triangulation};

use super::diagnostics::point_in_polygon;
use super::{BoundaryTag, FieldError, FieldKind, FieldSolution, Mesh, Parity, Provenance};
use crate::arc1d::wkb::{wkb_arc, WkbArc};
use crate::caustic::Caustic;
use crate::dynamics::pefrl_step;
use crate::numeric;
use crate::potential::{Model, PhaseState, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    #[default]
    Constant,
    /// `A ∝ |J|^{-1/2}` from neighbouring characteristics, clipped at the
    /// 99th percentile.
    Transported,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicOptions {
    /// Launch spacing along the start arcs relative to the mesh `h`.
    pub launch_spacing: f64,
    /// Time step as a fraction of the shortest period.
    pub dt_fraction: f64,
    /// Largest far-arc mismatch relative to the largest action.
    pub crossing_tol: f64,
}

impl Default for CharacteristicOptions {
    fn default() -> Self {
        Self {
            launch_spacing: 0.25,
            dt_fraction: 1.0 / 2000.0,
            crossing_tol: 1e-2,
        }
    }
}

/// `X_cl` on the interior mesh for one orientation.
#[derive(Debug, Clone)]
pub struct ClassicalAction {
    pub field: FieldSolution,
    /// Transported amplitude per vertex, clipped at the 99th percentile and
    /// scaled to max 1.
    pub amplitude: Vec<f64>,
    /// Largest `|X − X_cl,k|` at far-arc boundary vertices.
    pub boundary_mismatch: f64,
    /// Fraction of interior vertices with `||∇X|² − 2m(E − U)| ≤ 10⁻²·2mE`.
    pub eikonal_fraction: f64,
    pub trajectories: usize,
    pub samples: usize,
}

/// Boundary actions of the oriented caustic, indexed by arc.
pub fn arc_actions(model: &Model, caustic: &Caustic) -> Result<Vec<WkbArc>, FieldError> {
    let mut out: Vec<Option<WkbArc>> = vec![None, None, None, None];
    for step in &caustic.traversal {
        let offset = step.predecessor.map_or(0.0, |p| {
            let w = out[p].as_ref().expect("predecessor first");
            w.offset + w.total
        });
        out[step.arc] = Some(wkb_arc(
            model,
            &caustic.arcs[step.arc],
            caustic.energy,
            offset,
            801,
        )?);
    }
    Ok(out
        .into_iter()
        .map(|w| w.expect("every arc in the traversal"))
        .collect())
}

fn action_at(w: &WkbArc, u: f64) -> f64 {
    numeric::interp_linear(&w.u, &w.x_cl, u)
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    q: Point2,
    p: Point2,
    x: f64,
    amp: f64,
}

impl HasPosition for Sample {
    type Scalar = f64;
    fn position(&self) -> spade::Point2<f64> {
        spade::Point2::new(self.q.x, self.q.y)
    }
}

/// Trace the oriented sub-family and interpolate `X_cl` onto `mesh`.
pub fn solve_classical_action(
    model: &Model,
    caustic: &Caustic,
    mesh: &Arc<Mesh>,
    opts: &CharacteristicOptions,
) -> Result<ClassicalAction, FieldError> {
    let energy = caustic.energy;
    let actions = arc_actions(model, caustic)?;
    let poly = caustic.polygon(400);
    let far: Vec<usize> = caustic
        .traversal
        .iter()
        .filter(|s| s.predecessor.is_some())
        .map(|s| s.arc)
        .collect();
    let far_dist = |q: Point2| {
        far.iter()
            .map(|&k| {
                let a = &caustic.arcs[k];
                (a.transverse_of(q) - a.f(a.param_of(q))).abs()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let dt = model.min_period() * opts.dt_fraction;
    let t_max = model.min_period();
    let mut samples: Vec<Sample> = Vec::new();
    let mut trajectories = 0;
    for step in caustic.traversal.iter().filter(|s| s.predecessor.is_none()) {
        let arc = &caustic.arcs[step.arc];
        let o = f64::from(arc.orientation);
        let len = arc.arc_length(arc.span[0], arc.span[1]);
        let n = ((len / (opts.launch_spacing * mesh.h)).ceil() as usize).max(8);
        // Bundle on a common time grid for the transported amplitude.
        let mut bundle: Vec<Vec<Sample>> = Vec::with_capacity(n);
        // Cosine spacing resolves the fan of trajectories leaving the vertices.
        let us: Vec<f64> = (0..n)
            .map(|i| {
                let phi = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                arc.span[0] + 0.5 * (arc.span[1] - arc.span[0]) * (1.0 - phi.cos())
            })
            .collect();
        for &u in &us {
            let q0 = arc.point(u);
            let p0 = arc.tangent(u) * (o * model.classical_momentum(energy, q0));
            let mut s = PhaseState::new(q0, p0);
            let mut x = action_at(&actions[step.arc], u);
            let mut path = vec![Sample {
                q: s.q,
                p: s.p,
                x,
                amp: 0.0,
            }];
            let mut d_prev = far_dist(s.q);
            let mut falling = false;
            let mut entered = false;
            let mut t = 0.0;
            while t < t_max {
                let p_old = s.p;
                pefrl_step(model, &mut s, dt);
                t += dt;
                x += 0.5 * dt * (p_old.norm_sq() + s.p.norm_sq()) / model.mass;
                // Launch points sit on the fitted arc, so early samples may
                // fall just outside the polygon.
                if point_in_polygon(&poly, s.q) {
                    entered = true;
                } else if entered || t > 0.1 * t_max {
                    break;
                }
                let d = far_dist(s.q);
                if falling && d > d_prev {
                    break;
                }
                falling = d < d_prev;
                d_prev = d;
                path.push(Sample {
                    q: s.q,
                    p: s.p,
                    x,
                    amp: 0.0,
                });
            }
            bundle.push(path);
        }
        trajectories += n;
        // |J| = |∂q/∂u × q̇| by differences across the bundle.
        for i in 0..n {
            for j in 0..bundle[i].len() {
                let nb = |k: usize| bundle.get(k).and_then(|b| b.get(j)).map(|s| (s.q, us[k]));
                let (q, u) = (bundle[i][j].q, us[i]);
                let dq = match (i.checked_sub(1).and_then(nb), nb(i + 1)) {
                    (Some(a), Some(b)) => (b.0 - a.0) * (1.0 / (b.1 - a.1)),
                    (None, Some(b)) => (b.0 - q) * (1.0 / (b.1 - u)),
                    (Some(a), None) => (q - a.0) * (1.0 / (u - a.1)),
                    (None, None) => Point2::ORIGIN,
                };
                let jac = dq.cross(bundle[i][j].p * (1.0 / model.mass)).abs();
                bundle[i][j].amp = jac.max(1e-24).powf(-0.5);
            }
        }
        samples.extend(bundle.into_iter().flatten());
    }
    if samples.len() < 3 {
        return Err(FieldError::CharacteristicCrossing {
            mismatch: f64::INFINITY,
        });
    }
    let n_samples = samples.len();
    let tri = DelaunayTriangulation::<Sample>::bulk_load(samples)
        .map_err(|e| FieldError::MeshingFailed(format!("sample triangulation: {e:?}")))?;
    let mut values = vec![0.0; mesh.vertices.len()];
    let mut amp = vec![0.0; mesh.vertices.len()];
    let mut mismatch: f64 = 0.0;
    for (v, &q) in mesh.vertices.iter().enumerate() {
        let (x, a) = interpolate(&tri, q);
        values[v] = x;
        amp[v] = a;
        if let Some(BoundaryTag::Caustic { arc, u }) = mesh.boundary_tags[v] {
            let exact = action_at(&actions[arc], u);
            if far.contains(&arc) {
                mismatch = mismatch.max((x - exact).abs());
            }
            values[v] = exact;
        }
    }
    let x_max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mismatch > opts.crossing_tol * x_max.max(1.0) {
        return Err(FieldError::CharacteristicCrossing { mismatch });
    }
    let finite: Vec<f64> = amp.iter().copied().filter(|a| a.is_finite()).collect();
    let cap = numeric::quantile(&finite, 0.99);
    for a in &mut amp {
        *a = a.min(cap) / cap;
    }
    let mut field = FieldSolution::new(mesh.clone(), FieldKind::X, values, energy, Provenance::Wkb);
    field.orientation_vertex = Some(caustic.start_vertex);
    let eikonal_fraction = eikonal_fraction(model, &field);
    Ok(ClassicalAction {
        field,
        amplitude: amp,
        boundary_mismatch: mismatch,
        eikonal_fraction,
        trajectories,
        samples: n_samples,
    })
}

/// Taylor-corrected linear interpolation `Σ w_i (X_i + p_i·(q − q_i))`,
/// falling back to the nearest sample outside the hull.
fn interpolate(tri: &DelaunayTriangulation<Sample>, q: Point2) -> (f64, f64) {
    let sp = spade::Point2::new(q.x, q.y);
    let est = |s: &Sample| s.x + s.p.dot(q - s.q);
    let weighted = |pairs: &[(f64, &Sample)]| {
        let x = pairs.iter().map(|(w, s)| w * est(s)).sum();
        let a = pairs.iter().map(|(w, s)| w * s.amp).sum();
        (x, a)
    };
    match tri.locate(sp) {
        PositionInTriangulation::OnVertex(v) => {
            let s = *tri.vertex(v).data();
            let s = &s;
            (est(s), s.amp)
        }
        PositionInTriangulation::OnFace(f) => {
            let face = tri.face(f);
            let w = face.barycentric_interpolation(sp);
            let vs = face.vertices();
            let [a, b, c] = vs.map(|v| *v.data());
            weighted(&[(w[0], &a), (w[1], &b), (w[2], &c)])
        }
        PositionInTriangulation::OnEdge(e) => {
            let [a, b] = tri.directed_edge(e).vertices().map(|v| *v.data());
            let (a, b) = (&a, &b);
            let ab = b.q - a.q;
            let t = ((q - a.q).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
            weighted(&[(1.0 - t, a), (t, b)])
        }
        _ => match tri.nearest_neighbor(sp) {
            Some(v) => {
                let s = *v.data();
                let s = &s;
                (est(s), s.amp)
            }
            None => (f64::NAN, f64::NAN),
        },
    }
}

/// Share of interior vertices that satisfy the eikonal equation to
/// `10⁻²·2mE`, using area-averaged P1 gradients.
pub fn eikonal_fraction(model: &Model, field: &FieldSolution) -> f64 {
    let m = &field.mesh;
    let mut g = vec![(Point2::ORIGIN, 0.0); m.vertices.len()];
    for (t, tri) in m.triangles.iter().enumerate() {
        let grad = m.gradient(t, &field.values);
        let a = m.signed_area(t);
        for &v in tri {
            g[v].0 = g[v].0 + grad * a;
            g[v].1 += a;
        }
    }
    let tol = 1e-2 * 2.0 * model.mass * field.energy;
    let (mut ok, mut total) = (0usize, 0usize);
    for (v, &(s, a)) in g.iter().enumerate() {
        if m.is_boundary(v) || a <= 0.0 {
            continue;
        }
        total += 1;
        let grad = s * (1.0 / a);
        let rhs = 2.0 * model.mass * (field.energy - model.potential(m.vertices[v]));
        if (grad.norm_sq() - rhs).abs() <= tol {
            ok += 1;
        }
    }
    ok as f64 / total.max(1) as f64
}

/// `ψ_v = A sin(X_cl,v/ħ)` for one orientation.
pub fn wkb_partial(model: &Model, action: &ClassicalAction, mode: AmplitudeMode) -> FieldSolution {
    let values = (0..action.field.values.len())
        .map(|i| {
            let a = match mode {
                AmplitudeMode::Constant => 1.0,
                AmplitudeMode::Transported => action.amplitude[i],
            };
            a * (action.field.values[i] / model.hbar).sin()
        })
        .collect();
    action.field.with_values(FieldKind::Psi, values)
}

/// `ψ_v1 ± ψ_v2` with `ψ_v = A sin(X_cl,v/ħ)`.
pub fn wkb_field(
    model: &Model,
    v1: &ClassicalAction,
    v2: &ClassicalAction,
    mode: AmplitudeMode,
    parity: Parity,
) -> FieldSolution {
    super::symmetrize(
        &wkb_partial(model, v1, mode),
        &wkb_partial(model, v2, mode),
        parity,
    )
}
