//! One-dimensional problems on the caustic arcs.
//!
//! Along an arc parametrized by `u` with metric `g(u)`, the Schrödinger
//! equation `ψ″ − (g′/g)ψ′ + (2m/ħ²)(E − U_k)g²ψ = 0` is the ordinary
//! equation in arc length `s`. Every solver here integrates it as the first
//! order system `ψ_u = g χ`, `χ_u = −k² g ψ` with `χ = dψ/ds` and
//! `k² = 2m(E − U_k)/ħ²`, on a grid that contains both vertices and the
//! matching point exactly.

pub mod qhje;
pub mod se;
pub mod search;
pub mod wkb;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caustic::{CausticArc, CausticError, TraversalStep};
use crate::potential::{Model, PotentialError};

pub use qhje::solve_arc_qhje;
pub use se::solve_arc_se;
pub use search::{search_eigenstate, Eigenstate, SearchOptions};
pub use wkb::wkb_arc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArcError {
    #[error("integration produced non-finite values on arc {arc}")]
    StiffnessFailure { arc: usize },
    #[error("U_k exceeds E inside arc {arc} at u = {u}")]
    ClassicallyForbidden { arc: usize, u: f64 },
    #[error("arc wavefunction vanishes at a shared vertex of arc {arc}")]
    ZeroAtVertex { arc: usize },
    #[error("phase construction failed on arc {arc}: {reason}")]
    NewtonDivergence { arc: usize, reason: String },
    #[error("search did not converge: {reason} (best residual {best_residual:e})")]
    NotConverged { reason: String, best_residual: f64 },
    #[error(transparent)]
    Caustic(#[from] CausticError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Se,
    Wkb,
    Qhje,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Se => "se",
            Method::Wkb => "wkb",
            Method::Qhje => "qhje",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "se" => Ok(Method::Se),
            "wkb" => Ok(Method::Wkb),
            "qhje" => Ok(Method::Qhje),
            other => Err(format!(
                "unknown method {other:?} (expected se, wkb or qhje)"
            )),
        }
    }
}

/// Numerical knobs shared by the arc solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcOptions {
    /// Decay exponent `∫κ ds` each tail must reach.
    pub tail_decay: f64,
    /// Largest tail length in units of the span.
    pub max_tail_spans: f64,
    /// Largest `k·Δs` per RK4 step.
    pub phase_step: f64,
}

impl Default for ArcOptions {
    fn default() -> Self {
        Self {
            tail_decay: 22.0,
            max_tail_spans: 3.0,
            phase_step: 0.01,
        }
    }
}

/// One-dimensional solution on an arc and its continuation.
///
/// `u`, `psi` and `dpsi_ds` cover the whole grid. `X`, `Y`, `A`, `p_cl`
/// and `X_cl` are filled on the span samples `span_range()` by the method
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcWave {
    /// 0-based arc index.
    pub arc: usize,
    pub method: Method,
    pub energy: f64,
    pub hbar: f64,
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi_ds: Vec<f64>,
    /// Grid indices of `u_i` and `u_f`.
    pub vertex_index: [usize; 2],
    pub nodes: usize,
    /// Continuous phase count; an integer at a bound state.
    pub phase_count: f64,
    /// Distance of `phase_count` to the nearest integer.
    pub regularity: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
    pub c: f64,
    pub p_cl: Vec<f64>,
    pub x_cl: Vec<f64>,
}

impl ArcWave {
    pub fn span_range(&self) -> std::ops::RangeInclusive<usize> {
        self.vertex_index[0]..=self.vertex_index[1]
    }

    pub fn span_u(&self) -> &[f64] {
        &self.u[self.span_range()]
    }

    pub fn span_psi(&self) -> &[f64] {
        &self.psi[self.span_range()]
    }

    /// `ψ` at `u_i` (end 0) or `u_f` (end 1), including the constant `c`.
    pub fn vertex_value(&self, end: usize) -> f64 {
        self.c * self.psi[self.vertex_index[end]]
    }

    /// Linear interpolation of `c·ψ` at parameter `u`.
    pub fn psi_at(&self, u: f64) -> f64 {
        self.c * crate::numeric::interp_linear(&self.u, &self.psi, u)
    }

    pub fn interp_span(&self, values: &[f64], u: f64) -> f64 {
        crate::numeric::interp_linear(self.span_u(), values, u)
    }
}

/// Grid, metric and local wavenumber on an arc at fixed energy.
#[derive(Debug, Clone)]
pub(crate) struct ArcGrid {
    pub u: Vec<f64>,
    /// `g` and `k²` at grid nodes.
    pub g: Vec<f64>,
    pub k2: Vec<f64>,
    /// `g` and `k²` at interval midpoints.
    pub gm: Vec<f64>,
    pub k2m: Vec<f64>,
    pub i_start: usize,
    pub i_mid: usize,
    pub i_end: usize,
    /// Prüfer scale.
    pub scale: f64,
}

impl ArcGrid {
    pub fn new(model: &Model, arc: &CausticArc, energy: f64, opts: &ArcOptions) -> Self {
        let hbar = model.hbar;
        let k2 = |u: f64| {
            2.0 * model.mass * (energy - arc.restricted_potential(model, u)) / (hbar * hbar)
        };
        let [ui, uf] = arc.span;
        let len = uf - ui;
        let mid = 0.5 * (ui + uf);
        // Tails: walk outward until the decay exponent is reached.
        let tail = |dir: f64, from: f64| -> f64 {
            let h = len / 400.0;
            let mut acc = 0.0;
            let mut u = from;
            let cap = opts.max_tail_spans * len;
            while acc < opts.tail_decay && (u - from).abs() < cap {
                let un = u + dir * h;
                let um = 0.5 * (u + un);
                acc += (-k2(um)).max(0.0).sqrt() * arc.scale_factor(um) * h;
                u = un;
            }
            u
        };
        let a = tail(-1.0, ui);
        let b = tail(1.0, uf);
        let probe = crate::numeric::linspace(a, b, 801);
        let gk = probe
            .iter()
            .map(|&u| arc.scale_factor(u) * k2(u).abs().sqrt())
            .fold(1.0 / len, f64::max);
        let pieces = [(a, ui), (ui, mid), (mid, uf), (uf, b)];
        let mut u = vec![a];
        let mut marks = [0usize; 3];
        for (j, &(p, q)) in pieces.iter().enumerate() {
            let n = (((q - p) * gk / opts.phase_step).ceil() as usize).max(8);
            for i in 1..=n {
                u.push(if i == n {
                    q
                } else {
                    p + (q - p) * i as f64 / n as f64
                });
            }
            if j < 3 {
                marks[j] = u.len() - 1;
            }
        }
        let g: Vec<f64> = u.iter().map(|&v| arc.scale_factor(v)).collect();
        let k2n: Vec<f64> = u.iter().map(|&v| k2(v)).collect();
        let um: Vec<f64> = u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let gm = um.iter().map(|&v| arc.scale_factor(v)).collect();
        let k2m = um.iter().map(|&v| k2(v)).collect();
        let kmax = k2n[marks[0]..=marks[2]]
            .iter()
            .fold(0.0f64, |m, &v| m.max(v))
            .sqrt();
        Self {
            u,
            g,
            k2: k2n,
            gm,
            k2m,
            i_start: marks[0],
            i_mid: marks[1],
            i_end: marks[2],
            scale: kmax.max(1e-3),
        }
    }

    /// RK4 step of `ψ_u = gχ, χ_u = −k²gψ` from node `i` to `j = i ± 1`.
    pub fn step_linear(&self, i: usize, j: usize, psi: f64, chi: f64) -> (f64, f64) {
        let h = self.u[j] - self.u[i];
        let m = i.min(j);
        let f = |g: f64, k2: f64, p: f64, c: f64| (g * c, -k2 * g * p);
        let (g0, k0) = (self.g[i], self.k2[i]);
        let (gh, kh) = (self.gm[m], self.k2m[m]);
        let (g1, k1) = (self.g[j], self.k2[j]);
        let a = f(g0, k0, psi, chi);
        let b = f(gh, kh, psi + 0.5 * h * a.0, chi + 0.5 * h * a.1);
        let c = f(gh, kh, psi + 0.5 * h * b.0, chi + 0.5 * h * b.1);
        let d = f(g1, k1, psi + h * c.0, chi + h * c.1);
        (
            psi + h / 6.0 * (a.0 + 2.0 * b.0 + 2.0 * c.0 + d.0),
            chi + h / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1),
        )
    }

    /// RK4 step of the Prüfer angle `θ_u = g(S cos²θ + (k²/S) sin²θ)`.
    pub fn step_phase(&self, i: usize, j: usize, theta: f64) -> f64 {
        let h = self.u[j] - self.u[i];
        let m = i.min(j);
        let s = self.scale;
        let f = |g: f64, k2: f64, t: f64| {
            let (sn, cs) = t.sin_cos();
            g * (s * cs * cs + k2 / s * sn * sn)
        };
        let a = f(self.g[i], self.k2[i], theta);
        let b = f(self.gm[m], self.k2m[m], theta + 0.5 * h * a);
        let c = f(self.gm[m], self.k2m[m], theta + 0.5 * h * b);
        let d = f(self.g[j], self.k2[j], theta + h * c);
        theta + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
    }

    /// RK4 step of the log-derivative `L = χ/ψ`: `L_u = −g(k² + L²)`.
    pub fn step_riccati(&self, i: usize, j: usize, l: f64) -> f64 {
        let h = self.u[j] - self.u[i];
        let m = i.min(j);
        let f = |g: f64, k2: f64, l: f64| -g * (k2 + l * l);
        let a = f(self.g[i], self.k2[i], l);
        let b = f(self.gm[m], self.k2m[m], l + 0.5 * h * a);
        let c = f(self.gm[m], self.k2m[m], l + 0.5 * h * b);
        let d = f(self.g[j], self.k2[j], l + h * c);
        l + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
    }

    pub fn last(&self) -> usize {
        self.u.len() - 1
    }

    /// Decay rate `κ = √(−k²)` at a node.
    pub fn kappa(&self, i: usize) -> f64 {
        (-self.k2[i]).max(0.0).sqrt()
    }

    /// Arc length from node 0.
    pub fn arc_length(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.u.len()];
        for i in 1..self.u.len() {
            let h = self.u[i] - self.u[i - 1];
            s[i] = s[i - 1] + h / 6.0 * (self.g[i - 1] + 4.0 * self.gm[i - 1] + self.g[i]);
        }
        s
    }
}

/// Count strict sign changes of a sampled function.
pub fn count_nodes(values: &[f64]) -> usize {
    let mut last: f64 = 0.0;
    let mut n = 0;
    for &v in values {
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                n += 1;
            }
            last = v;
        }
    }
    n
}

/// Scale the constants `c_k` so that neighbouring arcs agree at shared
/// vertices, walking the traversal from the start vertex.
///
/// Returns the relative mismatch left at the opposite vertex, where two
/// independently matched arcs meet.
pub fn match_arc_constants(
    waves: &mut [ArcWave],
    traversal: &[TraversalStep],
    arc_vertices: &[(usize, usize)],
) -> Result<f64, ArcError> {
    let value_at = |w: &ArcWave, vertex: usize| -> f64 {
        let (a, _) = arc_vertices[w.arc];
        w.vertex_value(if a == vertex { 0 } else { 1 })
    };
    let scale = waves
        .iter()
        .flat_map(|w| w.psi.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let find = |waves: &[ArcWave], arc: usize| waves.iter().position(|w| w.arc == arc).unwrap();
    let shared = |a: usize, b: usize| -> usize {
        let (p, q) = arc_vertices[a];
        let (r, s) = arc_vertices[b];
        if p == r || p == s {
            p
        } else {
            debug_assert!(q == r || q == s);
            q
        }
    };
    let leading: Vec<&TraversalStep> = traversal
        .iter()
        .filter(|t| t.predecessor.is_none())
        .collect();
    let first = find(waves, leading[0].arc);
    waves[first].c = 1.0;
    let mut ordered = vec![leading[0].arc];
    for t in leading.iter().skip(1) {
        ordered.push(t.arc);
    }
    for t in traversal.iter().filter(|t| t.predecessor.is_some()) {
        ordered.push(t.arc);
    }
    for (pos, &arc) in ordered.iter().enumerate().skip(1) {
        let anchor = if pos < leading.len() {
            leading[0].arc
        } else {
            traversal
                .iter()
                .find(|t| t.arc == arc)
                .unwrap()
                .predecessor
                .unwrap()
        };
        let v = shared(anchor, arc);
        let ia = find(waves, anchor);
        let ib = find(waves, arc);
        let target = value_at(&waves[ia], v);
        waves[ib].c = 1.0;
        let own = value_at(&waves[ib], v);
        if own.abs() <= tiny {
            return Err(ArcError::ZeroAtVertex { arc: arc + 1 });
        }
        if target.abs() <= tiny {
            return Err(ArcError::ZeroAtVertex { arc: anchor + 1 });
        }
        waves[ib].c = target / own;
    }
    // Opposite vertex: shared by the two arcs matched last.
    let n = ordered.len();
    let (p, q) = (ordered[n - 2], ordered[n - 1]);
    let v = shared(p, q);
    let vp = value_at(&waves[find(waves, p)], v);
    let vq = value_at(&waves[find(waves, q)], v);
    Ok((vp - vq).abs() / vp.abs().max(vq.abs()).max(tiny))
}
