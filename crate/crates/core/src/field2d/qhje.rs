//! Quantum action `X` and amplitude `A` inside the caustic.
//!
//! With `ψ_v = A e^{iX/ħ}` the coupled equations for `X` and `A` are the real
//! and imaginary parts of `ψ̄ (Hψ − Eψ) = 0`. The discrete system is solved
//! for the complex field with Dirichlet data `A_k e^{iX_k/ħ}` from the arc
//! solutions, and `X`, `A` are read off its phase and modulus. Residuals are
//! reported in the real/imaginary (action/continuity) form.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::sync::Arc;

use super::fem::{apply, DirichletSystem};
use super::{
    symmetrize, BoundaryTag, FieldError, FieldKind, FieldSolution, Mesh, Parity, Provenance,
};
use crate::arc1d::qhje::solve_arc_qhje;
use crate::arc1d::{match_arc_constants, ArcOptions, ArcWave};
use crate::caustic::{orient_caustic, Caustic, ARC_VERTICES};
use crate::potential::Model;

#[derive(Debug, Clone)]
pub struct QhjeField {
    pub x: FieldSolution,
    pub a: FieldSolution,
    /// `A sin(X/ħ)` for this orientation.
    pub psi: FieldSolution,
    /// Mesh-norm residual of the real (action) part.
    pub residual_real: f64,
    /// Mesh-norm residual of the imaginary (continuity) part.
    pub residual_imag: f64,
    /// Summed flux divergence of `A²∇X` over interior vertices, relative.
    pub continuity: f64,
}

/// Orient `caustic` from `start_vertex` and solve the four arcs with
/// matched constants.
pub fn oriented_arcs(
    model: &Model,
    caustic: &Caustic,
    start_vertex: usize,
    opts: &ArcOptions,
) -> Result<(Caustic, Vec<ArcWave>), FieldError> {
    let mut c = caustic.clone();
    orient_caustic(&mut c, start_vertex);
    let mut waves = Vec::with_capacity(4);
    for arc in &c.arcs {
        waves.push(solve_arc_qhje(model, arc, c.energy, opts)?);
    }
    match_arc_constants(&mut waves, &c.traversal, &ARC_VERTICES)?;
    Ok((c, waves))
}

fn end_action(w: &ArcWave, orientation: i8) -> f64 {
    if orientation >= 0 {
        *w.x.last().unwrap_or(&0.0)
    } else {
        *w.x.first().unwrap_or(&0.0)
    }
}

/// `(A, X)` boundary data per mesh vertex; `None` off the caustic.
fn boundary_data(mesh: &Mesh, caustic: &Caustic, waves: &[ArcWave]) -> Vec<Option<(f64, f64)>> {
    let find = |k: usize| waves.iter().find(|w| w.arc == k).expect("wave per arc");
    let mut offset = [0.0; 4];
    for step in &caustic.traversal {
        if let Some(p) = step.predecessor {
            offset[step.arc] = offset[p] + end_action(find(p), caustic.arcs[p].orientation);
        }
    }
    mesh.boundary_tags
        .iter()
        .map(|t| match t {
            Some(BoundaryTag::Caustic { arc, u }) => {
                let w = find(*arc);
                Some((
                    w.c.abs() * w.interp_span(&w.a, *u),
                    w.interp_span(&w.x, *u) + offset[*arc],
                ))
            }
            Some(BoundaryTag::Outer) => Some((0.0, 0.0)),
            None => None,
        })
        .collect()
}

/// Solve for one orientation on the interior mesh.
pub fn solve_qhje_field(
    mesh: &Arc<Mesh>,
    model: &Model,
    caustic: &Caustic,
    waves: &[ArcWave],
) -> Result<QhjeField, FieldError> {
    let hbar = model.hbar;
    let energy = caustic.energy;
    let data = boundary_data(mesh, caustic, waves);
    let re: Vec<f64> = data
        .iter()
        .map(|d| d.map_or(0.0, |(a, x)| a * (x / hbar).cos()))
        .collect();
    let im: Vec<f64> = data
        .iter()
        .map(|d| d.map_or(0.0, |(a, x)| a * (x / hbar).sin()))
        .collect();
    let sys = DirichletSystem::new(mesh, model, energy)?;
    let mut sol = sys.solve(&[&re, &im])?;
    let im = sol.pop().expect("two columns");
    let re = sol.pop().expect("two columns");
    let n = mesh.vertices.len();
    let a: Vec<f64> = (0..n).map(|v| re[v].hypot(im[v])).collect();
    let a_max = a.iter().fold(0.0f64, |m, v| m.max(*v));
    if let Some(v) = (0..n).find(|&v| !(a[v] > 1e-8 * a_max)) {
        return Err(FieldError::NewtonDivergence(format!(
            "amplitude vanishes at vertex {v} ({:?})",
            mesh.vertices[v]
        )));
    }
    let x = unwrap_on_mesh(mesh, &re, &im, &data, hbar);
    // ψ̄ K ψ split into real and imaginary parts.
    let (kr, ki) = (apply(&sys.rows, &re), apply(&sys.rows, &im));
    let (mut sr, mut si, mut scale, mut flux, mut flux_scale) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for v in (0..n).filter(|&v| !mesh.is_boundary(v)) {
        let real = re[v] * kr[v] + im[v] * ki[v];
        let imag = re[v] * ki[v] - im[v] * kr[v];
        let mag: f64 = sys.rows[v]
            .iter()
            .map(|&(j, k)| k.abs() * a[j])
            .sum::<f64>()
            * a[v];
        sr += real * real;
        si += imag * imag;
        scale += mag * mag;
        flux += imag;
        flux_scale += mag;
    }
    let scale = scale.sqrt().max(f64::MIN_POSITIVE);
    let psi: Vec<f64> = (0..n).map(|v| a[v] * (x[v] / hbar).sin()).collect();
    let mk = |kind, values| {
        let mut f = FieldSolution::new(mesh.clone(), kind, values, energy, Provenance::Qhje);
        f.orientation_vertex = Some(caustic.start_vertex);
        f
    };
    Ok(QhjeField {
        x: mk(FieldKind::X, x),
        a: mk(FieldKind::A, a),
        psi: mk(FieldKind::Psi, psi),
        residual_real: sr.sqrt() / scale,
        residual_imag: si.sqrt() / scale,
        continuity: flux.abs() / flux_scale.max(f64::MIN_POSITIVE),
    })
}

/// Continuous `X = ħ·arg ψ` by breadth-first unwrapping from the caustic.
fn unwrap_on_mesh(
    mesh: &Mesh,
    re: &[f64],
    im: &[f64],
    data: &[Option<(f64, f64)>],
    hbar: f64,
) -> Vec<f64> {
    let n = mesh.vertices.len();
    let mut adj = vec![Vec::new(); n];
    for t in &mesh.triangles {
        for i in 0..3 {
            adj[t[i]].push(t[(i + 1) % 3]);
            adj[t[(i + 1) % 3]].push(t[i]);
        }
    }
    let mut theta = vec![f64::NAN; n];
    let mut queue = VecDeque::new();
    for (v, d) in data.iter().enumerate() {
        if let Some((_, x)) = d {
            theta[v] = x / hbar;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if theta[w].is_nan() {
                let raw = im[w].atan2(re[w]);
                theta[w] = raw + TAU * ((theta[v] - raw) / TAU).round();
                queue.push_back(w);
            }
        }
    }
    theta.iter().map(|t| hbar * t).collect()
}

/// `ψ_HJ = ψ_v1 ± ψ_v2`.
pub fn qhje_wavefunction(v1: &QhjeField, v2: &QhjeField, parity: Parity) -> FieldSolution {
    symmetrize(&v1.psi, &v2.psi, parity)
}

/// `A sin(X/ħ)` from separate fields.
pub fn psi_from_action(model: &Model, x: &FieldSolution, a: &FieldSolution) -> FieldSolution {
    let values = x
        .values
        .iter()
        .zip(&a.values)
        .map(|(x, a)| a * (x / model.hbar).sin())
        .collect();
    x.with_values(FieldKind::Psi, values)
}
