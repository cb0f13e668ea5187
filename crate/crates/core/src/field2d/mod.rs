//! Two-dimensional fields inside and outside the caustic.
//!
//! The interior `Ω_F` is meshed as a transfinite (Coons) patch bounded by the
//! four arcs; the exterior annulus as four patches between the arcs and an
//! outer rectangle. Both meshes share the caustic nodes so solutions can be
//! welded node by node.

pub mod classical;
pub mod diagnostics;
pub mod fem;
pub mod mesh;
pub mod qhje;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::Point2;

pub use classical::{
    solve_classical_action, wkb_field, wkb_partial, AmplitudeMode, ClassicalAction,
};
pub use fem::{solve_dirichlet, solve_dirichlet_se, weld, Welded};
pub use mesh::{mesh_exterior, mesh_interior, outer_box, CausticRing};
pub use qhje::{qhje_wavefunction, solve_qhje_field, QhjeField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("meshing failed: {0}")]
    MeshingFailed(String),
    #[error("linear system is singular or ill-conditioned: {0}")]
    SingularSystem(String),
    #[error("interior and exterior values differ by {diff:e} at a caustic node")]
    BoundaryMismatch { diff: f64 },
    #[error("characteristics disagree with the boundary action by {mismatch:e}")]
    CharacteristicCrossing { mismatch: f64 },
    #[error("quantum Hamilton-Jacobi solve failed: {0}")]
    NewtonDivergence(String),
    #[error("fields do not overlap")]
    EmptyOverlap,
    #[error(transparent)]
    Arc(#[from] crate::arc1d::ArcError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// Tag of a boundary vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// On arc `arc` (0-based) at parameter `u`.
    Caustic {
        arc: usize,
        u: f64,
    },
    Outer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    /// Target edge length.
    pub h: f64,
    /// Vertices `0..ring_len` are the caustic nodes, counter-clockwise from `v1`.
    pub ring_len: usize,
}

impl Mesh {
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(c - a)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary_tags[v].is_some()
    }

    /// Gradient of the linear interpolant of `values` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> Point2 {
        let [i, j, k] = self.triangles[t];
        let [a, b, c] = [i, j, k].map(|n| self.vertices[n]);
        let d = (b - a).cross(c - a);
        let (fa, fb, fc) = (values[i], values[j], values[k]);
        // ∇f = Σ f_i ∇λ_i with ∇λ for edge-opposite rotation.
        let g = |p: Point2, q: Point2| Point2::new(p.y - q.y, q.x - p.x) * (1.0 / d);
        g(b, c) * fa + g(c, a) * fb + g(a, b) * fc
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Plain-text form: a `nodes N` header followed by `x y tag` lines
    /// (`tag` is `-`, `outer` or `caustic:<arc>:<u>`), then `triangles M`
    /// and `i j k` lines with 0-based vertex indices.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "nodes {}", self.vertices.len());
        for (p, tag) in self.vertices.iter().zip(&self.boundary_tags) {
            let t = match tag {
                None => "-".to_string(),
                Some(BoundaryTag::Outer) => "outer".to_string(),
                Some(BoundaryTag::Caustic { arc, u }) => {
                    format!("caustic:{arc}:{}", crate::io::fmt(*u))
                }
            };
            let _ = writeln!(s, "{} {} {t}", crate::io::fmt(p.x), crate::io::fmt(p.y));
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for [i, j, k] in &self.triangles {
            let _ = writeln!(s, "{i} {j} {k}");
        }
        s
    }
}

/// Bucket grid for point location.
#[derive(Debug, Clone)]
pub struct Locator {
    lo: Point2,
    cell: Point2,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in &mesh.vertices {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let n = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let (w, h) = ((hi.x - lo.x).max(1e-12), (hi.y - lo.y).max(1e-12));
        let nx = ((n as f64 * (w / h).sqrt()).ceil() as usize).clamp(1, 4096);
        let ny = ((n as f64 * (h / w).sqrt()).ceil() as usize).clamp(1, 4096);
        let cell = Point2::new(w / nx as f64, h / ny as f64);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ps = tri.map(|i| mesh.vertices[i]);
            let bx = |x: f64| (((x - lo.x) / cell.x).floor().max(0.0) as usize).min(nx - 1);
            let by = |y: f64| (((y - lo.y) / cell.y).floor().max(0.0) as usize).min(ny - 1);
            let (x0, x1) = (
                ps.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (
                ps.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
                ps.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
            );
            for i in bx(x0)..=bx(x1) {
                for j in by(y0)..=by(y1) {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        Self {
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Containing triangle and barycentric weights.
    pub fn locate(&self, mesh: &Mesh, p: Point2) -> Option<(usize, [f64; 3])> {
        let fx = (p.x - self.lo.x) / self.cell.x;
        let fy = (p.y - self.lo.y) / self.cell.y;
        if fx < -1e-9 || fy < -1e-9 || fx > self.nx as f64 + 1e-9 || fy > self.ny as f64 + 1e-9 {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let t = t as usize;
            let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
            let d = (b - a).cross(c - a);
            let l1 = (b - p).cross(c - p) / d;
            let l2 = (c - p).cross(a - p) / d;
            let l3 = 1.0 - l1 - l2;
            let worst = l1.min(l2).min(l3);
            if best.is_none_or(|b| worst > b.2) {
                best = Some((t, [l1, l2, l3], worst));
            }
        }
        best.filter(|b| b.2 >= -1e-10).map(|b| (b.0, b.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Psi,
    X,
    Y,
    A,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Se,
    Wkb,
    Qhje,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(format!("unknown parity {other:?} (expected even or odd)")),
        }
    }
}

/// Scalar field on the vertices of a mesh.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub mesh: Arc<Mesh>,
    pub kind: FieldKind,
    pub values: Vec<f64>,
    pub energy: f64,
    pub provenance: Provenance,
    /// 0-based start vertex of the orientation, if any.
    pub orientation_vertex: Option<usize>,
}

impl FieldSolution {
    pub fn new(
        mesh: Arc<Mesh>,
        kind: FieldKind,
        values: Vec<f64>,
        energy: f64,
        provenance: Provenance,
    ) -> Self {
        Self {
            mesh,
            kind,
            values,
            energy,
            provenance,
            orientation_vertex: None,
        }
    }

    pub fn with_values(&self, kind: FieldKind, values: Vec<f64>) -> Self {
        Self {
            kind,
            values,
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation at `p`, `None` outside the mesh.
    pub fn value_at(&self, locator: &Locator, p: Point2) -> Option<f64> {
        let (t, w) = locator.locate(&self.mesh, p)?;
        let tri = self.mesh.triangles[t];
        Some(w[0] * self.values[tri[0]] + w[1] * self.values[tri[1]] + w[2] * self.values[tri[2]])
    }

    /// `‖f‖₂` with the P1 mass-lumped quadrature.
    pub fn l2_norm(&self) -> f64 {
        let m = &self.mesh;
        let mut s = 0.0;
        for (t, tri) in m.triangles.iter().enumerate() {
            let a = m.signed_area(t).abs() / 3.0;
            s += tri
                .iter()
                .map(|&v| a * self.values[v] * self.values[v])
                .sum::<f64>();
        }
        s.sqrt()
    }

    /// Uniform raster over the mesh bounding box; points outside the mesh
    /// are skipped.
    pub fn raster(&self, nx: usize, ny: usize) -> Vec<(f64, f64, f64)> {
        let loc = Locator::new(&self.mesh);
        let (lo, hi) = bounding_box(&self.mesh.vertices);
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = lo.x + (hi.x - lo.x) * i as f64 / (nx.max(2) - 1) as f64;
                let y = lo.y + (hi.y - lo.y) * j as f64 / (ny.max(2) - 1) as f64;
                if let Some(v) = self.value_at(&loc, Point2::new(x, y)) {
                    out.push((x, y, v));
                }
            }
        }
        out
    }
}

pub fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

pub fn parity_sign(parity: Parity) -> f64 {
    match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    }
}

/// `ψ_v1 ± ψ_v2` for the requested x-parity. Both fields must live on the
/// same mesh.
pub fn symmetrize(a: &FieldSolution, b: &FieldSolution, parity: Parity) -> FieldSolution {
    assert!(Arc::ptr_eq(&a.mesh, &b.mesh) || a.mesh.vertices.len() == b.mesh.vertices.len());
    let s = parity_sign(parity);
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(p, q)| p + s * q)
        .collect();
    FieldSolution {
        values,
        orientation_vertex: None,
        kind: FieldKind::Psi,
        ..a.clone()
    }
}

/// `max |f(x, y) − s·f(−x, y)| / max |f|` over mesh vertices whose mirror
/// image lies in the mesh; `s = ±1` for even/odd parity.
pub fn parity_defect(f: &FieldSolution, parity: Parity) -> f64 {
    let loc = Locator::new(&f.mesh);
    let s = parity_sign(parity);
    let mut worst: f64 = 0.0;
    for (p, &v) in f.mesh.vertices.iter().zip(&f.values) {
        if let Some(w) = f.value_at(&loc, p.mirror_x()) {
            worst = worst.max((v - s * w).abs());
        }
    }
    worst / f.max_abs().max(f64::MIN_POSITIVE)
}
