//! Linear finite elements for `−(ħ²/2m)Δψ + (U − E)ψ = 0` with Dirichlet
//! data on every tagged vertex.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::{BoundaryTag, FieldError, FieldKind, FieldSolution, Mesh, Provenance};
use crate::arc1d::ArcWave;
use crate::potential::{Model, Point2};

/// Relative residual above which a solve is reported as singular.
const RESIDUAL_LIMIT: f64 = 1e-10;

/// Assembled operator rows `K_ij` over all vertices.
pub(crate) fn assemble(mesh: &Mesh, model: &Model, energy: f64) -> Vec<Vec<(usize, f64)>> {
    let c = model.hbar * model.hbar / (2.0 * model.mass);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.vertices.len()];
    for tri in &mesh.triangles {
        let p = tri.map(|v| mesh.vertices[v]);
        let d = (p[1] - p[0]).cross(p[2] - p[0]);
        let area = 0.5 * d;
        // ∇λ_i = rot(p_{i+2} − p_{i+1}) / d.
        let grad: [Point2; 3] = std::array::from_fn(|i| {
            let e = p[(i + 2) % 3] - p[(i + 1) % 3];
            Point2::new(-e.y, e.x) * (1.0 / d)
        });
        // Edge midpoint opposite vertex i.
        let w: [f64; 3] = std::array::from_fn(|i| {
            let m = (p[(i + 1) % 3] + p[(i + 2) % 3]) * 0.5;
            model.potential(m) - energy
        });
        for i in 0..3 {
            for j in 0..3 {
                let stiff = c * grad[i].dot(grad[j]) * area;
                // φ_i φ_j at the three midpoints: ¼ where both are non-zero.
                let mass: f64 = (0..3)
                    .filter(|&m| m != i && m != j)
                    .map(|m| 0.25 * w[m])
                    .sum::<f64>()
                    * area
                    / 3.0;
                rows[tri[i]].push((tri[j], stiff + mass));
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
        for &(j, v) in r.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        *r = merged;
    }
    rows
}

pub(crate) fn apply(rows: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
        .collect()
}

/// Factored interior block of the operator.
pub(crate) struct DirichletSystem {
    pub rows: Vec<Vec<(usize, f64)>>,
    unknown: Vec<Option<usize>>,
    free: Vec<usize>,
    lu: Option<Lu<usize, f64>>,
}

impl DirichletSystem {
    pub fn new(mesh: &Mesh, model: &Model, energy: f64) -> Result<Self, FieldError> {
        let rows = assemble(mesh, model, energy);
        let mut unknown = vec![None; mesh.vertices.len()];
        let mut free = Vec::new();
        for v in 0..mesh.vertices.len() {
            if !mesh.is_boundary(v) {
                unknown[v] = Some(free.len());
                free.push(v);
            }
        }
        let n = free.len();
        if n == 0 {
            return Ok(Self {
                rows,
                unknown,
                free,
                lu: None,
            });
        }
        let mut trip = Vec::new();
        for (a, &v) in free.iter().enumerate() {
            for &(j, val) in &rows[v] {
                if let Some(b) = unknown[j] {
                    trip.push(Triplet::new(a, b, val));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| FieldError::SingularSystem(format!("{e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| FieldError::SingularSystem(format!("{e:?}")))?;
        Ok(Self {
            rows,
            unknown,
            free,
            lu: Some(lu),
        })
    }

    /// Solve for each column of boundary data; interior entries of the
    /// inputs are ignored.
    pub fn solve(&self, data: &[&[f64]]) -> Result<Vec<Vec<f64>>, FieldError> {
        let n = self.free.len();
        let mut out: Vec<Vec<f64>> = data
            .iter()
            .map(|d| {
                d.iter()
                    .enumerate()
                    .map(|(v, &x)| if self.unknown[v].is_some() { 0.0 } else { x })
                    .collect()
            })
            .collect();
        let Some(lu) = &self.lu else {
            return Ok(out);
        };
        let rhs = Mat::from_fn(n, data.len(), |a, c| {
            -self.rows[self.free[a]]
                .iter()
                .map(|&(j, v)| v * out[c][j])
                .sum::<f64>()
        });
        let x = lu.solve(&rhs);
        for (c, col) in out.iter_mut().enumerate() {
            for (a, &v) in self.free.iter().enumerate() {
                col[v] = x[(a, c)];
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(FieldError::SingularSystem("non-finite solution".into()));
            }
            let r = apply(&self.rows, col);
            let res = self.free.iter().map(|&v| r[v] * r[v]).sum::<f64>().sqrt();
            let b = (0..n)
                .map(|a| rhs[(a, c)] * rhs[(a, c)])
                .sum::<f64>()
                .sqrt();
            if res > RESIDUAL_LIMIT * b.max(f64::MIN_POSITIVE) && res > 1e-300 {
                return Err(FieldError::SingularSystem(format!(
                    "relative residual {:e}",
                    res / b
                )));
            }
        }
        Ok(out)
    }
}

/// Dirichlet solve with the boundary entries of `boundary` as data.
pub fn solve_dirichlet(
    mesh: &Arc<Mesh>,
    model: &Model,
    energy: f64,
    boundary: &[f64],
    provenance: Provenance,
) -> Result<FieldSolution, FieldError> {
    let sys = DirichletSystem::new(mesh, model, energy)?;
    let values = sys.solve(&[boundary])?.remove(0);
    Ok(FieldSolution::new(
        mesh.clone(),
        FieldKind::Psi,
        values,
        energy,
        provenance,
    ))
}

/// Boundary data from matched arc solutions; outer vertices get zero.
pub fn arc_boundary_values(mesh: &Mesh, waves: &[ArcWave]) -> Vec<f64> {
    mesh.boundary_tags
        .iter()
        .map(|t| match t {
            Some(BoundaryTag::Caustic { arc, u }) => waves
                .iter()
                .find(|w| w.arc == *arc)
                .map_or(0.0, |w| w.psi_at(*u)),
            _ => 0.0,
        })
        .collect()
}

pub fn solve_dirichlet_se(
    mesh: &Arc<Mesh>,
    model: &Model,
    energy: f64,
    waves: &[ArcWave],
) -> Result<FieldSolution, FieldError> {
    solve_dirichlet(
        mesh,
        model,
        energy,
        &arc_boundary_values(mesh, waves),
        Provenance::Se,
    )
}

#[derive(Debug, Clone)]
pub struct Welded {
    pub field: FieldSolution,
    /// Largest jump of the normal derivative across the caustic relative to
    /// the largest interior gradient.
    pub c1_jump: f64,
    /// Vertices `0..interior_len` come from the interior mesh.
    pub interior_len: usize,
}

/// Merge interior and exterior solutions on their shared caustic nodes.
pub fn weld(interior: &FieldSolution, exterior: &FieldSolution) -> Result<Welded, FieldError> {
    let (mi, me) = (&interior.mesh, &exterior.mesh);
    let r = mi.ring_len;
    if me.ring_len != r || mi.vertices[..r] != me.vertices[..r] {
        return Err(FieldError::MeshingFailed(
            "meshes do not share a caustic ring".into(),
        ));
    }
    let scale = interior.max_abs().max(exterior.max_abs()).max(1.0);
    let diff = (0..r)
        .map(|v| (interior.values[v] - exterior.values[v]).abs())
        .fold(0.0, f64::max);
    if diff > 1e-8 * scale {
        return Err(FieldError::BoundaryMismatch { diff });
    }
    let c1_jump = c1_jump(interior, exterior);
    let mesh = Arc::new(super::mesh::union_mesh(mi, me));
    let mut values = interior.values.clone();
    values.extend_from_slice(&exterior.values[r..]);
    let field = FieldSolution {
        mesh,
        values,
        ..interior.clone()
    };
    Ok(Welded {
        field,
        c1_jump,
        interior_len: mi.vertices.len(),
    })
}

/// Normal-derivative jump on the ring from averaged P1 gradients.
fn c1_jump(interior: &FieldSolution, exterior: &FieldSolution) -> f64 {
    let r = interior.mesh.ring_len;
    let avg = |f: &FieldSolution| {
        let mut g = vec![(Point2::ORIGIN, 0.0); r];
        for (t, tri) in f.mesh.triangles.iter().enumerate() {
            let grad = f.mesh.gradient(t, &f.values);
            let a = f.mesh.signed_area(t);
            for &v in tri {
                if v < r {
                    g[v].0 = g[v].0 + grad * a;
                    g[v].1 += a;
                }
            }
        }
        g.into_iter()
            .map(|(s, a)| s * (1.0 / a))
            .collect::<Vec<_>>()
    };
    let (gi, ge) = (avg(interior), avg(exterior));
    let m = &interior.mesh;
    let max_grad = (0..m.triangles.len())
        .map(|t| m.gradient(t, &interior.values).norm())
        .fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for v in 0..r {
        let t = m.vertices[(v + 1) % r] - m.vertices[(v + r - 1) % r];
        let n = Point2::new(t.y, -t.x).normalized();
        worst = worst.max((gi[v].dot(n) - ge[v].dot(n)).abs());
    }
    worst / max_grad.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field2d::mesh::mesh_rectangle;

    #[test]
    fn laplace_reproduces_linear_data() {
        // U ≡ E = 0 leaves the Laplacian, for which P1 is exact on linear data.
        let mesh = Arc::new(mesh_rectangle(
            Point2::new(-0.1, -0.1),
            Point2::new(0.1, 0.1),
            9,
            7,
        ));
        let f = |p: Point2| 1.0 + 2.0 * p.x - 3.0 * p.y;
        let data: Vec<f64> = mesh.vertices.iter().map(|&p| f(p)).collect();
        let flat = Model {
            omega_x: 0.0,
            omega_y: 0.0,
            ..Model::separable(1.0, 1.0)
        };
        let s = solve_dirichlet(&mesh, &flat, 0.0, &data, Provenance::Se).unwrap();
        for (p, v) in mesh.vertices.iter().zip(&s.values) {
            assert!((v - f(*p)).abs() < 1e-12);
        }
    }
}
