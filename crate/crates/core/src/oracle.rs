//! Reference spectrum and eigenfunctions from the Hamiltonian in a truncated
//! oscillator product basis `φ_n(x) φ_m(y)` with the model's frequencies.

use std::sync::Arc;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field2d::{
    mesh::mesh_rectangle, FieldError, FieldKind, FieldSolution, Locator, Provenance,
};
use crate::potential::{Model, Point2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("basis {0}×{1} is too small")]
    BasisTooSmall(usize, usize),
    #[error("state {index} out of range ({len} states)")]
    NoSuchState { index: usize, len: usize },
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub model: Model,
    /// `(N_x, N_y)`: one-dimensional functions per axis.
    pub basis: (usize, usize),
    pub energies: Vec<f64>,
    /// Column `s` holds the coefficients of state `s`, basis index `n·N_y + m`.
    pub vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn coefficient(&self, state: usize, n: usize, m: usize) -> f64 {
        self.vectors[state][n * self.basis.1 + m]
    }

    /// Basis quantum numbers with the largest weight in `state`.
    pub fn dominant(&self, state: usize) -> (usize, usize) {
        let v = &self.vectors[state];
        let i = (0..v.len())
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap_or(0);
        (i / self.basis.1, i % self.basis.1)
    }

    /// Index of the state whose dominant component is `(n, m)` and whose
    /// energy is closest to `near`.
    pub fn find(&self, n: usize, m: usize, near: f64) -> Option<usize> {
        (0..self.energies.len())
            .filter(|&s| self.dominant(s) == (n, m))
            .min_by(|&a, &b| {
                (self.energies[a] - near)
                    .abs()
                    .total_cmp(&(self.energies[b] - near).abs())
            })
    }
}

/// `⟨n|(a + a†)^k|m⟩` for `k = 1, 2` in a single-mode oscillator basis.
fn ladder(k: usize, n: usize, m: usize) -> f64 {
    let s = |j: usize| (j as f64).sqrt();
    match k {
        1 => {
            if n == m + 1 {
                s(m + 1)
            } else if m == n + 1 {
                s(n + 1)
            } else {
                0.0
            }
        }
        2 => {
            if n == m {
                2.0 * m as f64 + 1.0
            } else if n == m + 2 {
                s(m + 1) * s(m + 2)
            } else if m == n + 2 {
                s(n + 1) * s(n + 2)
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    }
}

/// Matrix element `⟨n m| x² y |n' m'⟩` in the product basis.
pub fn coupling_element(model: &Model, (n, m): (usize, usize), (np, mp): (usize, usize)) -> f64 {
    let lx = model.hbar / (2.0 * model.mass * model.omega_x);
    let ly = (model.hbar / (2.0 * model.mass * model.omega_y)).sqrt();
    lx * ladder(2, n, np) * ly * ladder(1, m, mp)
}

/// Diagonalize `H` in the `N_x × N_y` product basis.
pub fn diagonalize(model: &Model, nx: usize, ny: usize) -> Result<Spectrum, OracleError> {
    if nx < 2 || ny < 2 {
        return Err(OracleError::BasisTooSmall(nx, ny));
    }
    let dim = nx * ny;
    let h = Mat::from_fn(dim, dim, |i, j| {
        let (a, b) = ((i / ny, i % ny), (j / ny, j % ny));
        let mut v = model.lambda * coupling_element(model, a, b);
        if i == j {
            v += model.hbar
                * (model.omega_x * (a.0 as f64 + 0.5) + model.omega_y * (a.1 as f64 + 0.5));
        }
        v
    });
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| OracleError::Eigen(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let energies = order.iter().map(|&k| s[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..dim).map(|i| u[(i, k)]).collect())
        .collect();
    Ok(Spectrum {
        model: *model,
        basis: (nx, ny),
        energies,
        vectors,
    })
}

/// Normalized oscillator functions `φ_0..φ_{n−1}` at `x` by the stable
/// three-term recurrence.
pub fn oscillator_functions(n: usize, mass_omega_over_hbar: f64, x: f64) -> Vec<f64> {
    let a = mass_omega_over_hbar;
    let xi = a.sqrt() * x;
    let mut out = Vec::with_capacity(n);
    let mut p0 = (a / std::f64::consts::PI).powf(0.25) * (-0.5 * xi * xi).exp();
    out.push(p0);
    if n > 1 {
        let mut p1 = std::f64::consts::SQRT_2 * xi * p0;
        out.push(p1);
        for k in 2..n {
            let p2 = (2.0 / k as f64).sqrt() * xi * p1 - ((k - 1) as f64 / k as f64).sqrt() * p0;
            out.push(p2);
            p0 = p1;
            p1 = p2;
        }
    }
    out.truncate(n);
    out
}

/// `ψ(q)` of one state.
pub fn evaluate(spec: &Spectrum, state: usize, q: Point2) -> f64 {
    let m = &spec.model;
    let (nx, ny) = spec.basis;
    let fx = oscillator_functions(nx, m.mass * m.omega_x / m.hbar, q.x);
    let fy = oscillator_functions(ny, m.mass * m.omega_y / m.hbar, q.y);
    let c = &spec.vectors[state];
    let mut s = 0.0;
    for (n, &px) in fx.iter().enumerate() {
        let row = &c[n * ny..(n + 1) * ny];
        s += px * row.iter().zip(&fy).map(|(a, b)| a * b).sum::<f64>();
    }
    s
}

/// Reference field on a rectangular raster mesh, normalized to unit L2.
pub fn oracle_wavefunction(
    spec: &Spectrum,
    state: usize,
    lo: Point2,
    hi: Point2,
    nx: usize,
    ny: usize,
) -> Result<FieldSolution, OracleError> {
    if state >= spec.energies.len() {
        return Err(OracleError::NoSuchState {
            index: state,
            len: spec.energies.len(),
        });
    }
    let mesh = Arc::new(mesh_rectangle(lo, hi, nx, ny));
    let values: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|&q| evaluate(spec, state, q))
        .collect();
    let mut f = FieldSolution::new(
        mesh,
        FieldKind::Psi,
        values,
        spec.energies[state],
        Provenance::Oracle,
    );
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rel_l2: f64,
    /// Sign applied to `b` before comparing.
    pub sign: f64,
    pub points: usize,
}

/// Relative L2 distance on a common raster over `[lo, hi]`, restricted to
/// points inside both meshes and accepted by `region`. Both fields are
/// unit-normalized on the raster, and `b` takes the sign of `a` at the
/// largest `|a|`.
pub fn compare_fields(
    a: &FieldSolution,
    b: &FieldSolution,
    lo: Point2,
    hi: Point2,
    n: usize,
    region: impl Fn(Point2) -> bool,
) -> Result<Comparison, FieldError> {
    let (la, lb) = (Locator::new(&a.mesh), Locator::new(&b.mesh));
    let mut pairs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let q = Point2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if !region(q) {
                continue;
            }
            if let (Some(va), Some(vb)) = (a.value_at(&la, q), b.value_at(&lb, q)) {
                pairs.push((va, vb));
            }
        }
    }
    let na = pairs.iter().map(|p| p.0 * p.0).sum::<f64>().sqrt();
    let nb = pairs.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
    if pairs.is_empty() || na == 0.0 || nb == 0.0 {
        return Err(FieldError::EmptyOverlap);
    }
    let peak = pairs
        .iter()
        .max_by(|p, q| p.0.abs().total_cmp(&q.0.abs()))
        .expect("non-empty");
    let sign = if peak.0 * peak.1 < 0.0 { -1.0 } else { 1.0 };
    let d: f64 = pairs
        .iter()
        .map(|(x, y)| (x / na - sign * y / nb).powi(2))
        .sum();
    Ok(Comparison {
        rel_l2: d.sqrt(),
        sign,
        points: pairs.len(),
    })
}
