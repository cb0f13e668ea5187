//! Structured meshes from transfinite interpolation.

use super::{bounding_box, BoundaryTag, FieldError, Mesh};
use crate::caustic::{polygon_area, Caustic};
use crate::potential::{Model, Point2};

/// Caustic boundary nodes shared by the interior and exterior meshes.
///
/// `n_s` segments along the upper and lower arcs, `n_t` along the lateral
/// ones. Nodes run counter-clockwise from `v1`: lower, right, upper reversed,
/// left reversed. Corner nodes belong to the upper or lower arc.
#[derive(Debug, Clone, PartialEq)]
pub struct CausticRing {
    pub points: Vec<Point2>,
    pub tags: Vec<BoundaryTag>,
    pub n_s: usize,
    pub n_t: usize,
}

impl CausticRing {
    pub fn new(caustic: &Caustic, h: f64) -> Result<Self, FieldError> {
        if !(h > 0.0) {
            return Err(FieldError::MeshingFailed(format!(
                "edge length {h} must be positive"
            )));
        }
        let len = |k: usize| {
            let a = &caustic.arcs[k];
            a.arc_length(a.span[0], a.span[1])
        };
        let n_s = ((len(1).max(len(3)) / h).ceil() as usize).max(4);
        let n_t = ((len(0).max(len(2)) / h).ceil() as usize).max(4);
        let total = 2 * (n_s + n_t);
        let mut points = vec![Point2::ORIGIN; total];
        let mut tags = vec![BoundaryTag::Outer; total];
        let node = |k: usize, i: usize, n: usize| {
            let a = &caustic.arcs[k];
            let u = a.span[0] + (a.span[1] - a.span[0]) * i as f64 / n as f64;
            (a.point(u), BoundaryTag::Caustic { arc: k, u })
        };
        let mut ring = Self {
            points: vec![],
            tags: vec![],
            n_s,
            n_t,
        };
        for i in 0..=n_s {
            for (k, idx) in [(3, ring.bottom(i)), (1, ring.top(i))] {
                let (p, t) = node(k, i, n_s);
                points[idx] = p;
                tags[idx] = t;
            }
        }
        for j in 1..n_t {
            for (k, idx) in [(0, ring.left(j)), (2, ring.right(j))] {
                let (p, t) = node(k, j, n_t);
                points[idx] = p;
                tags[idx] = t;
            }
        }
        ring.points = points;
        ring.tags = tags;
        ring.check_simple()?;
        Ok(ring)
    }

    pub fn len(&self) -> usize {
        2 * (self.n_s + self.n_t)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lower arc, `v1 → v2`, `i ∈ 0..=n_s`.
    pub fn bottom(&self, i: usize) -> usize {
        i
    }

    /// Right arc, `v2 → v3`, `j ∈ 0..=n_t`.
    pub fn right(&self, j: usize) -> usize {
        self.n_s + j
    }

    /// Upper arc, `v4 → v3`, `i ∈ 0..=n_s`.
    pub fn top(&self, i: usize) -> usize {
        2 * self.n_s + self.n_t - i
    }

    /// Left arc, `v1 → v4`, `j ∈ 0..=n_t`.
    pub fn left(&self, j: usize) -> usize {
        (2 * self.n_s + 2 * self.n_t - j) % self.len()
    }

    fn check_simple(&self) -> Result<(), FieldError> {
        let p = &self.points;
        let n = p.len();
        if polygon_area(p) <= 0.0 {
            return Err(FieldError::MeshingFailed(
                "caustic boundary is not counter-clockwise".into(),
            ));
        }
        let cross = |a: Point2, b: Point2, c: Point2, d: Point2| {
            let o = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
            o(a, b, c) * o(a, b, d) < 0.0 && o(c, d, a) * o(c, d, b) < 0.0
        };
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                    return Err(FieldError::MeshingFailed(format!(
                        "caustic boundary intersects itself between segments {i} and {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Coons patch on an `(n_a + 1) × (n_b + 1)` grid given the four sides.
fn coons(
    bottom: &[Point2],
    top: &[Point2],
    left: &[Point2],
    right: &[Point2],
    i: usize,
    j: usize,
) -> Point2 {
    let (na, nb) = (bottom.len() - 1, left.len() - 1);
    let s = i as f64 / na as f64;
    let t = j as f64 / nb as f64;
    let (p00, p10, p01, p11) = (bottom[0], bottom[na], top[0], top[na]);
    bottom[i] * (1.0 - t) + top[i] * t + left[j] * (1.0 - s) + right[j] * s
        - (p00 * ((1.0 - s) * (1.0 - t))
            + p10 * (s * (1.0 - t))
            + p01 * ((1.0 - s) * t)
            + p11 * (s * t))
}

struct Builder {
    vertices: Vec<Point2>,
    tags: Vec<Option<BoundaryTag>>,
    triangles: Vec<[usize; 3]>,
}

impl Builder {
    fn from_ring(ring: &CausticRing) -> Self {
        Self {
            vertices: ring.points.clone(),
            tags: ring.tags.iter().map(|t| Some(*t)).collect(),
            triangles: vec![],
        }
    }

    fn push(&mut self, p: Point2, tag: Option<BoundaryTag>) -> usize {
        self.vertices.push(p);
        self.tags.push(tag);
        self.vertices.len() - 1
    }

    /// Split the quad `a b c d` (counter-clockwise or clockwise) along its
    /// shorter diagonal.
    fn quad(&mut self, q: [usize; 4]) {
        let p = q.map(|i| self.vertices[i]);
        let tris = if p[0].dist(p[2]) <= p[1].dist(p[3]) {
            [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
        } else {
            [[q[0], q[1], q[3]], [q[1], q[2], q[3]]]
        };
        for mut t in tris {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            if (b - a).cross(c - a) < 0.0 {
                t.swap(1, 2);
            }
            self.triangles.push(t);
        }
    }

    fn finish(self, h: f64, ring_len: usize) -> Result<Mesh, FieldError> {
        let mesh = Mesh {
            vertices: self.vertices,
            triangles: self.triangles,
            boundary_tags: self.tags,
            h,
            ring_len,
        };
        let tiny = 1e-12 * h * h;
        if let Some(t) = (0..mesh.triangles.len()).find(|&t| !(mesh.signed_area(t) > tiny)) {
            return Err(FieldError::MeshingFailed(format!(
                "degenerate or inverted triangle {t}"
            )));
        }
        Ok(mesh)
    }
}

/// Interior of the caustic.
pub fn mesh_interior(caustic: &Caustic, h: f64) -> Result<Mesh, FieldError> {
    let ring = CausticRing::new(caustic, h)?;
    mesh_interior_on(&ring, h)
}

pub fn mesh_interior_on(ring: &CausticRing, h: f64) -> Result<Mesh, FieldError> {
    let (ns, nt) = (ring.n_s, ring.n_t);
    let side = |f: &dyn Fn(usize) -> usize, n: usize| {
        (0..=n).map(|i| ring.points[f(i)]).collect::<Vec<_>>()
    };
    let bottom = side(&|i| ring.bottom(i), ns);
    let top = side(&|i| ring.top(i), ns);
    let left = side(&|j| ring.left(j), nt);
    let right = side(&|j| ring.right(j), nt);
    let mut b = Builder::from_ring(ring);
    let mut grid = vec![0usize; (ns + 1) * (nt + 1)];
    for j in 0..=nt {
        for i in 0..=ns {
            grid[j * (ns + 1) + i] = if j == 0 {
                ring.bottom(i)
            } else if j == nt {
                ring.top(i)
            } else if i == 0 {
                ring.left(j)
            } else if i == ns {
                ring.right(j)
            } else {
                b.push(coons(&bottom, &top, &left, &right, i, j), None)
            };
        }
    }
    for j in 0..nt {
        for i in 0..ns {
            let g = |i: usize, j: usize| grid[j * (ns + 1) + i];
            b.quad([g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)]);
        }
    }
    b.finish(h, ring.len())
}

/// Outer rectangle `[lo, hi]` on whose edges `U ≥ E + margin·ħ·ω_max`.
pub fn outer_box(
    model: &Model,
    caustic: &Caustic,
    margin: f64,
) -> Result<(Point2, Point2), FieldError> {
    let target = caustic.energy + margin * model.hbar * model.max_omega();
    let (mut lo, mut hi) = bounding_box(&caustic.polygon(64));
    let size = (hi.x - lo.x).max(hi.y - lo.y);
    let pad = 0.25 * size;
    lo = lo - Point2::new(pad, pad);
    hi = hi + Point2::new(pad, pad);
    let step = 0.02 * size;
    let edge_min = |a: Point2, b: Point2| {
        (0..=512)
            .map(|i| model.potential(a + (b - a) * (i as f64 / 512.0)))
            .fold(f64::INFINITY, f64::min)
    };
    for _ in 0..2000 {
        let mut done = true;
        if edge_min(Point2::new(lo.x, lo.y), Point2::new(hi.x, lo.y)) < target {
            lo.y -= step;
            done = false;
        }
        if edge_min(Point2::new(lo.x, hi.y), Point2::new(hi.x, hi.y)) < target {
            hi.y += step;
            done = false;
        }
        if edge_min(Point2::new(lo.x, lo.y), Point2::new(lo.x, hi.y)) < target {
            lo.x -= step;
            done = false;
        }
        if edge_min(Point2::new(hi.x, lo.y), Point2::new(hi.x, hi.y)) < target {
            hi.x += step;
            done = false;
        }
        if done {
            return Ok((lo, hi));
        }
    }
    Err(FieldError::MeshingFailed(format!(
        "no rectangle reaches U = {target} on its edges"
    )))
}

/// Annulus between the caustic and the outer rectangle from [`outer_box`].
pub fn mesh_exterior(
    model: &Model,
    caustic: &Caustic,
    margin: f64,
    h: f64,
) -> Result<Mesh, FieldError> {
    let ring = CausticRing::new(caustic, h)?;
    let (lo, hi) = outer_box(model, caustic, margin)?;
    mesh_exterior_on(&ring, lo, hi, h)
}

pub fn mesh_exterior_on(
    ring: &CausticRing,
    lo: Point2,
    hi: Point2,
    h: f64,
) -> Result<Mesh, FieldError> {
    let (ns, nt) = (ring.n_s, ring.n_t);
    let inside = |p: Point2| p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y;
    if !ring.points.iter().all(|&p| inside(p)) {
        return Err(FieldError::MeshingFailed(
            "outer rectangle does not contain the caustic".into(),
        ));
    }
    // Box corners next to v1..v4.
    let corners = [lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
    let ring_corner = [ring.bottom(0), ring.bottom(ns), ring.top(ns), ring.top(0)];
    let nr = (0..4)
        .map(|m| ring.points[ring_corner[m]].dist(corners[m]))
        .fold(0.0, f64::max);
    let nr = ((nr / h).ceil() as usize).max(2);
    let mut b = Builder::from_ring(ring);
    // Radial lines: index 0 is the caustic corner node.
    let mut radial = [vec![], vec![], vec![], vec![]];
    for m in 0..4 {
        let a = ring.points[ring_corner[m]];
        radial[m].push(ring_corner[m]);
        for r in 1..=nr {
            let tag = (r == nr).then_some(BoundaryTag::Outer);
            radial[m].push(b.push(a + (corners[m] - a) * (r as f64 / nr as f64), tag));
        }
    }
    // (inner side, start corner, end corner, segments)
    let patches: [(Box<dyn Fn(usize) -> usize>, usize, usize, usize); 4] = [
        (Box::new(|i| ring.bottom(i)), 0, 1, ns),
        (Box::new(|j| ring.right(j)), 1, 2, nt),
        (Box::new(|i| ring.top(i)), 3, 2, ns),
        (Box::new(|j| ring.left(j)), 0, 3, nt),
    ];
    for (inner, m0, m1, n) in patches.iter() {
        let (m0, m1, n) = (*m0, *m1, *n);
        let inner_pts: Vec<Point2> = (0..=n).map(|i| ring.points[inner(i)]).collect();
        let outer_pts: Vec<Point2> = (0..=n)
            .map(|i| corners[m0] + (corners[m1] - corners[m0]) * (i as f64 / n as f64))
            .collect();
        let side0: Vec<Point2> = radial[m0].iter().map(|&v| b.vertices[v]).collect();
        let side1: Vec<Point2> = radial[m1].iter().map(|&v| b.vertices[v]).collect();
        let mut grid = vec![0usize; (n + 1) * (nr + 1)];
        for r in 0..=nr {
            for i in 0..=n {
                grid[r * (n + 1) + i] = if r == 0 {
                    inner(i)
                } else if i == 0 {
                    radial[m0][r]
                } else if i == n {
                    radial[m1][r]
                } else {
                    let p = coons(&inner_pts, &outer_pts, &side0, &side1, i, r);
                    b.push(p, (r == nr).then_some(BoundaryTag::Outer))
                };
            }
        }
        for r in 0..nr {
            for i in 0..n {
                let g = |i: usize, r: usize| grid[r * (n + 1) + i];
                b.quad([g(i, r), g(i + 1, r), g(i + 1, r + 1), g(i, r + 1)]);
            }
        }
    }
    b.finish(h, ring.len())
}

/// Union of an interior and an exterior mesh built on the same ring.
/// Exterior vertex `v ≥ ring_len` maps to `v + interior_len − ring_len`.
pub fn union_mesh(interior: &Mesh, exterior: &Mesh) -> Mesh {
    let r = interior.ring_len;
    let shift = interior.vertices.len() - r;
    let map = |v: usize| if v < r { v } else { v + shift };
    let mut vertices = interior.vertices.clone();
    vertices.extend_from_slice(&exterior.vertices[r..]);
    let mut tags = interior.boundary_tags.clone();
    tags.extend_from_slice(&exterior.boundary_tags[r..]);
    let mut triangles = interior.triangles.clone();
    triangles.extend(exterior.triangles.iter().map(|t| t.map(map)));
    Mesh {
        vertices,
        triangles,
        boundary_tags: tags,
        h: interior.h,
        ring_len: r,
    }
}

/// Interior mesh of an axis-aligned rectangle with all edges tagged outer.
pub fn mesh_rectangle(lo: Point2, hi: Point2, nx: usize, ny: usize) -> Mesh {
    let mut b = Builder {
        vertices: vec![],
        tags: vec![],
        triangles: vec![],
    };
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / nx as f64,
                lo.y + (hi.y - lo.y) * j as f64 / ny as f64,
            );
            let edge = i == 0 || j == 0 || i == nx || j == ny;
            b.push(p, edge.then_some(BoundaryTag::Outer));
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let g = |i: usize, j: usize| j * (nx + 1) + i;
            b.quad([g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1)]);
        }
    }
    let h = ((hi.x - lo.x) / nx as f64).max((hi.y - lo.y) / ny as f64);
    Mesh {
        vertices: b.vertices,
        triangles: b.triangles,
        boundary_tags: b.tags,
        h,
        ring_len: 0,
    }
}
