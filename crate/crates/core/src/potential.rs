//! The Barbanis family of two-dimensional Hamiltonians,
//! `H = |p|²/2m + ½(ωx²x² + ωy²y²) + λx²y`, and its separable `λ = 0` limit.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("potential never reaches E = {energy} along the ray within radius {radius}")]
    NoCrossing { energy: f64, radius: f64 },
}

/// A point (or vector) in the configuration plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn mirror_x(self) -> Self {
        Self::new(-self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Position and momentum of the particle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Point2,
    pub p: Point2,
}

impl PhaseState {
    pub const fn new(q: Point2, p: Point2) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }
}

/// Symmetric 2×2 matrix stored as `[[xx, xy], [xy, yy]]`.
pub type Hessian = [[f64; 2]; 2];

/// Parameters of the Hamiltonian. `lambda = 0` is the separable oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub omega_x: f64,
    pub omega_y: f64,
    pub lambda: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

impl Model {
    pub fn new(
        omega_x: f64,
        omega_y: f64,
        lambda: f64,
        mass: f64,
        hbar: f64,
    ) -> Result<Self, PotentialError> {
        let model = Self {
            omega_x,
            omega_y,
            lambda,
            mass,
            hbar,
        };
        model.validate()?;
        Ok(model)
    }

    /// The benchmark parameters ωx = 1.1, ωy = 1.0, λ = −0.11 with m = ħ = 1.
    pub fn barbanis() -> Self {
        Self {
            omega_x: 1.1,
            omega_y: 1.0,
            lambda: -0.11,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn separable(omega_x: f64, omega_y: f64) -> Self {
        Self {
            omega_x,
            omega_y,
            lambda: 0.0,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn with_hbar(self, hbar: f64) -> Self {
        Self { hbar, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<(), PotentialError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.omega_x) {
            return Err(PotentialError::InvalidParameter("omega_x must be > 0"));
        }
        if !positive(self.omega_y) {
            return Err(PotentialError::InvalidParameter("omega_y must be > 0"));
        }
        if !positive(self.mass) {
            return Err(PotentialError::InvalidParameter("mass must be > 0"));
        }
        if !positive(self.hbar) {
            return Err(PotentialError::InvalidParameter("hbar must be > 0"));
        }
        if !self.lambda.is_finite() {
            return Err(PotentialError::InvalidParameter("lambda must be finite"));
        }
        Ok(())
    }

    pub fn is_separable(&self) -> bool {
        self.lambda == 0.0
    }

    pub fn max_omega(&self) -> f64 {
        self.omega_x.max(self.omega_y)
    }

    /// Shortest small-oscillation period, `2π / max(ωx, ωy)`.
    pub fn min_period(&self) -> f64 {
        std::f64::consts::TAU / self.max_omega()
    }

    pub fn potential(&self, q: Point2) -> f64 {
        let (x, y) = (q.x, q.y);
        0.5 * (self.omega_x * self.omega_x * x * x + self.omega_y * self.omega_y * y * y)
            + self.lambda * x * x * y
    }

    pub fn gradient(&self, q: Point2) -> Point2 {
        let (x, y) = (q.x, q.y);
        Point2::new(
            self.omega_x * self.omega_x * x + 2.0 * self.lambda * x * y,
            self.omega_y * self.omega_y * y + self.lambda * x * x,
        )
    }

    pub fn hessian(&self, q: Point2) -> Hessian {
        let off = 2.0 * self.lambda * q.x;
        [
            [self.omega_x * self.omega_x + 2.0 * self.lambda * q.y, off],
            [off, self.omega_y * self.omega_y],
        ]
    }

    pub fn kinetic(&self, p: Point2) -> f64 {
        0.5 * p.norm_sq() / self.mass
    }

    pub fn energy(&self, state: &PhaseState) -> f64 {
        self.kinetic(state.p) + self.potential(state.q)
    }

    /// Local classical momentum magnitude `√(2m(E − U))`, zero where forbidden.
    pub fn classical_momentum(&self, energy: f64, q: Point2) -> f64 {
        (2.0 * self.mass * (energy - self.potential(q)))
            .max(0.0)
            .sqrt()
    }

    /// Default bracketing radius for [`Model::equipotential_point`].
    pub fn equipotential_radius(&self, energy: f64) -> f64 {
        let e2 = (2.0 * energy / self.mass).sqrt();
        10.0 * (e2 / self.omega_x).max(e2 / self.omega_y)
    }

    /// First point `t·direction` (t > 0) on the equipotential `U = E`.
    pub fn equipotential_point(
        &self,
        energy: f64,
        direction: Point2,
    ) -> Result<Point2, PotentialError> {
        self.equipotential_point_within(energy, direction, self.equipotential_radius(energy))
    }

    pub fn equipotential_point_within(
        &self,
        energy: f64,
        direction: Point2,
        radius: f64,
    ) -> Result<Point2, PotentialError> {
        if !(energy > 0.0) {
            return Err(PotentialError::InvalidParameter("energy must be > 0"));
        }
        let dir = direction.normalized();
        if !dir.is_finite() {
            return Err(PotentialError::InvalidParameter(
                "direction must be non-zero",
            ));
        }
        let f = |t: f64| self.potential(dir * t) - energy;
        // March outward to the first sign change; the step resolves the
        // quadratic rise before the cubic term can turn the potential over.
        let steps = 4000;
        let dt = radius / steps as f64;
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=steps {
            let t = dt * i as f64;
            if f(t) >= 0.0 {
                hi = Some(t);
                break;
            }
            lo = t;
        }
        let hi = hi.ok_or(PotentialError::NoCrossing { energy, radius })?;
        let t = numeric::brent_root(f, lo, hi, 1e-15 * hi.max(1.0), 200)
            .map_err(|_| PotentialError::NoCrossing { energy, radius })?;
        Ok(dir * t)
    }

    /// Model with `y → −y` relabelled, which maps `λ → −λ`.
    pub fn y_mirrored(&self) -> Self {
        Self {
            lambda: -self.lambda,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn potential_values() {
        let m = Model::barbanis();
        assert_eq!(m.potential(Point2::ORIGIN), 0.0);
        assert_relative_eq!(m.potential(Point2::new(1.0, 1.0)), 0.995, epsilon = 1e-14);
        let s = Model::separable(1.1, 1.0);
        assert_relative_eq!(s.potential(Point2::new(0.0, 2.0)), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_and_hessian_values() {
        let m = Model::barbanis();
        let g = m.gradient(Point2::new(1.0, 1.0));
        assert_relative_eq!(g.x, 0.99, epsilon = 1e-14);
        assert_relative_eq!(g.y, 0.89, epsilon = 1e-14);
        assert_eq!(m.gradient(Point2::ORIGIN), Point2::ORIGIN);
        let s = Model::separable(1.1, 1.0);
        let h = s.hessian(Point2::new(0.3, -2.0));
        assert_relative_eq!(h[0][0], 1.21, epsilon = 1e-14);
        assert_eq!(h[0][1], 0.0);
        assert_eq!(h[1][0], 0.0);
        assert_relative_eq!(h[1][1], 1.0);
    }

    #[test]
    fn equipotential_examples() {
        let m = Model::barbanis();
        let e = 5.18266;
        let p = m.equipotential_point(e, Point2::new(-1.0, 0.0)).unwrap();
        assert_relative_eq!(p.x, -(e / 0.605).sqrt(), epsilon = 1e-10);
        assert_relative_eq!(p.x, -2.92684, epsilon = 1e-5);
        assert!(p.y.abs() < 1e-14);

        let s = Model::separable(1.1, 1.0);
        let p = s.equipotential_point(2.0, Point2::new(0.0, 1.0)).unwrap();
        assert_relative_eq!(p.y, 2.0, epsilon = 1e-12);

        let v = Point2::new(-2.204, -1.650);
        let p = m.equipotential_point(e, v).unwrap();
        assert!((m.potential(p) - e).abs() <= 1e-10 * e);
        assert!(
            (p.x - v.x).abs() < 2e-3 && (p.y - v.y).abs() < 2e-3,
            "{p:?}"
        );
    }

    #[test]
    fn no_crossing_when_radius_too_small() {
        let m = Model::barbanis();
        let err = m.equipotential_point_within(5.0, Point2::new(1.0, 0.0), 0.5);
        assert!(matches!(err, Err(PotentialError::NoCrossing { .. })));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Model::new(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(Model::new(1.0, 1.0, 0.0, -1.0, 1.0).is_err());
        assert!(Model::new(1.0, 1.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(Model::new(1.0, 1.0, -3.0, 1.0, 0.5).is_ok());
    }
}
