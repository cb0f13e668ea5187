//! Hamilton's equations, the Jacobi (variational) equation, and caustic
//! touch points along a trajectory.
//!
//! Time stepping uses the fourth-order position-extended Forest–Ruth-like
//! (PEFRL) splitting. Variations are propagated by the exact tangent map of
//! the same stages, so the discrete symplectic structure is inherited.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric;
use crate::potential::{Model, PhaseState, Point2};

const XI: f64 = 0.178_617_895_844_809_1;
const LAMBDA: f64 = -0.212_341_831_062_605_4;
const CHI: f64 = -0.066_264_582_669_818_49;

/// Drift and kick coefficients in execution order: d k d k d k d k d.
const DRIFTS: [f64; 5] = [XI, CHI, 1.0 - 2.0 * (CHI + XI), CHI, XI];
const KICKS: [f64; 4] = [
    0.5 * (1.0 - 2.0 * LAMBDA),
    LAMBDA,
    LAMBDA,
    0.5 * (1.0 - 2.0 * LAMBDA),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("energy drift {drift:e} at t = {t} exceeds {bound:e}; reduce dt")]
    EnergyDriftExceeded { t: f64, drift: f64, bound: f64 },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhaseState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: Model,
    pub energy: f64,
    pub dt: f64,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (self.model.energy(&s.state) - self.energy).abs())
            .fold(0.0, f64::max)
    }
}

/// A tangent vector `(δq, δp)` in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Variation {
    pub dq: Point2,
    pub dp: Point2,
}

impl Variation {
    pub const fn new(dq: Point2, dp: Point2) -> Self {
        Self { dq, dp }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.dq.x, self.dq.y, self.dp.x, self.dp.y]
    }

    /// Canonical symplectic form `δq·δp' − δp·δq'`.
    pub fn symplectic(&self, other: &Variation) -> f64 {
        self.dq.dot(other.dp) - self.dp.dot(other.dq)
    }
}

/// The two position-vanishing solutions of the Jacobi equation used for
/// caustic detection, with the full tangent-map determinant as a check.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiPair {
    pub first: Vec<Variation>,
    pub second: Vec<Variation>,
    /// `det[δq⁽¹⁾ | δq⁽²⁾]` per sample.
    pub det_series: Vec<f64>,
    /// Determinant of the 4×4 tangent map per sample; 1 for a symplectic flow.
    pub tangent_det: Vec<f64>,
}

/// Initial variations: both start with `δq = 0` and unit momentum kicks.
pub fn initial_jacobi_pair() -> [Variation; 2] {
    [
        Variation::new(Point2::ORIGIN, Point2::new(1.0, 0.0)),
        Variation::new(Point2::ORIGIN, Point2::new(0.0, 1.0)),
    ]
}

fn identity_tangent() -> [Variation; 4] {
    [
        Variation::new(Point2::ORIGIN, Point2::new(1.0, 0.0)),
        Variation::new(Point2::ORIGIN, Point2::new(0.0, 1.0)),
        Variation::new(Point2::new(1.0, 0.0), Point2::ORIGIN),
        Variation::new(Point2::new(0.0, 1.0), Point2::ORIGIN),
    ]
}

/// One PEFRL step of the phase-space flow.
pub fn pefrl_step(model: &Model, s: &mut PhaseState, dt: f64) {
    let inv_m = 1.0 / model.mass;
    for i in 0..4 {
        s.q = s.q + s.p * (DRIFTS[i] * dt * inv_m);
        s.p = s.p - model.gradient(s.q) * (KICKS[i] * dt);
    }
    s.q = s.q + s.p * (DRIFTS[4] * dt * inv_m);
}

/// One PEFRL step together with its exact tangent map applied to `vars`.
pub fn pefrl_step_tangent(model: &Model, s: &mut PhaseState, vars: &mut [Variation], dt: f64) {
    let inv_m = 1.0 / model.mass;
    for i in 0..4 {
        let c = DRIFTS[i] * dt * inv_m;
        s.q = s.q + s.p * c;
        for v in vars.iter_mut() {
            v.dq = v.dq + v.dp * c;
        }
        let d = KICKS[i] * dt;
        s.p = s.p - model.gradient(s.q) * d;
        let h = model.hessian(s.q);
        for v in vars.iter_mut() {
            let f = Point2::new(
                h[0][0] * v.dq.x + h[0][1] * v.dq.y,
                h[1][0] * v.dq.x + h[1][1] * v.dq.y,
            );
            v.dp = v.dp - f * d;
        }
    }
    let c = DRIFTS[4] * dt * inv_m;
    s.q = s.q + s.p * c;
    for v in vars.iter_mut() {
        v.dq = v.dq + v.dp * c;
    }
}

fn energy_bound(energy: f64) -> f64 {
    1e-9 * energy.abs().max(1.0)
}

/// Integrate Hamilton's equations on `[0, t_max]` with fixed step `dt`.
pub fn integrate_trajectory(
    model: &Model,
    q0: Point2,
    p0: Point2,
    t_max: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::InvalidInput("dt must be positive"));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(DynamicsError::InvalidInput("t_max must be non-negative"));
    }
    let mut state = PhaseState::new(q0, p0);
    if !state.is_finite() {
        return Err(DynamicsError::InvalidInput("initial state must be finite"));
    }
    let energy = model.energy(&state);
    let bound = energy_bound(energy);
    let steps = (t_max / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(Sample { t: 0.0, state });
    for i in 1..=steps {
        pefrl_step(model, &mut state, dt);
        let t = i as f64 * dt;
        if !state.is_finite() {
            return Err(DynamicsError::NonFinite(t));
        }
        let drift = (model.energy(&state) - energy).abs();
        if drift > bound {
            return Err(DynamicsError::EnergyDriftExceeded { t, drift, bound });
        }
        samples.push(Sample { t, state });
    }
    Ok(Trajectory {
        model: *model,
        energy,
        dt,
        samples,
    })
}

/// Propagate the Jacobi pair (and the full tangent map) along `traj`.
pub fn integrate_jacobi(traj: &Trajectory) -> Result<JacobiPair, DynamicsError> {
    let n = traj.samples.len();
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut det_series = Vec::with_capacity(n);
    let mut tangent_det = Vec::with_capacity(n);
    let mut vars = identity_tangent();
    for (i, sample) in traj.samples.iter().enumerate() {
        if i > 0 {
            let mut s = traj.samples[i - 1].state;
            let dt = sample.t - traj.samples[i - 1].t;
            pefrl_step_tangent(&traj.model, &mut s, &mut vars, dt);
            if !vars.iter().all(|v| v.dq.is_finite() && v.dp.is_finite()) {
                return Err(DynamicsError::NonFinite(sample.t));
            }
        }
        first.push(vars[0]);
        second.push(vars[1]);
        det_series.push(vars[0].dq.cross(vars[1].dq));
        tangent_det.push(det4(&vars));
    }
    Ok(JacobiPair {
        first,
        second,
        det_series,
        tangent_det,
    })
}

fn det4(vars: &[Variation; 4]) -> f64 {
    let cols: Vec<[f64; 4]> = vars.iter().map(Variation::as_array).collect();
    let mut m = [[0.0; 4]; 4];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..4 {
            m[i][j] = c[i];
        }
    }
    let mut det = 1.0;
    for k in 0..4 {
        let piv = (k..4)
            .max_by(|&a, &b| m[a][k].abs().total_cmp(&m[b][k].abs()))
            .unwrap();
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in k + 1..4 {
            let f = m[i][k] / m[k][k];
            for j in k..4 {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    det
}

/// A point where the trajectory touches the envelope of its family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausticPoint {
    pub position: Point2,
    pub momentum: Point2,
    pub t: f64,
    pub arc_hint: Option<usize>,
}

/// State at both ends of one integration step, enough for Hermite dense output.
#[derive(Debug, Clone, Copy)]
pub struct StepEnds {
    pub t0: f64,
    pub t1: f64,
    pub s0: PhaseState,
    pub s1: PhaseState,
    pub v0: [Variation; 2],
    pub v1: [Variation; 2],
}

impl StepEnds {
    fn det_at(&self, model: &Model, tau: f64) -> f64 {
        let h = self.t1 - self.t0;
        let im = 1.0 / model.mass;
        let dq = |k: usize| {
            let (a, b) = (self.v0[k], self.v1[k]);
            Point2::new(
                numeric::hermite(tau, h, a.dq.x, a.dp.x * im, b.dq.x, b.dp.x * im),
                numeric::hermite(tau, h, a.dq.y, a.dp.y * im, b.dq.y, b.dp.y * im),
            )
        };
        dq(0).cross(dq(1))
    }

    fn state_at(&self, model: &Model, tau: f64) -> PhaseState {
        let h = self.t1 - self.t0;
        let im = 1.0 / model.mass;
        let (a, b) = (self.s0, self.s1);
        let q = Point2::new(
            numeric::hermite(tau, h, a.q.x, a.p.x * im, b.q.x, b.p.x * im),
            numeric::hermite(tau, h, a.q.y, a.p.y * im, b.q.y, b.p.y * im),
        );
        let (fa, fb) = (-model.gradient(a.q), -model.gradient(b.q));
        let p = Point2::new(
            numeric::hermite(tau, h, a.p.x, fa.x, b.p.x, fb.x),
            numeric::hermite(tau, h, a.p.y, fa.y, b.p.y, fb.y),
        );
        PhaseState::new(q, p)
    }

    /// Refine a sign change of the Jacobi determinant inside this step.
    pub fn refine(&self, model: &Model) -> Option<CausticPoint> {
        let d0 = self.v0[0].dq.cross(self.v0[1].dq);
        let d1 = self.v1[0].dq.cross(self.v1[1].dq);
        if d0 == 0.0 || d1 == 0.0 || d0.signum() == d1.signum() {
            return None;
        }
        let h = self.t1 - self.t0;
        let tau = numeric::brent_root_with(
            &mut |tau| self.det_at(model, tau),
            0.0,
            h,
            d0,
            d1,
            1e-15 * h,
            200,
        )
        .ok()?;
        let s = self.state_at(model, tau);
        Some(CausticPoint {
            position: s.q,
            momentum: s.p,
            t: self.t0 + tau,
            arc_hint: None,
        })
    }
}

/// Sign changes of the determinant series, refined on the dense output.
pub fn detect_caustic_points(traj: &Trajectory, jacobi: &JacobiPair) -> Vec<CausticPoint> {
    let mut out = Vec::new();
    for i in 1..traj.samples.len() {
        let (a, b) = (&traj.samples[i - 1], &traj.samples[i]);
        let ends = StepEnds {
            t0: a.t,
            t1: b.t,
            s0: a.state,
            s1: b.state,
            v0: [jacobi.first[i - 1], jacobi.second[i - 1]],
            v1: [jacobi.first[i], jacobi.second[i]],
        };
        if let Some(p) = ends.refine(&traj.model) {
            out.push(p);
        }
    }
    out
}

/// Streaming integrator of the trajectory and the Jacobi pair that emits
/// caustic points without storing the orbit.
#[derive(Debug, Clone)]
pub struct CausticScanner {
    model: Model,
    dt: f64,
    energy: f64,
    step: u64,
    state: PhaseState,
    vars: [Variation; 2],
}

impl CausticScanner {
    pub fn new(model: &Model, q0: Point2, p0: Point2, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(DynamicsError::InvalidInput("dt must be positive"));
        }
        let state = PhaseState::new(q0, p0);
        if !state.is_finite() {
            return Err(DynamicsError::InvalidInput("initial state must be finite"));
        }
        Ok(Self {
            model: *model,
            dt,
            energy: model.energy(&state),
            step: 0,
            state,
            vars: initial_jacobi_pair(),
        })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn state(&self) -> PhaseState {
        self.state
    }

    /// Advance until `t_end`, appending refined caustic points to `out`.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        out: &mut Vec<CausticPoint>,
    ) -> Result<(), DynamicsError> {
        let bound = energy_bound(self.energy);
        while self.time() + 0.5 * self.dt < t_end {
            let t0 = self.time();
            let (s0, v0) = (self.state, self.vars);
            pefrl_step_tangent(&self.model, &mut self.state, &mut self.vars, self.dt);
            self.step += 1;
            let t1 = self.time();
            if !self.state.is_finite() {
                return Err(DynamicsError::NonFinite(t1));
            }
            let drift = (self.model.energy(&self.state) - self.energy).abs();
            if drift > bound {
                return Err(DynamicsError::EnergyDriftExceeded {
                    t: t1,
                    drift,
                    bound,
                });
            }
            let ends = StepEnds {
                t0,
                t1,
                s0,
                s1: self.state,
                v0,
                v1: self.vars,
            };
            if let Some(p) = ends.refine(&self.model) {
                out.push(p);
            }
        }
        Ok(())
    }
}

/// Default step `T_min / 2000`.
pub fn default_dt(model: &Model) -> f64 {
    model.min_period() / 2000.0
}

/// Default horizon `400 T_min`.
pub fn default_t_max(model: &Model) -> f64 {
    400.0 * model.min_period()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn separable_oscillator_is_exact() {
        let m = Model::separable(1.1, 1.0);
        let a = 1.7;
        let dt = default_dt(&m);
        let t_max = 10.0 * std::f64::consts::TAU / 1.1;
        let traj =
            integrate_trajectory(&m, Point2::new(a, 0.0), Point2::ORIGIN, t_max, dt).unwrap();
        for s in &traj.samples {
            assert!(
                (s.state.q.x - a * (1.1 * s.t).cos()).abs() <= 1e-8,
                "t = {}",
                s.t
            );
            assert_eq!(s.state.q.y, 0.0);
        }
    }

    #[test]
    fn jacobi_pair_matches_separable_closed_form() {
        let m = Model::separable(1.1, 1.0);
        let dt = default_dt(&m);
        let traj =
            integrate_trajectory(&m, Point2::new(1.0, 0.5), Point2::ORIGIN, 20.0, dt).unwrap();
        let jac = integrate_jacobi(&traj).unwrap();
        for (s, v) in traj.samples.iter().zip(&jac.first) {
            assert!((v.dq.x - (1.1 * s.t).sin() / 1.1).abs() < 1e-10);
        }
        for d in &jac.tangent_det {
            assert!((d - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn four_by_four_determinant() {
        let d = det4(&identity_tangent());
        assert_relative_eq!(d.abs(), 1.0);
    }

    #[test]
    fn straight_free_segment_has_no_caustic() {
        // Vanishing frequencies are not allowed, so use a slow oscillator over
        // a short span where the motion is effectively free.
        let m = Model::separable(1e-3, 1e-3);
        let traj =
            integrate_trajectory(&m, Point2::ORIGIN, Point2::new(1.0, 0.3), 5.0, 1e-3).unwrap();
        let jac = integrate_jacobi(&traj).unwrap();
        assert!(detect_caustic_points(&traj, &jac).is_empty());
    }

    #[test]
    fn rejects_bad_step() {
        let m = Model::barbanis();
        assert!(integrate_trajectory(&m, Point2::ORIGIN, Point2::ORIGIN, 1.0, 0.0).is_err());
        assert!(integrate_trajectory(&m, Point2::ORIGIN, Point2::ORIGIN, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn coarse_step_trips_energy_guard() {
        let m = Model::barbanis();
        let err = integrate_trajectory(&m, Point2::new(-2.204, -1.65), Point2::ORIGIN, 50.0, 0.2);
        assert!(matches!(
            err,
            Err(DynamicsError::EnergyDriftExceeded { .. })
        ));
    }
}
