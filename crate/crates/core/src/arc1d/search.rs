//! Search for the energy and start vertex at which all four arc problems are
//! regular with the requested node counts.
//!
//! The vertex is the point of the equipotential in direction `θ` from the
//! potential minimum. For a candidate `(E, θ)` the caustic is harvested from
//! the trajectory started at rest at that vertex and each arc yields a
//! continuous count `N_k` (phase count for SE/QHJE, action quantum number
//! for WKB). With `D_x` the mean defect of the upper and lower arcs and `D_y`
//! that of the lateral arcs, `θ` is tuned so `D_x = D_y` and `E` so that
//! their sum vanishes.

use serde::{Deserialize, Serialize};

use super::qhje::{qhje_phase_count, solve_arc_qhje};
use super::se::{arc_phase_count, solve_arc_se};
use super::wkb::{wkb_arc, wkb_quantum_number};
use super::{match_arc_constants, ArcError, ArcOptions, ArcWave, Method};
use crate::caustic::{harvest_caustic, Caustic, HarvestOptions, ARC_VERTICES};
use crate::numeric;
use crate::potential::{Model, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub method: Method,
    /// `(n1, n2)`: nodes along x (upper/lower arcs) and along y (lateral arcs).
    pub target: (usize, usize),
    pub energy_range: [f64; 2],
    /// Range of the vertex direction angle, radians.
    pub theta_range: [f64; 2],
    /// Samples of the first coarse scan over `θ`.
    pub theta_samples: usize,
    pub energy_tol: f64,
    pub theta_tol: f64,
    pub regularity_tol: f64,
    pub max_iter: usize,
    pub arc: ArcOptions,
    /// Harvest settings; `None` uses the model defaults.
    pub harvest: Option<HarvestOptions>,
}

impl SearchOptions {
    pub fn new(method: Method, target: (usize, usize), energy_range: [f64; 2]) -> Self {
        Self {
            method,
            target,
            energy_range,
            theta_range: [-170f64.to_radians(), -100f64.to_radians()],
            theta_samples: 8,
            energy_tol: 1e-7,
            theta_tol: 1e-9,
            regularity_tol: 1e-3,
            max_iter: 60,
            arc: ArcOptions::default(),
            harvest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenstate {
    pub energy: f64,
    pub theta: f64,
    pub vertex: Point2,
    pub method: Method,
    pub caustic: Caustic,
    /// Arc solutions indexed by arc, matched at the shared vertices.
    pub waves: Vec<ArcWave>,
    /// Continuous counts `N_k` per arc.
    pub counts: [f64; 4],
    /// `[D_x, D_y]`: mean defects of the upper/lower and the lateral pair.
    pub pair_defects: [f64; 2],
    /// Largest single-arc distance `|N_k − n_k|`.
    pub max_regularity: f64,
    /// Relative mismatch at the vertex opposite the start vertex.
    pub opposite_mismatch: f64,
    pub evaluations: usize,
}

/// Defects of one candidate.
#[derive(Debug, Clone, Copy)]
struct Probe {
    dx: f64,
    dy: f64,
}

struct Searcher<'a> {
    model: &'a Model,
    opts: &'a SearchOptions,
    harvest: HarvestOptions,
    evaluations: usize,
    best: f64,
}

impl Searcher<'_> {
    fn caustic(&mut self, energy: f64, theta: f64) -> Result<Caustic, ArcError> {
        self.evaluations += 1;
        let vertex = self
            .model
            .equipotential_point(energy, Point2::from_angle(theta))?;
        Ok(harvest_caustic(self.model, vertex, &self.harvest)?.caustic)
    }

    fn counts(&self, caustic: &Caustic) -> Result<[f64; 4], ArcError> {
        let mut n = [0.0; 4];
        for (k, arc) in caustic.arcs.iter().enumerate() {
            n[k] = match self.opts.method {
                Method::Se => arc_phase_count(self.model, arc, caustic.energy, &self.opts.arc)?,
                Method::Wkb => wkb_quantum_number(self.model, arc, caustic.energy)?,
                Method::Qhje => qhje_phase_count(self.model, arc, caustic.energy, &self.opts.arc)?,
            };
        }
        Ok(n)
    }

    fn probe(&mut self, energy: f64, theta: f64) -> Option<Probe> {
        let c = self.caustic(energy, theta).ok()?;
        let n = self.counts(&c).ok()?;
        let (n1, n2) = (self.opts.target.0 as f64, self.opts.target.1 as f64);
        let p = Probe {
            dx: 0.5 * (n[1] + n[3]) - n1,
            dy: 0.5 * (n[0] + n[2]) - n2,
        };
        let r = p.dx.abs().max(p.dy.abs());
        if r < self.best {
            self.best = r;
        }
        Some(p)
    }

    /// `θ` with `D_x = D_y` at fixed energy, near `guess` when given.
    fn balance(&mut self, energy: f64, guess: Option<f64>) -> Option<(f64, Probe)> {
        let [lo, hi] = self.opts.theta_range;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut bracket = None;
        if let Some(g) = guess {
            let fg = self.probe(energy, g).map(|p| p.dx - p.dy)?;
            samples.push((g, fg));
            let mut step = 0.02;
            while bracket.is_none() && step < hi - lo {
                for t in [g - step, g + step] {
                    if t < lo || t > hi {
                        continue;
                    }
                    if let Some(p) = self.probe(energy, t) {
                        let f = p.dx - p.dy;
                        samples.push((t, f));
                        if f.signum() != fg.signum() {
                            bracket = Some(if t < g { (t, g, f, fg) } else { (g, t, fg, f) });
                            break;
                        }
                    }
                }
                step *= 2.0;
            }
        } else {
            for t in numeric::linspace(lo, hi, self.opts.theta_samples.max(3)) {
                if let Some(p) = self.probe(energy, t) {
                    let f = p.dx - p.dy;
                    if let Some(&(tp, fp)) = samples.last() {
                        if bracket.is_none() && f.signum() != fp.signum() {
                            bracket = Some((tp, t, fp, f));
                        }
                    }
                    samples.push((t, f));
                }
            }
        }
        let theta = match bracket {
            Some((a, b, fa, fb)) => {
                let (tol, iters) = (self.opts.theta_tol, self.opts.max_iter);
                let mut f = |t: f64| {
                    self.probe(energy, t)
                        .map(|p| p.dx - p.dy)
                        .unwrap_or(f64::NAN)
                };
                numeric::brent_root_with(&mut f, a, b, fa, fb, tol, iters).unwrap_or(0.5 * (a + b))
            }
            None => {
                samples
                    .iter()
                    .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?
                    .0
            }
        };
        let p = self.probe(energy, theta)?;
        Some((theta, p))
    }
}

/// Nested search over energy and vertex angle.
pub fn search_eigenstate(model: &Model, opts: &SearchOptions) -> Result<Eigenstate, ArcError> {
    let harvest = opts
        .harvest
        .unwrap_or_else(|| HarvestOptions::for_model(model));
    let mut s = Searcher {
        model,
        opts,
        harvest,
        evaluations: 0,
        best: f64::INFINITY,
    };
    let [e_lo, e_hi] = opts.energy_range;
    let not_converged = |reason: String, best: f64| ArcError::NotConverged {
        reason,
        best_residual: best,
    };
    if !(e_lo > 0.0 && e_hi > e_lo) {
        return Err(not_converged(
            format!("invalid energy range [{e_lo}, {e_hi}]"),
            f64::NAN,
        ));
    }
    let lo = s.balance(e_lo, None);
    let hi = s.balance(e_hi, lo.map(|l| l.0));
    let (Some((t_lo, p_lo)), Some((t_hi, p_hi))) = (lo, hi) else {
        return Err(not_converged(
            "no caustic at the ends of the energy range".into(),
            s.best,
        ));
    };
    let (f_lo, f_hi) = (p_lo.dx + p_lo.dy, p_hi.dx + p_hi.dy);
    if f_lo.signum() == f_hi.signum() {
        return Err(not_converged(
            format!("energy range [{e_lo}, {e_hi}] does not bracket the target state"),
            f_lo.abs().min(f_hi.abs()),
        ));
    }
    let mut theta = if f_lo.abs() < f_hi.abs() { t_lo } else { t_hi };
    let mut f = |e: f64| match s.balance(e, Some(theta)) {
        Some((t, p)) => {
            theta = t;
            p.dx + p.dy
        }
        None => f64::NAN,
    };
    let energy = numeric::brent_root_with(
        &mut f,
        e_lo,
        e_hi,
        f_lo,
        f_hi,
        opts.energy_tol,
        opts.max_iter,
    )
    .map_err(|e| not_converged(format!("energy iteration failed: {e}"), f64::NAN))?;
    let (theta, _) = s
        .balance(energy, Some(theta))
        .ok_or_else(|| not_converged("caustic lost at the converged energy".into(), s.best))?;
    finish(&mut s, energy, theta)
}

fn finish(s: &mut Searcher, energy: f64, theta: f64) -> Result<Eigenstate, ArcError> {
    let model = s.model;
    let opts = s.opts;
    let caustic = s.caustic(energy, theta)?;
    let counts = s.counts(&caustic)?;
    let target = [opts.target.1, opts.target.0, opts.target.1, opts.target.0];
    let max_regularity = (0..4)
        .map(|k| (counts[k] - target[k] as f64).abs())
        .fold(0.0, f64::max);
    let pair_defects = [
        0.5 * (counts[1] + counts[3]) - target[1] as f64,
        0.5 * (counts[0] + counts[2]) - target[0] as f64,
    ];
    let defect = pair_defects[0].abs().max(pair_defects[1].abs());
    let mut waves = Vec::with_capacity(4);
    for arc in &caustic.arcs {
        let w = match opts.method {
            Method::Qhje => solve_arc_qhje(model, arc, energy, &opts.arc)?,
            _ => {
                let mut w = solve_arc_se(model, arc, energy, &opts.arc)?;
                w.method = opts.method;
                w
            }
        };
        waves.push(w);
    }
    fill_classical_action(model, &caustic, &mut waves)?;
    let opposite_mismatch = match_arc_constants(&mut waves, &caustic.traversal, &ARC_VERTICES)?;
    let nodes_ok = match opts.method {
        Method::Wkb => (0..4).all(|k| counts[k].round() as i64 == target[k] as i64),
        _ => (0..4).all(|k| waves[k].nodes == target[k]),
    };
    if defect > opts.regularity_tol || !nodes_ok {
        return Err(ArcError::NotConverged {
            reason: format!(
                "pair defect {defect:e} (limit {:e}), nodes {:?}",
                opts.regularity_tol,
                waves.iter().map(|w| w.nodes).collect::<Vec<_>>()
            ),
            best_residual: defect,
        });
    }
    Ok(Eigenstate {
        energy,
        theta,
        vertex: caustic.vertices[caustic.start_vertex],
        method: opts.method,
        caustic,
        waves,
        counts,
        pair_defects,
        max_regularity,
        opposite_mismatch,
        evaluations: s.evaluations,
    })
}

/// Fill `p_cl` and `X_cl` on the span samples, carrying the action across
/// arcs in traversal order.
pub fn fill_classical_action(
    model: &Model,
    caustic: &Caustic,
    waves: &mut [ArcWave],
) -> Result<(), ArcError> {
    let mut final_action = [0.0; 4];
    for step in &caustic.traversal {
        let arc = &caustic.arcs[step.arc];
        let offset = step.predecessor.map_or(0.0, |p| final_action[p]);
        let wk = wkb_arc(model, arc, caustic.energy, offset, 801)?;
        final_action[step.arc] = offset + wk.total;
        let w = waves
            .iter_mut()
            .find(|w| w.arc == step.arc)
            .expect("wave per arc");
        let u: Vec<f64> = w.span_u().to_vec();
        w.p_cl = u
            .iter()
            .map(|&v| model.classical_momentum(caustic.energy, arc.point(v)))
            .collect();
        w.x_cl = u
            .iter()
            .map(|&v| numeric::interp_linear(&wk.u, &wk.x_cl, v))
            .collect();
    }
    Ok(())
}
