//! Schrödinger equation on an arc, integrated inward from both tails.

use super::{count_nodes, ArcError, ArcGrid, ArcOptions, ArcWave, Method};
use crate::caustic::CausticArc;
use crate::potential::Model;

/// Continuous phase count `N(E)` from Prüfer angles integrated from both
/// tails to the matching point. `N` increases with `E` and equals the node
/// count at a bound state.
pub(crate) fn phase_count(grid: &ArcGrid) -> f64 {
    let s = grid.scale;
    let mut tl = s.atan2(grid.kappa(0));
    for i in 0..grid.i_mid {
        tl = grid.step_phase(i, i + 1, tl);
    }
    let last = grid.last();
    let mut tr = s.atan2(-grid.kappa(last));
    for i in (grid.i_mid + 1..=last).rev() {
        tr = grid.step_phase(i, i - 1, tr);
    }
    (tl - tr) / std::f64::consts::PI
}

/// Phase count of the arc problem at energy `energy`.
pub fn arc_phase_count(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    opts: &ArcOptions,
) -> Result<f64, ArcError> {
    let grid = ArcGrid::new(model, arc, energy, opts);
    let n = phase_count(&grid);
    if n.is_finite() {
        Ok(n)
    } else {
        Err(ArcError::StiffnessFailure { arc: arc.k })
    }
}

fn fractional(n: f64) -> f64 {
    (n - n.round()).abs()
}

/// Solve the arc Schrödinger equation at `energy`. The result is normalized
/// to unit `∫ψ² ds` over the grid, with `ψ(u_f) ≥ 0`.
pub fn solve_arc_se(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    opts: &ArcOptions,
) -> Result<ArcWave, ArcError> {
    let grid = ArcGrid::new(model, arc, energy, opts);
    let n = grid.u.len();
    let last = n - 1;
    let mut psi = vec![0.0; n];
    let mut chi = vec![0.0; n];
    psi[0] = 1.0;
    chi[0] = grid.kappa(0);
    for i in 0..grid.i_mid {
        let (p, c) = grid.step_linear(i, i + 1, psi[i], chi[i]);
        psi[i + 1] = p;
        chi[i + 1] = c;
    }
    let (pl, cl) = (psi[grid.i_mid], chi[grid.i_mid]);
    let mut rp = vec![0.0; n];
    let mut rc = vec![0.0; n];
    rp[last] = 1.0;
    rc[last] = -grid.kappa(last);
    for i in (grid.i_mid + 1..=last).rev() {
        let (p, c) = grid.step_linear(i, i - 1, rp[i], rc[i]);
        rp[i - 1] = p;
        rc[i - 1] = c;
    }
    let (pr, cr) = (rp[grid.i_mid], rc[grid.i_mid]);
    let s2 = grid.scale * grid.scale;
    let fac = (pl * pr + cl * cr / s2) / (pr * pr + cr * cr / s2);
    for i in grid.i_mid + 1..=last {
        psi[i] = fac * rp[i];
        chi[i] = fac * rc[i];
    }
    if !psi.iter().chain(&chi).all(|v| v.is_finite()) || !fac.is_finite() {
        return Err(ArcError::StiffnessFailure { arc: arc.k });
    }
    let s = grid.arc_length();
    let norm: f64 =
        crate::numeric::trapezoid(&s, &psi.iter().map(|p| p * p).collect::<Vec<_>>()).sqrt();
    let sign = if psi[grid.i_end] < 0.0 { -1.0 } else { 1.0 };
    let k = sign / norm;
    for v in psi.iter_mut().chain(chi.iter_mut()) {
        *v *= k;
    }
    let count = phase_count(&grid);
    if !count.is_finite() {
        return Err(ArcError::StiffnessFailure { arc: arc.k });
    }
    let nodes = count_nodes(&psi[grid.i_start..=grid.i_end]);
    Ok(ArcWave {
        arc: arc.k - 1,
        method: Method::Se,
        energy,
        hbar: model.hbar,
        u: grid.u,
        psi,
        dpsi_ds: chi,
        vertex_index: [grid.i_start, grid.i_end],
        nodes,
        phase_count: count,
        regularity: fractional(count),
        x: vec![],
        y: vec![],
        a: vec![],
        c: 1.0,
        p_cl: vec![],
        x_cl: vec![],
    })
}
