//! Classical momentum and action along an arc.

use serde::{Deserialize, Serialize};

use super::ArcError;
use crate::caustic::CausticArc;
use crate::numeric;
use crate::potential::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WkbArc {
    pub arc: usize,
    /// Sample parameters over the span, increasing.
    pub u: Vec<f64>,
    pub p_cl: Vec<f64>,
    /// Action measured from the arc's start vertex plus `offset`.
    pub x_cl: Vec<f64>,
    /// `∫ p_cl g du` over the whole span.
    pub total: f64,
    pub offset: f64,
    /// Continuous quantum number `total/(πħ) − ½`.
    pub quantum_number: f64,
    /// `total − πħ(n + ½)` for the nearest integer `n ≥ 0`.
    pub residual: f64,
    pub n: usize,
}

const GL_ORDER: usize = 8;

/// WKB data for one arc. `offset` is the action inherited from the
/// preceding arc in traversal order.
pub fn wkb_arc(
    model: &Model,
    arc: &CausticArc,
    energy: f64,
    offset: f64,
    samples: usize,
) -> Result<WkbArc, ArcError> {
    let [ui, uf] = arc.span;
    let len = uf - ui;
    let samples = samples.max(3);
    // u = u_i + len (1 − cos φ)/2 removes the square-root endpoints.
    let phis = numeric::linspace(0.0, std::f64::consts::PI, samples);
    let u_of = |phi: f64| ui + 0.5 * len * (1.0 - phi.cos());
    let p_of = |u: f64| model.classical_momentum(energy, arc.point(u));
    for &phi in &phis[1..samples - 1] {
        let u = u_of(phi);
        if arc.restricted_potential(model, u) > energy * (1.0 + 1e-12) {
            return Err(ArcError::ClassicallyForbidden { arc: arc.k, u });
        }
    }
    let integrand = |phi: f64| {
        let u = u_of(phi);
        p_of(u) * arc.scale_factor(u) * 0.5 * len * phi.sin()
    };
    let (gx, gw) = numeric::gauss_legendre(GL_ORDER);
    let mut acc = vec![0.0; samples];
    for i in 1..samples {
        let (a, b) = (phis[i - 1], phis[i]);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let part: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(&x, &w)| w * h * integrand(c + h * x))
            .sum();
        acc[i] = acc[i - 1] + part;
    }
    let total = acc[samples - 1];
    let u: Vec<f64> = phis.iter().map(|&p| u_of(p)).collect();
    let p_cl: Vec<f64> = u.iter().map(|&v| p_of(v)).collect();
    let x_cl: Vec<f64> = if arc.orientation >= 0 {
        acc.iter().map(|a| a + offset).collect()
    } else {
        acc.iter().map(|a| total - a + offset).collect()
    };
    let q = total / (std::f64::consts::PI * model.hbar) - 0.5;
    let n = q.round().max(0.0) as usize;
    let residual = total - std::f64::consts::PI * model.hbar * (n as f64 + 0.5);
    Ok(WkbArc {
        arc: arc.k - 1,
        u,
        p_cl,
        x_cl,
        total,
        offset,
        quantum_number: q,
        residual,
        n,
    })
}

/// Continuous WKB quantum number of one arc.
pub fn wkb_quantum_number(model: &Model, arc: &CausticArc, energy: f64) -> Result<f64, ArcError> {
    Ok(wkb_arc(model, arc, energy, 0.0, 65)?.quantum_number)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caustic::{Axis, Chebyshev};

    #[test]
    fn harmonic_action_is_exact() {
        let m = Model::separable(1.1, 1.0);
        let ya = 1.3;
        let ex: f64 = 1.1 * 2.5;
        let xa = (2.0 * ex).sqrt() / 1.1;
        let mut arc = CausticArc::new(2, Axis::X, Chebyshev::constant(ya, -xa, xa), 0.0, 0);
        arc.span = [-xa, xa];
        let w = wkb_arc(&m, &arc, ex + 0.5 * ya * ya, 0.0, 201).unwrap();
        assert!(w.residual.abs() < 1e-12, "{}", w.residual);
        assert_eq!(w.n, 2);
        assert!(w.p_cl[0].abs() < 1e-6 && w.p_cl[200].abs() < 1e-6);
        assert!(w.p_cl[100] > 0.0);
        assert!(w.x_cl.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn forbidden_arc_is_rejected() {
        let m = Model::separable(1.0, 1.0);
        let mut arc = CausticArc::new(2, Axis::X, Chebyshev::constant(0.0, -1.0, 1.0), 0.0, 0);
        arc.span = [-2.0, 2.0];
        assert!(matches!(
            wkb_arc(&m, &arc, 0.5, 0.0, 21),
            Err(ArcError::ClassicallyForbidden { .. })
        ));
    }
}
