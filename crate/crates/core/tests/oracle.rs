use std::sync::OnceLock;

use causticwave::field2d::FieldKind;
use causticwave::oracle::*;
use causticwave::{Model, Point2};
use proptest::prelude::*;

fn barbanis_spectrum() -> &'static Spectrum {
    static S: OnceLock<Spectrum> = OnceLock::new();
    S.get_or_init(|| diagonalize(&Model::barbanis(), 30, 30).unwrap())
}

/// `∫ φ_n(x) x^k φ_m(x) dx` by the trapezoid rule on a wide, fine grid.
fn quadrature(n: usize, m: usize, k: i32, omega: f64) -> f64 {
    let (lo, hi, steps) = (-12.0, 12.0, 24_000);
    let dx = (hi - lo) / steps as f64;
    (0..=steps)
        .map(|i| {
            let x = lo + i as f64 * dx;
            let phi = oscillator_functions(n.max(m) + 1, omega, x);
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            w * phi[n] * x.powi(k) * phi[m]
        })
        .sum::<f64>()
        * dx
}

#[test]
fn coupling_elements_match_quadrature() {
    let model = Model::barbanis();
    for n in 0..5 {
        for m in 0..5 {
            for (np, mp) in [
                (n, m),
                (n + 2, m + 1),
                (n, m + 1),
                ((n + 2) % 5, (m + 3) % 5),
            ] {
                let exact =
                    quadrature(n, np, 2, model.omega_x) * quadrature(m, mp, 1, model.omega_y);
                let got = coupling_element(&model, (n, m), (np, mp));
                assert!(
                    (got - exact).abs() <= 1e-8,
                    "({n},{m})-({np},{mp}): {got} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn separable_spectrum_is_exact() {
    let model = Model::separable(1.1, 1.0);
    let s = diagonalize(&model, 8, 8).unwrap();
    for (nx, ny) in [(0, 0), (1, 0), (0, 2), (2, 2), (3, 1)] {
        let i = s.find(nx, ny, 0.0).unwrap();
        let exact = 1.1 * (nx as f64 + 0.5) + (ny as f64 + 0.5);
        assert!((s.energies[i] - exact).abs() <= 1e-12);
    }
}

#[test]
fn barbanis_level_two_two() {
    let s = barbanis_spectrum();
    let i = s.find(2, 2, 5.18266).unwrap();
    assert!((s.energies[i] - 5.18266).abs() <= 1e-3, "{}", s.energies[i]);
    assert_eq!(s.dominant(i), (2, 2));
}

#[test]
fn targeted_level_is_converged_in_the_basis() {
    let a = barbanis_spectrum();
    let b = diagonalize(&Model::barbanis(), 35, 35).unwrap();
    let ia = a.find(2, 2, 5.18).unwrap();
    let ib = b.find(2, 2, 5.18).unwrap();
    assert!((a.energies[ia] - b.energies[ib]).abs() <= 1e-6);
}

#[test]
fn levels_do_not_increase_with_the_basis() {
    let model = Model::barbanis();
    let mut previous: Option<Vec<f64>> = None;
    for n in [8, 12, 16, 20] {
        let s = diagonalize(&model, n, n).unwrap();
        let low: Vec<f64> = s.energies[..12].to_vec();
        if let Some(p) = previous {
            for (a, b) in p.iter().zip(&low) {
                assert!(*b <= a + 1e-10, "{b} > {a}");
            }
        }
        previous = Some(low);
    }
}

#[test]
fn coupling_sign_does_not_change_the_spectrum() {
    let model = Model::barbanis();
    let a = diagonalize(&model, 16, 16).unwrap();
    let b = diagonalize(&model.y_mirrored(), 16, 16).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() <= 1e-10);
    }
}

#[test]
fn eigenvectors_are_orthonormal() {
    let s = diagonalize(&Model::barbanis(), 12, 12).unwrap();
    let n = s.vectors.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let g: f64 = s.vectors[i]
                .iter()
                .zip(&s.vectors[j])
                .map(|(a, b)| a * b)
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    assert!(worst <= 1e-10, "{worst}");
    assert!(s.energies.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn ground_state_is_a_gaussian() {
    let model = Model::separable(1.1, 1.0);
    let s = diagonalize(&model, 6, 6).unwrap();
    let norm = (1.1f64 / std::f64::consts::PI).powf(0.25) * (1.0 / std::f64::consts::PI).powf(0.25);
    for (x, y) in [(0.0, 0.0), (0.7, -0.3), (-1.5, 1.2), (2.0, 2.0)] {
        let exact = norm * (-(1.1 * x * x + y * y) / 2.0f64).exp();
        let got = evaluate(&s, 0, Point2::new(x, y)).abs();
        assert!((got - exact).abs() <= 1e-10);
    }
}

#[test]
fn barbanis_states_have_definite_x_parity() {
    let s = barbanis_spectrum();
    let i = s.find(2, 2, 5.18).unwrap();
    let mut defect: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..200 {
        let q = Point2::new(0.03 * (k % 20) as f64 - 0.3, 0.04 * (k / 20) as f64 - 2.0);
        let (a, b) = (evaluate(s, i, q), evaluate(s, i, q.mirror_x()));
        defect = defect.max((a - b).abs().min((a + b).abs()));
        peak = peak.max(a.abs());
    }
    assert!(defect <= 1e-8 * peak.max(1.0));
}

#[test]
fn raster_field_is_unit_normalized() {
    let s = barbanis_spectrum();
    let i = s.find(2, 2, 5.18).unwrap();
    let f = oracle_wavefunction(
        s,
        i,
        Point2::new(-6.0, -6.0),
        Point2::new(6.0, 6.0),
        120,
        120,
    )
    .unwrap();
    assert_eq!(f.kind, FieldKind::Psi);
    assert!((f.l2_norm() - 1.0).abs() <= 1e-3);
    assert!(oracle_wavefunction(
        s,
        10_000,
        Point2::new(-1.0, -1.0),
        Point2::new(1.0, 1.0),
        4,
        4
    )
    .is_err());
}

#[test]
fn comparing_a_field_with_itself_or_its_negative_gives_zero() {
    let s = barbanis_spectrum();
    let i = s.find(2, 2, 5.18).unwrap();
    let (lo, hi) = (Point2::new(-4.0, -4.0), Point2::new(4.0, 4.0));
    let a = oracle_wavefunction(s, i, lo, hi, 60, 60).unwrap();
    let neg = a.with_values(FieldKind::Psi, a.values.iter().map(|v| -v).collect());
    let same = compare_fields(&a, &a, lo, hi, 50, |_| true).unwrap();
    let flipped = compare_fields(&a, &neg, lo, hi, 50, |_| true).unwrap();
    assert!(same.rel_l2 <= 1e-12 && same.sign == 1.0);
    assert!(flipped.rel_l2 <= 1e-12 && flipped.sign == -1.0);
    let far = compare_fields(
        &a,
        &a,
        Point2::new(10.0, 10.0),
        Point2::new(11.0, 11.0),
        5,
        |_| true,
    );
    assert!(far.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oscillator_functions_satisfy_the_hermite_equation(x in -4.0f64..4.0, w in 0.5f64..2.0) {
        // −φ''/2 + w²x²φ/2 = w(n + ½)φ, checked by central differences.
        let h = 1e-3;
        let (l, c, r) = (oscillator_functions(6, w, x - h), oscillator_functions(6, w, x), oscillator_functions(6, w, x + h));
        for n in 0..6 {
            let d2 = (l[n] - 2.0 * c[n] + r[n]) / (h * h);
            let res = -0.5 * d2 + 0.5 * w * w * x * x * c[n] - w * (n as f64 + 0.5) * c[n];
            prop_assert!(res.abs() < 1e-4 * (1.0 + w * w * x * x));
        }
    }

    #[test]
    fn compare_is_invariant_under_scaling(s in 0.1f64..10.0, neg in any::<bool>()) {
        let spec = diagonalize(&Model::separable(1.1, 1.0), 4, 4).unwrap();
        let (lo, hi) = (Point2::new(-3.0, -3.0), Point2::new(3.0, 3.0));
        let a = oracle_wavefunction(&spec, 3, lo, hi, 30, 30).unwrap();
        let k = if neg { -s } else { s };
        let b = a.with_values(FieldKind::Psi, a.values.iter().map(|v| k * v).collect());
        prop_assert!(compare_fields(&a, &b, lo, hi, 25, |_| true).unwrap().rel_l2 < 1e-12);
    }
}
