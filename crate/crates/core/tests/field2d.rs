use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, OnceLock};

use causticwave::arc1d::{match_arc_constants, solve_arc_se, ArcOptions, ArcWave};
use causticwave::caustic::{
    harvest_caustic, separable_caustic, Caustic, HarvestOptions, ARC_VERTICES,
};
use causticwave::field2d::classical::CharacteristicOptions;
use causticwave::field2d::diagnostics::{radial_growth, sign_changes_along};
use causticwave::field2d::mesh::{mesh_exterior_on, mesh_interior_on, mesh_rectangle};
use causticwave::field2d::qhje::{oriented_arcs, psi_from_action};
use causticwave::field2d::*;
use causticwave::{Model, Point2};
use proptest::prelude::*;

const E_SE: f64 = 5.1835683;

fn barbanis_caustic() -> &'static Caustic {
    static C: OnceLock<Caustic> = OnceLock::new();
    C.get_or_init(|| {
        let m = Model::barbanis();
        let v = m
            .equipotential_point(E_SE, Point2::new(-2.20486, -1.64946))
            .unwrap();
        harvest_caustic(&m, v, &HarvestOptions::for_model(&m))
            .unwrap()
            .caustic
    })
}

/// Unnormalized Hermite function `H_n(√ω x) e^{−ωx²/2}` for `m = ħ = 1`.
fn hermite(n: usize, omega: f64, x: f64) -> f64 {
    let xi = omega.sqrt() * x;
    let (mut h0, mut h1) = (1.0, 2.0 * xi);
    if n == 0 {
        return (-0.5 * xi * xi).exp();
    }
    for k in 1..n {
        let h2 = 2.0 * xi * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1 * (-0.5 * xi * xi).exp()
}

fn product_state(p: Point2) -> f64 {
    hermite(2, 1.1, p.x) * hermite(2, 1.0, p.y)
}

/// One-dimensional oscillator action from the left turning point `−a`.
fn oscillator_action(x: f64, omega: f64, a: f64) -> f64 {
    let s = (x / a).clamp(-1.0, 1.0);
    0.5 * omega * (x * (a * a - x * x).max(0.0).sqrt() + a * a * (s.asin() + FRAC_PI_2))
}

fn turning_points() -> (f64, f64) {
    ((2.0 * 2.5f64 / 1.1).sqrt(), 5f64.sqrt())
}

fn rel_l2_aligned(a: &[f64], b: &[f64]) -> f64 {
    let s = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.iter().map(|x| x * x).sum::<f64>();
    let d: f64 = a.iter().zip(b).map(|(x, y)| (s * x - y).powi(2)).sum();
    (d / b.iter().map(|y| y * y).sum::<f64>()).sqrt()
}

fn se_waves(model: &Model, caustic: &Caustic, energy: f64) -> Vec<ArcWave> {
    let mut waves: Vec<ArcWave> = caustic
        .arcs
        .iter()
        .map(|a| solve_arc_se(model, a, energy, &ArcOptions::default()).unwrap())
        .collect();
    match_arc_constants(&mut waves, &caustic.traversal, &ARC_VERTICES).unwrap();
    waves
}

fn welded_se(model: &Model, caustic: &Caustic, energy: f64, h: f64) -> Welded {
    let waves = se_waves(model, caustic, energy);
    let ring = CausticRing::new(caustic, h).unwrap();
    let (lo, hi) = outer_box(model, caustic, 5.0).unwrap();
    let inner = Arc::new(mesh_interior_on(&ring, h).unwrap());
    let outer = Arc::new(mesh_exterior_on(&ring, lo, hi, h).unwrap());
    let fi = solve_dirichlet_se(&inner, model, energy, &waves).unwrap();
    let fe = solve_dirichlet_se(&outer, model, energy, &waves).unwrap();
    weld(&fi, &fe).unwrap()
}

#[test]
fn unit_square_mesh_has_expected_size() {
    let mesh = mesh_rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), 10, 10);
    assert_eq!(mesh.triangles.len(), 200);
    assert!((mesh.area() - 1.0).abs() < 1e-12);
    assert!((0..mesh.triangles.len()).all(|t| mesh.signed_area(t) > 0.0));
    for (p, tag) in mesh.vertices.iter().zip(&mesh.boundary_tags) {
        let on_edge = [p.x, p.y, 1.0 - p.x, 1.0 - p.y]
            .iter()
            .any(|d| d.abs() < 1e-12);
        assert_eq!(tag.is_some(), on_edge);
    }
}

#[test]
fn rectangle_caustic_mesh_fills_the_rectangle() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let (xa, ya) = turning_points();
    let mesh = mesh_interior(&c, 0.05).unwrap();
    assert!((mesh.area() / (4.0 * xa * ya) - 1.0).abs() < 1e-2);
    assert!((0..mesh.triangles.len()).all(|t| mesh.signed_area(t) > 0.0));
}

#[test]
fn barbanis_mesh_lies_inside_the_equipotential() {
    let m = Model::barbanis();
    let c = barbanis_caustic();
    let mesh = mesh_interior(c, 0.03).unwrap();
    assert!((0..mesh.triangles.len()).all(|t| mesh.signed_area(t) > 0.0));
    let ring: Vec<Point2> = (0..720)
        .map(|i| {
            m.equipotential_point(
                E_SE,
                Point2::from_angle(std::f64::consts::TAU * i as f64 / 720.0),
            )
            .unwrap()
        })
        .collect();
    let allowed = causticwave::caustic::polygon_area(&ring).abs();
    assert!(mesh.area() < allowed, "{} vs {allowed}", mesh.area());
    for (p, tag) in mesh.vertices.iter().zip(&mesh.boundary_tags) {
        if let Some(BoundaryTag::Caustic { arc, u }) = tag {
            assert!(p.dist(c.arcs[*arc].point(*u)) < 1e-4);
        }
    }
}

#[test]
fn self_intersecting_boundary_is_rejected() {
    let mut c = separable_caustic(&Model::separable(1.1, 1.0), 2, 2, 0);
    // Push the upper arc below the lower one.
    let lower = c.arcs[3].clone();
    c.arcs[1].series =
        causticwave::caustic::Chebyshev::constant(-3.0, lower.span[0], lower.span[1]);
    c.arcs[1].prepare();
    assert!(matches!(
        mesh_interior(&c, 0.1),
        Err(FieldError::MeshingFailed(_))
    ));
}

#[test]
fn zero_data_gives_zero_field() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let mesh = Arc::new(mesh_interior(&c, 0.1).unwrap());
    let zeros = vec![0.0; mesh.vertices.len()];
    let f = solve_dirichlet(&mesh, &m, 5.0, &zeros, Provenance::Se).unwrap();
    assert_eq!(f.max_abs(), 0.0);
}

#[test]
fn interior_error_decreases_at_second_order() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let mesh = Arc::new(mesh_interior(&c, h).unwrap());
        let data: Vec<f64> = mesh.vertices.iter().map(|&p| product_state(p)).collect();
        let f = solve_dirichlet(&mesh, &m, 5.25, &data, Provenance::Se).unwrap();
        let err = mesh
            .vertices
            .iter()
            .zip(&f.values)
            .map(|(&p, v)| (v - product_state(p)).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (3.4..=4.6).contains(&ratio),
            "ratio {ratio}, errors {errors:?}"
        );
    }
}

#[test]
fn separable_arc_data_reproduces_product_state() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let waves = se_waves(&m, &c, 5.25);
    let mesh = Arc::new(mesh_interior(&c, 0.05).unwrap());
    let f = solve_dirichlet_se(&mesh, &m, 5.25, &waves).unwrap();
    let exact: Vec<f64> = mesh.vertices.iter().map(|&p| product_state(p)).collect();
    assert!(rel_l2_aligned(&f.values, &exact) < 1e-2);
}

#[test]
fn detuned_energy_increases_the_derivative_jump() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let tuned = welded_se(&m, &c, 5.25, 0.025);
    let detuned = welded_se(&m, &c, 5.26, 0.025);
    assert!(tuned.c1_jump < 0.05, "tuned jump {}", tuned.c1_jump);
    assert!(
        detuned.c1_jump >= 3.0 * tuned.c1_jump,
        "{} vs {}",
        detuned.c1_jump,
        tuned.c1_jump
    );
}

#[test]
fn weld_rejects_mismatched_boundaries() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let h = 0.1;
    let ring = CausticRing::new(&c, h).unwrap();
    let (lo, hi) = outer_box(&m, &c, 5.0).unwrap();
    let inner = Arc::new(mesh_interior_on(&ring, h).unwrap());
    let outer = Arc::new(mesh_exterior_on(&ring, lo, hi, h).unwrap());
    let di: Vec<f64> = inner.vertices.iter().map(|&p| product_state(p)).collect();
    let de: Vec<f64> = outer
        .vertices
        .iter()
        .zip(&outer.boundary_tags)
        .map(|(&p, t)| {
            if matches!(t, Some(BoundaryTag::Outer)) {
                0.0
            } else {
                product_state(p) + 1e-3
            }
        })
        .collect();
    let fi = solve_dirichlet(&inner, &m, 5.25, &di, Provenance::Se).unwrap();
    let fe = solve_dirichlet(&outer, &m, 5.25, &de, Provenance::Se).unwrap();
    assert!(matches!(
        weld(&fi, &fe),
        Err(FieldError::BoundaryMismatch { .. })
    ));
}

#[test]
fn barbanis_interior_has_nodal_lines_and_decaying_exterior() {
    let m = Model::barbanis();
    let c = barbanis_caustic();
    let w = welded_se(&m, c, E_SE, 0.05);
    let inner = w.field.with_values(FieldKind::Psi, w.field.values.clone());
    assert!(sign_changes_along(&inner, Point2::new(-2.5, -0.2), Point2::new(2.5, -0.2), 500) >= 2);
    assert!(radial_growth(&m, &w.field, 36, 40) < 1e-2);
    assert!(parity_defect(&w.field, Parity::Even) < 1e-2);
}

#[test]
fn classical_action_matches_separable_sum() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let (xa, ya) = turning_points();
    let mesh = Arc::new(mesh_interior(&c, 0.05).unwrap());
    let ca = solve_classical_action(&m, &c, &mesh, &CharacteristicOptions::default()).unwrap();
    let err = mesh
        .vertices
        .iter()
        .zip(&ca.field.values)
        .map(|(&p, v)| {
            (v - oscillator_action(p.x, 1.1, xa) - oscillator_action(p.y, 1.0, ya)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err <= 1e-3, "max error {err}");
    assert!(ca.boundary_mismatch <= 1e-3);
    assert!(ca.eikonal_fraction >= 0.95);
}

#[test]
fn barbanis_classical_action_satisfies_the_eikonal_equation() {
    let m = Model::barbanis();
    let c = barbanis_caustic();
    let mesh = Arc::new(mesh_interior(c, 0.05).unwrap());
    let ca = solve_classical_action(&m, c, &mesh, &CharacteristicOptions::default()).unwrap();
    assert!(ca.eikonal_fraction >= 0.95, "{}", ca.eikonal_fraction);
    assert!(ca.boundary_mismatch <= 1e-2, "{}", ca.boundary_mismatch);
}

#[test]
fn wkb_product_state_has_two_nodal_lines_per_axis() {
    let m = Model::separable(1.1, 1.0);
    let (xa, ya) = turning_points();
    let mesh = Arc::new(mesh_interior(&separable_caustic(&m, 2, 2, 0), 0.05).unwrap());
    let opts = CharacteristicOptions::default();
    let v1 = solve_classical_action(&m, &separable_caustic(&m, 2, 2, 0), &mesh, &opts).unwrap();
    let v2 = solve_classical_action(&m, &separable_caustic(&m, 2, 2, 1), &mesh, &opts).unwrap();
    let f = wkb_field(&m, &v1, &v2, AmplitudeMode::Constant, Parity::Even);
    assert_eq!(
        sign_changes_along(&f, Point2::new(-xa, 0.3), Point2::new(xa, 0.3), 400),
        2
    );
    assert_eq!(
        sign_changes_along(&f, Point2::new(0.3, -ya), Point2::new(0.3, ya), 400),
        2
    );
    let odd = wkb_field(&m, &v1, &v1, AmplitudeMode::Constant, Parity::Odd);
    assert_eq!(odd.max_abs(), 0.0);
    let t = wkb_field(&m, &v1, &v2, AmplitudeMode::Transported, Parity::Even);
    assert!(t.values.iter().all(|v| v.is_finite()));
}

#[test]
fn zero_action_gives_zero_wavefunction() {
    let m = Model::separable(1.1, 1.0);
    let mesh = Arc::new(mesh_rectangle(
        Point2::new(-1.0, -1.0),
        Point2::new(1.0, 1.0),
        8,
        8,
    ));
    let n = mesh.vertices.len();
    let x = FieldSolution::new(
        mesh.clone(),
        FieldKind::X,
        vec![0.0; n],
        5.25,
        Provenance::Qhje,
    );
    let a = x.with_values(FieldKind::A, vec![1.0; n]);
    assert_eq!(psi_from_action(&m, &x, &a).max_abs(), 0.0);
}

#[test]
fn qhje_field_reproduces_product_state() {
    let m = Model::separable(1.1, 1.0);
    let c = separable_caustic(&m, 2, 2, 0);
    let mesh = Arc::new(mesh_interior(&c, 0.02).unwrap());
    let (o1, w1) = oriented_arcs(&m, &c, 0, &ArcOptions::default()).unwrap();
    let (o2, w2) = oriented_arcs(&m, &c, 1, &ArcOptions::default()).unwrap();
    let q1 = solve_qhje_field(&mesh, &m, &o1, &w1).unwrap();
    let q2 = solve_qhje_field(&mesh, &m, &o2, &w2).unwrap();
    assert!(q1.a.values.iter().all(|&a| a > 0.0));
    assert!(q1.residual_real <= 1e-6 && q1.residual_imag <= 1e-6);
    assert!(q1.continuity <= 1e-6);
    let psi = qhje_wavefunction(&q1, &q2, Parity::Even);
    let exact: Vec<f64> = mesh.vertices.iter().map(|&p| product_state(p)).collect();
    let rel = rel_l2_aligned(&psi.values, &exact);
    assert!(rel <= 1e-3, "relative L2 {rel}");
}

#[test]
fn mesh_text_lists_every_node_and_element() {
    let mesh = mesh_rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), 3, 2);
    let text = mesh.to_text();
    let lines = text.lines().filter(|l| !l.starts_with('#')).count();
    assert!(lines >= mesh.vertices.len() + mesh.triangles.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplace_solve_is_exact_on_affine_data(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, nx in 2usize..9, ny in 2usize..9) {
        let mesh = Arc::new(mesh_rectangle(Point2::new(-0.2, -0.1), Point2::new(0.3, 0.2), nx, ny));
        let f = |p: Point2| a + b * p.x + c * p.y;
        let data: Vec<f64> = mesh.vertices.iter().map(|&p| f(p)).collect();
        let flat = Model { omega_x: 0.0, omega_y: 0.0, ..Model::separable(1.0, 1.0) };
        let s = solve_dirichlet(&mesh, &flat, 0.0, &data, Provenance::Se).unwrap();
        for (p, v) in mesh.vertices.iter().zip(&s.values) {
            prop_assert!((v - f(*p)).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetrized_mirror_pair_has_requested_parity(k in 0.5f64..3.0, odd in any::<bool>()) {
        let mesh = Arc::new(mesh_rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 12, 9));
        let g = |p: Point2| (k * p.x + 0.3).sin() * (1.0 + p.y);
        let v1 = FieldSolution::new(mesh.clone(), FieldKind::Psi, mesh.vertices.iter().map(|&p| g(p)).collect(), 1.0, Provenance::Se);
        let v2 = v1.with_values(FieldKind::Psi, mesh.vertices.iter().map(|&p| g(p.mirror_x())).collect());
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let f = symmetrize(&v1, &v2, parity);
        prop_assert!(parity_defect(&f, parity) < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodal_values(i in 0usize..80) {
        let mesh = Arc::new(mesh_rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0), 9, 7));
        let v = i % mesh.vertices.len();
        let f = FieldSolution::new(mesh.clone(), FieldKind::Psi, mesh.vertices.iter().map(|p| p.x * p.y + p.x).collect(), 1.0, Provenance::Se);
        let loc = Locator::new(&mesh);
        let got = f.value_at(&loc, mesh.vertices[v]).unwrap();
        prop_assert!((got - f.values[v]).abs() < 1e-12);
    }
}
