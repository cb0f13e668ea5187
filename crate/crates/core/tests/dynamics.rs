use causticwave::dynamics::*;
use causticwave::{Model, PhaseState, Point2};
use proptest::prelude::*;

#[test]
fn vertex_at_rest_has_the_level_energy() {
    let m = Model::barbanis();
    let traj = integrate_trajectory(
        &m,
        Point2::new(-2.204, -1.650),
        Point2::ORIGIN,
        1.0,
        default_dt(&m),
    )
    .unwrap();
    assert!((traj.energy - 5.18266).abs() <= 1e-3, "{}", traj.energy);
}

#[test]
fn reversed_momenta_retrace_the_orbit() {
    let m = Model::barbanis();
    let dt = default_dt(&m);
    let q0 = Point2::new(-2.204, -1.650);
    let fwd = integrate_trajectory(&m, q0, Point2::ORIGIN, 30.0, dt).unwrap();
    let end = fwd.samples.last().unwrap().state;
    let back = integrate_trajectory(&m, end.q, -end.p, 30.0, dt).unwrap();
    let q = back.samples.last().unwrap().state.q;
    assert!(q.dist(q0) <= 1e-6, "{}", q.dist(q0));
}

#[test]
fn jacobi_solutions_satisfy_the_variational_equation() {
    let m = Model::barbanis();
    let dt = default_dt(&m);
    let traj =
        integrate_trajectory(&m, Point2::new(-2.204, -1.650), Point2::ORIGIN, 25.0, dt).unwrap();
    let jac = integrate_jacobi(&traj).unwrap();
    let mut worst: f64 = 0.0;
    for series in [&jac.first, &jac.second] {
        let scale = series.iter().map(|v| v.dq.norm()).fold(0.0, f64::max);
        for i in (1..series.len() - 1).step_by(97) {
            let acc =
                (series[i + 1].dq - series[i].dq * 2.0 + series[i - 1].dq) * (1.0 / (dt * dt));
            let h = m.hessian(traj.samples[i].state.q);
            let dq = series[i].dq;
            let r = acc
                + Point2::new(
                    h[0][0] * dq.x + h[0][1] * dq.y,
                    h[1][0] * dq.x + h[1][1] * dq.y,
                );
            worst = worst.max(r.norm() / scale);
        }
    }
    assert!(worst <= 1e-4, "{worst}");
    for d in &jac.tangent_det {
        assert!((d - 1.0).abs() < 1e-8);
    }
}

#[test]
fn velocity_solves_the_variational_equation() {
    // Time translation: the variation seeded with (q̇, ṗ) stays equal to (q̇, ṗ).
    let m = Model::barbanis();
    let dt = default_dt(&m);
    let mut s = PhaseState::new(Point2::new(1.0, 1.5), Point2::new(0.4, -0.2));
    let mut vars = [Variation::new(s.p * (1.0 / m.mass), -m.gradient(s.q))];
    let mut worst: f64 = 0.0;
    for _ in 0..(15.0 / dt) as usize {
        pefrl_step_tangent(&m, &mut s, &mut vars, dt);
        let v = s.p * (1.0 / m.mass);
        worst = worst.max(vars[0].dq.dist(v) / v.norm().max(1.0));
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn barbanis_orbit_touches_the_caustic_repeatedly() {
    let m = Model::barbanis();
    let dt = default_dt(&m);
    let traj =
        integrate_trajectory(&m, Point2::new(-2.204, -1.650), Point2::ORIGIN, 60.0, dt).unwrap();
    let jac = integrate_jacobi(&traj).unwrap();
    let points = detect_caustic_points(&traj, &jac);
    // Roughly one touching per half period of each mode.
    assert!(points.len() >= 10, "{}", points.len());
    for p in &points {
        assert!(m.potential(p.position) < traj.energy);
    }
}

#[test]
fn separable_caustic_points_lie_on_the_rectangle() {
    let m = Model::separable(1.1, 1.0);
    let (xa, ya) = (2.0, 1.4);
    let dt = default_dt(&m);
    let traj = integrate_trajectory(&m, Point2::new(-xa, -ya), Point2::ORIGIN, 80.0, dt).unwrap();
    let jac = integrate_jacobi(&traj).unwrap();
    let points = detect_caustic_points(&traj, &jac);
    assert!(!points.is_empty());
    for p in points {
        let d = (p.position.x.abs() - xa)
            .abs()
            .min((p.position.y.abs() - ya).abs());
        assert!(d <= 1e-4, "{:?}", p.position);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_conserved(x in -2.0f64..2.0, y in -1.5f64..1.5, px in -1.0f64..1.0, py in -1.0f64..1.0) {
        let m = Model::barbanis();
        let traj = integrate_trajectory(&m, Point2::new(x, y), Point2::new(px, py), 20.0, default_dt(&m)).unwrap();
        prop_assert!(traj.max_energy_drift() <= 1e-9 * traj.energy.max(1.0));
        prop_assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }
}
