use causticwave::{Model, Point2};
use proptest::prelude::*;

fn models() -> [Model; 3] {
    [
        Model::barbanis(),
        Model::separable(1.1, 1.0),
        Model::barbanis().y_mirrored(),
    ]
}

#[test]
fn separable_hessian_is_diagonal() {
    let m = Model::separable(1.1, 1.0);
    for q in [Point2::new(0.3, -2.0), Point2::new(-1.7, 0.9)] {
        let h = m.hessian(q);
        assert_eq!((h[0][1], h[1][0]), (0.0, 0.0));
        assert!((h[0][0] - 1.21).abs() <= 1e-15 && (h[1][1] - 1.0).abs() <= 1e-15, "{h:?}");
    }
}

#[test]
fn origin_is_a_critical_point() {
    for m in models() {
        assert_eq!(m.gradient(Point2::ORIGIN), Point2::ORIGIN);
        assert_eq!(m.potential(Point2::ORIGIN), 0.0);
    }
}

#[test]
fn vertex_direction_reaches_the_caustic_corner() {
    let m = Model::barbanis();
    let v = m
        .equipotential_point(5.18266, Point2::new(-2.204, -1.650))
        .unwrap();
    assert!(
        (v.x + 2.204).abs() < 0.01 && (v.y + 1.650).abs() < 0.01,
        "{v:?}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences(x in -3.0f64..3.0, y in -3.0f64..3.0, k in 0usize..3) {
        let m = models()[k];
        let h = 1e-5;
        let q = Point2::new(x, y);
        let g = m.gradient(q);
        let fx = (m.potential(Point2::new(x + h, y)) - m.potential(Point2::new(x - h, y))) / (2.0 * h);
        let fy = (m.potential(Point2::new(x, y + h)) - m.potential(Point2::new(x, y - h))) / (2.0 * h);
        let scale = g.norm().max(1.0);
        prop_assert!((fx - g.x).abs() <= 1e-6 * scale);
        prop_assert!((fy - g.y).abs() <= 1e-6 * scale);
    }

    #[test]
    fn hessian_matches_gradient_differences(x in -3.0f64..3.0, y in -3.0f64..3.0, k in 0usize..3) {
        let m = models()[k];
        let h = 1e-5;
        let hs = m.hessian(Point2::new(x, y));
        prop_assert_eq!(hs[0][1], hs[1][0]);
        let dx = (m.gradient(Point2::new(x + h, y)) - m.gradient(Point2::new(x - h, y))) * (0.5 / h);
        let dy = (m.gradient(Point2::new(x, y + h)) - m.gradient(Point2::new(x, y - h))) * (0.5 / h);
        prop_assert!((dx.x - hs[0][0]).abs() <= 1e-5 && (dx.y - hs[1][0]).abs() <= 1e-5);
        prop_assert!((dy.x - hs[0][1]).abs() <= 1e-5 && (dy.y - hs[1][1]).abs() <= 1e-5);
    }

    #[test]
    fn equipotential_point_lies_on_the_level_set(e in 0.5f64..8.0, theta in 0.0f64..std::f64::consts::TAU, k in 0usize..3) {
        let m = models()[k];
        let q = m.equipotential_point(e, Point2::from_angle(theta)).unwrap();
        prop_assert!((m.potential(q) - e).abs() <= 1e-10 * e);
        prop_assert!((q.angle() - Point2::from_angle(theta).angle()).sin().abs() < 1e-9);
    }
}
