use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use eqvidx_core::orbit::{Edge, QuotientPoint, BALL4, SPHERE4};
use eqvidx_core::Error;
use proptest::prelude::*;

fn log_volume_sphere(s: f64, a: f64) -> f64 {
    (s.cos() * s.cos() * a.cos() * a.sin()).ln()
}

#[test]
fn edges_and_midlines() {
    let p = QuotientPoint::new(0.3, 0.0);
    assert_eq!(SPHERE4.orbit_volume(p).unwrap(), 0.0);
    assert!((SPHERE4.theta(p).unwrap() + FRAC_PI_4).abs() < 1e-15);
    let q = QuotientPoint::new(0.3, FRAC_PI_2);
    assert!((SPHERE4.theta(q).unwrap() - FRAC_PI_4).abs() < 1e-15);
    assert!(SPHERE4.theta(QuotientPoint::new(0.7, FRAC_PI_4)).unwrap().abs() < 1e-15);
    assert!(BALL4.theta(QuotientPoint::new(2.0, 2.0)).unwrap().abs() < 1e-15);
    assert!((BALL4.theta(QuotientPoint::new(1.0, 0.0)).unwrap() + FRAC_PI_4).abs() < 1e-15);

    // The equator orbit is the Clifford torus with radii 1/√2.
    let c = QuotientPoint::new(0.0, FRAC_PI_4);
    let v = SPHERE4.orbit_volume(c).unwrap();
    assert!((v - 2.0 * PI * PI).abs() < 1e-12);

    assert_eq!(SPHERE4.edge_point(Edge::Second, 0.2), QuotientPoint::new(0.2, FRAC_PI_2));
    assert_eq!(BALL4.edge_point(Edge::Second, 0.5), QuotientPoint::new(0.0, 0.5));
    assert!((SPHERE4.edge_distance(QuotientPoint::new(0.0, 0.1), Edge::First) - 0.1).abs() < 1e-15);
}

#[test]
fn apexes_and_outside_points_are_rejected() {
    assert!(matches!(
        SPHERE4.theta(QuotientPoint::new(FRAC_PI_2, 0.4)),
        Err(Error::UndefinedPoint { .. })
    ));
    assert!(matches!(
        BALL4.theta(QuotientPoint::new(0.0, 0.0)),
        Err(Error::UndefinedPoint { .. })
    ));
    assert!(matches!(
        SPHERE4.orbit_volume(QuotientPoint::new(0.1, 2.0)),
        Err(Error::Domain { .. })
    ));
    assert!(BALL4.orbit_volume(QuotientPoint::new(-0.5, 1.0)).is_err());
    assert!(BALL4.orbit_volume(QuotientPoint::new(f64::NAN, 1.0)).is_err());
}

proptest! {
    #[test]
    fn sphere_orbits_lie_on_the_unit_sphere(s in -1.5..1.5f64, a in 0.0..FRAC_PI_2) {
        let p = QuotientPoint::new(s, a);
        let (r1, r2) = (SPHERE4.radius1(p), SPHERE4.radius2(p));
        prop_assert!((r1 * r1 + r2 * r2 + s.sin().powi(2) - 1.0).abs() < 1e-14);
        let v = SPHERE4.orbit_volume(p).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!((v - 4.0 * PI * PI * r1 * r2).abs() <= 1e-14 * (1.0 + v));
    }

    #[test]
    fn ball_theta_is_scale_invariant(x in 1e-3..5.0f64, y in 1e-3..5.0f64, k in 0.01..100.0f64) {
        let t = BALL4.theta(QuotientPoint::new(x, y)).unwrap();
        let ts = BALL4.theta(QuotientPoint::new(k * x, k * y)).unwrap();
        prop_assert!((t - ts).abs() < 1e-14);
        prop_assert!(t.abs() <= FRAC_PI_4);
        prop_assert!(BALL4.orbit_volume(QuotientPoint::new(x, y)).unwrap() >= 0.0);
    }

    #[test]
    fn theta_increases_toward_the_second_edge(s in -1.4..1.4f64, a in 0.01..1.56f64, phi in 0.0..PI) {
        let h = 1e-6;
        let p = QuotientPoint::new(s, a);
        let dt = SPHERE4.theta(QuotientPoint::new(s, a + h)).unwrap() - SPHERE4.theta(p).unwrap();
        prop_assert!(dt > 0.0);
        // BALL4: rotating the point counterclockwise.
        let (x, y) = (2.0 * (phi / 2.0).cos(), 2.0 * (phi / 2.0).sin());
        let (x2, y2) = (x - h * y, y + h * x);
        if y > 0.0 && x2 > 0.0 {
            let d = BALL4.theta(QuotientPoint::new(x2, y2)).unwrap()
                - BALL4.theta(QuotientPoint::new(x, y)).unwrap();
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn volume_gradient_matches_finite_differences(s in -1.3..1.3f64, a in 0.1..1.47f64) {
        let h = 1e-6;
        let g = SPHERE4.grad_log_volume(QuotientPoint::new(s, a));
        let ds = (log_volume_sphere(s + h, a) - log_volume_sphere(s - h, a)) / (2.0 * h);
        let da = (log_volume_sphere(s, a + h) - log_volume_sphere(s, a - h)) / (2.0 * h) / s.cos();
        prop_assert!((g[0] - ds).abs() < 1e-6 * (1.0 + ds.abs()));
        prop_assert!((g[1] - da).abs() < 1e-6 * (1.0 + da.abs()));
    }

    #[test]
    fn frame_vectors_have_unit_length(s in -1.5..1.5f64, a in 0.0..FRAC_PI_2, phi in -PI..PI) {
        let p = QuotientPoint::new(s, a);
        let v = SPHERE4.frame_to_chart(p, phi);
        prop_assert!((SPHERE4.metric_len(p, v) - 1.0).abs() < 1e-12);
        let q = QuotientPoint::new(a + 0.1, s.abs() + 0.1);
        prop_assert!((BALL4.metric_len(q, BALL4.frame_to_chart(q, phi)) - 1.0).abs() < 1e-14);
    }
}
