use std::f64::consts::{FRAC_PI_2, PI};

use eqvidx_core::orbit::Edge;
use eqvidx_core::profile::{find_markers, EndKind, Markers};
use eqvidx_core::{shoot_hsiang, solve_alencar, truncate_rescale, ProfileCurve, DEFAULT_TOL};

/// Finite-difference check of the profile equation on SPHERE4, from
/// positions alone: geodesic curvature against the normal derivative of
/// log V in the metric ds² + cos²s da².
fn sphere_defect(pos: &dyn Fn(f64) -> (f64, f64), t: f64) -> f64 {
    let h = 1e-3;
    let vel = |t: f64| {
        let (s1, a1) = pos(t - 2.0 * h);
        let (s2, a2) = pos(t - h);
        let (s3, a3) = pos(t + h);
        let (s4, a4) = pos(t + 2.0 * h);
        ((s1 - 8.0 * s2 + 8.0 * s3 - s4) / (12.0 * h), (a1 - 8.0 * a2 + 8.0 * a3 - a4) / (12.0 * h))
    };
    let angle = |t: f64| {
        let (s, _) = pos(t);
        let (ds, da) = vel(t);
        (s.cos() * da).atan2(ds)
    };
    let (s, a) = pos(t);
    let (_, da) = vel(t);
    let phi = angle(t);
    let turn = angle(t + h) - angle(t - h);
    let dphi = (turn + PI).rem_euclid(2.0 * PI) - PI;
    let dphi = dphi / (2.0 * h);
    let k = dphi - s.sin() * da;
    let dn = 2.0 * phi.sin() * s.tan() + phi.cos() * (1.0 / a.tan() - a.tan()) / s.cos();
    (k - dn).abs() / (1.0 + k.abs())
}

/// Same check on BALL4 with the Euclidean metric and V = x·y.
fn ball_defect(pos: &dyn Fn(f64) -> (f64, f64), t: f64) -> f64 {
    let h = 1e-3;
    let (x0, y0) = pos(t);
    let (xm, ym) = pos(t - h);
    let (xp, yp) = pos(t + h);
    let (dx, dy) = ((xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h));
    let (ddx, ddy) = ((xp - 2.0 * x0 + xm) / (h * h), (yp - 2.0 * y0 + ym) / (h * h));
    let speed = (dx * dx + dy * dy).sqrt();
    let k = (dx * ddy - dy * ddx) / speed.powi(3);
    let (nx, ny) = (-dy / speed, dx / speed);
    let dn = nx / x0 + ny / y0;
    (k - dn).abs() / (1.0 + k.abs())
}

fn interior_times(c: &ProfileCurve, n: usize) -> Vec<f64> {
    (1..n).map(|i| c.length * i as f64 / n as f64).collect()
}

fn far_edge(c: &ProfileCurve) -> Edge {
    match c.ends[1].kind {
        EndKind::Edge { edge, .. } => edge,
        other => panic!("far end is {other:?}"),
    }
}

#[test]
fn hsiang_profiles_cross_the_football_m_times() {
    for m in 1..=4u32 {
        let c = shoot_hsiang(m, DEFAULT_TOL).unwrap();
        assert_eq!(c.crossings.len(), m as usize, "m = {m}");
        let want = if m % 2 == 1 { Edge::Second } else { Edge::First };
        assert_eq!(far_edge(&c), want, "m = {m}");
        assert!(matches!(c.ends[0].kind, EndKind::Edge { edge: Edge::First, .. }));
        assert!(c.ends[1].incidence_defect <= 1e-8, "m = {m}: {}", c.ends[1].incidence_defect);
        assert!(c.minimality_residual() <= 1e-6, "m = {m}");
    }
}

#[test]
fn first_profile_is_the_equator_meridian() {
    let c = shoot_hsiang(1, DEFAULT_TOL).unwrap();
    assert!((c.length - FRAC_PI_2).abs() < 1e-10);
    for t in interior_times(&c, 10) {
        let p = c.sample(t).p;
        assert!(p.u1.abs() < 1e-10);
        assert!((p.u2 - t).abs() < 1e-10);
        assert!(c.norm_a_squared(t) < 1e-16);
    }
}

#[test]
fn hsiang_profiles_and_their_reflections_are_minimal() {
    for m in 2..=4u32 {
        let c = shoot_hsiang(m, DEFAULT_TOL).unwrap();
        let plain = |t: f64| {
            let p = c.sample(t).p;
            (p.u1, p.u2)
        };
        let swapped = |t: f64| {
            let p = c.sample(t).p;
            (p.u1, FRAC_PI_2 - p.u2)
        };
        let mirrored = |t: f64| {
            let p = c.sample(t).p;
            (-p.u1, p.u2)
        };
        let mut worst: f64 = 0.0;
        for t in interior_times(&c, 200) {
            let (_, a) = plain(t);
            if !(0.05..FRAC_PI_2 - 0.05).contains(&a) || t < 0.01 || t > c.length - 0.01 {
                continue;
            }
            let d = sphere_defect(&plain, t);
            assert!((sphere_defect(&swapped, t) - d).abs() < 1e-7);
            assert!((sphere_defect(&mirrored, t) - d).abs() < 1e-7);
            worst = worst.max(d);
        }
        assert!(worst < 1e-5, "m = {m}: {worst}");
    }
}

#[test]
fn markers_interlace() {
    for m in 2..=5u32 {
        let c = shoot_hsiang(m, DEFAULT_TOL).unwrap();
        let Markers::Sphere(n) = find_markers(&c).unwrap() else {
            panic!("expected sphere markers")
        };
        let mu = m as usize;
        assert_eq!(n.zeros.len(), mu - 1);
        assert_eq!(n.criticals.len(), mu - 2);
        for i in 0..mu - 1 {
            assert!(n.crossings[i] < n.zeros[i] && n.zeros[i] < n.crossings[i + 1]);
        }
        for i in 0..mu - 2 {
            assert!(n.zeros[i] < n.criticals[i] && n.criticals[i] < n.zeros[i + 1]);
        }
        // θ is stationary at its critical points: da/dt = 0 there.
        let h = 1e-5;
        for &z in &n.zeros {
            let da = (c.sample(z + h).p.u2 - c.sample(z - h).p.u2) / (2.0 * h);
            assert!(da.abs() < 1e-7, "m = {m}, t = {z}: {da}");
        }
        for &x in &n.crossings {
            assert!(c.theta(x).abs() < 1e-10);
        }
    }
}

#[test]
fn alencar_profile_spirals_outward() {
    let c = solve_alencar(6, DEFAULT_TOL).unwrap();
    assert_eq!(c.critical_points.len(), 6);
    let p0 = c.sample(0.0).p;
    assert!((p0.u1 - 1.0).abs() < 1e-6 && p0.u2.abs() < 1e-6);
    let mut last = 0.0;
    for t in interior_times(&c, 400) {
        let p = c.sample(t).p;
        let r = p.u1.hypot(p.u2);
        assert!(r > last, "|x| not increasing at t = {t}");
        last = r;
    }
    let cp = &c.critical_points;
    assert!(cp[5].theta.abs() <= cp[0].theta.abs());
    assert!(cp.windows(2).all(|w| w[0].theta * w[1].theta < 0.0));
    let pos = |t: f64| {
        let p = c.sample(t).p;
        (p.u1, p.u2)
    };
    for t in interior_times(&c, 300) {
        if t < 0.05 {
            continue;
        }
        let d = ball_defect(&pos, t);
        assert!(d < 1e-4, "t = {t}: {d}");
    }
}

#[test]
fn alencar_markers_do_not_depend_on_the_tolerance() {
    let a = solve_alencar(3, DEFAULT_TOL).unwrap();
    let b = solve_alencar(3, 10.0 * DEFAULT_TOL).unwrap();
    for (x, y) in a.critical_points.iter().zip(&b.critical_points) {
        assert!((x.radius - y.radius).abs() < 1e-9 * x.radius);
        assert!((x.t - y.t).abs() < 1e-9 * x.t);
    }
}

#[test]
fn truncation_meets_the_unit_sphere_orthogonally() {
    let base = solve_alencar(3, DEFAULT_TOL).unwrap();
    let r = |i: usize| base.critical_points[i].radius;

    let a1 = truncate_rescale(&base, 1).unwrap();
    let end = a1.sample(a1.length);
    let rad = end.p.u1.hypot(end.p.u2);
    assert!((rad - 1.0).abs() < 1e-10);
    let cross = end.p.u1 * end.tau[1] - end.p.u2 * end.tau[0];
    assert!(cross.abs() < 1e-8, "tangent not radial: {cross}");
    let start = a1.sample(0.0).p;
    assert!((start.u1 - 1.0 / r(0)).abs() < 1e-10 && start.u2.abs() < 1e-10);
    assert!(matches!(a1.ends[1].kind, EndKind::Free { .. }));

    let a2 = truncate_rescale(&base, 2).unwrap();
    assert_eq!(a2.critical_points.len(), 2);
    assert!((a2.critical_points[0].radius - r(0) / r(1)).abs() < 1e-10);
    assert!((a2.critical_points[1].radius - 1.0).abs() < 1e-10);
    let q = a2.sample(a2.critical_points[0].t).p;
    assert!((q.u1.hypot(q.u2) - r(0) / r(1)).abs() < 1e-9);
}

#[test]
fn minimality_check_rejects_a_perturbed_profile() {
    let c = shoot_hsiang(2, DEFAULT_TOL).unwrap();
    let bent = |t: f64| {
        let p = c.sample(t).p;
        (p.u1 + 1e-3 * (3.0 * t).sin(), p.u2)
    };
    let worst = interior_times(&c, 50)
        .into_iter()
        .map(|t| sphere_defect(&bent, t))
        .fold(0.0, f64::max);
    assert!(worst > 1e-3, "{worst}");
}
