use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use eqvidx_core::profile::find_markers;
use eqvidx_core::profile::Markers;
use eqvidx_core::spectral::{observed_orders, residual_study};
use eqvidx_core::{
    known_field, reduce_jacobi, shoot_hsiang, solve_alencar, truncate_rescale, Bc, BcSpec, Error,
    FieldTag, ProfileCurve, DEFAULT_TOL,
};

/// Position, unit tangent angle and curvature from positions alone
/// (BALL4: Euclidean chart; SPHERE4: frame `∂s, ∂a / cos s`).
fn fd_frame(c: &ProfileCurve, t: f64) -> (f64, f64, f64) {
    let h = 1e-4;
    let p = |t: f64| c.sample(t).p;
    let (pm, p0, pp) = (p(t - h), p(t), p(t + h));
    let sphere = c.os.model == eqvidx_core::orbit::Model::Sphere4;
    let g = if sphere { p0.u1.cos() } else { 1.0 };
    let d1 = (pp.u1 - pm.u1) / (2.0 * h);
    let d2 = (pp.u2 - pm.u2) / (2.0 * h);
    (d1, g * d2, (g * d2).atan2(d1))
}

fn sample_times(c: &ProfileCurve, n: usize) -> Vec<f64> {
    (1..n).map(|i| c.length * i as f64 / n as f64).collect()
}

#[test]
fn equator_meridian_has_closed_form_coefficients() {
    let c = Arc::new(shoot_hsiang(1, DEFAULT_TOL).unwrap());
    let op = reduce_jacobi(c.clone(), BcSpec::natural()).unwrap();
    assert_eq!(op.bc, [Bc::Natural, Bc::Natural]);
    for t in sample_times(&c, 16) {
        let v = 4.0 * PI * PI * t.cos() * t.sin();
        assert!((op.weight_at(t) - v).abs() < 1e-9);
        assert!((op.potential_at(t) - 3.0).abs() < 1e-12);
    }
    let nu = known_field(c, FieldTag::Nu5).unwrap();
    for t in [0.0, 0.4, 1.0, FRAC_PI_2] {
        assert!((nu.eval(t) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn potential_is_norm_a_squared_plus_ricci() {
    for m in 2..=4 {
        let c = Arc::new(shoot_hsiang(m, DEFAULT_TOL).unwrap());
        let op = reduce_jacobi(c.clone(), BcSpec::natural()).unwrap();
        assert!(op.weight_at(0.0) <= 1e-12 * op.weight.iter().copied().fold(0.0, f64::max));
        for t in sample_times(&c, 64) {
            let q = op.potential_at(t);
            assert!(q >= 3.0 - 1e-12, "m = {m}, t = {t}: {q}");
            assert!(op.weight_at(t) > 0.0);
            // Independent |A|²: curvature of the profile plus the squared
            // normal derivatives of log r₁ and log r₂.
            let p = c.sample(t).p;
            let (_, _, phi) = fd_frame(&c, t);
            let (s, a) = (p.u1, p.u2);
            let n = [-phi.sin(), phi.cos()];
            let h1 = n[0] * (-s.tan()) + n[1] * (-a.tan() / s.cos());
            let h2 = n[0] * (-s.tan()) + n[1] * (1.0 / (a.tan() * s.cos()));
            let kappa = h1 + h2;
            let a2 = kappa * kappa + h1 * h1 + h2 * h2;
            if (0.05..FRAC_PI_2 - 0.05).contains(&a) {
                assert!((q - 3.0 - a2).abs() < 1e-5 * (1.0 + a2), "m = {m}, t = {t}: {q} vs {}", a2 + 3.0);
            }
        }
    }
}

#[test]
fn nu5_matches_the_lifted_normal_and_has_m_minus_1_zeros() {
    for m in 1..=4u32 {
        let c = Arc::new(shoot_hsiang(m, DEFAULT_TOL).unwrap());
        let nu = known_field(c.clone(), FieldTag::Nu5).unwrap();
        assert!(nu.eval(0.0) > 0.0);
        let ts = sample_times(&c, 800);
        for &t in ts.iter().step_by(20) {
            let (_, _, phi) = fd_frame(&c, t);
            let want = -c.sample(t).p.u1.cos() * phi.sin();
            assert!((nu.eval(t).abs() - want.abs()).abs() < 1e-6, "m = {m}, t = {t}");
        }
        let vals = nu.samples_at(&ts).values;
        let changes = vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(changes, m as usize - 1, "m = {m}");
        if let Markers::Sphere(n) = find_markers(&c).unwrap() {
            for z in n.zeros {
                assert!(nu.eval(z).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn x_dot_nu_starts_at_the_inverse_radius() {
    let base = solve_alencar(3, DEFAULT_TOL).unwrap();
    for ell in 1..=3 {
        let r = base.critical_points[ell - 1].radius;
        let c = Arc::new(truncate_rescale(&base, ell).unwrap());
        let f = known_field(c.clone(), FieldTag::XDotNu).unwrap();
        assert!((f.eval(0.0) - 1.0 / r).abs() < 1e-8, "ell = {ell}");
        let vals = f.samples_at(&sample_times(&c, 1000)).values;
        let changes = vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(changes, ell - 1);
        let raw = |t: f64| {
            let p = c.sample(t).p;
            let (_, _, phi) = fd_frame(&c, t);
            -p.u1 * phi.sin() + p.u2 * phi.cos()
        };
        let sign = raw(1e-3).signum();
        for &t in sample_times(&c, 10).iter() {
            let (got, want) = (f.eval(t), sign * raw(t));
            assert!((got - want).abs() < 1e-6 * (1.0 + want.abs()), "ell = {ell}, t = {t}: {got} vs {want}");
        }
    }
    // Unscaled truncation starts on the unit circle.
    let plain = Arc::new(eqvidx_core::profile::truncate(&base, 1).unwrap());
    let f = known_field(plain, FieldTag::XDotNu).unwrap();
    assert!((f.eval(0.0) - 1.0).abs() < 1e-8);
}

#[test]
fn known_fields_have_converging_residuals() {
    let c = Arc::new(shoot_hsiang(3, DEFAULT_TOL).unwrap());
    let op = reduce_jacobi(c.clone(), BcSpec::natural()).unwrap();
    let nu = known_field(c, FieldTag::Nu5).unwrap();
    let study = residual_study(&op, &|t| nu.eval(t), -3.0, 200, 5).unwrap();
    let orders = observed_orders(&study);
    println!("NU5 on H_3: {study:?} {orders:?}");
    assert!(orders.iter().all(|&o| o >= 1.9), "{orders:?}");

    let base = solve_alencar(2, DEFAULT_TOL).unwrap();
    let a = Arc::new(truncate_rescale(&base, 2).unwrap());
    let op = reduce_jacobi(a.clone(), BcSpec::right(Bc::Dirichlet)).unwrap();
    let x = known_field(a, FieldTag::XDotNu).unwrap();
    let study = residual_study(&op, &|t| x.eval(t), 0.0, 200, 5).unwrap();
    let orders = observed_orders(&study);
    println!("X_DOT_NU on the second annulus: {study:?} {orders:?}");
    assert!(orders.iter().all(|&o| o >= 1.9), "{orders:?}");
    // A wrong eigenvalue leaves an O(1) residual.
    let off = residual_study(&op, &|t| x.eval(t), 0.5, 200, 2).unwrap();
    assert!(off[1].1 > 0.1);
}

#[test]
fn collapsed_and_free_ends_get_the_right_conditions() {
    let base = solve_alencar(1, DEFAULT_TOL).unwrap();
    let a = Arc::new(truncate_rescale(&base, 1).unwrap());
    let err = reduce_jacobi(a.clone(), BcSpec::natural()).unwrap_err();
    assert!(matches!(err, Error::InvalidBoundary(_) | Error::Precondition(_)), "{err}");
    let op = reduce_jacobi(a.clone(), BcSpec::right(Bc::Robin(1.0))).unwrap();
    assert_eq!(op.bc, [Bc::Natural, Bc::Robin(1.0)]);
    assert!(known_field(a, FieldTag::Nu5).is_err());
}
