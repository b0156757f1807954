use std::f64::consts::PI;
use std::sync::Arc;

use eqvidx_core::jacobi::FnCoefficients;
use eqvidx_core::spectral::{assemble, count_below, Mesh};
use eqvidx_core::{
    eigenpairs, reduce_jacobi, shoot_hsiang, threshold_counts, Bc, BcSpec, GapMode,
    ReducedOperator, Request, SpectralConfig, DEFAULT_TOL,
};
use proptest::prelude::*;

fn op_with(
    v: impl Fn(f64) -> f64 + Send + Sync + 'static,
    q: impl Fn(f64) -> f64 + Send + Sync + 'static,
    b: f64,
    bc: [Bc; 2],
) -> ReducedOperator {
    let c = Arc::new(FnCoefficients { weight: v, potential: q });
    ReducedOperator::new(c, (0.0, b), bc, 128, "test").unwrap()
}

fn smooth(c: [f64; 4], bc: [Bc; 2]) -> ReducedOperator {
    op_with(
        move |t| 1.0 + c[0] * (t + c[1]).sin(),
        move |t| c[2] + c[3] * (2.0 * t).cos(),
        PI,
        bc,
    )
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    (-0.6..0.6f64, 0.0..PI, -3.0..3.0f64, -2.0..2.0f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

#[test]
fn natural_end_reproduces_bessel_zeros() {
    // −(t u')'/t = λu on [0, 1], u(1) = 0: λ = j₀,ₖ².
    let j0 = [2.404_825_557_695_773, 5.520_078_110_286_311, 8.653_727_912_911_013];
    let o = op_with(|t| t, |_| 0.0, 1.0, [Bc::Natural, Bc::Dirichlet]);
    let r = eigenpairs(&o, Request::Lowest(3), &SpectralConfig::default()).unwrap();
    for (got, j) in r.eigenvalues.iter().zip(j0) {
        assert!((got - j * j).abs() < 1e-7 * j * j, "{got} vs {}", j * j);
    }
}

#[test]
fn two_natural_ends_reproduce_legendre_values() {
    // −(sin t u')'/sin t on [0, π]: λ = k(k + 1).
    let o = op_with(|t| t.sin().max(0.0), |_| 0.0, PI, [Bc::Natural, Bc::Natural]);
    let r = eigenpairs(&o, Request::Lowest(4), &SpectralConfig::default()).unwrap();
    for (k, got) in r.eigenvalues.iter().enumerate() {
        let want = (k * (k + 1)) as f64;
        assert!((got - want).abs() < 1e-7 * want.max(1.0), "{k}: {got}");
        assert_eq!(r.nodal_counts[k], k + 1);
    }
}

#[test]
fn window_request_matches_lowest() {
    let o = smooth([0.3, 0.4, 1.0, 0.5], [Bc::Dirichlet, Bc::Neumann]);
    let cfg = SpectralConfig::default();
    let low = eigenpairs(&o, Request::Lowest(4), &cfg).unwrap();
    let hi = low.eigenvalues[3] + 0.5 * (low.eigenvalues[3] - low.eigenvalues[2]);
    let win = eigenpairs(&o, Request::Window(f64::NEG_INFINITY, hi), &cfg).unwrap();
    assert_eq!(win.eigenvalues.len(), 4);
    for (a, b) in low.eigenvalues.iter().zip(&win.eigenvalues) {
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn equator_meridian_has_nothing_below_minus_three() {
    let c = Arc::new(shoot_hsiang(1, DEFAULT_TOL).unwrap());
    let o = reduce_jacobi(c, BcSpec::natural()).unwrap();
    let cfg = SpectralConfig::default();
    assert_eq!(count_below(&o, -3.0 - 1e-3, true, &cfg).unwrap(), 0);
    let at = threshold_counts(&o, -3.0, GapMode::KnownEigenvalue, &cfg).unwrap();
    assert_eq!((at.strict, at.nonstrict, at.multiplicity), (0, 1, 1));
    // Next invariant eigenvalue of the meridian: 8 − 3 = 5.
    let r = eigenpairs(&o, Request::Lowest(2), &cfg).unwrap();
    assert!((r.eigenvalues[1] - 5.0).abs() < 1e-6, "{}", r.eigenvalues[1]);
}

#[test]
fn ambiguous_thresholds_are_refused_in_generic_mode() {
    let o = op_with(|_| 1.0, |_| 0.0, PI, [Bc::Dirichlet, Bc::Dirichlet]);
    let err = threshold_counts(&o, 4.0, GapMode::Generic, &SpectralConfig::default()).unwrap_err();
    assert!(matches!(err, eqvidx_core::Error::Ambiguous { .. }), "{err}");
    let c = threshold_counts(&o, 4.0, GapMode::KnownEigenvalue, &SpectralConfig::default()).unwrap();
    assert_eq!((c.strict, c.nonstrict), (1, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundary_conditions_order_the_spectrum(c in coeffs(), r in 0.05..2.0f64) {
        let mesh = Mesh::uniform(0.0, PI, 160).unwrap();
        let d = assemble(&smooth(c, [Bc::Dirichlet; 2]), &mesh).unwrap();
        let n = assemble(&smooth(c, [Bc::Neumann; 2]), &mesh).unwrap();
        let rb = assemble(&smooth(c, [Bc::Robin(r), Bc::Neumann]), &mesh).unwrap();
        for k in 0..5 {
            let (ld, ln, lr) = (d.eigenvalue(k).unwrap(), n.eigenvalue(k).unwrap(), rb.eigenvalue(k).unwrap());
            prop_assert!(ln <= ld + 1e-10, "k = {}: N {} > D {}", k, ln, ld);
            prop_assert!(lr <= ln + 1e-10, "k = {}: R {} > N {}", k, lr, ln);
        }
    }

    #[test]
    fn inertia_counts_the_computed_eigenvalues(c in coeffs(), lam in -5.0..40.0f64) {
        let mesh = Mesh::uniform(0.0, PI, 120).unwrap();
        let d = assemble(&smooth(c, [Bc::Dirichlet, Bc::Neumann]), &mesh).unwrap();
        let evs: Vec<f64> = (0..12).map(|k| d.eigenvalue(k).unwrap()).collect();
        prop_assume!(evs.iter().all(|e| (e - lam).abs() > 1e-8));
        prop_assume!(lam < evs[11]);
        let below = evs.iter().filter(|&&e| e < lam).count();
        prop_assert_eq!(d.inertia(lam), below);
    }

    #[test]
    fn eigenvalues_converge_at_second_order(c in coeffs()) {
        let o = smooth(c, [Bc::Dirichlet, Bc::Dirichlet]);
        let lam: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&n| assemble(&o, &Mesh::uniform(0.0, PI, n).unwrap()).unwrap().eigenvalue(1).unwrap())
            .collect();
        let ratio = (lam[0] - lam[1]) / (lam[1] - lam[2]);
        prop_assert!(ratio >= 3.5, "ratio {}", ratio);
    }

    #[test]
    fn eigenfunctions_are_orthonormal_and_obey_courant(c in coeffs(), robin in -1.0..1.0f64) {
        let o = smooth(c, [Bc::Robin(robin), Bc::Dirichlet]);
        let cfg = SpectralConfig::default();
        let r = eigenpairs(&o, Request::Lowest(4), &cfg).unwrap();
        prop_assert!(r.gram_defect(&o).unwrap() <= 1e-8);
        for k in 0..4 {
            prop_assert_eq!(r.nodal_counts[k], k + 1);
            prop_assert!(r.error_estimate[k] <= cfg.target_tol * r.eigenvalues[k].abs().max(1.0));
        }
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] < w[1]));
    }
}
