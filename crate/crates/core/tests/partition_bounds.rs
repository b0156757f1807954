use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use eqvidx_core::jacobi::FnCoefficients;
use eqvidx_core::partition::lambda_grid;
use eqvidx_core::profile::{find_markers, Markers};
use eqvidx_core::verify::random_operator;
use eqvidx_core::{
    mr_bounds, reduce_jacobi, robin_dirichlet_compare, shoot_hsiang, split, Bc, BcSpec, Error,
    GapMode, ReducedOperator, SpectralConfig, DEFAULT_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shifted(q: f64, bc: [Bc; 2]) -> ReducedOperator {
    let c = Arc::new(FnCoefficients {
        weight: |_| 1.0,
        potential: move |_| q,
    });
    ReducedOperator::new(c, (0.0, PI), bc, 64, "shifted").unwrap()
}

#[test]
fn halved_interval_has_closed_form_counts() {
    // Full: k² − 2. Dirichlet halves: 4k² − 2. Mixed halves: (2k − 1)² − 2.
    let o = shifted(2.0, [Bc::Dirichlet; 2]);
    let r = mr_bounds(&o, &[FRAC_PI_2], 0.0, GapMode::Generic, &SpectralConfig::default()).unwrap();
    assert_eq!((r.full.strict, r.full.nonstrict), (1, 1));
    for p in &r.pieces {
        assert_eq!((p.dirichlet.strict, p.dirichlet.nonstrict), (0, 0));
        assert_eq!((p.neumann.strict, p.neumann.nonstrict), (1, 1));
    }
    assert_eq!((r.mr_lower, r.mr_upper), (0, 2));
    assert!(r.sandwich_holds());

    let sp = split(&o, &[FRAC_PI_2]).unwrap();
    assert_eq!(sp.intervals(), vec![(0.0, FRAC_PI_2), (FRAC_PI_2, PI)]);
    assert_eq!(sp.neumann[0].bc, [Bc::Dirichlet, Bc::Neumann]);
    assert_eq!(sp.neumann[1].bc, [Bc::Neumann, Bc::Dirichlet]);
    assert_eq!(sp.dirichlet[1].bc, [Bc::Dirichlet, Bc::Dirichlet]);
}

#[test]
fn bad_cuts_are_rejected() {
    let o = shifted(0.0, [Bc::Dirichlet; 2]);
    for cuts in [vec![0.0], vec![PI], vec![2.0, 1.0], vec![1.0, 1.0], vec![4.0]] {
        assert!(split(&o, &cuts).is_err(), "{cuts:?}");
    }
}

#[test]
fn hsiang_nodal_cuts_give_equality_for_small_m() {
    for m in 2..=4u32 {
        let c = Arc::new(shoot_hsiang(m, DEFAULT_TOL).unwrap());
        let Markers::Sphere(n) = find_markers(&c).unwrap() else { unreachable!() };
        let o = reduce_jacobi(c, BcSpec::natural()).unwrap();
        let cfg = SpectralConfig::default();
        let ps = mr_bounds(&o, &n.zeros, -3.0, GapMode::KnownEigenvalue, &cfg).unwrap();
        assert_eq!(ps.mr_lower, m as usize - 1, "m = {m}");
        assert_eq!(ps.full.strict, m as usize - 1);
        if m >= 3 {
            let pt = mr_bounds(&o, &n.criticals, -3.0, GapMode::KnownEigenvalue, &cfg).unwrap();
            assert_eq!(pt.mr_upper, m as usize, "m = {m}");
            assert!(pt.sandwich_holds());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_counts_sandwich_the_full_count(seed in any::<u64>(), t in -8.0..25.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = random_operator(&mut rng).unwrap();
        let k = rng.gen_range(1..=3);
        let mut cuts: Vec<f64> = (0..k).map(|_| rng.gen_range(0.15..PI - 0.15)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() < 0.1);
        match mr_bounds(&o, &cuts, t, GapMode::Generic, &SpectralConfig::default()) {
            Ok(r) => {
                prop_assert!(r.sandwich_holds(), "{:?}", r);
                prop_assert!(r.mr_lower_first <= r.mr_lower && r.mr_upper <= r.mr_upper_first);
            }
            Err(e) => prop_assert!(matches!(e.root(), Error::Ambiguous { .. }), "{}", e),
        }
    }

    #[test]
    fn robin_never_exceeds_dirichlet(r0 in -3.0..3.0f64, r1 in -3.0..3.0f64, a in -0.5..0.5f64) {
        let c = Arc::new(FnCoefficients {
            weight: move |t: f64| 1.0 + a * t.sin(),
            potential: move |t: f64| 2.0 + a * (3.0 * t).cos(),
        });
        let d = ReducedOperator::new(c, (0.0, PI), [Bc::Dirichlet; 2], 64, "d").unwrap();
        let rb = d.with_bc([Bc::Robin(r0), Bc::Robin(r1)]).unwrap();
        let grid = lambda_grid(-20.0, 40.0, 37);
        let cmp = robin_dirichlet_compare(&d, &rb, &grid, &SpectralConfig::default()).unwrap();
        prop_assert_eq!(cmp.violations, 0);
        for p in &cmp.points {
            prop_assert!(p.robin_strict >= p.dirichlet_nonstrict);
        }
    }
}
