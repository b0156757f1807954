use eqvidx_core::verify::quick_config;
use eqvidx_core::{fbms_report, hsiang_report, verify_suite, Config, IndexReport};

fn count(r: &IndexReport, key: &str) -> usize {
    *r.counts.get(key).unwrap_or_else(|| panic!("missing count {key}"))
}

fn bound(r: &IndexReport, key: &str) -> usize {
    *r.bounds.get(key).unwrap_or_else(|| panic!("missing bound {key}"))
}

#[test]
fn first_hsiang_report_is_totally_geodesic() {
    let r = hsiang_report(1, &Config::default()).unwrap();
    assert!(r.passed(), "{:?}", r.failed_verdicts());
    assert_eq!(count(&r, "equiv_count_strict_below_minus3"), 0);
    assert_eq!(count(&r, "multiplicity_at_minus3"), 1);
    assert!(r.flags.iter().any(|f| f == "totally geodesic"));
    assert!((r.eigenvalues[0] + 3.0).abs() < 1e-8);
}

#[test]
fn clifford_report_matches_the_product_spectrum() {
    let r = hsiang_report(2, &Config::default()).unwrap();
    assert!(r.passed(), "{:?}", r.failed_verdicts());
    assert_eq!(count(&r, "equiv_count_strict_below_minus3"), 1);
    assert_eq!(count(&r, "multiplicity_at_minus3"), 1);
    assert_eq!(bound(&r, "total_index_at_least"), 6);
    let refs = r.reference.as_ref().unwrap();
    assert_eq!(refs.reference, vec![-6.0, -3.0, 3.0, 12.0]);
    assert!(refs.differences.iter().all(|d| d.abs() < 1e-6), "{:?}", refs.differences);
}

#[test]
fn fourth_hsiang_report_counts() {
    let r = hsiang_report(4, &Config::default()).unwrap();
    assert!(r.passed(), "{:?}", r.failed_verdicts());
    assert_eq!(count(&r, "equiv_count_strict_below_minus3"), 3);
    assert_eq!(count(&r, "multiplicity_at_minus3"), 1);
    assert_eq!(count(&r, "nu5_nodal_domains"), 4);
    assert_eq!(bound(&r, "equivariant_index_at_least"), 4);
    assert_eq!(bound(&r, "total_index_at_least"), 8);
    assert_eq!(bound(&r, "partition_lower_s_cuts"), 3);
    assert_eq!(bound(&r, "partition_upper_t_cuts"), 4);
}

#[test]
fn annulus_reports_count_ell() {
    for ell in [1, 3] {
        let r = fbms_report(ell, &Config::default()).unwrap();
        assert!(r.passed(), "ell = {ell}: {:?}", r.failed_verdicts());
        assert_eq!(count(&r, "dirichlet_negative_count"), ell - 1);
        assert_eq!(count(&r, "dirichlet_nonpositive_count"), ell);
        assert_eq!(count(&r, "dirichlet_multiplicity_at_zero"), 1);
        assert_eq!(count(&r, "x_dot_nu_nodal_domains"), ell);
        assert_eq!(count(&r, "comparison_violations"), 0);
        assert!(count(&r, "robin_negative_count") >= ell);
    }
}

#[test]
fn out_of_range_parameters_are_refused() {
    let cfg = Config::default();
    assert!(hsiang_report(0, &cfg).is_err());
    assert!(hsiang_report(cfg.max_m + 1, &cfg).is_err());
    assert!(fbms_report(0, &cfg).is_err());
    assert!(fbms_report(cfg.max_ell + 1, &cfg).is_err());
}

#[test]
fn reports_are_deterministic_and_cache_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config {
        cache_dir: Some(dir.path().to_path_buf()),
        ..Config::default()
    };
    let cold = hsiang_report(3, &cfg).unwrap().to_json_untimed().unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().count() >= 1);
    let warm = hsiang_report(3, &cfg).unwrap().to_json_untimed().unwrap();
    let uncached = hsiang_report(3, &Config::default()).unwrap().to_json_untimed().unwrap();
    assert_eq!(cold, warm);
    assert_eq!(cold, uncached);

    let v: serde_json::Value = serde_json::from_str(&cold).unwrap();
    for key in ["version", "family", "parameter", "eigenvalues", "counts", "bounds", "verdicts", "timing"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // Floats carry 17 significant digits.
    let sig17 = |l: &str| {
        let t = l.trim().trim_end_matches(',');
        let t = t.rsplit(": ").next().unwrap_or(t);
        t.split_once('.')
            .and_then(|(_, f)| f.split_once('e'))
            .is_some_and(|(digits, _)| digits.len() == 16 && digits.bytes().all(|b| b.is_ascii_digit()))
    };
    assert!(cold.lines().filter(|l| sig17(l)).count() > 10);
    let first = v["eigenvalues"][0].as_f64().unwrap();
    let r = hsiang_report(3, &Config::default()).unwrap();
    assert_eq!(first, r.eigenvalues[0]);
}

#[test]
fn quick_suite_survives_a_looser_tolerance() {
    let cfg = quick_config(&Config {
        tol: 1e-12,
        ..Config::default()
    });
    let s = verify_suite(&cfg);
    for c in &s.criteria {
        println!("{c}");
    }
    assert!(s.errors.is_empty(), "{:?}", s.errors);
    assert!(s.passed());
}
