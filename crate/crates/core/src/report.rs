//! Index reports: the full pipeline from curve to counts, with cross-checks.

use std::collections::BTreeMap;
use std::io;
use std::sync::Arc;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::{CachedHsiang, CurveCache};
use crate::config::Config;
use crate::error::{Error, Result, StageExt};
use crate::jacobi::{known_field, reduce_jacobi, Bc, BcSpec, FieldTag, ReducedOperator};
use crate::partition::{lambda_grid, mr_bounds, robin_dirichlet_compare, split, Comparison, PartitionReport};
use crate::profile::{
    find_markers, shoot_hsiang_all, solve_alencar, truncate, truncate_rescale, Markers,
    ProfileCurve, ShootConfig,
};
use crate::spectral::{
    assemble, eigenpairs, nodal_domains, observed_orders, residual_study, threshold_counts,
    GapMode, Mesh, Request, SpectralConfig, SpectralResult,
};

pub const REPORT_VERSION: &str = "1";

/// Threshold of the `A_ℓ` partition sandwich. Pieces cut in the conical
/// region carry eigenvalues within `1e-3` of zero.
pub const FBMS_PARTITION_THRESHOLD: f64 = -0.5;

/// Closed-form invariant spectrum of `S²(√(2/3)) × S¹(√(1/3))`, lowest four.
pub const CLIFFORD_H2_SPECTRUM: [f64; 4] = [-6.0, -3.0, 3.0, 12.0];

/// `e^{2π/√7}`, the ratio of successive critical radii of a Jacobi field
/// `r^γ` on the cone with `γ(γ+1) + 2 = 0`, i.e. `γ = (−1 ± i√7)/2`.
pub fn cone_ratio() -> f64 {
    (2.0 * std::f64::consts::PI / 7f64.sqrt()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Hsiang,
    Fbms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub length: f64,
    /// Launch coordinates of all solutions found; the first is used.
    pub launches: Vec<f64>,
    /// Departure from orthogonal incidence at both ends, radians.
    pub end_defects: [f64; 2],
    pub crossings: Vec<f64>,
    pub markers: Markers,
    pub minimality_residual: f64,
}

/// An eigenvalue of one partition piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceEigenvalue {
    pub interval: (f64, f64),
    pub bc: [String; 2],
    pub index: usize,
    pub value: f64,
    pub error: f64,
    pub simple: bool,
}

/// A spectrum computed alongside a closed-form reference, without a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpectrum {
    pub label: String,
    pub reference: Vec<f64>,
    pub computed: Vec<f64>,
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStudy {
    pub field: String,
    pub lambda: f64,
    pub elements: Vec<usize>,
    pub residuals: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ResidualStudy {
    fn new(field: FieldTag, lambda: f64, study: &[(usize, f64)]) -> Self {
        ResidualStudy {
            field: field.name().to_string(),
            lambda,
            elements: study.iter().map(|s| s.0).collect(),
            residuals: study.iter().map(|s| s.1).collect(),
            orders: observed_orders(study),
        }
    }

    pub fn last(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    /// Whether the residual reaches `target` with every observed order up to
    /// that level at least `min_order`. A field already below `1e-2·target`
    /// on the coarsest mesh is exact up to rounding and passes if it stays
    /// below `target`.
    pub fn converges(&self, target: f64, min_order: f64) -> bool {
        if self.residuals.first().is_some_and(|&r| r <= 1e-2 * target) {
            return self.residuals.iter().all(|&r| r <= target);
        }
        match self.residuals.iter().position(|&r| r <= target) {
            Some(k) if k > 0 => self.orders[..k].iter().all(|&o| o >= min_order),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub version: String,
    pub family: Family,
    pub parameter: u32,
    /// Lowest eigenvalues of the reduced operator (Richardson extrapolated).
    pub eigenvalues: Vec<f64>,
    pub error_estimates: Vec<f64>,
    pub counts: BTreeMap<String, usize>,
    pub bounds: BTreeMap<String, usize>,
    pub residuals: BTreeMap<String, f64>,
    pub mesh: BTreeMap<String, usize>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub curve: CurveSummary,
    pub partitions: Vec<PartitionReport>,
    pub pieces: Vec<PieceEigenvalue>,
    pub residual_study: ResidualStudy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpectrum>,
    pub flags: Vec<String>,
    pub timing: Timing,
}

impl IndexReport {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn failed_verdicts(&self) -> Vec<&str> {
        self.verdicts
            .iter()
            .filter(|(_, &v)| !v)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// The report as JSON with floats at 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    /// JSON with the timing field zeroed, for byte comparisons.
    pub fn to_json_untimed(&self) -> Result<String> {
        let mut r = self.clone();
        r.timing.seconds = 0.0;
        to_json(&r)
    }
}

/// Pretty printing with every float written to 17 significant digits.
struct Sig17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with floats at 17 significant digits; output ends in a newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = Sig17(serde_json::ser::PrettyFormatter::new());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::InternalConsistency(e.to_string()))
}

fn put<K: Into<String>, V>(map: &mut BTreeMap<String, V>, k: K, v: V) {
    map.insert(k.into(), v);
}

/// `∫ u w V` by the trapezoid rule on the mesh nodes.
fn weighted_dot(op: &ReducedOperator, mesh: &Mesh, u: &[f64], w: &[f64]) -> f64 {
    let x = &mesh.nodes;
    let mut s = 0.0;
    for i in 0..x.len() - 1 {
        let h = x[i + 1] - x[i];
        let f = |j: usize| u[j] * w[j] * op.weight_at(x[j]);
        s += 0.5 * h * (f(i) + f(i + 1));
    }
    s
}

/// Cosine of the weighted angle between an eigenfunction and a field.
fn witness_alignment(op: &ReducedOperator, res: &SpectralResult, i: usize, w: &[f64]) -> f64 {
    let u = &res.eigenfunctions[i];
    let uw = weighted_dot(op, &res.mesh, u, w);
    let uu = weighted_dot(op, &res.mesh, u, u);
    let ww = weighted_dot(op, &res.mesh, w, w);
    (uw / (uu * ww).sqrt()).abs()
}

pub fn curve_summary(curve: &ProfileCurve, launches: Vec<f64>) -> Result<CurveSummary> {
    Ok(CurveSummary {
        length: curve.length,
        launches,
        end_defects: [curve.ends[0].incidence_defect, curve.ends[1].incidence_defect],
        crossings: curve.crossings.clone(),
        markers: find_markers(curve)?,
        minimality_residual: curve.minimality_residual(),
    })
}

/// `H_m` and the launches found, from the cache when available.
pub fn hsiang_curve(m: u32, cfg: &Config) -> Result<CachedHsiang> {
    let cache = cfg.cache_dir.as_ref().map(CurveCache::new);
    if let Some(hit) = cache.as_ref().and_then(|c| c.load_hsiang(m, cfg.tol)) {
        return Ok(hit);
    }
    let shoot = ShootConfig {
        tol: cfg.tol,
        ..ShootConfig::default()
    };
    let sol = shoot_hsiang_all(m, &shoot)?;
    if let Some(c) = &cache {
        if let Err(e) = c.store_hsiang(m, cfg.tol, &sol.launches, &sol.curve) {
            log::warn!("could not write the curve cache: {e}");
        }
    }
    Ok(CachedHsiang {
        curve: sol.curve,
        launches: sol.launches,
    })
}

/// Alencar's profile and its truncation `A_ℓ`, rescaled to the unit ball.
pub fn fbms_curve(ell: usize, cfg: &Config) -> Result<(ProfileCurve, ProfileCurve)> {
    if ell == 0 || ell > cfg.max_ell {
        return Err(Error::Precondition(format!("ell must lie in 1..={}", cfg.max_ell)));
    }
    let alencar = solve_alencar(ALENCAR_CRITICALS.max(ell), cfg.tol).stage("alencar")?;
    let curve = truncate_rescale(&alencar, ell).stage("truncation")?;
    Ok((alencar, curve))
}

fn piece_eigenvalue(
    op: &ReducedOperator,
    index: usize,
    cfg: &SpectralConfig,
) -> Result<PieceEigenvalue> {
    let res = eigenpairs(op, Request::Lowest(index + 2), cfg)?;
    Ok(PieceEigenvalue {
        interval: op.interval,
        bc: [op.bc[0].to_string(), op.bc[1].to_string()],
        index,
        value: res.eigenvalues[index],
        error: res.error_estimate[index],
        simple: res.is_simple(index),
    })
}

/// The equivariant index report for `H_m`.
pub fn hsiang_report(m: u32, cfg: &Config) -> Result<IndexReport> {
    if m == 0 || m > cfg.max_m {
        return Err(Error::Precondition(format!("m must lie in 1..={}", cfg.max_m)));
    }
    let clock = Instant::now();
    let sp = &cfg.spectral;
    let mu = m as usize;
    let solved = hsiang_curve(m, cfg).stage("shooting")?;
    let curve = Arc::new(solved.curve);
    let summary = curve_summary(&curve, solved.launches).stage("markers")?;
    let Markers::Sphere(nodal) = summary.markers.clone() else {
        return Err(Error::InternalConsistency("H_m markers are not spherical".into()));
    };
    let op = reduce_jacobi(curve.clone(), BcSpec::natural()).stage("reduction")?;
    let nu = known_field(curve.clone(), FieldTag::Nu5).stage("reduction")?;

    let at3 = threshold_counts(&op, -3.0, GapMode::KnownEigenvalue, sp).stage("counting")?;
    let at0 = threshold_counts(&op, 0.0, GapMode::Generic, sp).stage("counting")?;
    let res = eigenpairs(&op, Request::Lowest((at3.nonstrict + 2).max(4)), sp).stage("eigenpairs")?;
    let i3 = res
        .nearest(-3.0)
        .ok_or_else(|| Error::InternalConsistency("empty spectrum".into()))?;
    let nu_mesh: Vec<f64> = res.mesh.nodes.iter().map(|&t| nu.eval(t)).collect();
    let nu_domains = nodal_domains(&nu_mesh)?;
    let alignment = witness_alignment(&op, &res, i3, &nu_mesh);
    let gram = res.gram_defect(&op)?;

    let study = residual_study(&op, &|t| nu.eval(t), -3.0, sp.base_elements, cfg.residual_levels)
        .stage("residual study")?;
    let study = ResidualStudy::new(FieldTag::Nu5, -3.0, &study);

    let (ps, pt) = rayon::join(
        || mr_bounds(&op, &nodal.zeros, -3.0, GapMode::KnownEigenvalue, sp),
        || mr_bounds(&op, &nodal.criticals, -3.0, GapMode::KnownEigenvalue, sp),
    );
    let (ps, pt) = (ps.stage("partition")?, pt.stage("partition")?);

    let mut pieces = Vec::new();
    if m >= 2 {
        let ds = split(&op, &nodal.zeros)?.dirichlet;
        let ns = split(&op, &nodal.criticals)?.neumann;
        let jobs: Vec<(&ReducedOperator, usize)> = ds
            .iter()
            .map(|d| (d, 0))
            .chain(ns.iter().map(|n| (n, 1)))
            .collect();
        pieces = jobs
            .par_iter()
            .map(|&(p, k)| piece_eigenvalue(p, k, sp))
            .collect::<Result<Vec<_>>>()
            .stage("piece spectra")?;
    }

    let strict = at3.strict;
    let mult = at3.multiplicity;
    let equivariant = strict + mult;
    let overlap = 1;
    let total = equivariant + 5 - overlap;

    let mut counts = BTreeMap::new();
    put(&mut counts, "equiv_count_strict_below_minus3", strict);
    put(&mut counts, "multiplicity_at_minus3", mult);
    put(&mut counts, "count_at_most_minus3", at3.nonstrict);
    put(&mut counts, "equivariant_index", at0.strict);
    put(&mut counts, "nu5_nodal_domains", nu_domains);
    put(&mut counts, "s_markers", nodal.zeros.len());
    put(&mut counts, "t_markers", nodal.criticals.len());
    put(&mut counts, "shooting_solutions", summary.launches.len());

    let mut bounds = BTreeMap::new();
    put(&mut bounds, "equivariant_index_at_least", equivariant);
    put(&mut bounds, "total_index_at_least", total);
    put(&mut bounds, "nu5_overlap", overlap);
    put(&mut bounds, "partition_lower_s_cuts", ps.mr_lower);
    put(&mut bounds, "partition_upper_t_cuts", pt.mr_upper);

    let mut residuals = BTreeMap::new();
    put(&mut residuals, "nu5_residual", study.last());
    put(&mut residuals, "eigenvalue_minus3_offset", res.eigenvalues[i3] + 3.0);
    put(&mut residuals, "eigenvalue_minus3_error", res.error_estimate[i3]);
    put(&mut residuals, "nu5_alignment_defect", 1.0 - alignment);
    put(&mut residuals, "gram_defect", gram);
    put(&mut residuals, "endpoint_orthogonality", summary.end_defects[1]);
    put(&mut residuals, "minimality", summary.minimality_residual);

    let mut mesh = BTreeMap::new();
    put(&mut mesh, "spectrum_elements", res.mesh_size);
    put(&mut mesh, "count_elements", at3.mesh_size);
    put(&mut mesh, "base_elements", sp.base_elements);

    let mut tolerances = BTreeMap::new();
    put(&mut tolerances, "integrator", cfg.tol);
    put(&mut tolerances, "spectral_target", sp.target_tol);
    put(&mut tolerances, "count_gap", at3.gap);

    let mut v = BTreeMap::new();
    put(&mut v, "theorem_exactly_m_minus_1_below_minus3", strict == mu - 1);
    put(&mut v, "theorem_minus3_simple", mult == 1 && res.is_simple(i3));
    put(&mut v, "minus3_within_1e-5", (res.eigenvalues[i3] + 3.0).abs() <= 1e-5);
    put(&mut v, "nu5_witness", nu_domains == mu && res.nodal_counts[i3] == mu && alignment > 1.0 - 1e-6);
    put(&mut v, "nu5_residual_converges", study.converges(1e-6, 1.9));
    put(&mut v, "equivariant_index_at_least_m", at0.strict >= mu && equivariant == mu);
    put(&mut v, "total_index_identity", total == strict + 5 && total == mu + 4);
    put(&mut v, "partition_lower_equals_m_minus_1", ps.mr_lower == mu - 1);
    put(&mut v, "partition_upper_equals_m", pt.mr_upper == mu);
    put(&mut v, "partition_sandwich", ps.sandwich_holds() && pt.sandwich_holds());
    put(
        &mut v,
        "cross_validation",
        ps.mr_lower <= strict && at3.nonstrict <= pt.mr_upper,
    );
    put(&mut v, "endpoint_orthogonality", summary.end_defects[1] <= 1e-8);
    put(&mut v, "marker_counts", nodal.zeros.len() == mu - 1 && nodal.criticals.len() == mu.saturating_sub(2));
    put(&mut v, "gram_orthonormal", gram <= 1e-8);
    if m >= 2 {
        put(
            &mut v,
            "lemma_dirichlet_pieces_minus3",
            pieces.iter().filter(|p| p.index == 0).all(|p| (p.value + 3.0).abs() <= 1e-5),
        );
        put(
            &mut v,
            "lemma_neumann_pieces_minus3",
            pieces
                .iter()
                .filter(|p| p.index == 1)
                .all(|p| (p.value + 3.0).abs() <= 1e-5 && p.simple),
        );
    }

    let mut flags = Vec::new();
    if m == 1 {
        flags.push("totally geodesic".to_string());
    }
    if summary.launches.len() > 1 {
        flags.push(format!(
            "{} shooting solutions; the smallest |s0| is reported",
            summary.launches.len()
        ));
    }
    let reference = (m == 2).then(|| {
        let computed: Vec<f64> = res.eigenvalues.iter().take(4).copied().collect();
        ReferenceSpectrum {
            label: "invariant spectrum of S^2(sqrt(2/3)) x S^1(sqrt(1/3))".into(),
            reference: CLIFFORD_H2_SPECTRUM.to_vec(),
            differences: computed.iter().zip(CLIFFORD_H2_SPECTRUM).map(|(a, b)| a - b).collect(),
            computed,
        }
    });

    let seconds = clock.elapsed().as_secs_f64();
    info!("H_{m}: counts ({strict}, {mult}) in {seconds:.1} s");
    Ok(IndexReport {
        version: REPORT_VERSION.into(),
        family: Family::Hsiang,
        parameter: m,
        eigenvalues: res.eigenvalues.clone(),
        error_estimates: res.error_estimate.clone(),
        counts,
        bounds,
        residuals,
        mesh,
        tolerances,
        verdicts: v,
        curve: summary,
        partitions: vec![ps, pt],
        pieces,
        residual_study: study,
        comparison: None,
        reference,
        flags,
        timing: Timing { seconds },
    })
}

/// Critical points solved on Alencar's profile: enough for every report
/// and for the cone asymptotics.
const ALENCAR_CRITICALS: usize = 6;

/// The equivariant index report for the free boundary torus `A_ℓ`.
pub fn fbms_report(ell: usize, cfg: &Config) -> Result<IndexReport> {
    if ell == 0 || ell > cfg.max_ell {
        return Err(Error::Precondition(format!("ell must lie in 1..={}", cfg.max_ell)));
    }
    let clock = Instant::now();
    let sp = SpectralConfig {
        base_elements: cfg.spectral.base_elements * ell,
        ..cfg.spectral
    };
    let (alencar, curve) = fbms_curve(ell, cfg)?;
    let r_ell = alencar.critical_points[ell - 1].radius;
    let curve = Arc::new(curve);
    let summary = curve_summary(&curve, vec![curve.launch]).stage("markers")?;
    let dir = reduce_jacobi(curve.clone(), BcSpec::right(Bc::Dirichlet)).stage("reduction")?;
    let rob = reduce_jacobi(curve.clone(), BcSpec::right(Bc::Robin(1.0))).stage("reduction")?;
    let xnu = known_field(curve.clone(), FieldTag::XDotNu).stage("reduction")?;

    let (dc, rc) = rayon::join(
        || threshold_counts(&dir, 0.0, GapMode::KnownEigenvalue, &sp),
        || threshold_counts(&rob, 0.0, GapMode::Generic, &sp),
    );
    let (dc, rc) = (dc.stage("counting")?, rc.stage("counting")?);
    let res = eigenpairs(&dir, Request::Lowest(dc.nonstrict + 1), &sp).stage("eigenpairs")?;
    let i0 = res
        .nearest(0.0)
        .ok_or_else(|| Error::InternalConsistency("empty spectrum".into()))?;
    let w: Vec<f64> = res.mesh.nodes.iter().map(|&t| xnu.eval(t)).collect();
    let w_domains = nodal_domains(&w)?;
    let alignment = witness_alignment(&dir, &res, i0, &w);
    let gram = res.gram_defect(&dir)?;
    let lmin = res.eigenvalues[0];
    let grid = lambda_grid(lmin - 1.0, lmin + 10.0, 50);
    let cmp = robin_dirichlet_compare(&dir, &rob, &grid, &sp).stage("comparison")?;

    let study = residual_study(
        &dir,
        &|t| xnu.eval(t),
        0.0,
        cfg.spectral.base_elements,
        cfg.residual_levels,
    )
    .stage("residual study")?;
    let study = ResidualStudy::new(FieldTag::XDotNu, 0.0, &study);

    // Midpoints between consecutive critical points, the last one paired with L.
    let mut marks: Vec<f64> = curve.critical_points[..ell - 1].iter().map(|c| c.t).collect();
    marks.push(curve.length);
    let cuts: Vec<f64> = marks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let (pd, pr) = rayon::join(
        || mr_bounds(&dir, &cuts, FBMS_PARTITION_THRESHOLD, GapMode::Generic, &sp),
        || mr_bounds(&rob, &cuts, FBMS_PARTITION_THRESHOLD, GapMode::Generic, &sp),
    );
    let (pd, pr) = (pd.stage("partition")?, pr.stage("partition")?);

    // The same problem before rescaling, on the corresponding mesh: discrete
    // eigenvalues must scale by r_ℓ².
    let plain = Arc::new(truncate(&alencar, ell).stage("truncation")?);
    let plain_op = reduce_jacobi(plain, BcSpec::right(Bc::Dirichlet)).stage("reduction")?;
    let scaled_mesh = Mesh::new(res.mesh.nodes.iter().map(|t| t * r_ell).collect())?;
    let d_plain = assemble(&plain_op, &scaled_mesh)?;
    let d_resc = assemble(&dir, &res.mesh)?;
    let mut scaling_defect: f64 = 0.0;
    for k in 0..res.indices.len() {
        let a = d_resc.eigenvalue(k)?;
        let b = d_plain.eigenvalue(k)? * r_ell * r_ell;
        scaling_defect = scaling_defect.max((a - b).abs() / a.abs().max(1.0));
    }
    let plain_negative = d_plain.inertia(-1e-6 / (r_ell * r_ell));
    let resc_negative = d_resc.inertia(-1e-6);

    let mut counts = BTreeMap::new();
    put(&mut counts, "robin_negative_count", rc.strict);
    put(&mut counts, "dirichlet_nonpositive_count", dc.nonstrict);
    put(&mut counts, "dirichlet_negative_count", dc.strict);
    put(&mut counts, "dirichlet_multiplicity_at_zero", dc.multiplicity);
    put(&mut counts, "x_dot_nu_nodal_domains", w_domains);
    put(&mut counts, "comparison_violations", cmp.violations);

    let mut bounds = BTreeMap::new();
    put(&mut bounds, "equivariant_index_at_least", rc.strict);
    put(&mut bounds, "partition_lower_dirichlet", pd.mr_lower);
    put(&mut bounds, "partition_upper_dirichlet", pd.mr_upper);
    put(&mut bounds, "partition_lower_robin", pr.mr_lower);
    put(&mut bounds, "partition_upper_robin", pr.mr_upper);

    let mut residuals = BTreeMap::new();
    put(&mut residuals, "x_dot_nu_residual", study.last());
    put(&mut residuals, "eigenvalue_zero_offset", res.eigenvalues[i0]);
    put(&mut residuals, "eigenvalue_zero_error", res.error_estimate[i0]);
    put(&mut residuals, "x_dot_nu_alignment_defect", 1.0 - alignment);
    put(&mut residuals, "gram_defect", gram);
    put(&mut residuals, "free_boundary_orthogonality", summary.end_defects[1]);
    put(&mut residuals, "free_end_radius_defect", (end_radius(&curve) - 1.0).abs());
    put(&mut residuals, "scaling_defect", scaling_defect);
    put(&mut residuals, "minimality", summary.minimality_residual);
    put(&mut residuals, "truncation_radius", r_ell);

    let mut mesh = BTreeMap::new();
    put(&mut mesh, "spectrum_elements", res.mesh_size);
    put(&mut mesh, "count_elements", dc.mesh_size);
    put(&mut mesh, "comparison_elements", cmp.mesh_size);
    put(&mut mesh, "base_elements", sp.base_elements);

    let mut tolerances = BTreeMap::new();
    put(&mut tolerances, "integrator", cfg.tol);
    put(&mut tolerances, "spectral_target", sp.target_tol);
    put(&mut tolerances, "count_gap", dc.gap);

    let mut v = BTreeMap::new();
    put(&mut v, "theorem_robin_count_at_least_ell", rc.strict >= ell);
    put(&mut v, "zero_within_1e-5", res.eigenvalues[i0].abs() <= 1e-5);
    put(&mut v, "x_dot_nu_witness", w_domains == ell && res.nodal_counts[i0] == ell && alignment > 1.0 - 1e-6);
    put(&mut v, "exactly_ell_minus_1_negative", dc.strict == ell - 1);
    put(&mut v, "dirichlet_nonpositive_equals_ell", dc.nonstrict == ell);
    put(&mut v, "robin_dominates_dirichlet", cmp.passed() && rc.strict >= dc.nonstrict);
    put(&mut v, "partition_sandwich", pd.sandwich_holds() && pr.sandwich_holds());
    put(&mut v, "scaling_consistent", scaling_defect <= 1e-6 && plain_negative == resc_negative);
    put(&mut v, "free_boundary_orthogonality", summary.end_defects[1] <= 1e-8);
    put(&mut v, "gram_orthonormal", gram <= 1e-8);

    let seconds = clock.elapsed().as_secs_f64();
    info!("A_{ell}: Robin count {} in {seconds:.1} s", rc.strict);
    Ok(IndexReport {
        version: REPORT_VERSION.into(),
        family: Family::Fbms,
        parameter: ell as u32,
        eigenvalues: res.eigenvalues.clone(),
        error_estimates: res.error_estimate.clone(),
        counts,
        bounds,
        residuals,
        mesh,
        tolerances,
        verdicts: v,
        curve: summary,
        partitions: vec![pd, pr],
        pieces: Vec::new(),
        residual_study: study,
        comparison: Some(cmp),
        reference: None,
        flags: Vec::new(),
        timing: Timing { seconds },
    })
}

fn end_radius(curve: &ProfileCurve) -> f64 {
    let s = curve.sample(curve.length);
    s.p.u1.hypot(s.p.u2)
}

/// Critical radii of Alencar's profile against the cone prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    pub target: f64,
    /// `|r_{k+1}/r_k − target| / target` for the last available `k`.
    pub final_relative_error: f64,
    /// `|θ|` at each critical point.
    pub theta: Vec<f64>,
}

pub fn cone_asymptotics(criticals: usize, tol: f64) -> Result<ConeReport> {
    let a = solve_alencar(criticals, tol)?;
    let radii: Vec<f64> = a.critical_points.iter().map(|c| c.radius).collect();
    let ratios: Vec<f64> = radii.windows(2).map(|w| w[1] / w[0]).collect();
    let target = cone_ratio();
    let final_relative_error = ratios
        .last()
        .map(|r| (r - target).abs() / target)
        .unwrap_or(f64::NAN);
    Ok(ConeReport {
        theta: a.critical_points.iter().map(|c| c.theta.abs()).collect(),
        radii,
        ratios,
        target,
        final_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_written_with_17_digits() {
        let s = to_json(&vec![1.0f64, -3.0, 0.1]).unwrap();
        assert!(s.contains("1.0000000000000000e0"), "{s}");
        assert!(s.contains("-3.0000000000000000e0"), "{s}");
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![1.0, -3.0, 0.1]);
    }

    #[test]
    fn cone_ratio_from_indicial_roots() {
        // γ = (−1 ± i√7)/2; successive critical radii differ by e^{π/Im γ}.
        let im = 7f64.sqrt() / 2.0;
        assert!((cone_ratio() - (std::f64::consts::PI / im).exp()).abs() < 1e-12);
        assert!((cone_ratio() - 10.749087).abs() < 1e-5);
    }

    #[test]
    fn residual_study_verdicts() {
        let mk = |r: Vec<f64>| {
            let s: Vec<(usize, f64)> = r.iter().enumerate().map(|(i, &x)| (100 << i, x)).collect();
            ResidualStudy::new(FieldTag::Nu5, -3.0, &s)
        };
        assert!(mk(vec![1e-4, 2.5e-5, 6.2e-6, 1.6e-6, 4e-7]).converges(1e-6, 1.9));
        assert!(!mk(vec![1e-4, 5e-5, 2.5e-5, 1.2e-5]).converges(1e-6, 1.9));
        assert!(!mk(vec![1e-4, 2.5e-5, 6.2e-6, 6e-6]).converges(1e-6, 1.9));
        assert!(mk(vec![1e-11, 3e-10, 2e-8]).converges(1e-6, 1.9));
        assert!(!mk(vec![1e-11, 3e-10, 2e-6]).converges(1e-6, 1.9));
    }
}
