//! Partition counting for reduced operators.
//!
//! Cutting `[a, b]` into pieces and imposing Dirichlet conditions at the cuts
//! can only raise eigenvalues; imposing Neumann conditions can only lower
//! them. Counting eigenvalues of the pieces therefore bounds the count of the
//! whole interval from both sides.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{Bc, ReducedOperator};
use crate::spectral::{
    assemble, eigenpairs_on, threshold_counts_on, GapMode, MeshFamily, Request, SpectralConfig,
};

/// The pieces of an operator cut at interior points, in the two
/// internalizations.
#[derive(Debug, Clone)]
pub struct Split {
    pub cuts: Vec<f64>,
    pub dirichlet: Vec<ReducedOperator>,
    pub neumann: Vec<ReducedOperator>,
}

impl Split {
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.dirichlet.iter().map(|p| p.interval).collect()
    }
}

fn check_cuts(op: &ReducedOperator, cuts: &[f64]) -> Result<()> {
    let (a, b) = op.interval;
    let mut prev = a;
    for &c in cuts {
        if !(c > prev && c < b) {
            return Err(Error::Precondition(format!(
                "cuts must be sorted, distinct and strictly inside [{a}, {b}]; got {c}"
            )));
        }
        prev = c;
    }
    Ok(())
}

/// Cuts `op` at `cuts`. Cut points get Dirichlet conditions in one
/// internalization and Neumann in the other; outer ends keep their
/// conditions.
pub fn split(op: &ReducedOperator, cuts: &[f64]) -> Result<Split> {
    check_cuts(op, cuts)?;
    if cuts.is_empty() {
        return Ok(Split {
            cuts: Vec::new(),
            dirichlet: vec![op.clone()],
            neumann: vec![op.clone()],
        });
    }
    let mut pts = vec![op.interval.0];
    pts.extend_from_slice(cuts);
    pts.push(op.interval.1);
    let n = pts.len() - 1;
    let build = |inner: Bc| -> Result<Vec<ReducedOperator>> {
        (0..n)
            .map(|i| {
                let left = if i == 0 { op.bc[0] } else { inner };
                let right = if i + 1 == n { op.bc[1] } else { inner };
                op.restrict(pts[i], pts[i + 1], [left, right])
            })
            .collect()
    };
    Ok(Split {
        cuts: cuts.to_vec(),
        dirichlet: build(Bc::Dirichlet)?,
        neumann: build(Bc::Neumann)?,
    })
}

/// Counts `(< t, ≤ t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub strict: usize,
    pub nonstrict: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceCounts {
    pub interval: (f64, f64),
    pub dirichlet: Counts,
    pub neumann: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub cuts: Vec<f64>,
    pub threshold: f64,
    pub pieces: Vec<PieceCounts>,
    /// Lower bound for the strict count, maximized over the distinguished
    /// piece.
    pub mr_lower: usize,
    /// Upper bound for the non-strict count, minimized over the
    /// distinguished piece.
    pub mr_upper: usize,
    /// The bounds with the first piece distinguished.
    pub mr_lower_first: usize,
    pub mr_upper_first: usize,
    pub full: Counts,
}

impl PartitionReport {
    pub fn sandwich_holds(&self) -> bool {
        self.mr_lower <= self.full.strict && self.full.nonstrict <= self.mr_upper
    }
}

fn counts_on(
    op: &ReducedOperator,
    fam: &MeshFamily,
    t: f64,
    mode: GapMode,
    cfg: &SpectralConfig,
) -> Result<Counts> {
    let c = threshold_counts_on(op, fam, t, mode, cfg)?;
    Ok(Counts {
        strict: c.strict,
        nonstrict: c.nonstrict,
    })
}

/// Partition bounds at threshold `t`, with the direct count of the whole
/// interval for comparison. All pieces are meshed by windows of one family
/// that has the cuts as nodes, scaled so each piece starts near the
/// configured base size.
pub fn mr_bounds(
    op: &ReducedOperator,
    cuts: &[f64],
    t: f64,
    mode: GapMode,
    cfg: &SpectralConfig,
) -> Result<PartitionReport> {
    let sp = split(op, cuts)?;
    let fam = MeshFamily::with_cuts(op, cuts, cfg.base_elements * (cuts.len() + 1))?;
    let full = counts_on(op, &fam, t, mode, cfg)?;
    let pieces = sp
        .dirichlet
        .par_iter()
        .zip(sp.neumann.par_iter())
        .map(|(d, n)| {
            let (a, b) = d.interval;
            let w = fam.window(a, b)?;
            Ok(PieceCounts {
                interval: (a, b),
                dirichlet: counts_on(d, &w, t, mode, cfg)?,
                neumann: counts_on(n, &w, t, mode, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lower_with = |j: usize| -> usize {
        pieces
            .iter()
            .enumerate()
            .map(|(i, p)| if i == j { p.dirichlet.strict } else { p.dirichlet.nonstrict })
            .sum()
    };
    let upper_with = |j: usize| -> usize {
        pieces
            .iter()
            .enumerate()
            .map(|(i, p)| if i == j { p.neumann.nonstrict } else { p.neumann.strict })
            .sum()
    };
    let mr_lower = (0..pieces.len()).map(lower_with).max().unwrap_or(0);
    let mr_upper = (0..pieces.len()).map(upper_with).min().unwrap_or(0);
    Ok(PartitionReport {
        cuts: cuts.to_vec(),
        threshold: t,
        mr_lower,
        mr_upper,
        mr_lower_first: lower_with(0),
        mr_upper_first: upper_with(0),
        pieces,
        full,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub lambda: f64,
    /// Robin eigenvalues `< λ`.
    pub robin_strict: usize,
    /// Dirichlet eigenvalues `≤ λ`.
    pub dirichlet_nonstrict: usize,
}

impl ComparisonPoint {
    pub fn holds(&self) -> bool {
        self.robin_strict >= self.dirichlet_nonstrict
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub points: Vec<ComparisonPoint>,
    pub violations: usize,
    pub mesh_size: usize,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `#{Robin < λ} ≥ #{Dirichlet ≤ λ}` on a grid of `λ`. The operators
/// must share coefficients and interval, and differ only at ends where the
/// first is Dirichlet and the second Robin. Counts are inertias on the finer
/// of the two converged meshes; a grid point closer to an eigenvalue than the
/// discretization error is counted as the discrete problem sees it.
pub fn robin_dirichlet_compare(
    op_dir: &ReducedOperator,
    op_rob: &ReducedOperator,
    lambdas: &[f64],
    cfg: &SpectralConfig,
) -> Result<Comparison> {
    if !op_dir.same_coefficients(op_rob) {
        return Err(Error::OperatorMismatch(format!(
            "{} and {} have different coefficients or intervals",
            op_dir.provenance, op_rob.provenance
        )));
    }
    let mut differs = false;
    for end in 0..2 {
        match (op_dir.bc[end], op_rob.bc[end]) {
            (Bc::Dirichlet, Bc::Robin(_)) => differs = true,
            (x, y) if x == y => {}
            (x, y) => {
                return Err(Error::OperatorMismatch(format!(
                    "end {end} has {x} against {y}; expected Dirichlet against Robin"
                )))
            }
        }
    }
    if !differs {
        return Err(Error::OperatorMismatch(
            "no end carries Dirichlet against Robin".into(),
        ));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::Precondition("need a non-empty finite λ grid".into()));
    }
    let top = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fam = MeshFamily::new(op_dir, cfg.base_elements)?;
    let converged = |op: &ReducedOperator| -> Result<_> {
        let base = assemble(op, &fam.mesh(0)?)?;
        let want = base.inertia(top + 1.0 + top.abs()) + 1;
        Ok(eigenpairs_on(op, &fam, Request::Lowest(want), cfg)?.mesh)
    };
    let (md, mr) = rayon::join(|| converged(op_dir), || converged(op_rob));
    let (md, mr) = (md?, mr?);
    // Both problems on one mesh, so the Dirichlet trial space is a subspace
    // of the Robin one.
    let mesh = if md.elements() >= mr.elements() { md } else { mr };
    let dd = assemble(op_dir, &mesh)?;
    let dr = assemble(op_rob, &mesh)?;
    let points: Vec<ComparisonPoint> = lambdas
        .iter()
        .map(|&lambda| ComparisonPoint {
            lambda,
            robin_strict: dr.inertia(lambda),
            dirichlet_nonstrict: dd.inertia(lambda),
        })
        .collect();
    let violations = points.iter().filter(|p| !p.holds()).count();
    Ok(Comparison {
        points,
        violations,
        mesh_size: mesh.elements(),
    })
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
