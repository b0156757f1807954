//! Piecewise-linear finite elements for reduced operators.
//!
//! Stiffness and mass are symmetric tridiagonal, so the number of
//! eigenvalues below `λ` is the number of negative pivots of `K − λM`
//! (Sylvester). Eigenvalues are isolated by bisection on that count,
//! eigenfunctions by inverse iteration, and accuracy is controlled by
//! doubling the mesh and Richardson extrapolation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{Bc, ReducedOperator};

const GAUSS: f64 = 0.288_675_134_594_812_9; // 1 / (2√3)

/// Nodes of a one-dimensional mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(nodes: Vec<f64>) -> Result<Mesh> {
        if nodes.len() < 2 {
            return Err(Error::Mesh("a mesh needs at least one element".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Mesh("mesh nodes must be finite and increasing".into()));
        }
        Ok(Mesh { nodes })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Mesh> {
        let n = n.max(1);
        let mut nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        nodes[n] = b;
        Mesh::new(nodes)
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// The sub-mesh on `[a, b]`; both must be nodes.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Mesh> {
        let i = self.nodes.iter().position(|&t| t == a);
        let j = self.nodes.iter().position(|&t| t == b);
        match (i, j) {
            (Some(i), Some(j)) if i < j => Mesh::new(self.nodes[i..=j].to_vec()),
            _ => Err(Error::Mesh(format!("[{a}, {b}] is not spanned by mesh nodes"))),
        }
    }
}

/// Smooth map from a uniform reference coordinate `u ∈ [0, 1]` to
/// arclength. The map equidistributes a density derived from the local
/// curvature scale and is composed with a quadratic grading toward natural
/// ends, so element sizes there shrink like the square of the bulk size.
/// With both ends natural the grading is `u²/(u² + (1−u)²)`.
#[derive(Debug)]
struct MeshMap {
    t: Vec<f64>,
    w: Vec<f64>,
    dens: Vec<f64>,
    natural: [bool; 2],
}

const TABLE_MIN: usize = 4096;

impl MeshMap {
    fn new(op: &ReducedOperator) -> MeshMap {
        let (a, b) = op.interval;
        let len = b - a;
        let mut t: Vec<f64> = (0..=TABLE_MIN)
            .map(|i| a + len * i as f64 / TABLE_MIN as f64)
            .collect();
        for w in op.grid.windows(2) {
            t.push(w[0]);
            t.push(0.5 * (w[0] + w[1]));
        }
        t.retain(|&x| x >= a && x <= b);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * len);
        *t.first_mut().unwrap() = a;
        *t.last_mut().unwrap() = b;
        let dens: Vec<f64> = t
            .iter()
            .map(|&x| {
                let s = op.density_at(x);
                (s * s + 1.0 / (len * len)).sqrt()
            })
            .collect();
        let mut w = vec![0.0; t.len()];
        for i in 1..t.len() {
            w[i] = w[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (t[i] - t[i - 1]);
        }
        MeshMap {
            t,
            w,
            dens,
            natural: [op.bc[0] == Bc::Natural, op.bc[1] == Bc::Natural],
        }
    }

    fn total(&self) -> f64 {
        *self.w.last().unwrap()
    }

    fn w_at(&self, x: f64) -> f64 {
        let j = self.t.partition_point(|&s| s <= x).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let s = ((x - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (d0, d1) = (self.dens[j - 1], self.dens[j]);
        let h = t1 - t0;
        // Integral of the linear interpolant of the density.
        self.w[j - 1] + h * (d0 * s + 0.5 * (d1 - d0) * s * s)
    }

    /// Inverse of `w_at` by cubic Hermite interpolation with slopes `1/w'`.
    fn invert(&self, target: f64) -> f64 {
        let n = self.t.len();
        let j = self.w.partition_point(|&s| s <= target).clamp(1, n - 1);
        let (w0, w1) = (self.w[j - 1], self.w[j]);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let h = w1 - w0;
        if h <= 0.0 {
            return t0;
        }
        let s = ((target - w0) / h).clamp(0.0, 1.0);
        let (m0, m1) = (h / self.dens[j - 1], h / self.dens[j]);
        let s2 = s * s;
        let s3 = s2 * s;
        let x = (2.0 * s3 - 3.0 * s2 + 1.0) * t0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * t1
            + (s3 - s2) * m1;
        x.clamp(t0, t1)
    }

    fn grade(&self, u: f64) -> f64 {
        match self.natural {
            [false, false] => u,
            [true, false] => u * u,
            [false, true] => u * (2.0 - u),
            [true, true] => {
                let (a, b) = (u * u, (1.0 - u) * (1.0 - u));
                a / (a + b)
            }
        }
    }

    fn ungrade(&self, y: f64) -> f64 {
        match self.natural {
            [false, false] => y,
            [true, false] => y.sqrt(),
            [false, true] => 1.0 - (1.0 - y).max(0.0).sqrt(),
            [true, true] => {
                let y = y.clamp(0.0, 1.0);
                let r = (y / (1.0 - y)).sqrt();
                if r.is_finite() {
                    r / (1.0 + r)
                } else {
                    1.0
                }
            }
        }
    }

    fn to_u(&self, x: f64) -> f64 {
        self.ungrade(self.w_at(x) / self.total())
    }

    fn from_u(&self, u: f64) -> f64 {
        self.invert(self.grade(u) * self.total())
    }
}

/// A nested family of graded meshes on an operator's interval (or a window
/// of it), optionally with prescribed interior nodes. Level `k` has
/// `2^k` times the elements of level 0 in every piece.
#[derive(Debug, Clone)]
pub struct MeshFamily {
    map: Arc<MeshMap>,
    /// `(a, b, base elements)` per piece.
    pieces: Vec<(f64, f64, usize)>,
    window: (f64, f64),
}

impl MeshFamily {
    pub fn new(op: &ReducedOperator, base_elements: usize) -> Result<MeshFamily> {
        Self::with_cuts(op, &[], base_elements)
    }

    /// Meshes with every cut as a node.
    pub fn with_cuts(
        op: &ReducedOperator,
        cuts: &[f64],
        base_elements: usize,
    ) -> Result<MeshFamily> {
        let (a, b) = op.interval;
        let mut pts = vec![a];
        for &c in cuts {
            if !(c > *pts.last().unwrap() && c < b) {
                return Err(Error::Precondition(format!(
                    "cuts must be sorted, distinct and interior; got {c}"
                )));
            }
            pts.push(c);
        }
        pts.push(b);
        let map = Arc::new(MeshMap::new(op));
        let pieces = pts
            .windows(2)
            .map(|w| {
                let frac = map.to_u(w[1]) - map.to_u(w[0]);
                let n = ((base_elements as f64 * frac).ceil() as usize).max(4);
                (w[0], w[1], n)
            })
            .collect();
        Ok(MeshFamily {
            map,
            pieces,
            window: (a, b),
        })
    }

    /// The same family seen on `[a, b]`, which must be a union of pieces.
    pub fn window(&self, a: f64, b: f64) -> Result<MeshFamily> {
        let ok_a = self.pieces.iter().any(|p| p.0 == a);
        let ok_b = self.pieces.iter().any(|p| p.1 == b);
        if !(ok_a && ok_b && a < b) {
            return Err(Error::Mesh(format!("[{a}, {b}] is not a union of mesh pieces")));
        }
        let mut f = self.clone();
        f.window = (a, b);
        Ok(f)
    }

    pub fn mesh(&self, level: u32) -> Result<Mesh> {
        let (wa, wb) = self.window;
        let mut nodes = vec![wa];
        for &(a, b, n0) in &self.pieces {
            if a < wa || b > wb {
                continue;
            }
            let n = n0 << level;
            let (ua, ub) = (self.map.to_u(a), self.map.to_u(b));
            for i in 1..n {
                let x = self.map.from_u(ua + (ub - ua) * i as f64 / n as f64);
                nodes.push(x.clamp(a, b));
            }
            nodes.push(b);
        }
        nodes.dedup();
        Mesh::new(nodes)
    }

    pub fn base_elements(&self) -> usize {
        self.pieces
            .iter()
            .filter(|p| p.0 >= self.window.0 && p.1 <= self.window.1)
            .map(|p| p.2)
            .sum()
    }
}

/// Assembled stiffness and mass over the free nodes of a mesh.
#[derive(Debug, Clone)]
pub struct Discrete {
    pub mesh: Mesh,
    /// Index of the first free node.
    offset: usize,
    pub kd: Vec<f64>,
    pub ke: Vec<f64>,
    pub md: Vec<f64>,
    pub me: Vec<f64>,
}

/// Assembles the piecewise-linear stiffness `∫V u'v' − ∫qV uv` (plus Robin
/// terms) and mass `∫V uv` with two-point Gauss quadrature.
pub fn assemble(op: &ReducedOperator, mesh: &Mesh) -> Result<Discrete> {
    let (a, b) = op.interval;
    let nodes = &mesh.nodes;
    let n = nodes.len();
    let tol = 1e-12 * (b - a);
    if (nodes[0] - a).abs() > tol || (nodes[n - 1] - b).abs() > tol {
        return Err(Error::Mesh(format!(
            "mesh spans [{}, {}], operator [{a}, {b}]",
            nodes[0],
            nodes[n - 1]
        )));
    }
    let mut kd = vec![0.0; n];
    let mut ke = vec![0.0; n - 1];
    let mut md = vec![0.0; n];
    let mut me = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let (x0, x1) = (nodes[i], nodes[i + 1]);
        let h = x1 - x0;
        let mid = 0.5 * (x0 + x1);
        for g in [-GAUSS, GAUSS] {
            let x = mid + g * h;
            let wq = 0.5 * h;
            let v = op.weight_at(x);
            let qv = op.potential_at(x) * v;
            let pr = (x - x0) / h;
            let pl = 1.0 - pr;
            let stiff = wq * v / (h * h);
            kd[i] += stiff - wq * qv * pl * pl;
            kd[i + 1] += stiff - wq * qv * pr * pr;
            ke[i] += -stiff - wq * qv * pl * pr;
            md[i] += wq * v * pl * pl;
            md[i + 1] += wq * v * pr * pr;
            me[i] += wq * v * pl * pr;
        }
    }
    if let Bc::Robin(r) = op.bc[0] {
        kd[0] -= r * op.weight_at(a);
    }
    if let Bc::Robin(r) = op.bc[1] {
        kd[n - 1] -= r * op.weight_at(b);
    }
    let lo = usize::from(op.bc[0] == Bc::Dirichlet);
    let hi = n - usize::from(op.bc[1] == Bc::Dirichlet);
    if hi <= lo {
        return Err(Error::Mesh("no free nodes left".into()));
    }
    let kd = kd[lo..hi].to_vec();
    let md = md[lo..hi].to_vec();
    let ke = ke[lo..hi - 1].to_vec();
    let me = me[lo..hi - 1].to_vec();
    if let Some(i) = md.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Mesh(format!(
            "non-positive mass at node {} (t = {})",
            i + lo,
            mesh.nodes[i + lo]
        )));
    }
    Ok(Discrete {
        mesh: mesh.clone(),
        offset: lo,
        kd,
        ke,
        md,
        me,
    })
}

impl Discrete {
    pub fn dim(&self) -> usize {
        self.kd.len()
    }

    /// Number of eigenvalues strictly below `lambda` (negative pivots of
    /// `K − λM`).
    pub fn inertia(&self, lambda: f64) -> usize {
        let n = self.dim();
        let mut count = 0;
        let mut p = self.kd[0] - lambda * self.md[0];
        let scale = |i: usize| (self.kd[i].abs() + lambda.abs() * self.md[i]).max(f64::MIN_POSITIVE);
        let pivmin = |i: usize| scale(i) * f64::EPSILON * f64::EPSILON;
        if p.abs() < pivmin(0) {
            p = -pivmin(0);
        }
        if p < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e = self.ke[i - 1] - lambda * self.me[i - 1];
            p = self.kd[i] - lambda * self.md[i] - e * e / p;
            if p.abs() < pivmin(i) {
                p = -pivmin(i);
            }
            if p < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bracket(&self, k: usize) -> (f64, f64) {
        let mut lo = -1.0;
        while self.inertia(lo) > k {
            lo *= 2.0;
        }
        let mut hi = 1.0;
        while self.inertia(hi) <= k {
            hi *= 2.0;
        }
        (lo, hi)
    }

    /// The `k`-th (zero-based) eigenvalue.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::Precondition(format!(
                "eigenvalue {k} requested of a {}-dimensional problem",
                self.dim()
            )));
        }
        let (mut lo, mut hi) = self.bracket(k);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.inertia(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn apply_k(&self, x: &[f64]) -> Vec<f64> {
        sym_matvec(&self.kd, &self.ke, x)
    }

    pub fn apply_m(&self, x: &[f64]) -> Vec<f64> {
        sym_matvec(&self.md, &self.me, x)
    }

    pub fn m_dot(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.apply_m(x), y)
    }

    /// Eigenvector for the (isolated) eigenvalue `lambda`, M-normalized,
    /// orthogonalized against `against`, and signed positive at its first
    /// significant node.
    pub fn eigenvector(&self, lambda: f64, against: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.dim();
        let shift = lambda - 1e-10 * (1.0 + lambda.abs());
        let d: Vec<f64> = (0..n).map(|i| self.kd[i] - shift * self.md[i]).collect();
        let e: Vec<f64> = (0..n - 1).map(|i| self.ke[i] - shift * self.me[i]).collect();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            let rhs = self.apply_m(&x);
            x = solve_tridiag(&d, &e, &rhs)?;
            for y in against {
                let c = self.m_dot(&x, y);
                x.iter_mut().zip(y).for_each(|(a, b)| *a -= c * b);
            }
            let nrm = self.m_dot(&x, &x).sqrt();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return Err(Error::InternalConsistency(
                    "inverse iteration collapsed".into(),
                ));
            }
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        let amax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(v) = x.iter().find(|v| v.abs() >= 1e-3 * amax) {
            if *v < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
        }
        Ok(x)
    }

    /// Free-node vector extended by zeros at Dirichlet nodes.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.nodes.len()];
        full[self.offset..self.offset + x.len()].copy_from_slice(x);
        full
    }

    /// Nodal interpolant of `f` on the free nodes.
    pub fn interpolate(&self, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| f(self.mesh.nodes[i + self.offset]))
            .collect()
    }

    /// `‖(K − λM)u‖_{M⁻¹} / ‖u‖_M`, the discrete weighted-L² eigen-residual.
    pub fn residual(&self, u: &[f64], lambda: f64) -> Result<f64> {
        let ku = self.apply_k(u);
        let mu = self.apply_m(u);
        let r: Vec<f64> = ku.iter().zip(&mu).map(|(k, m)| k - lambda * m).collect();
        let z = solve_tridiag(&self.md, &self.me, &r)?;
        let den = dot(&mu, u);
        if !(den > 0.0) {
            return Err(Error::DegenerateFunction);
        }
        Ok((dot(&r, &z).max(0.0) / den).sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sym_matvec(d: &[f64], e: &[f64], x: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut y: Vec<f64> = (0..n).map(|i| d[i] * x[i]).collect();
    for i in 0..n - 1 {
        y[i] += e[i] * x[i + 1];
        y[i + 1] += e[i] * x[i];
    }
    y
}

fn solve_tridiag(d: &[f64], e: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut piv = if d[0].abs() < tiny { tiny } else { d[0] };
    x[0] = b[0] / piv;
    for i in 1..n {
        c[i - 1] = e[i - 1] / piv;
        piv = d[i] - e[i - 1] * c[i - 1];
        if piv.abs() < tiny {
            piv = tiny;
        }
        x[i] = (b[i] - e[i - 1] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InternalConsistency("tridiagonal solve overflowed".into()));
    }
    Ok(x)
}

/// Accuracy controls for spectral computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub base_elements: usize,
    /// Mesh doublings allowed beyond the base.
    pub max_level: u32,
    /// Target Richardson error, relative to `max(1, |λ|)`.
    pub target_tol: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            base_elements: 400,
            max_level: 8,
            target_tol: 1e-7,
        }
    }
}

/// Which eigenvalues to compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Request {
    Lowest(usize),
    /// Eigenvalues in `[lo, hi)` on the finest mesh.
    Window(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
    pub first: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Richardson-extrapolated eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues on the finest mesh.
    pub raw: Vec<f64>,
    pub error_estimate: Vec<f64>,
    /// Zero-based index of each eigenvalue in the full spectrum.
    pub indices: Vec<usize>,
    /// Samples on `mesh` nodes, M-orthonormal.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub nodal_counts: Vec<usize>,
    pub mesh: Mesh,
    pub mesh_size: usize,
    pub clusters: Vec<Cluster>,
}

impl SpectralResult {
    /// Whether the `i`-th reported eigenvalue is alone in its cluster with
    /// neighbouring clusters at least `100·error` away.
    pub fn is_simple(&self, i: usize) -> bool {
        let Some(ci) = self
            .clusters
            .iter()
            .position(|c| c.first <= i && i < c.first + c.multiplicity)
        else {
            return false;
        };
        let c = &self.clusters[ci];
        if c.multiplicity != 1 {
            return false;
        }
        let err = self.error_estimate[i].max(1e-12);
        let gap_lo = ci.checked_sub(1).map(|j| c.value - self.clusters[j].value);
        let gap_hi = self.clusters.get(ci + 1).map(|n| n.value - c.value);
        gap_lo.is_none_or(|g| g >= 100.0 * err) && gap_hi.is_none_or(|g| g >= 100.0 * err)
    }

    /// Index of the eigenvalue closest to `target`.
    pub fn nearest(&self, target: f64) -> Option<usize> {
        (0..self.eigenvalues.len())
            .min_by(|&a, &b| {
                (self.eigenvalues[a] - target)
                    .abs()
                    .total_cmp(&(self.eigenvalues[b] - target).abs())
            })
    }

    /// Largest deviation of the weighted Gram matrix from the identity.
    pub fn gram_defect(&self, op: &ReducedOperator) -> Result<f64> {
        let d = assemble(op, &self.mesh)?;
        let vs: Vec<Vec<f64>> = self
            .eigenfunctions
            .iter()
            .map(|u| u[d.offset..d.offset + d.dim()].to_vec())
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..vs.len() {
            for j in 0..=i {
                let g = d.m_dot(&vs[i], &vs[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        Ok(worst)
    }
}

fn cluster(values: &[f64], errs: &[f64]) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let tol = 1e-8f64.max(10.0 * errs[i]);
        match out.last_mut() {
            Some(c) if (v - values[c.first + c.multiplicity - 1]).abs() <= tol => {
                c.value = (c.value * c.multiplicity as f64 + v) / (c.multiplicity + 1) as f64;
                c.multiplicity += 1;
            }
            _ => out.push(Cluster {
                value: v,
                multiplicity: 1,
                first: i,
            }),
        }
    }
    out
}

/// Number of nodal domains: one plus the sign changes among samples above
/// `1e-7·max|u|`.
pub fn nodal_domains(values: &[f64]) -> Result<usize> {
    let amax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(amax > 0.0) || !amax.is_finite() {
        return Err(Error::DegenerateFunction);
    }
    let thr = 1e-7 * amax;
    let mut last = 0.0;
    let mut count = 1;
    for &v in values {
        if v.abs() <= thr {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    Ok(count)
}

fn indices_for(d: &Discrete, req: Request) -> Vec<usize> {
    match req {
        Request::Lowest(k) => (0..k.min(d.dim())).collect(),
        Request::Window(lo, hi) => (d.inertia(lo)..d.inertia(hi)).collect(),
    }
}

/// Eigenpairs on the default graded mesh family of `op`.
pub fn eigenpairs(op: &ReducedOperator, req: Request, cfg: &SpectralConfig) -> Result<SpectralResult> {
    let fam = MeshFamily::new(op, cfg.base_elements)?;
    eigenpairs_on(op, &fam, req, cfg)
}

const SETTLED_SEPARATION: f64 = 1e3;
const SETTLED_ERROR: f64 = 1e-4;

struct Converged {
    fine: Discrete,
    idx: Vec<usize>,
    lam_c: Vec<f64>,
    lam_f: Vec<f64>,
    errs: Vec<f64>,
}

/// Doubles the mesh until the Richardson error is below target, either for
/// every requested eigenvalue or, with `focus`, only for the three whose
/// positions bracket that value. A bracketing eigenvalue farther than
/// `SETTLED_SEPARATION` errors from the focus, with relative error at most
/// `SETTLED_ERROR`, is settled on its side and needs no further refinement.
fn converge(
    op: &ReducedOperator,
    fam: &MeshFamily,
    req: Request,
    cfg: &SpectralConfig,
    focus: Option<f64>,
) -> Result<Converged> {
    let mut coarse = assemble(op, &fam.mesh(0)?)?;
    let mut coarse_vals: Option<Vec<f64>> = None;
    let mut worst = f64::INFINITY;
    for level in 1..=cfg.max_level {
        let fine = assemble(op, &fam.mesh(level)?)?;
        let idx = indices_for(&fine, req);
        let lam_c = match coarse_vals.take() {
            Some(v) if v.len() == idx.len() => v,
            _ => idx
                .iter()
                .map(|&k| coarse.eigenvalue(k))
                .collect::<Result<Vec<_>>>()?,
        };
        let lam_f = idx
            .iter()
            .map(|&k| fine.eigenvalue(k))
            .collect::<Result<Vec<_>>>()?;
        let errs: Vec<f64> = lam_c.iter().zip(&lam_f).map(|(c, f)| (f - c).abs() / 3.0).collect();
        let rel = |i: usize| errs[i] / lam_f[i].abs().max(1.0);
        worst = match focus {
            None => (0..lam_f.len()).map(rel).fold(0.0, f64::max),
            Some(t) => {
                let below = lam_f.iter().filter(|&&l| l < t).count();
                (below.saturating_sub(1)..(below + 2).min(lam_f.len()))
                    .filter(|&i| {
                        rel(i) > SETTLED_ERROR || (lam_f[i] - t).abs() <= SETTLED_SEPARATION * errs[i]
                    })
                    .map(rel)
                    .fold(0.0, f64::max)
            }
        };
        if worst <= cfg.target_tol {
            return Ok(Converged {
                fine,
                idx,
                lam_c,
                lam_f,
                errs,
            });
        }
        coarse_vals = Some(lam_f);
        coarse = fine;
    }
    Err(Error::BudgetExceeded(format!(
        "eigenvalue error {worst:e} above {:e} after {} mesh doublings ({} elements)",
        cfg.target_tol,
        cfg.max_level,
        coarse.mesh.elements()
    )))
}

fn extrapolate(c: &Converged) -> Vec<f64> {
    c.lam_c.iter().zip(&c.lam_f).map(|(c, f)| f + (f - c) / 3.0).collect()
}

/// Eigenpairs with mesh doubling until every requested eigenvalue has
/// Richardson error below the target.
pub fn eigenpairs_on(
    op: &ReducedOperator,
    fam: &MeshFamily,
    req: Request,
    cfg: &SpectralConfig,
) -> Result<SpectralResult> {
    let c = converge(op, fam, req, cfg, None)?;
    let extrap = extrapolate(&c);
    let mut funcs: Vec<Vec<f64>> = Vec::new();
    let mut free: Vec<Vec<f64>> = Vec::new();
    for &l in &c.lam_f {
        let v = c.fine.eigenvector(l, &free)?;
        funcs.push(c.fine.expand(&v));
        free.push(v);
    }
    let nodal_counts = funcs
        .iter()
        .map(|f| nodal_domains(f))
        .collect::<Result<Vec<_>>>()?;
    let clusters = cluster(&extrap, &c.errs);
    Ok(SpectralResult {
        eigenvalues: extrap,
        raw: c.lam_f,
        error_estimate: c.errs,
        indices: c.idx,
        eigenfunctions: funcs,
        nodal_counts,
        mesh_size: c.fine.mesh.elements(),
        mesh: c.fine.mesh.clone(),
        clusters,
    })
}

/// How to treat a threshold that may coincide with an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapMode {
    /// Any eigenvalue within the gap is an error.
    Generic,
    /// The threshold is a known eigenvalue; report its multiplicity.
    KnownEigenvalue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCounts {
    pub threshold: f64,
    /// Eigenvalues `< threshold`.
    pub strict: usize,
    /// Eigenvalues `≤ threshold`.
    pub nonstrict: usize,
    pub multiplicity: usize,
    pub gap: f64,
    pub mesh_size: usize,
    /// Extrapolated eigenvalues nearest the threshold, below and above.
    pub neighbours: (Option<f64>, Option<f64>),
}

/// Counts eigenvalues below and at `threshold` on the default mesh family.
pub fn threshold_counts(
    op: &ReducedOperator,
    threshold: f64,
    mode: GapMode,
    cfg: &SpectralConfig,
) -> Result<ThresholdCounts> {
    let fam = MeshFamily::new(op, cfg.base_elements)?;
    threshold_counts_on(op, &fam, threshold, mode, cfg)
}

/// Strict and non-strict counts at `threshold`: inertia at
/// `threshold ∓ gap` on the converged mesh, with `gap = max(1e-8, 100·err)`
/// from the Richardson errors of the eigenvalues bracketing the threshold
/// that are not settled on one side, cross-checked against the extrapolated
/// eigenvalues.
pub fn threshold_counts_on(
    op: &ReducedOperator,
    fam: &MeshFamily,
    threshold: f64,
    mode: GapMode,
    cfg: &SpectralConfig,
) -> Result<ThresholdCounts> {
    if !threshold.is_finite() {
        return Err(Error::Precondition("threshold must be finite".into()));
    }
    let base = assemble(op, &fam.mesh(0)?)?;
    let mut want = base.inertia(threshold + 1e-3 * (1.0 + threshold.abs())) + 2;
    loop {
        let c = converge(op, fam, Request::Lowest(want), cfg, Some(threshold))?;
        let vals = extrapolate(&c);
        let n = vals.len();
        let below = vals.iter().filter(|&&l| l < threshold).count();
        let lo = below.checked_sub(1);
        let hi = (below < n).then_some(below);
        let mut err: f64 = 0.0;
        for i in [lo, hi, hi.map(|h| h + 1)].into_iter().flatten() {
            if i < n && (vals[i] - threshold).abs() <= SETTLED_SEPARATION * c.errs[i] {
                err = err.max(c.errs[i]);
            }
        }
        if mode == GapMode::KnownEigenvalue {
            for (i, l) in vals.iter().enumerate() {
                if (l - threshold).abs() <= 1e-3 * (1.0 + threshold.abs()) {
                    err = err.max(c.errs[i]);
                }
            }
        }
        let gap = 1e-8f64.max(100.0 * err);
        let strict = c.fine.inertia(threshold - gap);
        let nonstrict = c.fine.inertia(threshold + gap);
        if nonstrict + 1 >= n && n < c.fine.dim() {
            want = nonstrict + 3;
            continue;
        }
        let ev_strict = vals.iter().filter(|&&l| l < threshold - gap).count();
        let ev_nonstrict = vals.iter().filter(|&&l| l <= threshold + gap).count();
        if ev_strict != strict || ev_nonstrict != nonstrict {
            return Err(Error::InternalConsistency(format!(
                "inertia counts ({strict}, {nonstrict}) disagree with eigenvalue counts \
                 ({ev_strict}, {ev_nonstrict}) at {threshold}"
            )));
        }
        let near = vals.iter().copied().find(|l| (l - threshold).abs() <= gap);
        if mode == GapMode::Generic && strict != nonstrict {
            return Err(Error::Ambiguous {
                threshold,
                gap,
                eigenvalue: near.unwrap_or(f64::NAN),
            });
        }
        let neighbours = (vals[..strict].last().copied(), vals.get(nonstrict).copied());
        return Ok(ThresholdCounts {
            threshold,
            strict,
            nonstrict,
            multiplicity: nonstrict - strict,
            gap,
            mesh_size: c.fine.mesh.elements(),
            neighbours,
        });
    }
}

/// Number of eigenvalues below (`strict`) or at most (`!strict`) `lambda`.
pub fn count_below(
    op: &ReducedOperator,
    lambda: f64,
    strict: bool,
    cfg: &SpectralConfig,
) -> Result<usize> {
    let c = threshold_counts(op, lambda, GapMode::Generic, cfg)?;
    Ok(if strict { c.strict } else { c.nonstrict })
}

/// Eigen-residual of a known field at `lambda` on successive levels of the
/// default mesh family, as `(elements, residual)`.
pub fn residual_study(
    op: &ReducedOperator,
    field: &dyn Fn(f64) -> f64,
    lambda: f64,
    base_elements: usize,
    levels: u32,
) -> Result<Vec<(usize, f64)>> {
    let fam = MeshFamily::new(op, base_elements)?;
    (0..levels)
        .map(|l| {
            let d = assemble(op, &fam.mesh(l)?)?;
            let u = d.interpolate(field);
            Ok((d.mesh.elements(), d.residual(&u, lambda)?))
        })
        .collect()
}

/// Observed convergence orders `log2(r_k / r_{k+1})`.
pub fn observed_orders(study: &[(usize, f64)]) -> Vec<f64> {
    study
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).log2())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::FnCoefficients;
    use std::f64::consts::PI;

    fn op(v: fn(f64) -> f64, q: fn(f64) -> f64, a: f64, b: f64, bc: [Bc; 2]) -> ReducedOperator {
        let c = Arc::new(FnCoefficients {
            weight: v,
            potential: q,
        });
        ReducedOperator::new(c, (a, b), bc, 64, "test").unwrap()
    }

    #[test]
    fn dirichlet_interval_converges_at_second_order() {
        let o = op(|_| 1.0, |_| 0.0, 0.0, PI, [Bc::Dirichlet, Bc::Dirichlet]);
        let mut errs = Vec::new();
        for n in [20, 40, 80, 160] {
            let d = assemble(&o, &Mesh::uniform(0.0, PI, n).unwrap()).unwrap();
            errs.push(d.eigenvalue(0).unwrap() - 1.0);
        }
        for w in errs.windows(2) {
            assert!(w[0] / w[1] > 3.5, "{errs:?}");
        }
        let r = eigenpairs(&o, Request::Lowest(4), &SpectralConfig::default()).unwrap();
        for (k, l) in r.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((l - exact).abs() < 1e-6 * exact, "{k}: {l}");
            assert_eq!(r.nodal_counts[k], k + 1);
        }
        assert!(r.gram_defect(&o).unwrap() < 1e-8);
    }

    #[test]
    fn robin_interval_has_one_negative_eigenvalue() {
        // u = cosh(k(x − 1/2)) with k·tanh(k/2) = 1.
        let mut k: f64 = 1.5;
        for _ in 0..50 {
            let f = k * (k / 2.0).tanh() - 1.0;
            let df = (k / 2.0).tanh() + k / 2.0 / (k / 2.0).cosh().powi(2);
            k -= f / df;
        }
        let o = op(|_| 1.0, |_| 0.0, 0.0, 1.0, [Bc::Robin(1.0), Bc::Robin(1.0)]);
        let r = eigenpairs(&o, Request::Lowest(2), &SpectralConfig::default()).unwrap();
        assert!((r.eigenvalues[0] + k * k).abs() < 1e-6, "{} vs {}", r.eigenvalues[0], -k * k);
        assert!(r.eigenvalues[1] > 0.0);
        assert_eq!(count_below(&o, 0.0, true, &SpectralConfig::default()).unwrap(), 1);
    }

    #[test]
    fn shifted_dirichlet_counts() {
        let o = op(|_| 1.0, |_| 2.0, 0.0, PI, [Bc::Dirichlet, Bc::Dirichlet]);
        let cfg = SpectralConfig::default();
        assert_eq!(count_below(&o, 0.0, true, &cfg).unwrap(), 1);
        assert_eq!(count_below(&o, -5.0, true, &cfg).unwrap(), 0);
        let err = count_below(&o, -1.0, true, &cfg).unwrap_err();
        assert!(matches!(err, Error::Ambiguous { .. }));
        let c = threshold_counts(&o, -1.0, GapMode::KnownEigenvalue, &cfg).unwrap();
        assert_eq!((c.strict, c.nonstrict, c.multiplicity), (0, 1, 1));
    }

    #[test]
    fn natural_end_admits_constants() {
        // V = t on [0, 1] with a Neumann right end: the lowest eigenvalue
        // of −(t u')'/t is 0 with constant eigenfunction.
        let o = op(|t| t, |_| 0.0, 0.0, 1.0, [Bc::Natural, Bc::Neumann]);
        let r = eigenpairs(&o, Request::Lowest(2), &SpectralConfig::default()).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-8);
        assert_eq!(r.nodal_counts[0], 1);
        // Second eigenvalue: j₁,₁² (zeros of J₀').
        let j11 = 3.831_705_970_207_512_3_f64;
        assert!((r.eigenvalues[1] - j11 * j11).abs() < 1e-5, "{}", r.eigenvalues[1]);
    }

    #[test]
    fn nodal_domain_examples() {
        assert_eq!(nodal_domains(&[1.0, 1.0, 1.0]).unwrap(), 1);
        assert_eq!(nodal_domains(&[1.0, 1e-12, -1.0, 0.5]).unwrap(), 3);
        assert!(matches!(nodal_domains(&[0.0, 0.0]), Err(Error::DegenerateFunction)));
    }

    #[test]
    fn mesh_family_is_nested_in_counts_and_keeps_cuts() {
        let o = op(|t| t * (2.0 - t), |_| 1.0, 0.0, 2.0, [Bc::Natural, Bc::Natural]);
        let fam = MeshFamily::with_cuts(&o, &[0.5, 1.3], 50).unwrap();
        let m0 = fam.mesh(0).unwrap();
        let m1 = fam.mesh(1).unwrap();
        assert_eq!(m1.elements(), 2 * m0.elements());
        assert!(m0.nodes.contains(&0.5) && m0.nodes.contains(&1.3));
        assert!(m1.restrict(0.5, 1.3).is_ok());
        let w = fam.window(0.5, 1.3).unwrap();
        let m = w.mesh(2).unwrap();
        assert_eq!(m.nodes[0], 0.5);
        assert_eq!(*m.nodes.last().unwrap(), 1.3);
    }
}
