//! Reduction of the Jacobi operator of an invariant hypersurface to a
//! weighted Sturm–Liouville problem on its profile.
//!
//! For invariant functions `u(t)` the index form is
//!
//! ```text
//! Q(u) = ∫ (u'² − q u²) V dt − Σ_robin r · u(end)² V(end)
//! ```
//!
//! with `V` the orbit volume and `q = |A|² + Ric(ν, ν)`. Eigenvalues are
//! reported for `Q` against `∫ u² V dt`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::Model;
use crate::profile::{EndKind, ProfileCurve};

/// Boundary condition at one end of a reduced interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bc {
    /// Collapsed orbit: no condition, the weight vanishes there.
    Natural,
    Dirichlet,
    Neumann,
    /// `∂_η u = r·u`, entering the form as `−r·u²·V`.
    Robin(f64),
}

impl fmt::Display for Bc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bc::Natural => write!(f, "natural"),
            Bc::Dirichlet => write!(f, "dirichlet"),
            Bc::Neumann => write!(f, "neumann"),
            Bc::Robin(r) => write!(f, "robin({r})"),
        }
    }
}

/// Requested end conditions; `None` selects the natural condition at a
/// collapsed end and is rejected at a free end.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BcSpec {
    pub left: Option<Bc>,
    pub right: Option<Bc>,
}

impl BcSpec {
    pub fn natural() -> Self {
        BcSpec::default()
    }

    pub fn right(bc: Bc) -> Self {
        BcSpec {
            left: None,
            right: Some(bc),
        }
    }
}

/// Weight and potential of a reduced problem as functions of arclength.
pub trait Coefficients: Send + Sync {
    fn weight(&self, t: f64) -> f64;
    fn potential(&self, t: f64) -> f64;
    /// Inverse local length scale used to grade meshes; zero means the
    /// coefficients are smooth on the scale of the interval.
    fn density(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Coefficients given by closures.
pub struct FnCoefficients<W, Q> {
    pub weight: W,
    pub potential: Q,
}

impl<W, Q> Coefficients for FnCoefficients<W, Q>
where
    W: Fn(f64) -> f64 + Send + Sync,
    Q: Fn(f64) -> f64 + Send + Sync,
{
    fn weight(&self, t: f64) -> f64 {
        (self.weight)(t)
    }

    fn potential(&self, t: f64) -> f64 {
        (self.potential)(t)
    }
}

struct CurveCoefficients {
    curve: Arc<ProfileCurve>,
    ricci: f64,
}

impl Coefficients for CurveCoefficients {
    fn weight(&self, t: f64) -> f64 {
        self.curve.volume(t)
    }

    fn potential(&self, t: f64) -> f64 {
        self.curve.norm_a_squared(t) + self.ricci
    }

    fn density(&self, t: f64) -> f64 {
        self.curve.norm_a_squared(t).sqrt()
    }
}

/// A weighted Sturm–Liouville problem on `[a, b]`.
#[derive(Clone)]
pub struct ReducedOperator {
    coeffs: Arc<dyn Coefficients>,
    pub interval: (f64, f64),
    pub bc: [Bc; 2],
    /// Reference samples `(t, V, q)` of the coefficients.
    pub grid: Vec<f64>,
    pub weight: Vec<f64>,
    pub potential: Vec<f64>,
    pub provenance: String,
}

impl fmt::Debug for ReducedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReducedOperator")
            .field("interval", &self.interval)
            .field("bc", &self.bc)
            .field("grid_len", &self.grid.len())
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl ReducedOperator {
    /// Builds an operator from arbitrary coefficients, sampling them on
    /// `samples + 1` uniform points. Natural conditions require a vanishing
    /// weight (relative to its maximum) at that end; the other conditions
    /// require a positive one.
    pub fn new(
        coeffs: Arc<dyn Coefficients>,
        interval: (f64, f64),
        bc: [Bc; 2],
        samples: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Precondition(format!("bad interval [{a}, {b}]")));
        }
        let n = samples.max(2);
        let grid: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        Self::with_grid(coeffs, interval, bc, grid, provenance.into())
    }

    fn with_grid(
        coeffs: Arc<dyn Coefficients>,
        interval: (f64, f64),
        bc: [Bc; 2],
        grid: Vec<f64>,
        provenance: String,
    ) -> Result<Self> {
        let weight: Vec<f64> = grid.iter().map(|&t| coeffs.weight(t)).collect();
        let vmax = weight.iter().copied().fold(0.0, f64::max);
        for (end, t) in [interval.0, interval.1].into_iter().enumerate() {
            let collapsed = coeffs.weight(t) <= 1e-12 * vmax;
            match (collapsed, bc[end]) {
                (true, Bc::Natural) | (false, Bc::Dirichlet | Bc::Neumann) => {}
                (false, Bc::Robin(r)) if r.is_finite() => {}
                (true, other) => {
                    return Err(Error::InvalidBoundary(format!(
                        "{other} condition at the collapsed end t = {t}"
                    )))
                }
                (false, other) => {
                    return Err(Error::InvalidBoundary(format!(
                        "{other} condition at t = {t}, where the weight is positive"
                    )))
                }
            }
        }
        let potential = grid.iter().map(|&t| coeffs.potential(t)).collect();
        Ok(ReducedOperator {
            coeffs,
            interval,
            bc,
            grid,
            weight,
            potential,
            provenance,
        })
    }

    pub fn weight_at(&self, t: f64) -> f64 {
        self.coeffs.weight(t)
    }

    pub fn potential_at(&self, t: f64) -> f64 {
        self.coeffs.potential(t)
    }

    pub fn density_at(&self, t: f64) -> f64 {
        self.coeffs.density(t)
    }

    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// The same coefficients on `[a, b]` with the given end conditions.
    pub fn restrict(&self, a: f64, b: f64, bc: [Bc; 2]) -> Result<ReducedOperator> {
        let (lo, hi) = self.interval;
        if !(lo <= a && a < b && b <= hi) {
            return Err(Error::Precondition(format!(
                "[{a}, {b}] is not inside [{lo}, {hi}]"
            )));
        }
        let mut grid = vec![a];
        grid.extend(self.grid.iter().copied().filter(|&t| t > a && t < b));
        grid.push(b);
        Self::with_grid(
            self.coeffs.clone(),
            (a, b),
            bc,
            grid,
            format!("{} on [{a:.6}, {b:.6}]", self.provenance),
        )
    }

    /// The same problem with different end conditions.
    pub fn with_bc(&self, bc: [Bc; 2]) -> Result<ReducedOperator> {
        Self::with_grid(
            self.coeffs.clone(),
            self.interval,
            bc,
            self.grid.clone(),
            self.provenance.clone(),
        )
    }

    /// Whether both operators share coefficients and interval: the same
    /// coefficient object, or identical samples on identical grids.
    pub fn same_coefficients(&self, other: &ReducedOperator) -> bool {
        self.interval == other.interval
            && (Arc::ptr_eq(&self.coeffs, &other.coeffs)
                || (self.grid == other.grid
                    && self.weight == other.weight
                    && self.potential == other.potential))
    }
}

/// Principal curvatures `(κ, h₁, h₂)` of the hypersurface over `curve(t)`.
pub fn second_fundamental(curve: &ProfileCurve, t: f64) -> (f64, f64, f64) {
    curve.second_fundamental(t)
}

fn collapsed(kind: EndKind) -> bool {
    matches!(kind, EndKind::Edge { .. } | EndKind::Apex)
}

/// Reduces the Jacobi operator over `curve`. `q = |A|² + Ric`; rescaled
/// curves carry their scale in the curvatures already.
pub fn reduce_jacobi(curve: Arc<ProfileCurve>, spec: BcSpec) -> Result<ReducedOperator> {
    let mut bc = [Bc::Natural; 2];
    for (i, (req, end)) in [spec.left, spec.right].into_iter().zip(curve.ends).enumerate() {
        let col = collapsed(end.kind);
        bc[i] = match (req, col) {
            (None, true) | (Some(Bc::Natural), true) => Bc::Natural,
            (Some(other), true) => {
                return Err(Error::InvalidBoundary(format!(
                    "{other} condition at a collapsed orbit"
                )))
            }
            (None, false) => {
                return Err(Error::InvalidBoundary(
                    "a free end needs an explicit condition".into(),
                ))
            }
            (Some(b), false) => b,
        };
    }
    let grid = curve.sample_points();
    let ricci = curve.os.ambient_ricci();
    let provenance = format!("{:?} ({})", curve.family, curve.os.model.name());
    let interval = (0.0, curve.length);
    let coeffs: Arc<dyn Coefficients> = Arc::new(CurveCoefficients { curve, ricci });
    ReducedOperator::with_grid(coeffs, interval, bc, grid, provenance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldTag {
    /// Fifth component of the unit normal (SPHERE4).
    Nu5,
    /// `⟨x, ν⟩` (BALL4).
    XDotNu,
}

impl FieldTag {
    pub fn name(self) -> &'static str {
        match self {
            FieldTag::Nu5 => "NU5",
            FieldTag::XDotNu => "X_DOT_NU",
        }
    }
}

/// A Jacobi field known in closed form, evaluable anywhere on the curve.
#[derive(Debug, Clone)]
pub struct KnownField {
    pub tag: FieldTag,
    curve: Arc<ProfileCurve>,
    sign: f64,
}

/// Samples of a known Jacobi field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiFieldSamples {
    pub tag: FieldTag,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl KnownField {
    fn raw(&self, t: f64) -> f64 {
        let s = self.curve.sample(t);
        match self.tag {
            // ν = normal of the profile lifted; x⁵ = sin s.
            FieldTag::Nu5 => -s.p.u1.cos() * s.phi.sin(),
            FieldTag::XDotNu => -s.p.u1 * s.phi.sin() + s.p.u2 * s.phi.cos(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.sign * self.raw(t)
    }

    pub fn samples_at(&self, ts: &[f64]) -> JacobiFieldSamples {
        JacobiFieldSamples {
            tag: self.tag,
            t: ts.to_vec(),
            values: ts.iter().map(|&t| self.eval(t)).collect(),
        }
    }

    pub fn samples(&self) -> JacobiFieldSamples {
        self.samples_at(&self.curve.sample_points())
    }
}

/// The known Jacobi field `tag` on `curve`, with its sign fixed positive at
/// the launch end.
pub fn known_field(curve: Arc<ProfileCurve>, tag: FieldTag) -> Result<KnownField> {
    let ok = matches!(
        (tag, curve.os.model),
        (FieldTag::Nu5, Model::Sphere4) | (FieldTag::XDotNu, Model::Ball4)
    );
    if !ok {
        return Err(Error::TagMismatch {
            tag: tag.name(),
            model: curve.os.model.name(),
        });
    }
    let mut f = KnownField {
        tag,
        curve,
        sign: 1.0,
    };
    let v0 = f.raw(0.0);
    if v0 == 0.0 {
        return Err(Error::DegenerateFunction);
    }
    f.sign = v0.signum();
    Ok(f)
}
