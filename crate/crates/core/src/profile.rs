//! Profile curves of G-invariant minimal hypersurfaces.
//!
//! An invariant hypersurface is minimal exactly when its profile in the orbit
//! space is a geodesic of the volume-weighted metric `V²g`. For a unit-speed
//! profile with tangent angle `φ` and normal `n` (the `+π/2` rotation of the
//! tangent) this reads
//!
//! ```text
//! ⟨∇_τ τ, n⟩ = ∂_n log V,
//! ```
//!
//! and the profile's principal curvature (with respect to `n`) is
//! `κ = −⟨∇_τ τ, n⟩`, so minimality is `κ + ∂_n log V = 0`.
//!
//! SPHERE4 profiles are integrated in arclength with state `(s, a, φ, t)`.
//! BALL4 profiles use log-polar variables `(log|x|, β, ψ, t)` with
//! `β = θ + π/4`, `ψ = φ − β`, integrated in `σ = ∫dt/|x|`; the `(β, ψ)`
//! system is autonomous, which keeps steps uniform out to large radii.
//!
//! Curves leave the singular edges through a short Taylor segment (the ODE is
//! singular where an orbit collapses) and, when they end on an edge, close
//! with the matching segment of the orthogonal solution through the far edge.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, rk5_advance, Control, EventHandler, EventHit, OdeSystem, StepControl, Trajectory};
use crate::orbit::{Edge, Model, OrbitSpace, QuotientPoint};

/// Default launch offset from a singular edge, in units of the local scale.
pub const LAUNCH_OFFSET: f64 = 2e-5;
/// Default integrator tolerance for profile curves.
pub const DEFAULT_TOL: f64 = 1e-13;

const STATE_DIM: usize = 4;
type State = [f64; STATE_DIM];

struct SphereRhs;

impl OdeSystem<4> for SphereRhs {
    fn rhs(&self, _x: f64, y: &State, dy: &mut State) {
        let (s, a, phi) = (y[0], y[1], y[2]);
        let (sp, cp) = phi.sin_cos();
        let cs = s.cos();
        let ts = s.tan();
        let cot2a = (2.0 * a).cos() / (2.0 * a).sin();
        dy[0] = cp;
        dy[1] = sp / cs;
        dy[2] = 3.0 * ts * sp + 2.0 * cp * cot2a / cs;
        dy[3] = 1.0;
    }
}

struct BallRhs;

impl OdeSystem<4> for BallRhs {
    fn rhs(&self, _x: f64, y: &State, dy: &mut State) {
        let (lr, beta, psi) = (y[0], y[1], y[2]);
        let phi = beta + psi;
        let (sp, cp) = phi.sin_cos();
        let (sb, cb) = beta.sin_cos();
        let (spsi, cpsi) = psi.sin_cos();
        let dphi = -sp / cb + cp / sb;
        dy[0] = cpsi;
        dy[1] = spsi;
        dy[2] = dphi - spsi;
        dy[3] = lr.exp();
    }
}

fn decode(model: Model, y: &State) -> (QuotientPoint, f64) {
    match model {
        Model::Sphere4 => (QuotientPoint::new(y[0], y[1]), y[2]),
        Model::Ball4 => {
            let r = y[0].exp();
            let (sb, cb) = y[1].sin_cos();
            (QuotientPoint::new(r * cb, r * sb), y[1] + y[2])
        }
    }
}

fn encode(model: Model, p: QuotientPoint, phi: f64, t: f64) -> State {
    match model {
        Model::Sphere4 => [p.u1, p.u2, phi, t],
        Model::Ball4 => {
            let r = p.u1.hypot(p.u2);
            let beta = p.u2.atan2(p.u1);
            [r.ln(), beta, phi - beta, t]
        }
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Orthogonal Taylor launch off a singular edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSeries {
    pub model: Model,
    pub edge: Edge,
    /// Edge coordinate of the foot point.
    pub u0: f64,
}

impl EdgeSeries {
    /// Local length scale of the launch: distance of the foot point to the
    /// apex (pole or origin).
    pub fn scale(&self) -> f64 {
        match self.model {
            Model::Sphere4 => self.u0.cos(),
            Model::Ball4 => self.u0,
        }
    }

    /// Position and tangent angle at arclength `tau` from the foot point,
    /// moving away from the edge. Position errors are `O(τ⁴)` (SPHERE4) or
    /// `O(τ⁴)` (BALL4), tangent errors `O(τ³)`.
    pub fn eval(&self, tau: f64) -> (QuotientPoint, f64) {
        match self.model {
            Model::Sphere4 => {
                let (ts, cs) = (self.u0.tan(), self.u0.cos());
                let s = self.u0 - 0.75 * ts * tau * tau;
                let da = (tau - 0.625 * ts * ts * tau * tau * tau) / cs;
                let turn = FRAC_PI_2 + 1.5 * ts * tau;
                match self.edge {
                    Edge::First => (QuotientPoint::new(s, da), turn),
                    Edge::Second => (QuotientPoint::new(s, FRAC_PI_2 - da), -turn),
                }
            }
            Model::Ball4 => {
                let f = self.u0;
                let along = f + tau * tau / (4.0 * f);
                let off = tau - tau * tau * tau / (24.0 * f * f);
                match self.edge {
                    Edge::First => (QuotientPoint::new(along, off), FRAC_PI_2 - tau / (2.0 * f)),
                    Edge::Second => (QuotientPoint::new(off, along), tau / (2.0 * f)),
                }
            }
        }
    }

    /// Arclength from the foot point at which the series reaches edge
    /// distance `dist` (chart angle `a` or `β`).
    fn tau_for_angle(&self, angle: f64) -> f64 {
        let mut tau = angle * self.scale();
        for _ in 0..50 {
            let (p, _) = self.eval(tau);
            let cur = match (self.model, self.edge) {
                (Model::Sphere4, Edge::First) => p.u2,
                (Model::Sphere4, Edge::Second) => FRAC_PI_2 - p.u2,
                (Model::Ball4, Edge::First) => p.u2.atan2(p.u1),
                (Model::Ball4, Edge::Second) => p.u1.atan2(p.u2),
            };
            let step = (angle - cur) * self.scale();
            tau += step;
            if step.abs() <= 1e-16 * tau.abs() {
                break;
            }
        }
        tau
    }
}

/// State at the end of a launch segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaunchState {
    pub t: f64,
    pub p: QuotientPoint,
    /// Tangent angle in the orthonormal frame.
    pub phi: f64,
    pub series: EdgeSeries,
}

/// Second-order (in the tangent) orthogonal launch off `edge` at edge
/// coordinate `u0`, returning the state at arclength `delta·scale`.
pub fn edge_launch(os: &OrbitSpace, edge: Edge, u0: f64, delta: f64) -> Result<LaunchState> {
    let interior = match os.model {
        Model::Sphere4 => u0.abs() < FRAC_PI_2 - 1e-12,
        Model::Ball4 => u0 > 1e-300 && u0.is_finite(),
    };
    if !interior {
        let p = os.edge_point(edge, u0);
        return Err(Error::Domain { u1: p.u1, u2: p.u2 });
    }
    if !(delta > 0.0 && delta <= 1e-3) {
        return Err(Error::Precondition(format!(
            "launch offset must lie in (0, 1e-3], got {delta}"
        )));
    }
    let series = EdgeSeries {
        model: os.model,
        edge,
        u0,
    };
    let t = delta * series.scale();
    let (p, phi) = series.eval(t);
    Ok(LaunchState { t, p, phi, series })
}

/// Marker after which an integration stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopMarker {
    Crossing(usize),
    Critical(usize),
    /// First θ-critical point after the given number of crossings.
    CriticalAfterCrossings(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct StopConditions {
    /// Stop when the curve approaches an edge to within this chart angle
    /// (`a` or `π/2 − a` on SPHERE4, `β` or `π/2 − β` on BALL4).
    pub edge_angle: Option<f64>,
    /// Edge approaches only count after this many crossings.
    pub edge_after_crossings: usize,
    pub max_length: f64,
    pub marker: Option<StopMarker>,
    pub max_radius: Option<f64>,
    /// Stop when closer than this to the apex (cos s on SPHERE4, |x| on BALL4).
    pub apex_distance: f64,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for StopConditions {
    fn default() -> Self {
        StopConditions {
            edge_angle: Some(LAUNCH_OFFSET),
            edge_after_crossings: 0,
            max_length: 50.0,
            marker: None,
            max_radius: None,
            apex_distance: 1e-9,
            tol: DEFAULT_TOL,
            max_steps: 400_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndKind {
    /// Ends on a singular edge (collapsed orbit).
    Edge { edge: Edge, coordinate: f64 },
    /// Ends on the unit sphere of the ball (free boundary).
    Free { radius: f64 },
    /// Integration stopped without reaching a singular locus.
    Open,
    Apex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndInfo {
    pub kind: EndKind,
    /// Departure from orthogonal incidence, in radians.
    pub incidence_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndReason {
    Edge(Edge),
    Marker,
    MaxLength,
    MaxRadius,
    Apex,
}

/// θ-critical point bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub t: f64,
    pub theta: f64,
    /// Euclidean radius `|x|` in the chart (BALL4) or `cos s` (SPHERE4).
    pub radius: f64,
    /// Sign of the first frame component of the tangent (`±e₁`) there.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CurveFamily {
    Hsiang(u32),
    Alencar,
    Truncated(u32),
    Custom,
}

#[derive(Debug, Clone)]
struct OdePiece {
    traj: Trajectory<4>,
    /// Arclength at each step start (plus the final `x_end`).
    t_nodes: Vec<f64>,
    t0: f64,
    t1: f64,
}

#[derive(Debug, Clone)]
enum Piece {
    /// Series launch on `[t0, t0 + len]`.
    Launch { series: EdgeSeries, t0: f64, len: f64 },
    Ode(OdePiece),
    /// Series closure ending on an edge at `t0 + len`.
    Closure { series: EdgeSeries, t0: f64, len: f64 },
}

impl Piece {
    fn span(&self) -> (f64, f64) {
        match self {
            Piece::Launch { t0, len, .. } | Piece::Closure { t0, len, .. } => (*t0, t0 + len),
            Piece::Ode(o) => (o.t0, o.t1),
        }
    }
}

/// One evaluated point of a profile curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub p: QuotientPoint,
    /// Tangent angle in the orthonormal frame.
    pub phi: f64,
    /// Chart components of the unit tangent.
    pub tau: [f64; 2],
    /// Chart components of the unit normal.
    pub normal: [f64; 2],
    /// Principal curvature of the profile direction, `κ = −∂_n log V`.
    pub kappa: f64,
}

/// An arclength-parametrized profile curve with continuous evaluation.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    pub os: OrbitSpace,
    pub family: CurveFamily,
    pub length: f64,
    pub ends: [EndInfo; 2],
    /// Arclengths of θ zeros.
    pub crossings: Vec<f64>,
    /// Arclengths of θ-critical points.
    pub theta_critical: Vec<f64>,
    pub critical_points: Vec<CriticalPoint>,
    /// Launch coordinate on the first edge.
    pub launch: f64,
    /// Homothety factor applied to positions (BALL4 truncations).
    pub scale: f64,
    pub tol: f64,
    pieces: Vec<Piece>,
    /// Width (in arclength) of the series segments at each end; geometric
    /// quantities there are extrapolated from the interior.
    end_widths: [f64; 2],
}

fn frame_from_phi(os: &OrbitSpace, p: QuotientPoint, phi: f64) -> ([f64; 2], [f64; 2]) {
    let tau = os.frame_to_chart(p, phi);
    let normal = os.frame_to_chart(p, phi + FRAC_PI_2);
    (tau, normal)
}

/// `(κ, h₁, h₂)` from position and tangent angle, unscaled.
fn curvatures_raw(os: &OrbitSpace, p: QuotientPoint, phi: f64) -> (f64, f64, f64) {
    let n = [-phi.sin(), phi.cos()];
    let (g1, g2) = os.grad_log_radii(p);
    let h1 = n[0] * g1[0] + n[1] * g1[1];
    let h2 = n[0] * g2[0] + n[1] * g2[1];
    (-(h1 + h2), h1, h2)
}

fn quad_extrapolate(x: [f64; 3], y: [f64; 3], at: f64) -> f64 {
    let mut out = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (at - x[j]) / (x[i] - x[j]);
            }
        }
        out += w * y[i];
    }
    out
}

impl ProfileCurve {
    fn locate(&self, t: f64) -> &Piece {
        let idx = self.pieces.partition_point(|pc| pc.span().1 < t);
        &self.pieces[idx.min(self.pieces.len() - 1)]
    }

    /// Raw (unscaled) position and tangent angle at unscaled arclength `t`.
    fn raw_state(&self, t: f64) -> (QuotientPoint, f64) {
        match self.locate(t) {
            Piece::Launch { series, t0, .. } => series.eval((t - t0).max(0.0)),
            Piece::Closure { series, t0, len } => {
                let (p, phi) = series.eval((t0 + len - t).max(0.0));
                (p, phi + PI)
            }
            Piece::Ode(o) => {
                let y = ode_state_at(self.os.model, o, t);
                decode(self.os.model, &y)
            }
        }
    }

    fn raw_length(&self) -> f64 {
        self.length / self.scale
    }

    /// Position and frame at arclength `t` (clamped to `[0, length]`).
    pub fn sample(&self, t: f64) -> CurveSample {
        let t = t.clamp(0.0, self.length);
        let (p, phi) = self.raw_state(t / self.scale);
        let p = QuotientPoint::new(p.u1 * self.scale_pos(), p.u2 * self.scale_pos());
        let (tau, normal) = frame_from_phi(&self.os, p, phi);
        let (kappa, _, _) = self.second_fundamental(t);
        CurveSample {
            t,
            p,
            phi,
            tau,
            normal,
            kappa,
        }
    }

    fn scale_pos(&self) -> f64 {
        match self.os.model {
            Model::Sphere4 => 1.0,
            Model::Ball4 => self.scale,
        }
    }

    /// `(κ, h₁, h₂)` at arclength `t`. Near collapsed ends the values are
    /// quadratic extrapolations from three interior points.
    pub fn second_fundamental(&self, t: f64) -> (f64, f64, f64) {
        let raw_t = (t / self.scale).clamp(0.0, self.raw_length());
        let (k, h1, h2) = self.raw_curvatures(raw_t);
        let c = 1.0 / self.scale;
        (k * c, h1 * c, h2 * c)
    }

    fn raw_curvatures(&self, t: f64) -> (f64, f64, f64) {
        let len = self.raw_length();
        let [w0, w1] = self.end_widths;
        let direct = |tt: f64| {
            let (p, phi) = self.raw_state(tt);
            curvatures_raw(&self.os, p, phi)
        };
        let extrap = |origin: f64, dir: f64, w: f64, at: f64| {
            let xs = [w, 2.0 * w, 3.0 * w];
            let vals: Vec<(f64, f64, f64)> = xs.iter().map(|d| direct(origin + dir * d)).collect();
            let pick = |f: fn(&(f64, f64, f64)) -> f64| {
                quad_extrapolate(xs, [f(&vals[0]), f(&vals[1]), f(&vals[2])], at)
            };
            (pick(|v| v.0), pick(|v| v.1), pick(|v| v.2))
        };
        if w0 > 0.0 && t < w0 && len > 3.0 * w0 {
            extrap(0.0, 1.0, w0, t)
        } else if w1 > 0.0 && t > len - w1 && len > 3.0 * w1 {
            extrap(len, -1.0, w1, len - t)
        } else {
            direct(t)
        }
    }

    /// Orbit volume at arclength `t`.
    pub fn volume(&self, t: f64) -> f64 {
        let s = self.sample(t);
        self.os.orbit_volume_unchecked(s.p)
    }

    /// `|A|²` at arclength `t`.
    pub fn norm_a_squared(&self, t: f64) -> f64 {
        let (k, h1, h2) = self.second_fundamental(t);
        k * k + h1 * h1 + h2 * h2
    }

    /// θ along the curve.
    pub fn theta(&self, t: f64) -> f64 {
        let s = self.sample(t);
        self.os.theta(s.p).unwrap_or(f64::NAN)
    }

    /// The natural sample positions: series end points and integrator steps.
    pub fn sample_points(&self) -> Vec<f64> {
        let mut ts = Vec::new();
        for pc in &self.pieces {
            match pc {
                Piece::Launch { t0, len, .. } | Piece::Closure { t0, len, .. } => {
                    for k in 0..4 {
                        ts.push(t0 + len * k as f64 / 4.0);
                    }
                }
                Piece::Ode(o) => ts.extend(o.t_nodes.iter().copied()),
            }
        }
        ts.push(self.raw_length());
        ts.iter_mut().for_each(|t| *t *= self.scale);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
        ts
    }

    pub fn samples(&self) -> Vec<CurveSample> {
        self.sample_points().into_iter().map(|t| self.sample(t)).collect()
    }

    /// Profile curvature from a central difference of the tangent angle,
    /// independent of the Euler-Lagrange identity used by
    /// [`second_fundamental`](Self::second_fundamental).
    pub fn kappa_fd(&self, t: f64) -> f64 {
        let raw = t / self.scale;
        let h = 1e-3 * self.local_scale(raw);
        let (lo, hi) = ((raw - h).max(0.0), (raw + h).min(self.raw_length()));
        let (_, phi_lo) = self.raw_state(lo);
        let (_, phi_hi) = self.raw_state(hi);
        let (p, phi) = self.raw_state(raw);
        let dphi = wrap_angle(phi_hi - phi_lo) / (hi - lo);
        let kg = match self.os.model {
            Model::Sphere4 => dphi - p.u1.tan() * phi.sin(),
            Model::Ball4 => dphi,
        };
        -kg / self.scale
    }

    fn local_scale(&self, raw_t: f64) -> f64 {
        let (p, _) = self.raw_state(raw_t);
        let apex = match self.os.model {
            Model::Sphere4 => p.u1.cos().min(1.0),
            Model::Ball4 => p.u1.hypot(p.u2),
        };
        apex.min(self.os.edge_distance(p, Edge::First))
            .min(self.os.edge_distance(p, Edge::Second))
    }

    /// Largest minimality residual `|κ + h₁ + h₂|` over the integrator nodes,
    /// with `κ` taken from [`kappa_fd`](Self::kappa_fd) and measured
    /// relative to `max(|A|, 1/length)`.
    pub fn minimality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for pc in &self.pieces {
            if let Piece::Ode(o) = pc {
                for &tn in &o.t_nodes[1..o.t_nodes.len() - 1] {
                    let h = 1e-3 * self.local_scale(tn);
                    if tn - h < o.t0 || tn + h > o.t1 {
                        continue;
                    }
                    let t = tn * self.scale;
                    let (_, h1, h2) = self.second_fundamental(t);
                    let k = self.kappa_fd(t);
                    let a = (k * k + h1 * h1 + h2 * h2).sqrt().max(1.0 / self.length);
                    worst = worst.max((k + h1 + h2).abs() / a);
                }
            }
        }
        worst
    }

    /// Homothetic copy of a BALL4 profile.
    pub fn rescaled(&self, factor: f64) -> Result<ProfileCurve> {
        if self.os.model != Model::Ball4 || !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Precondition(format!(
                "cannot rescale a {} profile by {factor}",
                self.os.model.name()
            )));
        }
        let mut c = self.clone();
        if let EndKind::Free { radius } = &mut c.ends[1].kind {
            *radius *= factor;
        }
        c.scale *= factor;
        c.length *= factor;
        c.crossings.iter_mut().for_each(|t| *t *= factor);
        c.theta_critical.iter_mut().for_each(|t| *t *= factor);
        for cp in &mut c.critical_points {
            cp.t *= factor;
            cp.radius *= factor;
        }
        Ok(c)
    }
}

fn ode_state_at(model: Model, o: &OdePiece, t: f64) -> State {
    let steps = &o.traj.steps;
    if steps.is_empty() || t >= o.t1 {
        return o.traj.y_end;
    }
    let k = o.t_nodes.partition_point(|&tn| tn <= t).saturating_sub(1);
    let k = k.min(steps.len() - 1);
    let step = &steps[k];
    // A fresh step from the node is smoother than the continuous extension.
    match model {
        Model::Sphere4 => {
            let x = (step.x0 + (t - o.t_nodes[k])).min(o.traj.x_end);
            let h = x - step.x0;
            if h <= 0.0 {
                return step.start();
            }
            rk5_advance(&SphereRhs, step.x0, &step.start(), h)
        }
        Model::Ball4 => {
            let x_hi = step.x1().min(o.traj.x_end);
            let (mut lo, mut hi) = (step.x0, x_hi);
            let y0 = step.eval(lo);
            let mut x = lo + (t - y0[3]) / y0[0].exp();
            for _ in 0..60 {
                if !(x > lo && x < hi) {
                    x = 0.5 * (lo + hi);
                }
                let y = step.eval(x);
                let f = y[3] - t;
                if f > 0.0 {
                    hi = x;
                } else {
                    lo = x;
                }
                let dx = f / y[0].exp();
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) || hi - lo <= 1e-16 * hi.abs().max(1.0)
                {
                    break;
                }
            }
            let x = x.clamp(step.x0, x_hi);
            let h = x - step.x0;
            if h <= 0.0 {
                return step.start();
            }
            let mut y = rk5_advance(&BallRhs, step.x0, &step.start(), h);
            let mut f = [0.0; 4];
            BallRhs.rhs(x, &y, &mut f);
            let dx = (t - y[3]) / f[3];
            for i in 0..4 {
                y[i] += dx * f[i];
            }
            y
        }
    }
}

struct ProfileEvents {
    model: Model,
    stop: StopConditions,
    crossings: Vec<f64>,
    criticals: Vec<CriticalPoint>,
    reason: Option<EndReason>,
}

impl ProfileEvents {
    fn new(model: Model, stop: StopConditions) -> Self {
        ProfileEvents {
            model,
            stop,
            crossings: Vec::new(),
            criticals: Vec::new(),
            reason: None,
        }
    }
}

impl EventHandler<4> for ProfileEvents {
    fn count(&self) -> usize {
        7
    }

    fn eval(&self, id: usize, _x: f64, y: &State) -> f64 {
        let edge = self.stop.edge_angle.unwrap_or(-1.0);
        match (id, self.model) {
            (0, _) => y[1] - FRAC_PI_4,
            (1, _) => y[2].sin(),
            (2, _) => y[1] - edge,
            (3, _) => FRAC_PI_2 - y[1] - edge,
            (4, Model::Sphere4) => y[0].cos() - self.stop.apex_distance,
            (4, Model::Ball4) => y[0] - self.stop.apex_distance.ln(),
            (5, _) => y[3] - self.stop.max_length,
            (6, Model::Ball4) => match self.stop.max_radius {
                Some(r) => y[0] - r.ln(),
                None => -1.0,
            },
            _ => -1.0,
        }
    }

    fn on_event(&mut self, hit: &EventHit<4>) -> Control {
        let y = &hit.y;
        match hit.id {
            0 => {
                self.crossings.push(y[3]);
                if self.stop.marker == Some(StopMarker::Crossing(self.crossings.len())) {
                    self.reason = Some(EndReason::Marker);
                    return Control::Stop;
                }
            }
            1 => {
                let (p, phi) = decode(self.model, y);
                let radius = match self.model {
                    Model::Sphere4 => p.u1.cos(),
                    Model::Ball4 => y[0].exp(),
                };
                self.criticals.push(CriticalPoint {
                    t: y[3],
                    theta: y[1] - FRAC_PI_4,
                    radius,
                    heading: phi.cos().signum(),
                });
                let stop = match self.stop.marker {
                    Some(StopMarker::Critical(k)) => self.criticals.len() == k,
                    Some(StopMarker::CriticalAfterCrossings(k)) => {
                        self.crossings.len() >= k
                            && self.criticals.iter().filter(|c| c.t > self.crossing_t(k)).count()
                                == 1
                    }
                    _ => false,
                };
                if stop {
                    self.reason = Some(EndReason::Marker);
                    return Control::Stop;
                }
            }
            2 | 3 if hit.direction < 0 => {
                if self.stop.edge_angle.is_some()
                    && self.crossings.len() >= self.stop.edge_after_crossings
                {
                    let edge = if hit.id == 2 { Edge::First } else { Edge::Second };
                    self.reason = Some(EndReason::Edge(edge));
                    return Control::Stop;
                }
            }
            4 if hit.direction < 0 => {
                self.reason = Some(EndReason::Apex);
                return Control::Stop;
            }
            5 if hit.direction > 0 => {
                self.reason = Some(EndReason::MaxLength);
                return Control::Stop;
            }
            6 if hit.direction > 0 => {
                self.reason = Some(EndReason::MaxRadius);
                return Control::Stop;
            }
            _ => {}
        }
        Control::Continue
    }
}

impl ProfileEvents {
    fn crossing_t(&self, k: usize) -> f64 {
        if k == 0 {
            f64::NEG_INFINITY
        } else {
            self.crossings[k - 1]
        }
    }
}

/// Initial data for [`integrate_profile`].
#[derive(Debug, Clone, Copy)]
pub enum ProfileInit {
    Launch(LaunchState),
    /// Interior state with arclength origin `t`.
    Interior { p: QuotientPoint, phi: f64, t: f64 },
}

/// Result of a bare integration, before any closure is attached.
#[derive(Debug, Clone)]
pub struct Integration {
    pub curve: ProfileCurve,
    pub reason: EndReason,
}

/// Integrates the minimal-profile equation from `init` until one of the
/// stop conditions fires.
pub fn integrate_profile(
    os: &OrbitSpace,
    init: ProfileInit,
    stop: &StopConditions,
) -> Result<Integration> {
    let (p0, phi0, t0, launch) = match init {
        ProfileInit::Launch(l) => (l.p, l.phi, l.t, Some(l)),
        ProfileInit::Interior { p, phi, t } => (p, phi, t, None),
    };
    os.check(p0)?;
    let y0 = encode(os.model, p0, phi0, t0);
    let mut ctl = StepControl::with_tol(stop.tol);
    ctl.max_steps = stop.max_steps;
    ctl.h_max = 0.02;
    let mut handler = ProfileEvents::new(os.model, *stop);
    let (x0, x_max) = match os.model {
        Model::Sphere4 => (t0, stop.max_length + 1.0),
        Model::Ball4 => (0.0, 1e3),
    };
    let traj = match os.model {
        Model::Sphere4 => {
            ctl.h_init = 1e-3 * p0.u1.cos().max(1e-6);
            ode::integrate(&SphereRhs, x0, y0, x_max, &ctl, &mut handler)?
        }
        Model::Ball4 => {
            ctl.h_init = 1e-3;
            ode::integrate(&BallRhs, x0, y0, x_max, &ctl, &mut handler)?
        }
    };
    let reason = handler.reason.unwrap_or(EndReason::MaxLength);
    let mut t_nodes: Vec<f64> = traj.steps.iter().map(|s| s.start()[3]).collect();
    t_nodes.push(traj.y_end[3]);
    let t1 = traj.y_end[3];
    let ode_piece = OdePiece {
        traj,
        t_nodes,
        t0,
        t1,
    };
    let mut pieces = Vec::new();
    let mut end_widths = [0.0, 0.0];
    let start_kind = if let Some(l) = launch {
        pieces.push(Piece::Launch {
            series: l.series,
            t0: 0.0,
            len: l.t,
        });
        end_widths[0] = l.t;
        EndKind::Edge {
            edge: l.series.edge,
            coordinate: l.series.u0,
        }
    } else {
        EndKind::Open
    };
    pieces.push(Piece::Ode(ode_piece));
    let curve = ProfileCurve {
        os: *os,
        family: CurveFamily::Custom,
        length: t1,
        ends: [
            EndInfo {
                kind: start_kind,
                incidence_defect: 0.0,
            },
            EndInfo {
                kind: if reason == EndReason::Apex {
                    EndKind::Apex
                } else {
                    EndKind::Open
                },
                incidence_defect: f64::NAN,
            },
        ],
        crossings: handler.crossings,
        theta_critical: handler.criticals.iter().map(|c| c.t).collect(),
        critical_points: handler.criticals,
        launch: launch.map(|l| l.series.u0).unwrap_or(f64::NAN),
        scale: 1.0,
        tol: stop.tol,
        pieces,
        end_widths,
    };
    Ok(Integration { curve, reason })
}

/// Attaches the orthogonal series closure to a curve that stopped on its
/// approach to `edge`; returns the signed tangent mismatch at the junction.
fn close_on_edge(curve: &mut ProfileCurve, edge: Edge, approach_angle: f64) -> f64 {
    let os = curve.os;
    let t_end = curve.length;
    let (p, phi) = curve.raw_state(t_end);
    // Foot point of the orthogonal solution through p.
    let mut series = EdgeSeries {
        model: os.model,
        edge,
        u0: match (os.model, edge) {
            (Model::Sphere4, _) => p.u1,
            (Model::Ball4, Edge::First) => p.u1,
            (Model::Ball4, Edge::Second) => p.u2,
        },
    };
    let mut tau = 0.0;
    for _ in 0..50 {
        tau = series.tau_for_angle(approach_angle);
        let (q, _) = series.eval(tau);
        let corr = match (os.model, edge) {
            (Model::Sphere4, _) => p.u1 - q.u1,
            (Model::Ball4, Edge::First) => p.u1 - q.u1,
            (Model::Ball4, Edge::Second) => p.u2 - q.u2,
        };
        series.u0 += corr;
        if corr.abs() <= 1e-16 * series.u0.abs().max(1e-300) {
            break;
        }
    }
    let (_, phi_series) = series.eval(tau);
    let defect = wrap_angle(phi - (phi_series + PI));
    curve.pieces.push(Piece::Closure {
        series,
        t0: t_end,
        len: tau,
    });
    curve.length = t_end + tau;
    curve.end_widths[1] = tau;
    curve.ends[1] = EndInfo {
        kind: EndKind::Edge {
            edge,
            coordinate: series.u0,
        },
        incidence_defect: defect.abs(),
    };
    defect
}

/// The equatorial profile `s ≡ 0` (totally geodesic hypersphere) and the
/// football midline are exact solutions; this builds the former.
pub fn equator() -> Result<ProfileCurve> {
    hsiang_from_launch(1, 0.0, DEFAULT_TOL)
}

/// Tuning of the Hsiang shooting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootConfig {
    /// Tolerance of the final curve and of the closure refinement.
    pub tol: f64,
    /// Tolerance of the scan and bisection; tighter values make the
    /// integrator underflow on near-edge approaches.
    pub scan_tol: f64,
    pub scan_points: usize,
    /// The scan covers `(−π/2 + margin, π/2 − margin)`.
    pub scan_margin: f64,
    /// Extra scan points, log-spaced toward each pole inside the margin.
    pub pole_points: usize,
    /// Closest approach to a pole covered by the extra points.
    pub pole_reach: f64,
    /// Edge proximity treated as a hit during the scan.
    pub hit_angle: f64,
    pub max_length: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            tol: DEFAULT_TOL,
            scan_tol: 1e-10,
            scan_points: 200,
            scan_margin: 0.01,
            pole_points: 60,
            pole_reach: 1e-5,
            hit_angle: 1e-10,
            max_length: 20.0,
        }
    }
}

/// One scanned launch point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanEntry {
    pub s0: f64,
    pub crossings: usize,
    pub far_edge: Option<Edge>,
    /// Signed distance to the far edge at the terminal θ-critical point,
    /// signed by the heading there; changes sign across a solution.
    pub defect: Option<f64>,
}

/// All shooting solutions for one `m`.
#[derive(Debug, Clone)]
pub struct HsiangSolutions {
    pub m: u32,
    /// Solutions ordered as chosen: the first is reported as `H_m`.
    pub launches: Vec<f64>,
    pub curve: ProfileCurve,
    pub scan: Vec<ScanEntry>,
}

fn classify(m: usize, s0: f64, cfg: &ShootConfig) -> ScanEntry {
    let mut entry = ScanEntry {
        s0,
        crossings: 0,
        far_edge: None,
        defect: None,
    };
    let launch = match edge_launch(&crate::orbit::SPHERE4, Edge::First, s0, LAUNCH_OFFSET) {
        Ok(l) => l,
        Err(_) => return entry,
    };
    let stop = StopConditions {
        edge_angle: Some(cfg.hit_angle),
        edge_after_crossings: 0,
        max_length: cfg.max_length,
        marker: Some(StopMarker::CriticalAfterCrossings(m)),
        max_radius: None,
        apex_distance: 1e-9,
        tol: cfg.scan_tol,
        max_steps: 400_000,
    };
    let Ok(run) = integrate_profile(&crate::orbit::SPHERE4, ProfileInit::Launch(launch), &stop)
    else {
        return entry;
    };
    let c = &run.curve;
    entry.crossings = c.crossings.len();
    if c.crossings.len() != m {
        return entry;
    }
    match run.reason {
        EndReason::Marker => {
            let cp = c.critical_points.last().copied().unwrap();
            let edge = if cp.theta < 0.0 { Edge::First } else { Edge::Second };
            entry.far_edge = Some(edge);
            entry.defect = Some(cp.heading * (FRAC_PI_4 - cp.theta.abs()));
        }
        EndReason::Edge(edge) => {
            let (_, phi) = c.raw_state(c.length);
            entry.far_edge = Some(edge);
            entry.defect = Some(phi.cos().signum() * cfg.hit_angle);
        }
        _ => {}
    }
    entry
}

fn scan_grid(cfg: &ShootConfig) -> Vec<f64> {
    let lo = -FRAC_PI_2 + cfg.scan_margin;
    let hi = FRAC_PI_2 - cfg.scan_margin;
    let n = cfg.scan_points.max(2);
    let mut pts: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    if cfg.pole_points > 0 && cfg.pole_reach < cfg.scan_margin {
        let (l0, l1) = (cfg.pole_reach.ln(), cfg.scan_margin.ln());
        for i in 0..cfg.pole_points {
            let d = (l0 + (l1 - l0) * i as f64 / cfg.pole_points as f64).exp();
            pts.push(-FRAC_PI_2 + d);
            pts.push(FRAC_PI_2 - d);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts
}

fn bisect_launch(m: usize, a: ScanEntry, b: ScanEntry, cfg: &ShootConfig) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let edge = a.far_edge?;
    for _ in 0..200 {
        let mid = 0.5 * (lo.s0 + hi.s0);
        if mid <= lo.s0 || mid >= hi.s0 {
            break;
        }
        let e = classify(m, mid, cfg);
        if e.crossings != m || e.far_edge != Some(edge) {
            debug!("bracket [{}, {}] changed structure at {mid}", lo.s0, hi.s0);
            return None;
        }
        let d = e.defect?;
        if d == 0.0 {
            return Some(mid);
        }
        if (d > 0.0) == (lo.defect? > 0.0) {
            lo = e;
        } else {
            hi = e;
        }
    }
    Some(0.5 * (lo.s0 + hi.s0))
}

/// Builds the closed `H_m` profile from a converged launch coordinate.
pub fn hsiang_from_launch(m: u32, s0: f64, tol: f64) -> Result<ProfileCurve> {
    Ok(hsiang_closure(m, s0, tol)?.0)
}

/// Refines a bisected launch coordinate by driving the signed closure
/// mismatch to zero (Illinois iteration); falls back to `s0` when no
/// bracket is found nearby.
fn polish_launch(m: u32, s0: f64, tol: f64) -> f64 {
    let f = |s: f64| hsiang_closure(m, s, tol).map(|(_, d)| d).ok();
    let Some(f0) = f(s0) else { return s0 };
    if f0 == 0.0 {
        return s0;
    }
    let mut eps = 1e-9;
    let mut bracket = None;
    for _ in 0..6 {
        for s in [s0 - eps, s0 + eps] {
            if let Some(fs) = f(s) {
                if fs * f0 < 0.0 {
                    bracket = Some(if s < s0 { (s, fs, s0, f0) } else { (s0, f0, s, fs) });
                    break;
                }
            }
        }
        if bracket.is_some() {
            break;
        }
        eps *= 10.0;
    }
    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        debug!("no closure bracket near s0 = {s0} for m = {m}");
        return s0;
    };
    let mut side = 0i8;
    for _ in 0..60 {
        let c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) || b - a <= 4.0 * f64::EPSILON * b.abs().max(1e-3) {
            break;
        }
        let Some(fc) = f(c) else { break };
        if fc == 0.0 {
            return c;
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            side = 0;
        } else if side == 1 {
            fa *= 0.5;
        }
        if fc * fb > 0.0 {
            side = 1;
        }
        b = c;
        fb = fc;
        if fb.abs() < 1e-14 {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

fn hsiang_closure(m: u32, s0: f64, tol: f64) -> Result<(ProfileCurve, f64)> {
    let os = crate::orbit::SPHERE4;
    let launch = edge_launch(&os, Edge::First, s0, LAUNCH_OFFSET)?;
    let stop = StopConditions {
        edge_angle: Some(LAUNCH_OFFSET),
        edge_after_crossings: m as usize,
        max_length: 20.0,
        marker: None,
        max_radius: None,
        apex_distance: 1e-9,
        tol,
        max_steps: 400_000,
    };
    let run = integrate_profile(&os, ProfileInit::Launch(launch), &stop)?;
    let EndReason::Edge(edge) = run.reason else {
        return Err(Error::NotFound {
            reason: format!("launch {s0} for m = {m} did not return to an edge"),
            trace: format!("{:?}", run.reason),
        });
    };
    let mut curve = run.curve;
    if curve.crossings.len() != m as usize {
        return Err(Error::NotFound {
            reason: format!(
                "launch {s0} produced {} crossings, expected {m}",
                curve.crossings.len()
            ),
            trace: String::new(),
        });
    }
    let defect = close_on_edge(&mut curve, edge, LAUNCH_OFFSET);
    curve.family = CurveFamily::Hsiang(m);
    Ok((curve, defect))
}

/// Shoots for Hsiang's `H_m` and reports every solution found.
pub fn shoot_hsiang_all(m: u32, cfg: &ShootConfig) -> Result<HsiangSolutions> {
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    if m == 1 {
        let curve = hsiang_from_launch(1, 0.0, cfg.tol)?;
        return Ok(HsiangSolutions {
            m,
            launches: vec![0.0],
            curve,
            scan: Vec::new(),
        });
    }
    let mu = m as usize;
    let grid = scan_grid(cfg);
    let scan: Vec<ScanEntry> = grid.par_iter().map(|&s0| classify(mu, s0, cfg)).collect();
    let want_edge = if m % 2 == 1 { Edge::Second } else { Edge::First };
    let mut found = Vec::new();
    for w in scan.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ok = a.crossings == mu
            && b.crossings == mu
            && a.far_edge == Some(want_edge)
            && b.far_edge == Some(want_edge);
        if !ok {
            continue;
        }
        let (Some(da), Some(db)) = (a.defect, b.defect) else {
            continue;
        };
        if (da > 0.0) == (db > 0.0) {
            continue;
        }
        if let Some(s) = bisect_launch(mu, a, b, cfg) {
            found.push(polish_launch(m, s, cfg.tol));
        }
    }
    if found.is_empty() {
        let trace = scan
            .iter()
            .map(|e| format!("s0={:+.6} crossings={} far={:?} defect={:?}", e.s0, e.crossings, e.far_edge, e.defect))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(Error::NotFound {
            reason: format!("no sign change of the exit defect with {m} crossings"),
            trace,
        });
    }
    // Smallest |s0| first; ties keep scan order.
    let mut order: Vec<f64> = found.clone();
    // Mirror solutions agree in |s0| up to round-off; those count as ties.
    order.sort_by_key(|s| (s.abs() * 1e8).round() as i64);
    let distinct = order
        .windows(2)
        .filter(|w| ((w[0].abs() - w[1].abs()) * 1e8).round() != 0.0)
        .count()
        + 1;
    if distinct > 1 {
        warn!(
            "m = {m}: {} shooting solutions at s0 = {:?}; keeping {}",
            order.len(),
            order,
            order[0]
        );
    }
    let mut last_err = None;
    for &s0 in &order {
        match hsiang_from_launch(m, s0, cfg.tol) {
            Ok(curve) => {
                let mut launches = vec![s0];
                launches.extend(order.iter().copied().filter(|&x| x != s0));
                return Ok(HsiangSolutions {
                    m,
                    launches,
                    curve,
                    scan,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// Shoots for Hsiang's `H_m`.
pub fn shoot_hsiang(m: u32, tol: f64) -> Result<ProfileCurve> {
    let cfg = ShootConfig {
        tol,
        ..ShootConfig::default()
    };
    Ok(shoot_hsiang_all(m, &cfg)?.curve)
}

/// Integrates Alencar's complete profile from the circular orbit at
/// `ρ₁ = 1` until `max_criticals` θ-critical points have been passed.
pub fn solve_alencar(max_criticals: usize, tol: f64) -> Result<ProfileCurve> {
    if max_criticals == 0 {
        return Err(Error::Precondition("max_criticals must be at least 1".into()));
    }
    let os = crate::orbit::BALL4;
    let launch = edge_launch(&os, Edge::First, 1.0, LAUNCH_OFFSET)?;
    let stop = StopConditions {
        edge_angle: Some(1e-8),
        edge_after_crossings: 0,
        max_length: 1e30,
        marker: Some(StopMarker::Critical(max_criticals)),
        max_radius: None,
        apex_distance: 1e-12,
        tol,
        max_steps: 400_000,
    };
    let run = integrate_profile(&os, ProfileInit::Launch(launch), &stop)?;
    if run.reason != EndReason::Marker {
        return Err(Error::BudgetExceeded(format!(
            "Alencar profile stopped ({:?}) after {} of {max_criticals} critical points",
            run.reason,
            run.curve.theta_critical.len()
        )));
    }
    let mut curve = run.curve;
    curve.family = CurveFamily::Alencar;
    Ok(curve)
}

/// Markers of a SPHERE4 profile: football crossings, zeros of `ν⁵`
/// (θ-critical points) and critical points of `ν⁵` between its zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalData {
    pub crossings: Vec<f64>,
    pub zeros: Vec<f64>,
    pub criticals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Markers {
    Sphere(NodalData),
    /// `|x|` at successive θ-critical points.
    Ball(Vec<f64>),
}

/// `ν⁵` (up to sign) and its arclength derivative on SPHERE4, from
/// position and tangent angle.
fn nu5_and_derivative(p: QuotientPoint, phi: f64) -> (f64, f64) {
    let (s, a) = (p.u1, p.u2);
    let (sp, cp) = phi.sin_cos();
    let cs = s.cos();
    let dphi = 3.0 * s.tan() * sp + 2.0 * cp * (2.0 * a).cos() / ((2.0 * a).sin() * cs);
    let nu5 = -cs * sp;
    let d = cp * (s.sin() * sp - cs * dphi);
    (nu5, d)
}

fn roots_of<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut xa = a;
    let mut fa = f(a);
    for i in 1..=n {
        let xb = a + (b - a) * i as f64 / n as f64;
        let fb = f(xb);
        if fa == 0.0 {
            out.push(xa);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (xa, xb, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        xa = xb;
        fa = fb;
    }
    out
}

/// Locates the nodal markers of a profile produced by [`shoot_hsiang`] or
/// [`solve_alencar`].
pub fn find_markers(curve: &ProfileCurve) -> Result<Markers> {
    match curve.os.model {
        Model::Ball4 => {
            let radii: Vec<f64> = curve.critical_points.iter().map(|c| c.radius).collect();
            if radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InternalConsistency(
                    "critical radii are not strictly increasing".into(),
                ));
            }
            Ok(Markers::Ball(radii))
        }
        Model::Sphere4 => {
            let crossings = curve.crossings.clone();
            let zeros = curve.theta_critical.clone();
            let mut criticals = Vec::new();
            for w in zeros.windows(2) {
                let g = |t: f64| {
                    let s = curve.sample(t);
                    nu5_and_derivative(s.p, s.phi).1
                };
                let n = 400;
                let rs = roots_of(g, w[0], w[1], n);
                let inner: Vec<f64> = rs
                    .into_iter()
                    .filter(|&r| r > w[0] + 1e-12 && r < w[1] - 1e-12)
                    .collect();
                if inner.len() != 1 {
                    return Err(Error::InternalConsistency(format!(
                        "expected one critical point of nu5 in ({}, {}), found {}",
                        w[0],
                        w[1],
                        inner.len()
                    )));
                }
                criticals.push(inner[0]);
            }
            // Interlacing c1 < s1 < c2 < ... < cm and s_i < t_i < s_{i+1}.
            let m = crossings.len();
            let ok_counts = zeros.len() + 1 == m || (m <= 1 && zeros.is_empty());
            let mut ok = ok_counts;
            if ok && m >= 2 {
                for i in 0..m - 1 {
                    ok &= crossings[i] < zeros[i] && zeros[i] < crossings[i + 1];
                }
                for i in 0..criticals.len() {
                    ok &= zeros[i] < criticals[i] && criticals[i] < zeros[i + 1];
                }
            }
            if !ok {
                return Err(Error::InternalConsistency(format!(
                    "markers do not interlace: crossings {crossings:?}, zeros {zeros:?}, criticals {criticals:?}"
                )));
            }
            Ok(Markers::Sphere(NodalData {
                crossings,
                zeros,
                criticals,
            }))
        }
    }
}

/// Truncates Alencar's profile at its `ell`-th θ-critical point and rescales
/// it so that the free end lies on the unit sphere.
pub fn truncate_rescale(curve: &ProfileCurve, ell: usize) -> Result<ProfileCurve> {
    let c = truncate(curve, ell)?;
    let r = c.critical_points[ell - 1].radius;
    c.rescaled(1.0 / r)
}

/// Truncates Alencar's profile at its `ell`-th θ-critical point without
/// rescaling.
pub fn truncate(curve: &ProfileCurve, ell: usize) -> Result<ProfileCurve> {
    if curve.os.model != Model::Ball4 || curve.scale != 1.0 {
        return Err(Error::Precondition(
            "truncation applies to an unscaled BALL4 profile".into(),
        ));
    }
    if ell == 0 || curve.critical_points.len() < ell {
        return Err(Error::Precondition(format!(
            "curve has {} critical points, {ell} required",
            curve.critical_points.len()
        )));
    }
    let cp = curve.critical_points[ell - 1];
    let mut c = curve.clone();
    // Trim the integrated piece at the critical point.
    let t_cut = cp.t;
    for pc in &mut c.pieces {
        if let Piece::Ode(o) = pc {
            let y = ode_state_at(Model::Ball4, o, t_cut);
            let k = o.t_nodes.partition_point(|&tn| tn < t_cut);
            o.traj.steps.truncate(k.max(1));
            o.t_nodes.truncate(k.max(1));
            o.t_nodes.push(t_cut);
            o.traj.y_end = y;
            o.traj.x_end = {
                let st = o.traj.steps.last().unwrap();
                // Recover σ at the cut from the last step.
                let mut lo = st.x0;
                let mut hi = st.x1();
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if st.eval(mid)[3] < t_cut {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            o.t1 = t_cut;
        }
    }
    c.length = t_cut;
    c.crossings.retain(|&t| t < t_cut);
    c.critical_points.truncate(ell);
    c.theta_critical.truncate(ell);
    let (p, phi) = c.raw_state(t_cut);
    let radial = p.u2.atan2(p.u1);
    c.ends[1] = EndInfo {
        kind: EndKind::Free {
            radius: p.u1.hypot(p.u2),
        },
        incidence_defect: wrap_angle(phi - radial).abs(),
    };
    c.family = CurveFamily::Truncated(ell as u32);
    Ok(c)
}
