//! Orbit spaces of the O(2)×O(2) actions on the round S⁴ and on ℝ⁴.
//!
//! `Sphere4` is charted by geodesic polar coordinates `(s, a)`, where `s` is
//! the latitude `x⁵ = sin s` and `a` splits `cos s` between the two planes:
//! `|(x¹,x²)| = cos s·cos a`, `|(x³,x⁴)| = cos s·sin a`. The quotient metric is
//! `ds² + cos²s·da²`. `Ball4` is charted by the two plane radii `(ρ₁, ρ₂)` with
//! the flat metric.
//!
//! Tangent directions are described by an angle `φ` in the orthonormal frame
//! `(e₁, e₂) = (∂₁/√g₁₁, ∂₂/√g₂₂)`; the unit normal of a curve is the `+π/2`
//! rotation of its tangent, `n = (−sin φ, cos φ)` in that frame.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHART_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Sphere4,
    Ball4,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Sphere4 => "SPHERE4",
            Model::Ball4 => "BALL4",
        }
    }
}

/// The two singular edges of the orbit space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    /// `radius₂ = 0`: circular orbits in the `(x¹, x²)` plane.
    First,
    /// `radius₁ = 0`: circular orbits in the `(x³, x⁴)` plane.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientPoint {
    pub u1: f64,
    pub u2: f64,
}

impl QuotientPoint {
    pub const fn new(u1: f64, u2: f64) -> Self {
        QuotientPoint { u1, u2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrbitSpace {
    pub model: Model,
}

pub const SPHERE4: OrbitSpace = OrbitSpace {
    model: Model::Sphere4,
};
pub const BALL4: OrbitSpace = OrbitSpace {
    model: Model::Ball4,
};

impl OrbitSpace {
    pub fn new(model: Model) -> Self {
        OrbitSpace { model }
    }

    pub fn contains(&self, p: QuotientPoint) -> bool {
        let ok = p.u1.is_finite() && p.u2.is_finite();
        ok && match self.model {
            Model::Sphere4 => {
                p.u1.abs() <= FRAC_PI_2 + CHART_SLACK
                    && p.u2 >= -CHART_SLACK
                    && p.u2 <= FRAC_PI_2 + CHART_SLACK
            }
            Model::Ball4 => p.u1 >= -CHART_SLACK && p.u2 >= -CHART_SLACK,
        }
    }

    pub fn check(&self, p: QuotientPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain { u1: p.u1, u2: p.u2 })
        }
    }

    /// Diagonal quotient metric `(g₁₁, g₂₂)`.
    pub fn metric_diag(&self, p: QuotientPoint) -> (f64, f64) {
        match self.model {
            Model::Sphere4 => {
                let c = p.u1.cos();
                (1.0, c * c)
            }
            Model::Ball4 => (1.0, 1.0),
        }
    }

    pub fn radius1(&self, p: QuotientPoint) -> f64 {
        match self.model {
            Model::Sphere4 => (p.u1.cos() * p.u2.cos()).max(0.0),
            Model::Ball4 => p.u1.max(0.0),
        }
    }

    pub fn radius2(&self, p: QuotientPoint) -> f64 {
        match self.model {
            Model::Sphere4 => (p.u1.cos() * p.u2.sin()).max(0.0),
            Model::Ball4 => p.u2.max(0.0),
        }
    }

    pub fn ambient_ricci(&self) -> f64 {
        match self.model {
            Model::Sphere4 => 3.0,
            Model::Ball4 => 0.0,
        }
    }

    /// Volume of the torus orbit through `p`: `(2π)²·radius₁·radius₂`.
    pub fn orbit_volume(&self, p: QuotientPoint) -> Result<f64> {
        self.check(p)?;
        Ok(self.orbit_volume_unchecked(p))
    }

    pub(crate) fn orbit_volume_unchecked(&self, p: QuotientPoint) -> f64 {
        4.0 * PI * PI * self.radius1(p) * self.radius2(p)
    }

    /// Signed normalized angular distance to the midline (football or cone),
    /// increasing toward the second edge; values in `[−π/4, π/4]`.
    pub fn theta(&self, p: QuotientPoint) -> Result<f64> {
        self.check(p)?;
        match self.model {
            Model::Sphere4 => {
                if FRAC_PI_2 - p.u1.abs() <= CHART_SLACK {
                    return Err(Error::UndefinedPoint { u1: p.u1, u2: p.u2 });
                }
                Ok(p.u2.clamp(0.0, FRAC_PI_2) - FRAC_PI_4)
            }
            Model::Ball4 => {
                let (r1, r2) = (self.radius1(p), self.radius2(p));
                if r1 == 0.0 && r2 == 0.0 {
                    return Err(Error::UndefinedPoint { u1: p.u1, u2: p.u2 });
                }
                Ok(r2.atan2(r1) - FRAC_PI_4)
            }
        }
    }

    /// Quotient-metric length of the chart vector `v` at `p`.
    pub fn metric_len(&self, p: QuotientPoint, v: [f64; 2]) -> f64 {
        let (g11, g22) = self.metric_diag(p);
        (g11 * v[0] * v[0] + g22 * v[1] * v[1]).sqrt()
    }

    /// Chart components of the unit vector with frame angle `phi`.
    pub fn frame_to_chart(&self, p: QuotientPoint, phi: f64) -> [f64; 2] {
        let (g11, g22) = self.metric_diag(p);
        [phi.cos() / g11.sqrt(), phi.sin() / g22.sqrt()]
    }

    /// Frame components of `∇ log radius₁` and `∇ log radius₂`.
    pub fn grad_log_radii(&self, p: QuotientPoint) -> ([f64; 2], [f64; 2]) {
        match self.model {
            Model::Sphere4 => {
                let (s, a) = (p.u1, p.u2);
                let ts = s.tan();
                let cs = s.cos();
                ([-ts, -a.tan() / cs], [-ts, 1.0 / (a.tan() * cs)])
            }
            Model::Ball4 => ([1.0 / p.u1, 0.0], [0.0, 1.0 / p.u2]),
        }
    }

    /// Frame components of `∇ log V`; this is the right-hand side of the
    /// minimal-profile equation.
    pub fn grad_log_volume(&self, p: QuotientPoint) -> [f64; 2] {
        match self.model {
            Model::Sphere4 => {
                let (s, a) = (p.u1, p.u2);
                [-2.0 * s.tan(), 2.0 / ((2.0 * a).tan() * s.cos())]
            }
            Model::Ball4 => [1.0 / p.u1, 1.0 / p.u2],
        }
    }

    /// Distance (in the quotient metric) from `p` to the given edge.
    pub fn edge_distance(&self, p: QuotientPoint, edge: Edge) -> f64 {
        match (self.model, edge) {
            (Model::Sphere4, Edge::First) => p.u1.cos() * p.u2,
            (Model::Sphere4, Edge::Second) => p.u1.cos() * (FRAC_PI_2 - p.u2),
            (Model::Ball4, Edge::First) => p.u2,
            (Model::Ball4, Edge::Second) => p.u1,
        }
    }

    /// Whether `p` is a pole (SPHERE4) or the origin (BALL4).
    pub fn is_apex(&self, p: QuotientPoint) -> bool {
        match self.model {
            Model::Sphere4 => FRAC_PI_2 - p.u1.abs() <= CHART_SLACK,
            Model::Ball4 => p.u1.abs() <= CHART_SLACK && p.u2.abs() <= CHART_SLACK,
        }
    }

    /// Point on `edge` with edge coordinate `u0`: the latitude `s` on SPHERE4,
    /// the surviving radius on BALL4.
    pub fn edge_point(&self, edge: Edge, u0: f64) -> QuotientPoint {
        match (self.model, edge) {
            (Model::Sphere4, Edge::First) => QuotientPoint::new(u0, 0.0),
            (Model::Sphere4, Edge::Second) => QuotientPoint::new(u0, FRAC_PI_2),
            (Model::Ball4, Edge::First) => QuotientPoint::new(u0, 0.0),
            (Model::Ball4, Edge::Second) => QuotientPoint::new(0.0, u0),
        }
    }
}
