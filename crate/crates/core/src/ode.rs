//! Adaptive Dormand–Prince 5(4) integration with continuous output and
//! event location.
//!
//! Every accepted step keeps its five dense-output coefficient vectors, so a
//! finished [`Trajectory`] can be evaluated anywhere inside its span at
//! fourth-order accuracy. Event functions are monitored after each accepted
//! step and their roots are refined on the interpolant.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },
    #[error("step budget of {steps} exhausted at x = {x}")]
    BudgetExceeded { steps: usize, x: f64 },
    #[error("non-finite state at x = {x}")]
    NonFinite { x: f64 },
}

/// A first-order system `y' = f(x, y)` of fixed dimension.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, x: f64, y: &[f64; N], dy: &mut [f64; N]);
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    /// Steps below `h_min_rel * max(1, |x|)` abort the integration.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn with_tol(tol: f64) -> Self {
        StepControl {
            rtol: tol,
            atol: tol,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            h_min_rel: 1e-15,
            max_steps: 500_000,
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// A single fifth-order step of size `h` from `(x, y)`, without error control.
pub fn rk5_advance<const N: usize, S: OdeSystem<N>>(sys: &S, x: f64, y: &[f64; N], h: f64) -> [f64; N] {
    let mut k = [[0.0; N]; 6];
    sys.rhs(x, y, &mut k[0]);
    let mut ytmp = *y;
    for s in 1..7 {
        for i in 0..N {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            ytmp[i] = y[i] + h * acc;
        }
        if s < 6 {
            let mut ks = [0.0; N];
            sys.rhs(x + C[s] * h, &ytmp, &mut ks);
            k[s] = ks;
        }
    }
    ytmp
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub x0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn x1(&self) -> f64 {
        self.x0 + self.h
    }

    pub fn eval(&self, x: f64) -> [f64; N] {
        let s = (x - self.x0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        y
    }

    pub fn start(&self) -> [f64; N] {
        self.cont[0]
    }
}

/// The accepted steps of one integration, in increasing `x`.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub steps: Vec<Step<N>>,
    /// Final abscissa; may lie inside the last step when a terminal event fired.
    pub x_end: f64,
    pub y_end: [f64; N],
}

impl<const N: usize> Trajectory<N> {
    pub fn x_start(&self) -> f64 {
        self.steps.first().map(|s| s.x0).unwrap_or(self.x_end)
    }

    fn step_index(&self, x: f64) -> usize {
        let idx = self.steps.partition_point(|s| s.x1() < x);
        idx.min(self.steps.len().saturating_sub(1))
    }

    /// Dense-output evaluation; `x` is clamped to the trajectory span.
    pub fn eval(&self, x: f64) -> [f64; N] {
        if self.steps.is_empty() || x >= self.x_end {
            return self.y_end;
        }
        let x = x.max(self.x_start());
        self.steps[self.step_index(x)].eval(x)
    }

    /// Step end points (including the start), clipped at `x_end`.
    pub fn nodes(&self) -> Vec<(f64, [f64; N])> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        for st in &self.steps {
            if st.x0 >= self.x_end {
                break;
            }
            out.push((st.x0, st.start()));
        }
        out.push((self.x_end, self.y_end));
        out
    }
}

/// A located root of an event function.
#[derive(Debug, Clone, Copy)]
pub struct EventHit<const N: usize> {
    pub id: usize,
    pub x: f64,
    pub y: [f64; N],
    /// +1 for an upward crossing, -1 for a downward one.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

pub trait EventHandler<const N: usize> {
    fn count(&self) -> usize;
    fn eval(&self, id: usize, x: f64, y: &[f64; N]) -> f64;
    fn on_event(&mut self, hit: &EventHit<N>) -> Control;
}

/// No events.
pub struct NoEvents;

impl<const N: usize> EventHandler<N> for NoEvents {
    fn count(&self) -> usize {
        0
    }
    fn eval(&self, _id: usize, _x: f64, _y: &[f64; N]) -> f64 {
        0.0
    }
    fn on_event(&mut self, _hit: &EventHit<N>) -> Control {
        Control::Continue
    }
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Root of `g` on `[a, b]` given opposite signs at the ends (Illinois).
fn refine_root<F: Fn(f64) -> f64>(g: F, mut a: f64, mut ga: f64, mut b: f64, mut gb: f64) -> f64 {
    let tol = 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut x = (a * gb - b * ga) / (gb - ga);
        if !(x > a.min(b) && x < a.max(b)) {
            x = 0.5 * (a + b);
        }
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx > 0.0) == (gb > 0.0) {
            b = x;
            gb = gx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = x;
            ga = gx;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

/// Integrates from `x0` towards `x_max` (which must exceed `x0`).
pub fn integrate<const N: usize, S, H>(
    sys: &S,
    x0: f64,
    y0: [f64; N],
    x_max: f64,
    ctl: &StepControl,
    events: &mut H,
) -> Result<Trajectory<N>, OdeError>
where
    S: OdeSystem<N>,
    H: EventHandler<N>,
{
    let mut x = x0;
    let mut y = y0;
    let mut h = ctl.h_init.min(x_max - x0).min(ctl.h_max);
    let mut k = [[0.0; N]; 7];
    sys.rhs(x, &y, &mut k[0]);
    if !finite(&k[0]) {
        return Err(OdeError::NonFinite { x });
    }
    let n_ev = events.count();
    let mut g_prev: Vec<f64> = (0..n_ev).map(|i| events.eval(i, x, &y)).collect();
    let mut steps: Vec<Step<N>> = Vec::new();
    let mut fac_old = 1e-4f64;
    let mut n_steps = 0usize;

    while x < x_max {
        if n_steps >= ctl.max_steps {
            return Err(OdeError::BudgetExceeded { steps: n_steps, x });
        }
        n_steps += 1;
        let h_min = ctl.h_min_rel * x.abs().max(1.0);
        if h < h_min {
            return Err(OdeError::StepUnderflow { x, h });
        }
        let last = x + h >= x_max;
        if last {
            h = x_max - x;
        }

        let mut ytmp = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = y[i] + h * acc;
            }
            let mut ks = [0.0; N];
            sys.rhs(x + C[s] * h, &ytmp, &mut ks);
            k[s] = ks;
        }
        // Stage 7 was evaluated at the fifth-order solution (FSAL).
        let y_new = ytmp;

        let mut err = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e / sc;
            err += r * r;
        }
        err = (err / N as f64).sqrt();

        if !err.is_finite() || !finite(&y_new) || !finite(&k[6]) {
            h *= 0.25;
            continue;
        }

        // PI step-size control as in Hairer's DOPRI5.
        let fac11 = err.powf(0.2 - 0.04 * 0.75);
        let fac = (fac11 / fac_old.powf(0.04)) / 0.9;
        let fac = fac.clamp(0.1, 5.0);
        let h_new = (h / fac).min(ctl.h_max);

        if err > 1.0 {
            h /= (fac11 / 0.9).clamp(1.0, 10.0);
            continue;
        }
        fac_old = err.max(1e-4);

        let mut cont = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * k[6][i] - bspl;
            let mut d = 0.0;
            for (j, kj) in k.iter().enumerate() {
                d += D[j] * kj[i];
            }
            cont[4][i] = h * d;
        }
        let step = Step { x0: x, h, cont };

        if n_ev > 0 {
            // Sample a few interior points so that a pair of roots inside one
            // step is not missed.
            const SUB: usize = 3;
            let mut hits: Vec<EventHit<N>> = Vec::new();
            for id in 0..n_ev {
                let mut xa = x;
                let mut ga = g_prev[id];
                for sub in 1..=SUB {
                    let xb = if sub == SUB {
                        x + h
                    } else {
                        x + h * sub as f64 / SUB as f64
                    };
                    let yb = if sub == SUB { y_new } else { step.eval(xb) };
                    let gb = events.eval(id, xb, &yb);
                    let crosses = (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0);
                    if crosses {
                        let xr = if gb == 0.0 {
                            xb
                        } else {
                            refine_root(|xx| events.eval(id, xx, &step.eval(xx)), xa, ga, xb, gb)
                        };
                        hits.push(EventHit {
                            id,
                            x: xr,
                            y: step.eval(xr),
                            direction: if gb > ga { 1 } else { -1 },
                        });
                    }
                    xa = xb;
                    ga = gb;
                }
                g_prev[id] = ga;
            }
            hits.sort_by(|a, b| a.x.total_cmp(&b.x));
            for hit in &hits {
                if events.on_event(hit) == Control::Stop {
                    steps.push(step);
                    return Ok(Trajectory {
                        steps,
                        x_end: hit.x,
                        y_end: hit.y,
                    });
                }
            }
        }

        steps.push(step);
        x += h;
        y = y_new;
        k[0] = k[6];
        h = if last { h } else { h_new };
    }

    Ok(Trajectory {
        steps,
        x_end: x,
        y_end: y,
    })
}
