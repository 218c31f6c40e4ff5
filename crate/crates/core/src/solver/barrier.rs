//! Dense primal log-barrier method with damped Newton steps.
//!
//! Maximizes a smooth concave objective subject to `g_i(x) <= 0` with affine
//! or convex quadratic `g_i`. A Phase I problem `min s s.t. g_i(x) <= s`
//! provides the strictly feasible start when the caller has none.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{SolveStatus, SolverSettings};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Concave objective with gradient and Hessian.
pub trait ConcaveObjective {
    fn value(&self, x: &Vector) -> f64;
    fn derivatives(&self, x: &Vector) -> (f64, Vector, Matrix);
}

/// Convex constraint `g(x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `a . x <= b`.
    Linear { a: Vector, b: f64 },
    /// `x^T Q x + a . x <= b` with `Q` positive semidefinite.
    Quadratic { q: Matrix, a: Vector, b: f64 },
}

impl Constraint {
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Constraint::Linear { a, b } => a.dot(x) - b,
            Constraint::Quadratic { q, a, b } => x.dot(&(q * x)) + a.dot(x) - b,
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Constraint::Linear { a, .. } => a.clone(),
            Constraint::Quadratic { q, a, .. } => q * x * 2.0 + a,
        }
    }

    fn add_hessian(&self, h: &mut Matrix, weight: f64) {
        if let Constraint::Quadratic { q, .. } = self {
            *h += q * (2.0 * weight);
        }
    }

    /// Same constraint in `(x, s)` space: `g(x) - s <= 0`.
    fn lifted(&self) -> Constraint {
        let extend = |a: &Vector| {
            let n = a.len();
            Vector::from_fn(n + 1, |i, _| if i < n { a[i] } else { -1.0 })
        };
        match self {
            Constraint::Linear { a, b } => Constraint::Linear { a: extend(a), b: *b },
            Constraint::Quadratic { q, a, b } => {
                let n = q.nrows();
                let mut ql = Matrix::zeros(n + 1, n + 1);
                ql.view_mut((0, 0), (n, n)).copy_from(q);
                Constraint::Quadratic { q: ql, a: extend(a), b: *b }
            }
        }
    }
}

pub fn max_violation(cons: &[Constraint], x: &Vector) -> f64 {
    cons.iter().map(|c| c.value(x)).fold(0.0, f64::max)
}

fn strictly_feasible(cons: &[Constraint], x: &Vector) -> bool {
    cons.iter().all(|c| c.value(x) < 0.0)
}

#[derive(Debug, Clone)]
pub struct BarrierResult {
    pub x: Vector,
    pub status: SolveStatus,
    pub iterations: usize,
}

const NEWTON_TOL: f64 = 1e-10;
const BARRIER_GROWTH: f64 = 20.0;
const ARMIJO: f64 = 0.25;

/// Minimizes `t (-phi(x)) - sum log(-g_i(x))` for an increasing sequence of `t`.
pub fn maximize<O: ConcaveObjective>(
    obj: &O,
    cons: &[Constraint],
    x0: Vector,
    settings: &SolverSettings,
) -> BarrierResult {
    maximize_until(obj, cons, x0, settings, |_| false)
}

/// As [`maximize`], stopping early once `stop(x)` holds after a centering step.
pub fn maximize_until<O: ConcaveObjective, F: Fn(&Vector) -> bool>(
    obj: &O,
    cons: &[Constraint],
    x0: Vector,
    settings: &SolverSettings,
    stop: F,
) -> BarrierResult {
    debug_assert!(strictly_feasible(cons, &x0));
    let m = cons.len().max(1) as f64;
    let gap_tol = (settings.abs_tol * 1e-2).max(1e-12);
    let mut x = x0;
    let mut t = 1.0;
    let mut iterations = 0;
    loop {
        let (xn, used, converged) = center(obj, cons, x, t, settings.max_iters - iterations.min(settings.max_iters));
        x = xn;
        iterations += used;
        if !converged {
            return BarrierResult { x, status: SolveStatus::IterLimit, iterations };
        }
        if stop(&x) {
            return BarrierResult { x, status: SolveStatus::Optimal, iterations };
        }
        let scale = obj.value(&x).abs().max(1.0);
        if m / t < gap_tol * scale {
            return BarrierResult { x, status: SolveStatus::Optimal, iterations };
        }
        t *= BARRIER_GROWTH;
    }
}

fn barrier_value<O: ConcaveObjective>(obj: &O, cons: &[Constraint], x: &Vector, t: f64) -> f64 {
    let mut v = -t * obj.value(x);
    for c in cons {
        let g = c.value(x);
        if !(g < 0.0) {
            return f64::INFINITY;
        }
        v -= (-g).ln();
    }
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn center<O: ConcaveObjective>(
    obj: &O,
    cons: &[Constraint],
    mut x: Vector,
    t: f64,
    budget: usize,
) -> (Vector, usize, bool) {
    let n = x.len();
    let mut used = 0;
    let mut current = barrier_value(obj, cons, &x, t);
    loop {
        if used >= budget {
            return (x, used, false);
        }
        used += 1;
        let (_, g_obj, h_obj) = obj.derivatives(&x);
        let mut grad = -g_obj * t;
        let mut hess = -h_obj * t;
        for c in cons {
            let g = c.value(&x);
            let dg = c.gradient(&x);
            let inv = -1.0 / g;
            grad += &dg * inv;
            hess += &dg * dg.transpose() * (inv * inv);
            c.add_hessian(&mut hess, inv);
        }
        let step = newton_step(&hess, &grad, n);
        let decrement = -grad.dot(&step);
        if decrement / 2.0 <= NEWTON_TOL.max(1e-14 * current.abs()) || !decrement.is_finite() {
            return (x, used, true);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &x + &step * alpha;
            let v = barrier_value(obj, cons, &trial, t);
            if v <= current - ARMIJO * alpha * decrement {
                x = trial;
                current = v;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no progress is possible at working precision
            return (x, used, true);
        }
    }
}

fn newton_step(hess: &Matrix, grad: &Vector, n: usize) -> Vector {
    let diag_scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    loop {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..n {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(h) {
            let step = ch.solve(&(-grad));
            if step.iter().all(|v| v.is_finite()) {
                return step;
            }
        }
        reg = if reg == 0.0 { diag_scale * 1e-12 } else { reg * 10.0 };
        if reg > diag_scale * 1e6 {
            return -grad / diag_scale;
        }
    }
}

/// Phase I outcome: the point minimizing the largest constraint value.
#[derive(Debug, Clone)]
pub struct PhaseOne {
    pub x: Vector,
    /// `max_i g_i(x)` at the returned point; negative means strictly feasible.
    pub slack: f64,
    pub iterations: usize,
}

struct SlackObjective {
    n: usize,
}

impl ConcaveObjective for SlackObjective {
    fn value(&self, x: &Vector) -> f64 {
        -x[self.n]
    }

    fn derivatives(&self, x: &Vector) -> (f64, Vector, Matrix) {
        let mut g = Vector::zeros(self.n + 1);
        g[self.n] = -1.0;
        (-x[self.n], g, Matrix::zeros(self.n + 1, self.n + 1))
    }
}

/// Solves `min s s.t. g_i(x) <= s`, stopping as soon as `s < -margin`.
pub fn phase_one(cons: &[Constraint], x0: &Vector, margin: f64, settings: &SolverSettings) -> PhaseOne {
    let n = x0.len();
    let s0 = cons.iter().map(|c| c.value(x0)).fold(f64::NEG_INFINITY, f64::max);
    if s0 < -margin {
        return PhaseOne { x: x0.clone(), slack: s0, iterations: 0 };
    }
    let lifted: Vec<Constraint> = cons.iter().map(Constraint::lifted).collect();
    let start = Vector::from_fn(n + 1, |i, _| if i < n { x0[i] } else { s0.abs().max(1.0) + s0 });
    let res = maximize_until(&SlackObjective { n }, &lifted, start, settings, |z| {
        let x = z.rows(0, n).into_owned();
        cons.iter().map(|c| c.value(&x)).fold(f64::NEG_INFINITY, f64::max) < -margin
    });
    let x = res.x.rows(0, n).into_owned();
    let slack = cons.iter().map(|c| c.value(&x)).fold(f64::NEG_INFINITY, f64::max);
    PhaseOne { x, slack, iterations: res.iterations }
}

/// Concave extension of `ln u` below `delta` by its second-order Taylor
/// expansion at `delta`. Returns value, first and second derivative.
pub fn smooth_ln(u: f64, delta: f64) -> (f64, f64, f64) {
    if u >= delta {
        (u.ln(), 1.0 / u, -1.0 / (u * u))
    } else {
        let d = u - delta;
        (delta.ln() + d / delta - d * d / (2.0 * delta * delta), 1.0 / delta - d / (delta * delta), -1.0 / (delta * delta))
    }
}

/// Concave extension of `sqrt(s)` below `delta`.
pub fn smooth_sqrt(s: f64, delta: f64) -> (f64, f64, f64) {
    if s >= delta {
        let r = s.sqrt();
        (r, 0.5 / r, -0.25 / (r * s))
    } else {
        let r = delta.sqrt();
        let d = s - delta;
        let h = -0.25 / (r * delta);
        (r + d * 0.5 / r + 0.5 * h * d * d, 0.5 / r + h * d, h)
    }
}
