//! Analog beamformer step.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::barrier::{self, smooth_ln, ConcaveObjective, Constraint, Matrix, Vector};
use super::{SolveOutcome, SolveStatus, SolverSettings};
use crate::fp::{BeamformerCoeffs, LinearCut};
use crate::linalg::{from_real, realify_hermitian, realify_linear, to_real, CVec};

const LOG_KNOT: f64 = 1e-8;
/// Amplitude bound of a double-phase-shifter element.
pub const DPS_MAX_AMPLITUDE: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct BeamformerOutcome {
    /// Returned beamformer, on the unit sphere whenever rescaling kept every
    /// cut satisfied. `objective` is the sum rate `sum log2(1 + Gamma_k(f))`
    /// at fixed RIS phases and powers.
    pub outcome: SolveOutcome<CVec>,
    /// Maximizer of the QT surrogate over the unit ball.
    pub relaxed: CVec,
    /// QT surrogate at `relaxed` with the given auxiliaries.
    pub relaxed_objective: f64,
    pub rescaled: bool,
}

struct QtObjective {
    lin: Vec<Vector>,
    quad: Vec<Matrix>,
    cst: Vec<f64>,
}

impl QtObjective {
    fn new(coeffs: &BeamformerCoeffs, y: &[Complex64]) -> Self {
        let mut lin = Vec::new();
        let mut quad = Vec::new();
        let mut cst = Vec::new();
        for k in 0..coeffs.users() {
            let w = coeffs.a[k].map(|a| y[k] * a.conj());
            lin.push(realify_linear(&w) * 2.0);
            quad.push(realify_hermitian(&coeffs.big_a[k]) * y[k].norm_sqr());
            cst.push(1.0 - y[k].norm_sqr() * coeffs.noise);
        }
        Self { lin, quad, cst }
    }

    fn inner(&self, k: usize, x: &Vector) -> f64 {
        self.cst[k] + self.lin[k].dot(x) - x.dot(&(&self.quad[k] * x))
    }
}

impl ConcaveObjective for QtObjective {
    fn value(&self, x: &Vector) -> f64 {
        (0..self.lin.len()).map(|k| smooth_ln(self.inner(k, x), LOG_KNOT).0).sum::<f64>() / LN_2
    }

    fn derivatives(&self, x: &Vector) -> (f64, Vector, Matrix) {
        let n = x.len();
        let mut v = 0.0;
        let mut g = Vector::zeros(n);
        let mut h = Matrix::zeros(n, n);
        for k in 0..self.lin.len() {
            let (l, dl, ddl) = smooth_ln(self.inner(k, x), LOG_KNOT);
            let qx = &self.quad[k] * x;
            let du = &self.lin[k] - &qx * 2.0;
            v += l;
            g += &du * dl;
            h += &du * du.transpose() * ddl - &self.quad[k] * (2.0 * dl);
        }
        (v / LN_2, g / LN_2, h / LN_2)
    }
}

fn sum_rate(coeffs: &BeamformerCoeffs, f: &CVec) -> f64 {
    coeffs.sinr(f).iter().map(|g| g.ln_1p() / LN_2).sum()
}

fn constraints(m: usize, cuts: &[LinearCut]) -> Result<Vec<Constraint>, usize> {
    let n = 2 * m;
    let mut cons = vec![Constraint::Quadratic { q: Matrix::identity(n, n), a: Vector::zeros(n), b: 1.0 }];
    for i in 0..m {
        let mut q = Matrix::zeros(n, n);
        q[(i, i)] = 1.0;
        q[(i + m, i + m)] = 1.0;
        cons.push(Constraint::Quadratic { q, a: Vector::zeros(n), b: DPS_MAX_AMPLITUDE * DPS_MAX_AMPLITUDE });
    }
    for cut in cuts {
        let a = to_real(&cut.l);
        let scale = a.norm();
        if scale == 0.0 {
            if cut.rhs > 0.0 {
                return Err(cut.user);
            }
            continue;
        }
        // Re{l^H f} >= rhs  <=>  -a.x <= -rhs
        cons.push(Constraint::Linear { a: -a / scale, b: -cut.rhs / scale });
    }
    Ok(cons)
}

/// Maximizes the QT surrogate `sum_k log2(1 + Gamma_hat_k(f, y_k))` over
/// `|f|^2 <= 1`, `|f_i| <= 2` and the affine min-rate cuts, starting from
/// `f_o`. The result is pushed back onto the unit sphere when every cut
/// still holds there.
pub fn solve_beamformer(
    coeffs: &BeamformerCoeffs,
    y: &[Complex64],
    cuts: &[LinearCut],
    f_o: &CVec,
    settings: &SolverSettings,
) -> BeamformerOutcome {
    let m = coeffs.antennas();
    let obj = QtObjective::new(coeffs, y);
    let cons = match constraints(m, cuts) {
        Ok(c) => c,
        Err(_) => return infeasible(coeffs, y, f_o.clone(), f64::INFINITY, 0),
    };

    let norm = f_o.norm();
    let mut x0 = to_real(f_o);
    if norm > 0.999 {
        x0 *= 0.999 / norm;
    }
    let mut iterations = 0;
    if !cons.iter().all(|c| c.value(&x0) < 0.0) {
        let p1 = barrier::phase_one(&cons, &x0, settings.feasibility_tol, settings);
        iterations += p1.iterations;
        if !(p1.slack < 0.0) {
            return infeasible(coeffs, y, from_real(&p1.x), p1.slack, iterations);
        }
        x0 = p1.x;
    }

    let res = barrier::maximize(&obj, &cons, x0, settings);
    iterations += res.iterations;
    let relaxed = from_real(&res.x);
    let relaxed_objective = coeffs.qt_objective(&relaxed, y);

    let mut f = relaxed.clone();
    let mut rescaled = false;
    let r = relaxed.norm();
    if r > 0.0 && r < 1.0 {
        let candidate = &relaxed / Complex64::from(r);
        let x = to_real(&candidate);
        if barrier::max_violation(&cons, &x) <= settings.feasibility_tol {
            f = candidate;
            rescaled = true;
        }
    }
    let max_residual = barrier::max_violation(&cons, &to_real(&f));
    let status = match res.status {
        SolveStatus::Optimal if max_residual <= settings.feasibility_tol => SolveStatus::Optimal,
        SolveStatus::Optimal => SolveStatus::Inaccurate,
        s => s,
    };
    BeamformerOutcome {
        outcome: SolveOutcome { status, objective: sum_rate(coeffs, &f), solution: f, max_residual, iterations },
        relaxed,
        relaxed_objective,
        rescaled,
    }
}

fn infeasible(coeffs: &BeamformerCoeffs, y: &[Complex64], f: CVec, residual: f64, iterations: usize) -> BeamformerOutcome {
    BeamformerOutcome {
        outcome: SolveOutcome {
            status: SolveStatus::Infeasible,
            objective: sum_rate(coeffs, &f),
            solution: f.clone(),
            max_residual: residual,
            iterations,
        },
        relaxed_objective: coeffs.qt_objective(&f, y),
        relaxed: f,
        rescaled: false,
    }
}
