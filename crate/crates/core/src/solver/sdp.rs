//! RIS semidefinite relaxation
//!
//! ```text
//! max  sum_k log2(1 - c_k + Re tr(Psi C_k))
//! s.t. Psi >= 0,  Psi_ii = 1,  Re tr(Psi D_k) >= d_k
//! ```
//!
//! solved in factored form `Psi = V V^H` with unit-norm rows of `V`
//! (Riemannian gradient ascent with Barzilai-Borwein steps), min-rate cuts
//! handled by an augmented Lagrangian. Optimality is certified on the
//! unfactored problem: with `G` the gradient of the Lagrangian,
//! `S = Diag(Re diag(G Psi)) - G` must be positive semidefinite.

use std::f64::consts::LN_2;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::barrier::smooth_ln;
use super::{SolveOutcome, SolveStatus, SolverSettings};
use crate::channel::complex_gaussian;
use crate::fp::{lift, RisCoeffs};
use crate::linalg::{hermitize, re_trace_prod, CMat, CVec};

const LOG_KNOT: f64 = 1e-8;
const INIT_SEED: u64 = 0x5d9f_31c7;
const INIT_SPREAD: f64 = 1e-2;
const MAX_ESCALATIONS: usize = 8;
const MAX_AL_ROUNDS: usize = 40;

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// `Psi = V V^H`.
    pub psi: CMat,
    /// Factor `V`, `(N+1) x r`, unit-norm rows.
    pub factor: CMat,
    /// Smallest eigenvalue of the dual slack `S`.
    pub dual_min_eig: f64,
    /// Multipliers of the min-rate cuts.
    pub multipliers: Vec<f64>,
}

struct Problem<'a> {
    c: &'a RisCoeffs,
    /// `[u_k; 0]`.
    ut: Vec<CVec>,
    n: usize,
    cuts: Vec<usize>,
}

/// Per-user quantities at a factor `V`.
struct Point {
    v: CMat,
    /// `V^H [u_k; 0]`.
    a: Vec<CVec>,
    /// `1 - c_k + Re tr(Psi C_k)`.
    u: Vec<f64>,
    /// `Re tr(Psi D_k) - d_k`.
    h: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(c: &'a RisCoeffs) -> Self {
        let n = c.lifted_dim();
        let ut = c.u.iter().map(|u| CVec::from_fn(n, |i, _| if i + 1 < n { u[i] } else { Complex64::new(0.0, 0.0) })).collect();
        let cuts = (0..c.users()).filter(|&k| c.d_thr[k] > 0.0).collect();
        Self { c, ut, n, cuts }
    }

    fn point(&self, v: CMat) -> Point {
        let last = v.row(self.n - 1).transpose().map(|z| z.conj());
        let mut a = Vec::with_capacity(self.ut.len());
        let mut u = Vec::with_capacity(self.ut.len());
        let mut h = Vec::with_capacity(self.ut.len());
        for k in 0..self.ut.len() {
            let ak = v.ad_mul(&self.ut[k]);
            let aa = ak.norm_squared();
            let cross = last.dotc(&ak);
            u.push(1.0 - self.c.c_off[k] - self.c.alpha[k] * aa + 2.0 * (self.c.beta[k] * cross).re);
            h.push(aa - self.c.d_thr[k]);
            a.push(ak);
        }
        Point { v, a, u, h }
    }

    fn objective(&self, pt: &Point) -> f64 {
        pt.u.iter().map(|&u| smooth_ln(u, LOG_KNOT).0).sum::<f64>() / LN_2
    }

    /// PHR augmented Lagrangian for `h_k >= 0`.
    fn lagrangian(&self, pt: &Point, lambda: &[f64], rho: f64) -> f64 {
        let mut l = self.objective(pt);
        for &k in &self.cuts {
            let m = (lambda[k] - rho * pt.h[k]).max(0.0);
            l -= (m * m - lambda[k] * lambda[k]) / (2.0 * rho);
        }
        l
    }

    /// Weights `(w_k, mu_k)` of `G = sum w_k C_k + sum mu_k D_k`.
    fn weights(&self, pt: &Point, lambda: &[f64], rho: f64) -> (Vec<f64>, Vec<f64>) {
        let w = pt.u.iter().map(|&u| smooth_ln(u, LOG_KNOT).1 / LN_2).collect();
        let mut mu = vec![0.0; pt.u.len()];
        for &k in &self.cuts {
            mu[k] = (lambda[k] - rho * pt.h[k]).max(0.0);
        }
        (w, mu)
    }

    /// `G V` using the rank-two structure of `C_k` and rank-one `D_k`.
    fn g_times_v(&self, pt: &Point, w: &[f64], mu: &[f64]) -> CMat {
        let r = pt.v.ncols();
        let last = pt.v.row(self.n - 1).transpose().map(|z| z.conj());
        let mut gv = CMat::zeros(self.n, r);
        let mut last_row = CVec::zeros(r);
        for k in 0..self.ut.len() {
            let coef_a = Complex64::from(-w[k] * self.c.alpha[k] + mu[k]);
            let coef_b = self.c.beta[k] * w[k];
            // q_k = coef_a a^H + coef_b b^H as a column of conjugates
            let q = CVec::from_fn(r, |j, _| coef_a * pt.a[k][j].conj() + coef_b * last[j].conj());
            gv += &self.ut[k] * q.transpose();
            last_row += pt.a[k].map(|z| z.conj()) * (self.c.beta[k].conj() * w[k]);
        }
        for j in 0..r {
            gv[(self.n - 1, j)] += last_row[j];
        }
        gv
    }

    fn dense_g(&self, w: &[f64], mu: &[f64]) -> CMat {
        let mut g = CMat::zeros(self.n, self.n);
        for k in 0..self.ut.len() {
            g += &self.c.c[k] * Complex64::from(w[k]);
            if mu[k] > 0.0 {
                g += &self.c.d[k] * Complex64::from(mu[k]);
            }
        }
        hermitize(&mut g);
        g
    }
}

/// Riemannian gradient: rows of `2 G V` projected onto the tangent spaces
/// of the unit spheres.
fn riemannian(v: &CMat, gv: &CMat) -> CMat {
    let mut r = gv * Complex64::from(2.0);
    for i in 0..v.nrows() {
        let along: f64 = (0..v.ncols()).map(|j| (r[(i, j)] * v[(i, j)].conj()).re).sum();
        for j in 0..v.ncols() {
            r[(i, j)] -= v[(i, j)] * along;
        }
    }
    r
}

fn normalize_rows(v: &mut CMat) {
    for i in 0..v.nrows() {
        let norm = v.row(i).norm();
        if norm > 0.0 {
            let s = Complex64::from(1.0 / norm);
            for j in 0..v.ncols() {
                v[(i, j)] *= s;
            }
        } else {
            v[(i, 0)] = Complex64::new(1.0, 0.0);
        }
    }
}

fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn initial_factor(coeffs: &RisCoeffs, rank: usize) -> CMat {
    let n = coeffs.lifted_dim();
    let anchor = lift(&coeffs.anchor);
    let mut rng = ChaCha8Rng::seed_from_u64(INIT_SEED);
    let mut v = CMat::from_fn(n, rank, |i, j| {
        if j == 0 {
            anchor[i]
        } else {
            complex_gaussian(&mut rng, INIT_SPREAD * INIT_SPREAD)
        }
    });
    normalize_rows(&mut v);
    v
}

/// Result of maximizing the augmented Lagrangian over the factor.
struct Ascent {
    pt: Point,
    steps: usize,
    converged: bool,
}

fn ascend(prob: &Problem, mut pt: Point, lambda: &[f64], rho: f64, tol: f64, budget: usize) -> Ascent {
    let (w, mu) = prob.weights(&pt, lambda, rho);
    let mut grad = riemannian(&pt.v, &prob.g_times_v(&pt, &w, &mu));
    let mut value = prob.lagrangian(&pt, lambda, rho);
    let mut step = 1.0 / grad.norm().max(1e-12);
    let mut steps = 0;
    loop {
        let gnorm = grad.norm();
        let (w, mu) = prob.weights(&pt, lambda, rho);
        let scale = 1.0 + prob.g_times_v(&pt, &w, &mu).norm();
        if gnorm <= tol * scale {
            return Ascent { pt, steps, converged: true };
        }
        if steps >= budget {
            return Ascent { pt, steps, converged: false };
        }
        steps += 1;
        let g2 = gnorm * gnorm;
        let mut alpha = step;
        let mut next = None;
        for _ in 0..50 {
            let mut cand = &pt.v + &grad * Complex64::from(alpha);
            normalize_rows(&mut cand);
            let cpt = prob.point(cand);
            let cv = prob.lagrangian(&cpt, lambda, rho);
            if cv >= value + 1e-4 * alpha * g2 {
                next = Some((cpt, cv));
                break;
            }
            alpha *= 0.5;
        }
        let Some((npt, nv)) = next else {
            // no ascent at working precision
            return Ascent { pt, steps, converged: true };
        };
        let (w, mu) = prob.weights(&npt, lambda, rho);
        let ngrad = riemannian(&npt.v, &prob.g_times_v(&npt, &w, &mu));
        let s = &npt.v - &pt.v;
        let yv = &ngrad - &grad;
        let sy = real_inner(&s, &yv).abs();
        step = if sy > 0.0 { (real_inner(&s, &s) / sy).clamp(1e-12, 1e12) } else { alpha * 2.0 };
        pt = npt;
        value = nv;
        grad = ngrad;
    }
}

/// Solves the RIS relaxation starting from the anchor phases stored in
/// `coeffs`. The solution always has an exact unit diagonal and is PSD by
/// construction; `status` reports whether optimality and the cuts were
/// certified.
pub fn solve_ris_sdp(coeffs: &RisCoeffs, settings: &SolverSettings) -> SolveOutcome<SdpSolution> {
    let prob = Problem::new(coeffs);
    let n = prob.n;
    let users = coeffs.users();
    let mut rank = (((2 * (n + users)) as f64).sqrt().ceil() as usize + 1).min(n);
    let mut pt = prob.point(initial_factor(coeffs, rank));
    let mut lambda = vec![0.0; users];
    let d_scale = prob.cuts.iter().map(|&k| coeffs.d_thr[k]).fold(0.0, f64::max).max(1e-12);
    let mut rho = 1.0 / (d_scale * d_scale);
    let rho_max = rho * 1e12;
    let tol = settings.rel_tol * 1e-2;
    let mut iterations = 0;
    let mut escalations = 0;
    let cut_violation = |pt: &Point| {
        prob.cuts.iter().map(|&k| (-pt.h[k]).max(0.0) / coeffs.d_thr[k].max(1.0)).fold(0.0, f64::max)
    };

    let status = 'outer: loop {
        let mut prev_violation = f64::INFINITY;
        let mut converged = false;
        for _ in 0..MAX_AL_ROUNDS {
            let budget = settings.max_iters.saturating_sub(iterations);
            let res = ascend(&prob, pt, &lambda, rho, tol, budget);
            iterations += res.steps;
            pt = res.pt;
            if !res.converged {
                break 'outer SolveStatus::IterLimit;
            }
            if prob.cuts.is_empty() {
                converged = true;
                break;
            }
            let violation = cut_violation(&pt);
            for &k in &prob.cuts {
                lambda[k] = (lambda[k] - rho * pt.h[k]).max(0.0);
            }
            if violation <= settings.feasibility_tol {
                converged = true;
                break;
            }
            if violation > 0.25 * prev_violation {
                if rho >= rho_max {
                    break 'outer SolveStatus::Infeasible;
                }
                rho *= 10.0;
            }
            prev_violation = violation;
        }
        if !converged {
            break SolveStatus::Inaccurate;
        }
        // second-order certificate on the unfactored problem
        let (w, mu) = prob.weights(&pt, &lambda, rho);
        let g = prob.dense_g(&w, &mu);
        let (min_eig, vec) = dual_min_eig(&g, &pt.v);
        let y_scale = 1.0 + g.norm();
        if min_eig >= -settings.abs_tol * y_scale {
            break SolveStatus::Optimal;
        }
        if escalations >= MAX_ESCALATIONS || rank >= n {
            break SolveStatus::Inaccurate;
        }
        escalations += 1;
        rank += 1;
        let mut v = pt.v.clone().resize_horizontally(rank, Complex64::new(0.0, 0.0));
        for i in 0..n {
            v[(i, rank - 1)] = vec[i] * 0.1;
        }
        normalize_rows(&mut v);
        pt = prob.point(v);
    };

    let v = pt.v.clone();
    let mut psi = &v * v.adjoint();
    hermitize(&mut psi);
    let (w, mu) = prob.weights(&pt, &lambda, rho);
    let (min_eig, _) = dual_min_eig(&prob.dense_g(&w, &mu), &v);
    let objective = (0..users)
        .map(|k| (1.0 - coeffs.c_off[k] + re_trace_prod(&psi, &coeffs.c[k])).ln() / LN_2)
        .sum();
    let diag_err = (0..n).map(|i| (psi[(i, i)].re - 1.0).abs()).fold(0.0, f64::max);
    let max_residual = diag_err.max(
        prob.cuts
            .iter()
            .map(|&k| (coeffs.d_thr[k] - re_trace_prod(&psi, &coeffs.d[k])).max(0.0) / coeffs.d_thr[k].max(1.0))
            .fold(0.0, f64::max),
    );
    let status = match status {
        SolveStatus::Optimal if max_residual > settings.feasibility_tol => SolveStatus::Inaccurate,
        s => s,
    };
    SolveOutcome {
        status,
        objective,
        solution: SdpSolution { psi, factor: v, dual_min_eig: min_eig, multipliers: lambda },
        max_residual,
        iterations,
    }
}

/// Smallest eigenpair of `S = Diag(Re diag(G V V^H)) - G`.
fn dual_min_eig(g: &CMat, v: &CMat) -> (f64, CVec) {
    let n = g.nrows();
    let gv = g * v;
    let mut s = -g.clone();
    for i in 0..n {
        let y: f64 = (0..v.ncols()).map(|j| (gv[(i, j)] * v[(i, j)].conj()).re).sum();
        s[(i, i)] += y;
    }
    hermitize(&mut s);
    let eig = SymmetricEigen::new(s);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    (val, eig.eigenvectors.column(idx).into_owned())
}
