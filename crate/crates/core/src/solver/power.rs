//! NOMA power allocation steps.

use std::f64::consts::LN_2;

use super::barrier::{self, smooth_ln, smooth_sqrt, ConcaveObjective, Constraint, Matrix, Vector};
use super::{SolveOutcome, SolveStatus, SolverSettings};
use crate::channel::positions;
use crate::fp::PaCoeffs;

const LOG_KNOT: f64 = 1e-8;
const COARSE_LOG_KNOT: f64 = 1e-2;
const SQRT_KNOT: f64 = 1e-10;

/// `u_k(p) = 1 + 2 x_k sqrt(p_k) - x_k^2 (a_k + w_k . p)` for each user.
struct QtRates {
    x: Vec<f64>,
    a: Vec<f64>,
    w: Vec<Vector>,
    knot: f64,
}

impl QtRates {
    fn new(coeffs: &PaCoeffs, x: &[f64], knot: f64) -> Self {
        let users = coeffs.users();
        let pos = positions(&coeffs.order);
        let w = (0..users)
            .map(|k| Vector::from_fn(users, |i, _| coeffs.b[k] + if pos[i] > pos[k] { 1.0 } else { 0.0 }))
            .collect();
        Self { x: x.to_vec(), a: coeffs.a.clone(), w, knot }
    }

    fn inner(&self, k: usize, p: &Vector) -> f64 {
        let x = self.x[k];
        1.0 + 2.0 * x * p[k].max(0.0).sqrt() - x * x * (self.a[k] + self.w[k].dot(p))
    }

    /// `S(p) = sum log2 u_k` (smoothly extended) with derivatives.
    fn sum_rate(&self, p: &Vector) -> (f64, Vector, Matrix) {
        let n = p.len();
        let mut v = 0.0;
        let mut g = Vector::zeros(n);
        let mut h = Matrix::zeros(n, n);
        for k in 0..n {
            let x = self.x[k];
            let (l, dl, ddl) = smooth_ln(self.inner(k, p), self.knot);
            let sq = p[k].max(1e-300).sqrt();
            let mut du = &self.w[k] * (-x * x);
            du[k] += x / sq;
            v += l;
            g += &du * dl;
            h += &du * du.transpose() * ddl;
            h[(k, k)] += dl * (-0.5 * x / (sq * p[k].max(1e-300)));
        }
        (v / LN_2, g / LN_2, h / LN_2)
    }
}

struct SumRateObjective(QtRates);

impl ConcaveObjective for SumRateObjective {
    fn value(&self, p: &Vector) -> f64 {
        (0..p.len()).map(|k| smooth_ln(self.0.inner(k, p), self.0.knot).0).sum::<f64>() / LN_2
    }

    fn derivatives(&self, p: &Vector) -> (f64, Vector, Matrix) {
        self.0.sum_rate(p)
    }
}

struct EeObjective {
    rates: QtRates,
    z: f64,
    circuit: f64,
}

impl ConcaveObjective for EeObjective {
    fn value(&self, p: &Vector) -> f64 {
        let s = (0..p.len()).map(|k| smooth_ln(self.rates.inner(k, p), self.rates.knot).0).sum::<f64>() / LN_2;
        2.0 * self.z * smooth_sqrt(s, SQRT_KNOT).0 - self.z * self.z * (p.sum() + self.circuit)
    }

    fn derivatives(&self, p: &Vector) -> (f64, Vector, Matrix) {
        let (s, gs, hs) = self.rates.sum_rate(p);
        let (r, dr, ddr) = smooth_sqrt(s, SQRT_KNOT);
        let z = self.z;
        let v = 2.0 * z * r - z * z * (p.sum() + self.circuit);
        let g = &gs * (2.0 * z * dr) - Vector::from_element(p.len(), z * z);
        let h = (&gs * gs.transpose() * ddr + hs * dr) * (2.0 * z);
        (v, g, h)
    }
}

struct MinPower;

impl ConcaveObjective for MinPower {
    fn value(&self, p: &Vector) -> f64 {
        -p.sum()
    }

    fn derivatives(&self, p: &Vector) -> (f64, Vector, Matrix) {
        let n = p.len();
        (-p.sum(), Vector::from_element(n, -1.0), Matrix::zeros(n, n))
    }
}

fn constraints(coeffs: &PaCoeffs) -> Vec<Constraint> {
    let users = coeffs.users();
    let mut cons = Vec::with_capacity(2 * users + 1);
    for k in 0..users {
        let mut a = Vector::zeros(users);
        a[k] = -1.0;
        cons.push(Constraint::Linear { a, b: 0.0 });
    }
    let scale = (users as f64).sqrt();
    cons.push(Constraint::Linear { a: Vector::from_element(users, 1.0 / scale), b: coeffs.budget / scale });
    for (w, rhs) in coeffs.min_rate_rows() {
        let n = w.norm();
        cons.push(Constraint::Linear { a: w / n, b: rhs / n });
    }
    cons
}

fn solve<O: ConcaveObjective>(
    coeffs: &PaCoeffs,
    obj: &O,
    coarse: Option<&O>,
    settings: &SolverSettings,
    recompute: impl Fn(&[f64]) -> f64,
) -> SolveOutcome<Vec<f64>> {
    let users = coeffs.users();
    let cons = constraints(coeffs);
    let start = Vector::from_element(users, coeffs.budget / (2.0 * users as f64));
    let mut iterations = 0;
    let x0 = if cons.iter().all(|c| c.value(&start) < 0.0) {
        start
    } else {
        let p1 = barrier::phase_one(&cons, &start, settings.feasibility_tol * coeffs.budget.max(1.0), settings);
        iterations += p1.iterations;
        if !(p1.slack < 0.0) {
            let p: Vec<f64> = p1.x.iter().map(|v| v.max(0.0)).collect();
            return SolveOutcome {
                status: SolveStatus::Infeasible,
                objective: recompute(&p),
                max_residual: p1.slack,
                solution: p,
                iterations,
            };
        }
        p1.x
    };
    let mut x0 = x0;
    if let Some(coarse) = coarse {
        // far from the log domain the fine extension is badly conditioned
        let warm = barrier::maximize(coarse, &cons, x0.clone(), settings);
        iterations += warm.iterations;
        if cons.iter().all(|c| c.value(&warm.x) < 0.0) {
            x0 = warm.x;
        }
    }
    let res = barrier::maximize(obj, &cons, x0, settings);
    iterations += res.iterations;
    let max_residual = barrier::max_violation(&cons, &res.x);
    let status = match res.status {
        SolveStatus::Optimal if max_residual > settings.feasibility_tol => SolveStatus::Inaccurate,
        s => s,
    };
    let p: Vec<f64> = res.x.iter().copied().collect();
    SolveOutcome { status, objective: recompute(&p), solution: p, max_residual, iterations }
}

/// Minimum total power meeting every rate target within the budget.
pub fn solve_min_power(coeffs: &PaCoeffs, settings: &SolverSettings) -> SolveOutcome<Vec<f64>> {
    solve(coeffs, &MinPower, None, settings, |p| -p.iter().sum::<f64>())
}

/// Maximizes `sum_k log2(1 + Gamma_bar_k(p, x_k))` over the power simplex
/// with the min-rate rows. A constant objective (`x = 0`) yields the
/// minimum-power feasible point.
pub fn solve_pa_sr(coeffs: &PaCoeffs, x: &[f64], settings: &SolverSettings) -> SolveOutcome<Vec<f64>> {
    let objective = |p: &[f64]| coeffs.qt_sum_rate(p, x);
    if x.iter().all(|&v| v == 0.0) {
        let out = solve_min_power(coeffs, settings);
        return SolveOutcome { objective: objective(&out.solution), ..out };
    }
    let fine = SumRateObjective(QtRates::new(coeffs, x, LOG_KNOT));
    let coarse = SumRateObjective(QtRates::new(coeffs, x, COARSE_LOG_KNOT));
    solve(coeffs, &fine, Some(&coarse), settings, objective)
}

/// Maximizes `2 z sqrt(sum_k log2(1 + Gamma_bar_k)) - z^2 (sum p + P_c)`.
pub fn solve_pa_ee(coeffs: &PaCoeffs, x: &[f64], z: f64, settings: &SolverSettings) -> SolveOutcome<Vec<f64>> {
    let objective = |p: &[f64]| coeffs.ee_qt_objective(p, x, z);
    if z == 0.0 {
        let out = solve_min_power(coeffs, settings);
        return SolveOutcome { objective: objective(&out.solution), ..out };
    }
    let ee = |knot| EeObjective { rates: QtRates::new(coeffs, x, knot), z, circuit: coeffs.circuit };
    solve(coeffs, &ee(LOG_KNOT), Some(&ee(COARSE_LOG_KNOT)), settings, objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_user(eta: f64) -> PaCoeffs {
        PaCoeffs { a: vec![0.8, 0.05], b: vec![0.01, 0.002], eta: vec![eta, eta], budget: 10.0, circuit: 2.0, order: vec![0, 1] }
    }

    fn feasible(c: &PaCoeffs, p: &[f64]) -> bool {
        p.iter().all(|&v| v >= 0.0)
            && p.iter().sum::<f64>() <= c.budget
            && c.sinr(p).iter().zip(&c.eta).all(|(g, e)| g >= e)
    }

    fn random_simplex(rng: &mut ChaCha8Rng, k: usize, budget: f64) -> Vec<f64> {
        let e: Vec<f64> = (0..=k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let s: f64 = e.iter().sum();
        e[..k].iter().map(|v| budget * v / s).collect()
    }

    #[test]
    fn single_user_full_power() {
        let c = PaCoeffs { a: vec![0.5], b: vec![0.0], eta: vec![0.0], budget: 4.0, circuit: 1.0, order: vec![0] };
        let out = solve_pa_sr(&c, &[0.7], &SolverSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.solution[0] - 4.0).abs() < 1e-5);
    }

    #[test]
    fn zero_aux_returns_min_power() {
        let c = two_user(0.0);
        let out = solve_pa_sr(&c, &[0.0, 0.0], &SolverSettings::default());
        assert_eq!(out.objective, 0.0);
        assert!(out.solution.iter().sum::<f64>() < 1e-5);

        let c = two_user(0.3);
        let sr = solve_pa_sr(&c, &[0.0, 0.0], &SolverSettings::default());
        let ee = solve_pa_ee(&c, &[0.4, 0.4], 0.0, &SolverSettings::default());
        let lp = solve_min_power(&c, &SolverSettings::default());
        assert!(feasible(&c, &sr.solution.iter().map(|v| v * (1.0 + 1e-6)).collect::<Vec<_>>()));
        assert!((sr.solution.iter().sum::<f64>() - lp.solution.iter().sum::<f64>()).abs() < 1e-6);
        assert_eq!(ee.solution, sr.solution);
        // no feasible point uses less power
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let p = random_simplex(&mut rng, 2, 10.0);
            if feasible(&c, &p) {
                assert!(p.iter().sum::<f64>() >= lp.solution.iter().sum::<f64>() - 1e-6);
            }
        }
    }

    #[test]
    fn sum_rate_beats_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for eta in [0.0, 0.2] {
            let c = two_user(eta);
            let x = vec![0.4, 0.3];
            let out = solve_pa_sr(&c, &x, &SolverSettings::default());
            assert_eq!(out.status, SolveStatus::Optimal);
            let mut best = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                let p = random_simplex(&mut rng, 2, c.budget);
                if c.min_rate_rows().iter().all(|(w, r)| w.dot(&Vector::from_column_slice(&p)) <= *r) {
                    let v = c.qt_sum_rate(&p, &x);
                    if v.is_finite() {
                        best = best.max(v);
                    }
                }
            }
            assert!(out.objective >= best - 1e-9, "{} < {}", out.objective, best);
        }
    }

    #[test]
    fn ee_beats_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = two_user(0.1);
        let x = vec![0.5, 0.6];
        let z = 0.2;
        let out = solve_pa_ee(&c, &x, z, &SolverSettings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            let p = random_simplex(&mut rng, 2, c.budget);
            if c.min_rate_rows().iter().all(|(w, r)| w.dot(&Vector::from_column_slice(&p)) <= *r) {
                best = best.max(c.ee_qt_objective(&p, &x, z));
            }
        }
        assert!(out.objective >= best - 1e-9, "{} < {}", out.objective, best);
    }

    #[test]
    fn ee_single_user_matches_golden_section() {
        let c = PaCoeffs { a: vec![0.2], b: vec![0.0], eta: vec![0.0], budget: 100.0, circuit: 50.0, order: vec![0] };
        let x = [0.15];
        let z = 0.1;
        let f = |p: f64| c.ee_qt_objective(&[p], &x, z);
        let (mut lo, mut hi) = (0.0, c.budget);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let p_star = 0.5 * (lo + hi);
        assert!(p_star < c.budget - 1.0);
        let out = solve_pa_ee(&c, &x, z, &SolverSettings::default());
        assert!((out.solution[0] - p_star).abs() < 1e-3 * p_star.max(1.0));
        assert!(out.objective >= f(p_star) - 1e-9);
    }

    #[test]
    fn infeasible_targets_are_reported() {
        let c = two_user(50.0);
        let out = solve_pa_sr(&c, &[0.3, 0.3], &SolverSettings::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic() {
        let c = two_user(0.1);
        let a = solve_pa_sr(&c, &[0.4, 0.3], &SolverSettings::default());
        let b = solve_pa_sr(&c, &[0.4, 0.3], &SolverSettings::default());
        assert_eq!(a, b);
    }
}
