//! Alternating-optimization drivers for sum rate and energy efficiency.
//!
//! One outer pass updates, in order, the RIS phases (relaxation plus
//! randomized rank-one extraction), the analog beamformer (with linearized
//! rate cuts) and the powers (inner QT loop). A block result replaces the
//! current design only if it does not make it worse; the best feasible
//! design seen is returned.

use std::time::{Duration, Instant};

use nalgebra::SVD;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::channel::{complex_gaussian, residual_coeff, ChannelError, ChannelSet, Design, SystemConfig};
use crate::fp::{
    aux_update_f, aux_update_p_with, aux_update_psi, aux_update_z, build_beamformer_coeffs, build_pa_coeffs,
    build_ris_coeffs, sca_linearize_minrate, FpError, XUpdateRule,
};
use crate::linalg::CVec;
use crate::metrics::{
    check_feasibility, decode_order, energy_efficiency, sinr_from_gains, sum_rate, sum_rate_from_sinr,
    FEASIBILITY_TOL,
};
use crate::solver::{
    solve_beamformer, solve_min_power, solve_pa_ee, solve_pa_sr, solve_ris_sdp, SdpSolution, SolveStatus,
    SolverSettings,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AoSettings {
    /// Relative objective change that ends the outer loop.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Outer passes run without the minimum-rate cuts.
    pub warmup_iters: usize,
    /// Gaussian randomizations in the rank-one extraction.
    pub randomizations: usize,
    pub solver: SolverSettings,
    pub x_rule: XUpdateRule,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            outer_tol: 1e-5,
            max_outer: 100,
            inner_tol: 1e-6,
            inner_max: 50,
            warmup_iters: 5,
            randomizations: 100,
            solver: SolverSettings::default(),
            x_rule: XUpdateRule::Consistent,
        }
    }
}

/// One outer pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Objective of the current design at the end of the pass.
    pub objective: f64,
    /// Best feasible objective seen so far.
    pub incumbent: Option<f64>,
    /// Whether the design at the end of the pass meets every constraint.
    pub feasible: bool,
    /// Feasible, and every block was solved to optimality or rejected.
    pub accepted: bool,
    pub cuts: bool,
    pub ris: SolveStatus,
    pub beamformer: SolveStatus,
    pub power: SolveStatus,
    /// Block results discarded because they would have worsened the design.
    pub rejected_blocks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

impl AoTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Objectives of the accepted passes, in order.
    pub fn accepted_objectives(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.accepted).map(|r| r.objective).collect()
    }
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error(transparent)]
    Config(#[from] ChannelError),
    #[error("no design meeting every rate target was found")]
    InfeasibleProblem { design: Box<Design>, trace: Box<AoTrace> },
    #[error("beamformer entry {index} has amplitude {amplitude} above 2")]
    DpsDomain { index: usize, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Goal {
    SumRate,
    EnergyEfficiency,
}

/// Unit-norm dominant right singular vector of `H`, RIS phases aligned to
/// the cascade of the strongest user, equal powers.
pub fn initialize_design(chs: &ChannelSet, cfg: &SystemConfig) -> Design {
    let svd = SVD::new(chs.bs_ris_est.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (best, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let mut f: CVec = v_t.row(best).adjoint();
    let norm = f.norm();
    if norm > 0.0 {
        f /= Complex64::from(norm);
    } else {
        f = CVec::from_element(chs.antennas(), Complex64::from(1.0 / (chs.antennas() as f64).sqrt()));
    }
    let strongest = (0..chs.users())
        .map(|k| (k, chs.cascade(k, &f).iter().map(|z| z.norm()).sum::<f64>()))
        .fold((0, f64::NEG_INFINITY), |acc, (k, g)| if g > acc.1 { (k, g) } else { acc })
        .0;
    let psi = align_phases(&chs.cascade(strongest, &f));
    let p = vec![cfg.power_budget / chs.users() as f64; chs.users()];
    let order = decode_order(chs, &psi, &f);
    Design { f, psi, p, order }
}

/// `psi_i = exp(-j arg u_i)`, so that `psi^T u = sum |u_i|`.
pub fn align_phases(u: &CVec) -> CVec {
    u.map(|z| Complex64::from_polar(1.0, -z.arg()))
}

/// Outcome of the rank-one extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub psi: CVec,
    pub sum_rate: f64,
    /// Whether every rate target holds with the extracted phases.
    pub feasible: bool,
}

/// Candidate phases: the principal eigenvector of `Psi` plus `draws`
/// samples of `CN(0, Psi)`, each normalized by its last entry. Returns the
/// best sum rate among candidates meeting the rate targets, or the best
/// overall when none does.
#[allow(clippy::too_many_arguments)]
pub fn rank1_extract<R: Rng + ?Sized>(
    sdp: &SdpSolution,
    chs: &ChannelSet,
    f: &CVec,
    p: &[f64],
    order: &[usize],
    cfg: &SystemConfig,
    draws: usize,
    rng: &mut R,
) -> Extraction {
    let v = &sdp.factor;
    let n = v.nrows();
    let cascades: Vec<CVec> = (0..chs.users()).map(|k| chs.cascade(k, f)).collect();
    let resid = residual_coeff(chs, f);
    let etas = cfg.etas();
    let evaluate = |psi: &CVec| {
        let gains: Vec<f64> = cascades.iter().map(|u| psi.dot(u).norm_sqr()).collect();
        let gamma = sinr_from_gains(&gains, &resid, p, order, cfg.noise_power);
        let feasible = gamma.iter().zip(&etas).all(|(g, e)| e - g <= FEASIBILITY_TOL);
        (sum_rate_from_sinr(&gamma), feasible)
    };
    let normalize = |w: &CVec| {
        let reference = w[n - 1];
        CVec::from_fn(n - 1, |i, _| {
            let z = w[i] * reference.conj();
            if z.norm() > 0.0 {
                Complex64::from_polar(1.0, z.arg())
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    };

    let svd = SVD::new(v.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let lead = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
        .0;
    let mut best: Option<Extraction> = None;
    let mut consider = |psi: CVec| {
        let (rate, feasible) = evaluate(&psi);
        let better = match &best {
            None => true,
            Some(b) => (feasible && !b.feasible) || (feasible == b.feasible && rate > b.sum_rate),
        };
        if better {
            best = Some(Extraction { psi, sum_rate: rate, feasible });
        }
    };
    consider(normalize(&u.column(lead).into_owned()));
    let r = v.ncols();
    for _ in 0..draws {
        let w = CVec::from_fn(r, |_, _| complex_gaussian(rng, 1.0));
        consider(normalize(&(v * w)));
    }
    best.expect("at least one candidate")
}

/// Splits each beamformer entry into two unit phasors:
/// `f_i = exp(j theta_i1) + exp(j theta_i2)`.
pub fn dps_decompose(f: &CVec) -> Result<(Vec<f64>, Vec<f64>), AlgorithmError> {
    let mut t1 = Vec::with_capacity(f.len());
    let mut t2 = Vec::with_capacity(f.len());
    for (index, z) in f.iter().enumerate() {
        let amplitude = z.norm();
        if amplitude > 2.0 {
            return Err(AlgorithmError::DpsDomain { index, amplitude });
        }
        let spread = (amplitude / 2.0).acos();
        let phase = if amplitude > 0.0 { z.arg() } else { 0.0 };
        t1.push(phase + spread);
        t2.push(phase - spread);
    }
    Ok((t1, t2))
}

/// Algorithm 1: maximizes the sum rate.
pub fn algorithm1_sum_rate<R: Rng + ?Sized>(
    chs: &ChannelSet,
    cfg: &SystemConfig,
    settings: &AoSettings,
    rng: &mut R,
) -> Result<(Design, AoTrace), AlgorithmError> {
    run(Goal::SumRate, chs, cfg, settings, rng)
}

/// Algorithm 2: maximizes the energy efficiency.
pub fn algorithm2_ee<R: Rng + ?Sized>(
    chs: &ChannelSet,
    cfg: &SystemConfig,
    settings: &AoSettings,
    rng: &mut R,
) -> Result<(Design, AoTrace), AlgorithmError> {
    run(Goal::EnergyEfficiency, chs, cfg, settings, rng)
}

/// Design together with its objective and constraint status.
#[derive(Debug, Clone)]
struct Scored {
    design: Design,
    value: f64,
    feasible: bool,
    violation: f64,
}

struct Context<'a> {
    goal: Goal,
    chs: &'a ChannelSet,
    cfg: &'a SystemConfig,
}

impl Context<'_> {
    fn score(&self, design: Design) -> Scored {
        let value = match self.goal {
            Goal::SumRate => sum_rate(&design, self.chs, self.cfg),
            Goal::EnergyEfficiency => energy_efficiency(&design, self.chs, self.cfg),
        };
        let violations = check_feasibility(&design, self.chs, self.cfg, FEASIBILITY_TOL);
        let violation = violations.iter().map(|v| v.magnitude).sum();
        Scored { design, value, feasible: violations.is_empty(), violation }
    }

    /// Whether `new` may replace `old`: feasibility first, then the
    /// objective (or the total violation while infeasible).
    fn improves(&self, new: &Scored, old: &Scored) -> bool {
        if !new.value.is_finite() {
            return false;
        }
        match (new.feasible, old.feasible) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => new.value >= old.value,
            (false, false) => new.violation < old.violation || (new.violation == old.violation && new.value >= old.value),
        }
    }
}

fn run<R: Rng + ?Sized>(
    goal: Goal,
    chs: &ChannelSet,
    cfg: &SystemConfig,
    settings: &AoSettings,
    rng: &mut R,
) -> Result<(Design, AoTrace), AlgorithmError> {
    cfg.validate()?;
    let start = Instant::now();
    let ctx = Context { goal, chs, cfg };
    let relaxed_cfg = cfg.clone().with_uniform_threshold(0.0);
    let mut current = ctx.score(initialize_design(chs, cfg));
    let initial_objective = current.value;
    let mut incumbent: Option<Scored> = current.feasible.then(|| current.clone());
    let mut records = Vec::new();
    let mut converged = false;
    let mut settled = None::<f64>;

    for it in 0..settings.max_outer {
        let cuts = it >= settings.warmup_iters;
        let step_cfg = if cuts { cfg } else { &relaxed_cfg };
        let previous = current.value;
        let mut rejected = 0;
        let mut clean = true;

        if !current.feasible {
            for c in restore(&ctx, &current, &settings.solver) {
                if ctx.improves(&c, &current) {
                    current = c;
                }
            }
        }

        // RIS phases
        let ris = match ris_step(&current.design, chs, step_cfg, settings, rng) {
            Some((psi, status)) => {
                let c = ctx.score(Design { psi, ..current.design.clone() });
                if ctx.improves(&c, &current) {
                    current = c;
                } else {
                    rejected += 1;
                }
                status
            }
            None => SolveStatus::Infeasible,
        };
        clean &= ris.is_optimal() || ris == SolveStatus::Infeasible;

        // analog beamformer
        let beam = {
            let d = &current.design;
            let coeffs = build_beamformer_coeffs(chs, &d.psi, &d.p, &d.order, step_cfg);
            match aux_update_f(&coeffs, &d.f) {
                Ok(y) => {
                    let cut_set = if cuts { sca_linearize_minrate(&coeffs, &d.f) } else { Vec::new() };
                    let out = solve_beamformer(&coeffs, &y, &cut_set, &d.f, &settings.solver);
                    let c = ctx.score(Design { f: out.outcome.solution, ..d.clone() });
                    if ctx.improves(&c, &current) {
                        current = c;
                    } else {
                        rejected += 1;
                    }
                    out.outcome.status
                }
                Err(_) => SolveStatus::Inaccurate,
            }
        };
        clean &= beam.is_optimal() || beam == SolveStatus::Infeasible;

        // powers
        let power = match power_step(goal, &current.design, chs, cfg, settings) {
            Some((p, status)) => {
                let c = ctx.score(Design { p, ..current.design.clone() });
                if ctx.improves(&c, &current) {
                    current = c;
                } else {
                    rejected += 1;
                }
                status
            }
            None => SolveStatus::Inaccurate,
        };
        clean &= power.is_optimal() || power == SolveStatus::Infeasible;

        if current.feasible && incumbent.as_ref().is_none_or(|b| current.value > b.value) {
            incumbent = Some(current.clone());
        }
        records.push(IterationRecord {
            objective: current.value,
            incumbent: incumbent.as_ref().map(|b| b.value),
            feasible: current.feasible,
            accepted: cuts && current.feasible && clean,
            cuts,
            ris,
            beamformer: beam,
            power,
            rejected_blocks: rejected,
        });

        if cuts && current.feasible {
            let change = (current.value - previous).abs() / previous.abs().max(1e-12);
            if settled.is_some() && change < settings.outer_tol {
                converged = true;
                break;
            }
            settled = Some(current.value);
        }
    }

    let trace = AoTrace {
        initial_objective,
        iterations: records.len(),
        records,
        converged,
        wall_time: start.elapsed(),
    };
    match incumbent {
        Some(best) => Ok((best.design, trace)),
        None => Err(AlgorithmError::InfeasibleProblem { design: Box::new(current.design), trace: Box::new(trace) }),
    }
}

/// Restoration candidates for an infeasible design: the minimum-power
/// allocation at the current beam and phases, and at phases aligned to each
/// user in turn.
fn restore(ctx: &Context, current: &Scored, settings: &SolverSettings) -> Vec<Scored> {
    let d = &current.design;
    let mut phases = vec![d.psi.clone()];
    phases.extend((0..ctx.chs.users()).map(|k| align_phases(&ctx.chs.cascade(k, &d.f))));
    phases
        .into_iter()
        .filter_map(|psi| {
            let coeffs = build_pa_coeffs(ctx.chs, &d.f, &psi, &d.order, ctx.cfg).ok()?;
            let out = solve_min_power(&coeffs, settings);
            let p = if out.status == SolveStatus::Infeasible { d.p.clone() } else { out.solution };
            Some(ctx.score(Design { psi, p, ..d.clone() }))
        })
        .collect()
}

fn ris_step<R: Rng + ?Sized>(
    d: &Design,
    chs: &ChannelSet,
    cfg: &SystemConfig,
    settings: &AoSettings,
    rng: &mut R,
) -> Option<(CVec, SolveStatus)> {
    let nu = aux_update_psi(chs, &d.f, &d.psi, &d.p, &d.order, cfg).ok()?;
    let coeffs = match build_ris_coeffs(chs, &d.f, &d.psi, &d.p, &d.order, &nu, cfg) {
        Ok(c) => c,
        Err(FpError::MinRateDegenerate { .. }) => {
            let relaxed = cfg.clone().with_uniform_threshold(0.0);
            build_ris_coeffs(chs, &d.f, &d.psi, &d.p, &d.order, &nu, &relaxed).ok()?
        }
        Err(_) => return None,
    };
    let out = solve_ris_sdp(&coeffs, &settings.solver);
    let ext = rank1_extract(&out.solution, chs, &d.f, &d.p, &d.order, cfg, settings.randomizations, rng);
    Some((ext.psi, out.status))
}

fn power_step(
    goal: Goal,
    d: &Design,
    chs: &ChannelSet,
    cfg: &SystemConfig,
    settings: &AoSettings,
) -> Option<(Vec<f64>, SolveStatus)> {
    let coeffs = build_pa_coeffs(chs, &d.f, &d.psi, &d.order, cfg).ok()?;
    let mut p = d.p.clone();
    let mut status = SolveStatus::Optimal;
    let mut last = f64::NAN;
    for _ in 0..settings.inner_max {
        let x = aux_update_p_with(&coeffs, &p, settings.x_rule).ok()?;
        let out = match goal {
            Goal::SumRate => solve_pa_sr(&coeffs, &x, &settings.solver),
            Goal::EnergyEfficiency => {
                let z = aux_update_z(&coeffs, &p, &x).ok()?;
                solve_pa_ee(&coeffs, &x, z, &settings.solver)
            }
        };
        status = out.status;
        if !status.is_optimal() {
            break;
        }
        p = out.solution;
        let gamma = coeffs.sinr(&p);
        let rate = sum_rate_from_sinr(&gamma);
        let value = match goal {
            Goal::SumRate => rate,
            Goal::EnergyEfficiency => rate / (p.iter().sum::<f64>() + coeffs.circuit),
        };
        if (value - last).abs() <= settings.inner_tol * value.abs().max(1e-12) {
            break;
        }
        last = value;
    }
    Some((p, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use crate::channel::sample_channels;
    use crate::fp::lift;
    use crate::linalg::{outer, CMat};
    use crate::metrics::evaluate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_cfg(n_h: usize, n_v: usize, users: usize, var: f64, rate: f64) -> SystemConfig {
        SystemConfig { antennas: 4, ris_h: n_h, ris_v: n_v, users, csi_error_var: var, ..Default::default() }
            .with_snr_db(10.0)
            .with_uniform_threshold(rate)
    }

    fn quick() -> AoSettings {
        AoSettings { max_outer: 30, randomizations: 30, ..Default::default() }
    }

    #[test]
    fn init_single_element_alignment() {
        let cfg = small_cfg(1, 1, 1, 0.0, 0.0);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let d = initialize_design(&chs, &cfg);
        assert!((d.psi[0].norm() - 1.0).abs() < 1e-15);
        let g = d.psi.dot(&chs.cascade(0, &d.f));
        assert!(g.im.abs() < 1e-12 && g.re >= 0.0);
        assert!((d.f.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_rank_one_channel() {
        let u = CVec::from_fn(4, |i, _| c(1.0, i as f64 * 0.3));
        let v = CVec::from_fn(3, |i, _| c(0.5 - i as f64, 0.2));
        let h = &u * v.adjoint();
        let chs = ChannelSet::perfect(h, vec![CVec::from_element(4, c(1.0, 0.0))]);
        let cfg = SystemConfig { antennas: 3, ris_h: 2, ris_v: 2, users: 1, ..Default::default() }.with_uniform_threshold(0.0);
        let d = initialize_design(&chs, &cfg);
        let vn = &v / Complex64::from(v.norm());
        assert!((vn.dotc(&d.f).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_alignment_beats_random_phases() {
        let cfg = small_cfg(3, 3, 1, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chs = sample_channels(&cfg, &mut rng);
        let d = initialize_design(&chs, &cfg);
        let u = chs.cascade(0, &d.f);
        let aligned = d.psi.dot(&u).norm();
        for _ in 0..1000 {
            let psi = CVec::from_fn(9, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI));
            assert!(psi.dot(&u).norm() <= aligned + 1e-12);
        }
    }

    #[test]
    fn extraction_recovers_rank_one() {
        let cfg = small_cfg(2, 2, 2, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chs = sample_channels(&cfg, &mut rng);
        let d = initialize_design(&chs, &cfg);
        let psi = CVec::from_fn(4, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI));
        let lifted = lift(&psi) * Complex64::from_polar(1.0, 0.7);
        let sdp = SdpSolution { psi: outer(&lifted), factor: CMat::from_column_slice(5, 1, lifted.as_slice()), dual_min_eig: 0.0, multipliers: vec![] };
        let ext = rank1_extract(&sdp, &chs, &d.f, &d.p, &d.order, &cfg, 10, &mut rng);
        assert!((&ext.psi - &psi).norm() < 1e-10);
        let rate = sum_rate(&Design { psi, ..d.clone() }, &chs, &cfg);
        assert!((ext.sum_rate - rate).abs() < 1e-12);
    }

    #[test]
    fn extraction_is_reproducible() {
        let cfg = small_cfg(2, 2, 2, 0.01, 0.0);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4));
        let d = initialize_design(&chs, &cfg);
        let factor = CMat::from_fn(5, 3, |i, j| c((i + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2 + 0.1));
        let sdp = SdpSolution { psi: &factor * factor.adjoint(), factor, dual_min_eig: 0.0, multipliers: vec![] };
        let a = rank1_extract(&sdp, &chs, &d.f, &d.p, &d.order, &cfg, 50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = rank1_extract(&sdp, &chs, &d.f, &d.p, &d.order, &cfg, 50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn dps_cases() {
        let f = CVec::from_column_slice(&[c(2.0, 0.0), c(0.0, 0.0), c(-0.3, 1.1)]);
        let (t1, t2) = dps_decompose(&f).unwrap();
        assert_eq!(t1[0], 0.0);
        assert_eq!(t2[0], 0.0);
        assert!((t1[1] - t2[1] - PI).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = CVec::from_fn(50, |_, _| Complex64::from_polar(2.0 * rng.random::<f64>().sqrt(), rng.random::<f64>() * 6.0));
        let (t1, t2) = dps_decompose(&f).unwrap();
        for i in 0..50 {
            let z = Complex64::from_polar(1.0, t1[i]) + Complex64::from_polar(1.0, t2[i]);
            assert!((z - f[i]).norm() < 1e-12);
        }
        assert!(matches!(
            dps_decompose(&CVec::from_element(1, c(2.5, 0.0))),
            Err(AlgorithmError::DpsDomain { index: 0, .. })
        ));
    }

    #[test]
    fn zero_thresholds_never_infeasible() {
        for seed in 0..3 {
            let cfg = small_cfg(2, 3, 3, 0.02, 0.0);
            let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            let (d, trace) = algorithm1_sum_rate(&chs, &cfg, &quick(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(evaluate(&d, &chs, &cfg, FEASIBILITY_TOL).feasible);
            assert!(trace.records.last().unwrap().incumbent.unwrap() >= trace.initial_objective - 1e-9);
        }
    }

    #[test]
    fn traces_are_monotone_and_designs_feasible() {
        for seed in 0..3 {
            let cfg = small_cfg(2, 3, 3, 0.02, 0.2);
            let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(10 + seed));
            for ee in [false, true] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let res = if ee {
                    algorithm2_ee(&chs, &cfg, &quick(), &mut rng)
                } else {
                    algorithm1_sum_rate(&chs, &cfg, &quick(), &mut rng)
                };
                let (d, trace) = res.unwrap();
                assert!(evaluate(&d, &chs, &cfg, FEASIBILITY_TOL).feasible);
                let acc = trace.accepted_objectives();
                assert!(acc.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{acc:?}");
                assert!(trace.objectives().iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = small_cfg(2, 2, 2, 0.02, 0.1);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        let (a, ta) = algorithm1_sum_rate(&chs, &cfg, &quick(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (b, tb) = algorithm1_sum_rate(&chs, &cfg, &quick(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.records, tb.records);
    }

    #[test]
    fn unreachable_targets_are_reported() {
        let cfg = small_cfg(2, 2, 2, 0.0, 30.0);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(8));
        let settings = AoSettings { max_outer: 8, ..quick() };
        match algorithm1_sum_rate(&chs, &cfg, &settings, &mut ChaCha8Rng::seed_from_u64(1)) {
            Err(AlgorithmError::InfeasibleProblem { design, trace }) => {
                assert_eq!(design.p.len(), 2);
                assert_eq!(trace.iterations, 8);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn large_circuit_power_approaches_sum_rate_design() {
        let mut cfg = small_cfg(2, 2, 2, 0.0, 0.0);
        cfg.power_model.bs_residual = 1e3 * cfg.power_budget;
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(12));
        let (sr, _) = algorithm1_sum_rate(&chs, &cfg, &quick(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (ee, _) = algorithm2_ee(&chs, &cfg, &quick(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (a, b) = (sr.total_power(), ee.total_power());
        assert!((a - b).abs() <= 0.05 * a, "{a} vs {b}");
    }
}
