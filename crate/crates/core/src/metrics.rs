//! Ground-truth evaluators: SINR, rates, energy efficiency, circuit power and
//! constraint feasibility of a [`Design`].

use std::fmt;

use crate::channel::{positions, residual_coeff, ChannelSet, Design, SystemConfig};
use crate::linalg::CVec;

/// Default absolute tolerance for [`check_feasibility`].
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Transmitter architecture for the circuit power model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Single RF chain, DPS analog beamformer and RIS.
    AnalogRis,
    /// One RF chain per antenna.
    FullyDigital,
}

/// Circuit power `P_c` of the given architecture.
pub fn circuit_power(cfg: &SystemConfig, arch: Architecture) -> f64 {
    let pm = &cfg.power_model;
    match arch {
        Architecture::AnalogRis => pm.bs_residual + pm.rf_chain + cfg.n_ris() as f64 * pm.ris_element,
        Architecture::FullyDigital => pm.bs_residual + cfg.antennas as f64 * pm.rf_chain,
    }
}

/// Squared effective gains `|g_k f|^2` for every user.
pub fn effective_gains(chs: &ChannelSet, psi: &CVec, f: &CVec) -> Vec<f64> {
    (0..chs.users())
        .map(|k| psi.dot(&chs.cascade(k, f)).norm_sqr())
        .collect()
}

/// SINR from precomputed squared gains and residual coefficients. `order`
/// lists users weakest first; user `k` is interfered by every user decoded
/// after it.
pub fn sinr_from_gains(gains: &[f64], resid: &[f64], p: &[f64], order: &[usize], noise: f64) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    let mut gamma = vec![0.0; p.len()];
    let mut later = 0.0;
    for &k in order.iter().rev() {
        let den = noise + gains[k] * later + resid[k] * total;
        gamma[k] = gains[k] * p[k] / den;
        later += p[k];
    }
    gamma
}

/// Per-user SINR `Gamma_k` of a design, evaluated on the estimated channels.
pub fn sinr(design: &Design, chs: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    let gains = effective_gains(chs, &design.psi, &design.f);
    let resid = residual_coeff(chs, &design.f);
    sinr_from_gains(&gains, &resid, &design.p, &design.order, cfg.noise_power)
}

pub fn sum_rate_from_sinr(gamma: &[f64]) -> f64 {
    gamma.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).sum()
}

/// Sum rate of a design in bits/s/Hz.
pub fn sum_rate(design: &Design, chs: &ChannelSet, cfg: &SystemConfig) -> f64 {
    sum_rate_from_sinr(&sinr(design, chs, cfg))
}

/// Energy efficiency of a design on the analog RIS architecture.
pub fn energy_efficiency(design: &Design, chs: &ChannelSet, cfg: &SystemConfig) -> f64 {
    sum_rate(design, chs, cfg) / (design.total_power() + circuit_power(cfg, Architecture::AnalogRis))
}

/// SIC decode order: users sorted by `|g_k f|` ascending, ties by index.
pub fn decode_order(chs: &ChannelSet, psi: &CVec, f: &CVec) -> Vec<usize> {
    order_from_gains(&effective_gains(chs, psi, f))
}

pub(crate) fn order_from_gains(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind {
    UnitModulus(usize),
    BeamNorm,
    DpsBound(usize),
    PowerBudget,
    NegativePower(usize),
    MinRate(usize),
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintKind::UnitModulus(i) => write!(f, "unit modulus of RIS element {i}"),
            ConstraintKind::BeamNorm => write!(f, "beamformer norm"),
            ConstraintKind::DpsBound(i) => write!(f, "DPS amplitude of antenna {i}"),
            ConstraintKind::PowerBudget => write!(f, "power budget"),
            ConstraintKind::NegativePower(k) => write!(f, "non-negative power of user {k}"),
            ConstraintKind::MinRate(k) => write!(f, "minimum rate of user {k}"),
        }
    }
}

/// A constraint breach and its magnitude (amount by which it is violated).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub magnitude: f64,
}

/// Checks every problem constraint; returns the breaches exceeding `tol`.
pub fn check_feasibility(design: &Design, chs: &ChannelSet, cfg: &SystemConfig, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, magnitude: f64| {
        if magnitude > tol || magnitude.is_nan() {
            out.push(Violation { kind, magnitude });
        }
    };
    for (i, z) in design.psi.iter().enumerate() {
        push(ConstraintKind::UnitModulus(i), (z.norm() - 1.0).abs());
    }
    push(ConstraintKind::BeamNorm, (design.f.norm_squared() - 1.0).abs());
    for (i, z) in design.f.iter().enumerate() {
        push(ConstraintKind::DpsBound(i), z.norm() - 2.0);
    }
    push(ConstraintKind::PowerBudget, design.total_power() - cfg.power_budget);
    for (k, &pk) in design.p.iter().enumerate() {
        push(ConstraintKind::NegativePower(k), -pk);
    }
    let gamma = sinr(design, chs, cfg);
    for (k, g) in gamma.iter().enumerate() {
        push(ConstraintKind::MinRate(k), cfg.eta(k) - g);
    }
    out
}

/// Full evaluation of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub gamma: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub ee: f64,
    /// Transmit power `sum p` (circuit power excluded).
    pub total_power: f64,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

pub fn evaluate(design: &Design, chs: &ChannelSet, cfg: &SystemConfig, tol: f64) -> RateReport {
    let gamma = sinr(design, chs, cfg);
    let rate: Vec<f64> = gamma.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect();
    let sum_rate: f64 = rate.iter().sum();
    let total_power = design.total_power();
    let violations = check_feasibility(design, chs, cfg, tol);
    RateReport {
        ee: sum_rate / (total_power + circuit_power(cfg, Architecture::AnalogRis)),
        gamma,
        rate,
        sum_rate,
        total_power,
        feasible: violations.is_empty(),
        violations,
    }
}

/// Sum of interfering powers `sum_{i after k} p_i` for each user.
pub(crate) fn later_power(p: &[f64], order: &[usize]) -> Vec<f64> {
    let pos = positions(order);
    (0..p.len())
        .map(|k| order[pos[k] + 1..].iter().map(|&i| p[i]).sum())
        .collect()
}
