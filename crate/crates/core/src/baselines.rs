//! Reference schemes: fully digital SVD precoding with water-filling, TDMA
//! with one analog beam per slot, and the WMSE identities used to
//! cross-check the QT reformulation.

use std::f64::consts::LN_2;

use nalgebra::{SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

use crate::algorithms::{align_phases, initialize_design};
use crate::channel::{effective_channel, residual_coeff, ChannelSet, Design, SystemConfig};
use crate::linalg::{hermitize, CMat, CVec};
use crate::metrics::{circuit_power, later_power, Architecture};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("all stream gains are zero")]
    ZeroGains,
    #[error("power budget must be positive, got {0}")]
    Budget(f64),
}

/// Per-user MSE receivers and weights at the optimal receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct WmseState {
    pub u: Vec<Complex64>,
    pub w: Vec<f64>,
    /// MSE evaluated at `u`.
    pub e: Vec<f64>,
    /// Minimum MSE `1 - |c_k|^2 / D_k`.
    pub e_mmse: Vec<f64>,
}

/// MSE of user `k` with scalar receiver `u`:
/// `1 + sigma^2 |u|^2 - 2 Re{u g f sqrt(p_k)} + sum_{i>=k} |u g f|^2 p_i + |u|^2 r_k sum p`.
pub fn mse(design: &Design, chs: &ChannelSet, cfg: &SystemConfig, k: usize, u: Complex64) -> f64 {
    let (gf, own_and_later, resid_total) = mse_terms(design, chs, k);
    1.0 + cfg.noise_power * u.norm_sqr() - 2.0 * (u * gf * design.p[k].sqrt()).re
        + (u * gf).norm_sqr() * own_and_later
        + u.norm_sqr() * resid_total
}

fn mse_terms(design: &Design, chs: &ChannelSet, k: usize) -> (Complex64, f64, f64) {
    let g = effective_channel(chs, &design.psi, k).expect("user index in range");
    let gf = g.dot(&design.f);
    let later = later_power(&design.p, &design.order);
    let resid = residual_coeff(chs, &design.f)[k];
    (gf, design.p[k] + later[k], resid * design.total_power())
}

pub fn wmse_oracle(design: &Design, chs: &ChannelSet, cfg: &SystemConfig) -> WmseState {
    let users = design.p.len();
    let mut state = WmseState { u: Vec::new(), w: Vec::new(), e: Vec::new(), e_mmse: Vec::new() };
    for k in 0..users {
        let (gf, own_and_later, resid_total) = mse_terms(design, chs, k);
        let c = gf * design.p[k].sqrt();
        let d = cfg.noise_power + gf.norm_sqr() * own_and_later + resid_total;
        let u = c.conj() / d;
        let e_mmse = 1.0 - c.norm_sqr() / d;
        state.e.push(mse(design, chs, cfg, k, u));
        state.u.push(u);
        state.w.push(1.0 / e_mmse);
        state.e_mmse.push(e_mmse);
    }
    state
}

/// Water-filling `q_i = max(0, mu - sigma^2 / g_i)` with `sum q = budget`,
/// the water level `mu` found by bisection.
pub fn waterfill(gains: &[f64], budget: f64, noise: f64) -> Result<Vec<f64>, BaselineError> {
    if !(budget > 0.0) {
        return Err(BaselineError::Budget(budget));
    }
    if gains.iter().all(|&g| g <= 0.0) {
        return Err(BaselineError::ZeroGains);
    }
    let floor = |g: f64| if g > 0.0 { noise / g } else { f64::INFINITY };
    let fill = |mu: f64| -> f64 { gains.iter().map(|&g| (mu - floor(g)).max(0.0)).sum() };
    let mut lo = 0.0;
    let mut hi = budget + gains.iter().map(|&g| floor(g)).filter(|v| v.is_finite()).fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok(gains.iter().map(|&g| (mu - floor(g)).max(0.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub sum_rate: f64,
    pub ee: f64,
    /// Per-user (TDMA) or per-stream (SVD) rates.
    pub rates: Vec<f64>,
    pub total_power: f64,
}

/// RIS phases maximizing `sum_k |psi^T E_k|^2` over the relaxed sphere,
/// projected onto unit modulus: phases of the principal eigenvector of
/// `sum_k conj(E_k) E_k^T`.
pub fn eigen_aligned_phases(chs: &ChannelSet) -> CVec {
    let n = chs.n_ris();
    let mut r = CMat::zeros(n, n);
    for k in 0..chs.users() {
        let e = chs.cascade_matrix(k);
        r += e.map(|z| z.conj()) * e.transpose();
    }
    hermitize(&mut r);
    let eig = SymmetricEigen::new(r);
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    eig.eigenvectors.column(idx).map(|z| if z.norm() > 0.0 { Complex64::from_polar(1.0, z.arg()) } else { Complex64::new(1.0, 0.0) })
}

/// Fully digital baseline: SVD precoding over the stacked effective
/// channels with water-filling across the singular values.
pub fn svd_wf_baseline(chs: &ChannelSet, cfg: &SystemConfig) -> BaselineResult {
    let psi = eigen_aligned_phases(chs);
    let users = chs.users();
    let m = chs.antennas();
    let g = CMat::from_fn(users, m, |k, j| {
        let row = effective_channel(chs, &psi, k).expect("user index in range");
        row[j]
    });
    let sv = SVD::new(g, false, false).singular_values;
    let gains: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let q = waterfill(&gains, cfg.power_budget, cfg.noise_power).unwrap_or_else(|_| vec![0.0; gains.len()]);
    let rates: Vec<f64> = gains.iter().zip(&q).map(|(g, q)| (g * q / cfg.noise_power).ln_1p() / LN_2).collect();
    let sum_rate = rates.iter().sum();
    let total_power: f64 = q.iter().sum();
    BaselineResult {
        sum_rate,
        ee: sum_rate / (total_power + circuit_power(cfg, Architecture::FullyDigital)),
        rates,
        total_power,
    }
}

/// Slot design of TDMA user `k`: phases aligned to the user's cascade at
/// the dominant BS-RIS beam, then a matched analog beam.
pub fn tdma_slot_design(chs: &ChannelSet, cfg: &SystemConfig, k: usize) -> (CVec, CVec) {
    let f0 = initialize_design(chs, cfg).f;
    let psi = align_phases(&chs.cascade(k, &f0));
    let g = effective_channel(chs, &psi, k).expect("user index in range");
    let norm = g.norm();
    let f = if norm > 0.0 { g.map(|z| z.conj()) / Complex64::from(norm) } else { f0 };
    (f, psi)
}

/// TDMA with equal slots: user `k` is served alone at full power in slot `k`.
pub fn oma_tdma_baseline(chs: &ChannelSet, cfg: &SystemConfig) -> BaselineResult {
    let users = chs.users();
    let share = 1.0 / users as f64;
    let rates: Vec<f64> = (0..users)
        .map(|k| {
            let (f, psi) = tdma_slot_design(chs, cfg, k);
            let g = effective_channel(chs, &psi, k).expect("user index in range");
            let gain = g.dot(&f).norm_sqr();
            let resid = residual_coeff(chs, &f)[k];
            let snr = gain * cfg.power_budget / (cfg.noise_power + resid * cfg.power_budget);
            share * snr.ln_1p() / LN_2
        })
        .collect();
    let sum_rate = rates.iter().sum();
    BaselineResult {
        sum_rate,
        ee: sum_rate / (cfg.power_budget + circuit_power(cfg, Architecture::AnalogRis)),
        rates,
        total_power: cfg.power_budget,
    }
}
