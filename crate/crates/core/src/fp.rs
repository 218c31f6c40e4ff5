//! Quadratic-transform (QT) reformulations of the beamformer, RIS and power
//! allocation subproblems: coefficient builders and closed-form updates of
//! the auxiliary variables.
//!
//! A ratio `|a(x)|^2 / B(x)` is replaced by `2 Re{nu^* a(x)} - |nu|^2 B(x)`,
//! which is tight at `nu = a(x) / B(x)`. Every builder below keeps that
//! identity exact so the reformulated SINR equals [`crate::metrics::sinr`]
//! at the optimal auxiliary.

use std::f64::consts::LN_2;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{effective_channel, residual_coeff, ChannelSet, SystemConfig};
use crate::linalg::{hermitize, outer, quad_form, CMat, CVec};
use crate::metrics::{circuit_power, later_power, Architecture};

/// Floor applied to `1 + Gamma_bar` before taking logarithms in the EE
/// auxiliary update.
pub const QT_LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpError {
    #[error("non-positive denominator {value} in {context}")]
    Domain { context: &'static str, value: f64 },
    #[error("minimum rate of user {user} cannot be met for any RIS phase with the current powers")]
    MinRateDegenerate { user: usize },
    #[error("user {user} has zero effective channel gain")]
    ZeroGainChannel { user: usize },
}

/// Optimal QT auxiliary `nu = numerator / denominator`.
pub fn qt_opt_aux(numerator: Complex64, denominator: f64) -> Result<Complex64, FpError> {
    if !(denominator > 0.0) {
        return Err(FpError::Domain { context: "quadratic transform", value: denominator });
    }
    Ok(numerator / denominator)
}

/// QT surrogate `2 Re{nu^* a} - |nu|^2 B`.
pub fn qt_value(nu: Complex64, numerator: Complex64, denominator: f64) -> f64 {
    2.0 * (nu.conj() * numerator).re - nu.norm_sqr() * denominator
}

// ---------------------------------------------------------------------------
// Beamformer subproblem
// ---------------------------------------------------------------------------

/// Coefficients of `Gamma_k(f) = |a_k f|^2 / (sigma^2 + f^H A_k f)`.
#[derive(Debug, Clone)]
pub struct BeamformerCoeffs {
    /// `a_k = g_k sqrt(p_k)` (row coefficients).
    pub a: Vec<CVec>,
    /// `A_k = g_k^H g_k sum_{i>k} p_i + Z_k sum_i p_i`.
    pub big_a: Vec<CMat>,
    /// `Z_k = s2 |h_k|^2 I + s2 H^H H + s2^2 N I`.
    pub z: Vec<CMat>,
    /// `B_k = a_k^H a_k - eta_k A_k`.
    pub b: Vec<CMat>,
    pub eta: Vec<f64>,
    pub noise: f64,
}

impl BeamformerCoeffs {
    pub fn users(&self) -> usize {
        self.a.len()
    }

    pub fn antennas(&self) -> usize {
        self.a.first().map_or(0, |a| a.len())
    }

    /// Interference-plus-noise `sigma^2 + f^H A_k f`.
    pub fn denominator(&self, k: usize, f: &CVec) -> f64 {
        self.noise + quad_form(&self.big_a[k], f)
    }

    pub fn sinr(&self, f: &CVec) -> Vec<f64> {
        (0..self.users())
            .map(|k| self.a[k].dot(f).norm_sqr() / self.denominator(k, f))
            .collect()
    }

    /// `Gamma_hat_k(f, y_k) = 2 Re{y_k^* a_k f} - |y_k|^2 (sigma^2 + f^H A_k f)`.
    pub fn qt_sinr(&self, f: &CVec, y: &[Complex64]) -> Vec<f64> {
        (0..self.users())
            .map(|k| qt_value(y[k], self.a[k].dot(f), self.denominator(k, f)))
            .collect()
    }

    /// QT sum-rate surrogate `sum_k log2(1 + Gamma_hat_k)`.
    pub fn qt_objective(&self, f: &CVec, y: &[Complex64]) -> f64 {
        self.qt_sinr(f, y).iter().map(|g| (1.0 + g).ln() / LN_2).sum()
    }
}

pub fn build_beamformer_coeffs(
    chs: &ChannelSet,
    psi: &CVec,
    p: &[f64],
    order: &[usize],
    cfg: &SystemConfig,
) -> BeamformerCoeffs {
    let m = chs.antennas();
    let s2 = chs.error_var;
    let total: f64 = p.iter().sum();
    let later = later_power(p, order);
    let gram = if s2 > 0.0 { chs.bs_ris_est.adjoint() * &chs.bs_ris_est } else { CMat::zeros(m, m) };
    let n = chs.n_ris() as f64;

    let mut a = Vec::with_capacity(p.len());
    let mut big_a = Vec::with_capacity(p.len());
    let mut z = Vec::with_capacity(p.len());
    let mut b = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let g = effective_channel(chs, psi, k).expect("user index in range");
        // g^H g as a matrix: conj(g) g^T
        let gc = g.map(|v| v.conj());
        let ghg = outer(&gc);
        let mut zk = &gram * Complex64::from(s2);
        let diag = s2 * chs.ris_user_est[k].norm_squared() + s2 * s2 * n;
        for i in 0..m {
            zk[(i, i)] += diag;
        }
        hermitize(&mut zk);
        let mut ak = &ghg * Complex64::from(later[k]) + &zk * Complex64::from(total);
        hermitize(&mut ak);
        let row = &g * Complex64::from(p[k].sqrt());
        let eta = cfg.eta(k);
        let mut bk = outer(&row.map(|v| v.conj())) - &ak * Complex64::from(eta);
        hermitize(&mut bk);
        a.push(row);
        big_a.push(ak);
        z.push(zk);
        b.push(bk);
    }
    BeamformerCoeffs { a, big_a, z, b, eta: cfg.etas(), noise: cfg.noise_power }
}

/// `y_k = a_k f / (sigma^2 + f^H A_k f)`.
pub fn aux_update_f(coeffs: &BeamformerCoeffs, f: &CVec) -> Result<Vec<Complex64>, FpError> {
    (0..coeffs.users())
        .map(|k| qt_opt_aux(coeffs.a[k].dot(f), coeffs.denominator(k, f)))
        .collect()
}

/// Affine surrogate of the minimum-rate constraint of `user`: `Re{l^H f} >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCut {
    pub user: usize,
    pub l: CVec,
    pub rhs: f64,
}

impl LinearCut {
    pub fn slack(&self, f: &CVec) -> f64 {
        self.l.dotc(f).re - self.rhs
    }
}

/// First-order expansion of `f^H B_k f >= eta_k sigma^2` at `f_o`:
/// `2 Re{f_o^H B_k f} - f_o^H B_k f_o >= eta_k sigma^2`.
/// Users without a rate target get no cut.
pub fn sca_linearize_minrate(coeffs: &BeamformerCoeffs, f_o: &CVec) -> Vec<LinearCut> {
    (0..coeffs.users())
        .filter(|&k| coeffs.eta[k] > 0.0)
        .map(|k| {
            let bf = &coeffs.b[k] * f_o;
            LinearCut { user: k, rhs: f_o.dotc(&bf).re + coeffs.eta[k] * coeffs.noise, l: bf * Complex64::from(2.0) }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// RIS subproblem
// ---------------------------------------------------------------------------

/// Lifted coefficients of the RIS subproblem in `psi_tilde = [psi; 1]`.
#[derive(Debug, Clone)]
pub struct RisCoeffs {
    /// `E_k = diag(h_k^*) H`, N x M.
    pub e: Vec<CMat>,
    /// `E_k^* f^*`, length N.
    pub u: Vec<CVec>,
    /// Lifted objective matrices, (N+1) x (N+1):
    /// `C_k = [-alpha_k u u^H, beta_k u; beta_k^* u^H, 0]`.
    pub c: Vec<CMat>,
    /// `|nu_k|^2 sum_{i>k} p_i`.
    pub alpha: Vec<f64>,
    /// `nu_k^* sqrt(p_k)`.
    pub beta: Vec<Complex64>,
    /// Offsets `c_k = |nu_k|^2 (sigma^2 + r_k sum p)`.
    pub c_off: Vec<f64>,
    /// Lifted min-rate matrices, (N+1) x (N+1).
    pub d: Vec<CMat>,
    /// Min-rate thresholds `d_k` (zero when the cut is inactive).
    pub d_thr: Vec<f64>,
    /// RIS phases the coefficients were expanded at.
    pub anchor: CVec,
}

impl RisCoeffs {
    pub fn users(&self) -> usize {
        self.c.len()
    }

    pub fn lifted_dim(&self) -> usize {
        self.anchor.len() + 1
    }

    /// `psi^H E_k^* f^*`.
    pub fn inner(&self, k: usize, psi: &CVec) -> Complex64 {
        psi.dotc(&self.u[k])
    }

    /// `psi_tilde^H C_k psi_tilde - c_k`.
    pub fn lifted_qt_sinr(&self, k: usize, psi: &CVec) -> f64 {
        quad_form(&self.c[k], &lift(psi)) - self.c_off[k]
    }

    /// `psi_tilde^H D_k psi_tilde`.
    pub fn lifted_min_rate(&self, k: usize, psi: &CVec) -> f64 {
        quad_form(&self.d[k], &lift(psi))
    }

    /// Drops the min-rate cuts.
    pub fn without_min_rate(mut self) -> Self {
        self.d_thr.iter_mut().for_each(|d| *d = 0.0);
        self
    }

    pub fn has_cuts(&self) -> bool {
        self.d_thr.iter().any(|&d| d > 0.0)
    }
}

/// `[psi; 1]`.
pub fn lift(psi: &CVec) -> CVec {
    let n = psi.len();
    CVec::from_fn(n + 1, |i, _| if i < n { psi[i] } else { Complex64::new(1.0, 0.0) })
}

/// Unlifted `Gamma_tilde_k(psi, nu_k)`.
pub fn ris_qt_sinr(
    chs: &ChannelSet,
    f: &CVec,
    psi: &CVec,
    p: &[f64],
    order: &[usize],
    nu: &[Complex64],
    cfg: &SystemConfig,
) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    let later = later_power(p, order);
    let resid = residual_coeff(chs, f);
    (0..p.len())
        .map(|k| {
            let inner = psi.dotc(&chs.cascade(k, f).map(|v| v.conj()));
            2.0 * (nu[k].conj() * inner * p[k].sqrt()).re
                - nu[k].norm_sqr() * (cfg.noise_power + resid[k] * total)
                - nu[k].norm_sqr() * inner.norm_sqr() * later[k]
        })
        .collect()
}

/// Builds the lifted RIS objective and min-rate cuts at the expansion point
/// `psi`. Fails with [`FpError::MinRateDegenerate`] when a user with a
/// positive rate target has `p_k - eta_k sum_{i>k} p_i <= 0`.
#[allow(clippy::too_many_arguments)]
pub fn build_ris_coeffs(
    chs: &ChannelSet,
    f: &CVec,
    psi: &CVec,
    p: &[f64],
    order: &[usize],
    nu: &[Complex64],
    cfg: &SystemConfig,
) -> Result<RisCoeffs, FpError> {
    let n = chs.n_ris();
    let total: f64 = p.iter().sum();
    let later = later_power(p, order);
    let resid = residual_coeff(chs, f);
    let users = p.len();
    let mut out = RisCoeffs {
        e: Vec::with_capacity(users),
        u: Vec::with_capacity(users),
        c: Vec::with_capacity(users),
        alpha: Vec::with_capacity(users),
        beta: Vec::with_capacity(users),
        c_off: Vec::with_capacity(users),
        d: Vec::with_capacity(users),
        d_thr: Vec::with_capacity(users),
        anchor: psi.clone(),
    };
    for k in 0..users {
        let e = chs.cascade_matrix(k);
        let u = (&e * f).map(|v| v.conj());
        let uu = outer(&u);
        let nu2 = nu[k].norm_sqr();

        let mut c = CMat::zeros(n + 1, n + 1);
        c.view_mut((0, 0), (n, n)).copy_from(&(&uu * Complex64::from(-nu2 * later[k])));
        let off = &u * (nu[k].conj() * p[k].sqrt());
        for i in 0..n {
            c[(i, n)] = off[i];
            c[(n, i)] = off[i].conj();
        }
        hermitize(&mut c);

        let mut d = CMat::zeros(n + 1, n + 1);
        d.view_mut((0, 0), (n, n)).copy_from(&uu);
        hermitize(&mut d);

        let noise_plus = cfg.noise_power + resid[k] * total;
        let eta = cfg.eta(k);
        let d_thr = if eta == 0.0 {
            0.0
        } else {
            let margin = p[k] - eta * later[k];
            if !(margin > 0.0) {
                return Err(FpError::MinRateDegenerate { user: k });
            }
            eta * noise_plus / margin
        };

        out.e.push(e);
        out.u.push(u);
        out.c.push(c);
        out.alpha.push(nu2 * later[k]);
        out.beta.push(nu[k].conj() * p[k].sqrt());
        out.c_off.push(nu2 * noise_plus);
        out.d.push(d);
        out.d_thr.push(d_thr);
    }
    Ok(out)
}

/// `nu_k = psi^H E_k^* f^* sqrt(p_k) / (sigma^2 + |psi^H E_k^* f^*|^2 sum_{i>k} p_i + r_k sum p)`.
///
/// Since `psi^H E_k^* f^* = conj(g_k f)`, this equals `conj(y_k)` of
/// [`aux_update_f`] at the same design.
pub fn aux_update_psi(
    chs: &ChannelSet,
    f: &CVec,
    psi: &CVec,
    p: &[f64],
    order: &[usize],
    cfg: &SystemConfig,
) -> Result<Vec<Complex64>, FpError> {
    let total: f64 = p.iter().sum();
    let later = later_power(p, order);
    let resid = residual_coeff(chs, f);
    (0..p.len())
        .map(|k| {
            let inner = psi.dotc(&chs.cascade(k, f).map(|v| v.conj()));
            let den = cfg.noise_power + inner.norm_sqr() * later[k] + resid[k] * total;
            qt_opt_aux(inner * p[k].sqrt(), den)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Power allocation subproblems
// ---------------------------------------------------------------------------

/// Coefficients of `Gamma_k(p) = p_k / (a_k + sum_{i>k} p_i + b_k sum_i p_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaCoeffs {
    /// `sigma^2 / |g_k f|^2`.
    pub a: Vec<f64>,
    /// `r_k / |g_k f|^2`.
    pub b: Vec<f64>,
    pub eta: Vec<f64>,
    pub budget: f64,
    /// Circuit power `P_c` of the analog RIS architecture.
    pub circuit: f64,
    pub order: Vec<usize>,
}

impl PaCoeffs {
    pub fn users(&self) -> usize {
        self.a.len()
    }

    /// `a_k + sum_{i>k} p_i + b_k sum_i p_i`.
    pub fn denominators(&self, p: &[f64]) -> Vec<f64> {
        let total: f64 = p.iter().sum();
        let later = later_power(p, &self.order);
        (0..p.len()).map(|k| self.a[k] + later[k] + self.b[k] * total).collect()
    }

    pub fn sinr(&self, p: &[f64]) -> Vec<f64> {
        self.denominators(p).iter().zip(p).map(|(d, pk)| pk / d).collect()
    }

    /// `Gamma_bar_k(p, x_k) = 2 x_k sqrt(p_k) - x_k^2 (a_k + sum_{i>k} p_i + b_k sum p)`.
    pub fn qt_sinr(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        self.denominators(p)
            .iter()
            .enumerate()
            .map(|(k, d)| 2.0 * x[k] * p[k].max(0.0).sqrt() - x[k] * x[k] * d)
            .collect()
    }

    /// `sum_k log2(1 + Gamma_bar_k)`.
    pub fn qt_sum_rate(&self, p: &[f64], x: &[f64]) -> f64 {
        self.qt_sinr(p, x).iter().map(|g| (1.0 + g).ln() / LN_2).sum()
    }

    /// Sum rate with the floor applied to `1 + Gamma_bar`.
    pub fn qt_sum_rate_floored(&self, p: &[f64], x: &[f64]) -> f64 {
        self.qt_sinr(p, x).iter().map(|g| (1.0 + g).max(QT_LOG_FLOOR).ln() / LN_2).sum()
    }

    /// EE surrogate `2 z sqrt(S) - z^2 (sum p + P_c)` with `S` the floored QT sum rate.
    pub fn ee_qt_objective(&self, p: &[f64], x: &[f64], z: f64) -> f64 {
        let s = self.qt_sum_rate_floored(p, x).max(0.0);
        let total: f64 = p.iter().sum();
        2.0 * z * s.sqrt() - z * z * (total + self.circuit)
    }

    /// Min-rate constraints as rows `w . p <= rhs`:
    /// `eta_k sum_{i>k} p_i - p_k + eta_k b_k sum p <= -eta_k a_k`.
    pub fn min_rate_rows(&self) -> Vec<(DVector<f64>, f64)> {
        let users = self.users();
        let pos = crate::channel::positions(&self.order);
        (0..users)
            .filter(|&k| self.eta[k] > 0.0)
            .map(|k| {
                let eta = self.eta[k];
                let w = DVector::from_fn(users, |i, _| {
                    let mut v = eta * self.b[k];
                    if i == k {
                        v -= 1.0;
                    } else if pos[i] > pos[k] {
                        v += eta;
                    }
                    v
                });
                (w, -eta * self.a[k])
            })
            .collect()
    }
}

/// Builds `a_k = sigma^2 / |g_k f|^2` and `b_k = r_k / |g_k f|^2`.
pub fn build_pa_coeffs(
    chs: &ChannelSet,
    f: &CVec,
    psi: &CVec,
    order: &[usize],
    cfg: &SystemConfig,
) -> Result<PaCoeffs, FpError> {
    let resid = residual_coeff(chs, f);
    let mut a = Vec::with_capacity(chs.users());
    let mut b = Vec::with_capacity(chs.users());
    for k in 0..chs.users() {
        let gain = psi.dot(&chs.cascade(k, f)).norm_sqr();
        if !(gain > 0.0) {
            return Err(FpError::ZeroGainChannel { user: k });
        }
        a.push(cfg.noise_power / gain);
        b.push(resid[k] / gain);
    }
    Ok(PaCoeffs {
        a,
        b,
        eta: cfg.etas(),
        budget: cfg.power_budget,
        circuit: circuit_power(cfg, Architecture::AnalogRis),
        order: order.to_vec(),
    })
}

/// Which closed form to use for the power-allocation auxiliary `x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XUpdateRule {
    /// `sqrt(p_k) / (a_k + sum_{i>k} p_i + b_k sum p)`, tight for `Gamma_bar`.
    #[default]
    Consistent,
    /// `sqrt(p_k) / (a_k + sum_{i>k} p_i + b_k)`, kept for comparison only.
    AsPrinted,
}

pub fn aux_update_p(coeffs: &PaCoeffs, p: &[f64]) -> Result<Vec<f64>, FpError> {
    aux_update_p_with(coeffs, p, XUpdateRule::Consistent)
}

pub fn aux_update_p_with(coeffs: &PaCoeffs, p: &[f64], rule: XUpdateRule) -> Result<Vec<f64>, FpError> {
    let later = later_power(p, &coeffs.order);
    let total: f64 = p.iter().sum();
    (0..p.len())
        .map(|k| {
            let den = match rule {
                XUpdateRule::Consistent => coeffs.a[k] + later[k] + coeffs.b[k] * total,
                XUpdateRule::AsPrinted => coeffs.a[k] + later[k] + coeffs.b[k],
            };
            qt_opt_aux(Complex64::from(p[k].max(0.0).sqrt()), den).map(|v| v.re)
        })
        .collect()
}

/// `z = sqrt(sum_k log2(1 + Gamma_bar_k)) / (sum p + P_c)`.
pub fn aux_update_z(coeffs: &PaCoeffs, p: &[f64], x: &[f64]) -> Result<f64, FpError> {
    let s = coeffs.qt_sum_rate_floored(p, x);
    if s < 0.0 {
        return Err(FpError::Domain { context: "EE numerator", value: s });
    }
    let den = p.iter().sum::<f64>() + coeffs.circuit;
    if !(den > 0.0) {
        return Err(FpError::Domain { context: "EE denominator", value: den });
    }
    Ok(s.sqrt() / den)
}
