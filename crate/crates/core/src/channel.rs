//! mmWave channel generation: ULA/UPA steering vectors, the extended
//! Saleh-Valenzuela BS-RIS and RIS-user channels, and the additive Gaussian
//! CSI error model.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::linalg::{CMat, CVec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("user index {index} out of range for {users} users")]
    UserIndex { index: usize, users: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Circuit power constants (linear units, same scale as the noise power).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    /// Residual BS circuit power `P'_BS`.
    pub bs_residual: f64,
    /// Power per RF chain.
    pub rf_chain: f64,
    /// Power per RIS element.
    pub ris_element: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel { bs_residual: 10.0, rf_chain: 10.0, ris_element: 0.1 }
    }
}

/// All scenario constants of one simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas `M`.
    pub antennas: usize,
    /// RIS elements along the horizontal axis `N_H`.
    pub ris_h: usize,
    /// RIS elements along the vertical axis `N_V`.
    pub ris_v: usize,
    /// Users `K`.
    pub users: usize,
    /// Paths between BS and RIS `S_1`.
    pub paths_bs_ris: usize,
    /// Paths between RIS and each user `S_2`.
    pub paths_ris_user: usize,
    /// Noise power `sigma^2`.
    pub noise_power: f64,
    /// CSI error variance `sigma_eps^2`.
    pub csi_error_var: f64,
    /// Transmit power budget `P_s`.
    pub power_budget: f64,
    /// Per-user minimum rates in bits/s/Hz.
    pub rate_thresholds: Vec<f64>,
    pub power_model: PowerModel,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            antennas: 16,
            ris_h: 8,
            ris_v: 8,
            users: 4,
            paths_bs_ris: 3,
            paths_ris_user: 3,
            noise_power: 1.0,
            csi_error_var: 0.0,
            power_budget: 1e4,
            rate_thresholds: vec![0.3; 4],
            power_model: PowerModel::default(),
            seed: 1,
        }
    }
}

impl SystemConfig {
    /// Number of RIS elements `N = N_H * N_V`.
    pub fn n_ris(&self) -> usize {
        self.ris_h * self.ris_v
    }

    /// Minimum-SINR target `eta_k = 2^{R_th,k} - 1`.
    pub fn eta(&self, k: usize) -> f64 {
        self.rate_thresholds[k].exp2() - 1.0
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.users).map(|k| self.eta(k)).collect()
    }

    /// Sets a uniform rate threshold for all users.
    pub fn with_uniform_threshold(mut self, rate: f64) -> Self {
        self.rate_thresholds = vec![rate; self.users];
        self
    }

    /// Sets the power budget from an SNR in dB, `P_s = sigma^2 10^{snr/10}`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.power_budget = self.noise_power * 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidConfig(m.to_string()));
        if self.antennas == 0 || self.ris_h == 0 || self.ris_v == 0 || self.users == 0 {
            return bad("antenna, RIS and user counts must be at least 1");
        }
        if self.paths_bs_ris == 0 || self.paths_ris_user == 0 {
            return bad("path counts must be at least 1");
        }
        if !(self.noise_power > 0.0) {
            return bad("noise power must be positive");
        }
        if !(self.csi_error_var >= 0.0) {
            return bad("CSI error variance must be non-negative");
        }
        if !(self.power_budget > 0.0) {
            return bad("power budget must be positive");
        }
        if self.rate_thresholds.len() != self.users {
            return bad("one rate threshold per user is required");
        }
        if self.rate_thresholds.iter().any(|r| !(*r >= 0.0)) {
            return bad("rate thresholds must be non-negative");
        }
        let pm = &self.power_model;
        if [pm.bs_residual, pm.rf_chain, pm.ris_element].iter().any(|v| !(*v >= 0.0)) {
            return bad("power model constants must be non-negative");
        }
        Ok(())
    }
}

/// True and estimated channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// True BS-RIS channel `H`, N x M.
    pub bs_ris: CMat,
    /// True RIS-user channels `h_k`, length N each.
    pub ris_user: Vec<CVec>,
    /// Estimate of `H`.
    pub bs_ris_est: CMat,
    /// Estimates of `h_k`.
    pub ris_user_est: Vec<CVec>,
    pub error_var: f64,
}

impl ChannelSet {
    /// Channel set whose estimates are exact.
    pub fn perfect(bs_ris: CMat, ris_user: Vec<CVec>) -> Self {
        ChannelSet {
            bs_ris_est: bs_ris.clone(),
            ris_user_est: ris_user.clone(),
            bs_ris,
            ris_user,
            error_var: 0.0,
        }
    }

    /// Channel set built directly from estimates with an assumed error
    /// variance; the true channels are set equal to the estimates.
    pub fn from_estimates(bs_ris_est: CMat, ris_user_est: Vec<CVec>, error_var: f64) -> Self {
        ChannelSet {
            bs_ris: bs_ris_est.clone(),
            ris_user: ris_user_est.clone(),
            bs_ris_est,
            ris_user_est,
            error_var,
        }
    }

    pub fn users(&self) -> usize {
        self.ris_user_est.len()
    }

    pub fn n_ris(&self) -> usize {
        self.bs_ris_est.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.bs_ris_est.ncols()
    }

    /// Per-element cascade `diag(h_k^*) H f` (estimated channels). The
    /// effective gain is `g_k f = psi^T u_k`.
    pub fn cascade(&self, k: usize, f: &CVec) -> CVec {
        let hf = &self.bs_ris_est * f;
        let h = &self.ris_user_est[k];
        CVec::from_fn(hf.len(), |i, _| h[i].conj() * hf[i])
    }

    /// `E_k = diag(h_k^*) H` (estimated channels), N x M.
    pub fn cascade_matrix(&self, k: usize) -> CMat {
        let h = &self.ris_user_est[k];
        let mut e = self.bs_ris_est.clone();
        for (i, mut row) in e.row_iter_mut().enumerate() {
            row *= h[i].conj();
        }
        e
    }
}

/// Decision variables of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// Analog beamformer, length M.
    pub f: CVec,
    /// RIS phases (diagonal of the reflection matrix), length N.
    pub psi: CVec,
    /// Per-user powers.
    pub p: Vec<f64>,
    /// SIC decode order, weakest user first (0-based user indices).
    pub order: Vec<usize>,
}

impl Design {
    pub fn total_power(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Position of each user in the decode order.
    pub fn positions(&self) -> Vec<usize> {
        positions(&self.order)
    }
}

pub(crate) fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (i, &k) in order.iter().enumerate() {
        pos[k] = i;
    }
    pos
}

/// ULA steering vector `a_M(theta)`, element `i` equal to
/// `exp(-j pi i cos(theta)) / sqrt(M)`.
pub fn steering_ula(theta: f64, m: usize) -> CVec {
    let step = -PI * theta.cos();
    let scale = 1.0 / (m as f64).sqrt();
    CVec::from_fn(m, |i, _| Complex64::from_polar(scale, step * i as f64))
}

/// UPA steering vector `a_N(theta, phi) = (a_{N_H}(theta) kron a_{N_V}(theta, phi)) / sqrt(N_H N_V)`,
/// horizontal phase step `-pi cos(theta)`, vertical phase step `-pi cos(phi) sin(theta)`.
pub fn steering_upa(theta: f64, phi: f64, n_h: usize, n_v: usize) -> CVec {
    let step_h = -PI * theta.cos();
    let step_v = -PI * phi.cos() * theta.sin();
    let scale = 1.0 / ((n_h * n_v) as f64).sqrt();
    CVec::from_fn(n_h * n_v, |idx, _| {
        let (ih, iv) = (idx / n_v, idx % n_v);
        Complex64::from_polar(scale, step_h * ih as f64 + step_v * iv as f64)
    })
}

/// One propagation path of the BS-RIS channel.
#[derive(Debug, Clone, Copy)]
pub struct BsRisPath {
    pub gain: Complex64,
    /// Azimuth of departure at the BS.
    pub aod: f64,
    /// Azimuth of arrival at the RIS.
    pub aoa_azimuth: f64,
    /// Elevation of arrival at the RIS.
    pub aoa_elevation: f64,
}

/// One propagation path of a RIS-user channel.
#[derive(Debug, Clone, Copy)]
pub struct RisUserPath {
    pub gain: Complex64,
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
}

/// `H = sqrt(N/S_1) sum_j alpha_j a_N(theta_r, phi_r) a_M^H(theta_t)`.
pub fn bs_ris_channel(paths: &[BsRisPath], n_h: usize, n_v: usize, m: usize) -> CMat {
    let n = n_h * n_v;
    let scale = (n as f64 / paths.len() as f64).sqrt();
    let mut h = CMat::zeros(n, m);
    for path in paths {
        let rx = steering_upa(path.aoa_azimuth, path.aoa_elevation, n_h, n_v);
        let tx = steering_ula(path.aod, m);
        h += (rx * tx.adjoint()) * (path.gain * scale);
    }
    h
}

/// `h_k = sqrt(N/S_2) sum_j alpha_jk a_N(theta_jk, phi_jk)`.
pub fn ris_user_channel(paths: &[RisUserPath], n_h: usize, n_v: usize) -> CVec {
    let n = n_h * n_v;
    let scale = (n as f64 / paths.len() as f64).sqrt();
    let mut h = CVec::zeros(n);
    for path in paths {
        h += steering_upa(path.aod_azimuth, path.aod_elevation, n_h, n_v) * (path.gain * scale);
    }
    h
}

/// Draws a `CN(0, var)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Samples true channels from the extended Saleh-Valenzuela model and forms
/// estimates `H_est = H - Lambda`, `h_est = h - Lambda_k` with iid
/// `CN(0, sigma_eps^2)` error entries.
pub fn sample_channels<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> ChannelSet {
    let angle = Uniform::new_inclusive(-FRAC_PI_2, FRAC_PI_2).expect("valid angle range");
    let (n_h, n_v, m) = (cfg.ris_h, cfg.ris_v, cfg.antennas);

    let bs_paths: Vec<BsRisPath> = (0..cfg.paths_bs_ris)
        .map(|_| BsRisPath {
            gain: complex_gaussian(rng, 1.0),
            aod: angle.sample(rng),
            aoa_azimuth: angle.sample(rng),
            aoa_elevation: angle.sample(rng),
        })
        .collect();
    let bs_ris = bs_ris_channel(&bs_paths, n_h, n_v, m);

    let ris_user: Vec<CVec> = (0..cfg.users)
        .map(|_| {
            let paths: Vec<RisUserPath> = (0..cfg.paths_ris_user)
                .map(|_| RisUserPath {
                    gain: complex_gaussian(rng, 1.0),
                    aod_azimuth: angle.sample(rng),
                    aod_elevation: angle.sample(rng),
                })
                .collect();
            ris_user_channel(&paths, n_h, n_v)
        })
        .collect();

    let var = cfg.csi_error_var;
    if var == 0.0 {
        return ChannelSet::perfect(bs_ris, ris_user);
    }
    let bs_ris_est = &bs_ris - CMat::from_fn(bs_ris.nrows(), m, |_, _| complex_gaussian(rng, var));
    let ris_user_est = ris_user
        .iter()
        .map(|h| h - CVec::from_fn(h.len(), |_, _| complex_gaussian(rng, var)))
        .collect();
    ChannelSet { bs_ris, ris_user, bs_ris_est, ris_user_est, error_var: var }
}

/// Effective channel `g_k = h_k^H diag(psi) H` as the row coefficients of
/// `g_k f = sum_m g_k[m] f[m]` (estimated channels).
pub fn effective_channel(chs: &ChannelSet, psi: &CVec, k: usize) -> Result<CVec, ChannelError> {
    let users = chs.users();
    if k >= users {
        return Err(ChannelError::UserIndex { index: k, users });
    }
    let h = &chs.ris_user_est[k];
    let weights = CVec::from_fn(h.len(), |i, _| h[i].conj() * psi[i]);
    Ok(chs.bs_ris_est.transpose() * weights)
}

/// Per-unit-total-power residual interference coefficient
/// `r_k = s2 (|h_k|^2 |f|^2 + |H f|^2) + N s2^2 |f|^2`, `s2 = sigma_eps^2`.
/// The interference power of user `k` is `r_k * sum(p)`.
pub fn residual_coeff(chs: &ChannelSet, f: &CVec) -> Vec<f64> {
    let s2 = chs.error_var;
    if s2 == 0.0 {
        return vec![0.0; chs.users()];
    }
    let f2 = f.norm_squared();
    let hf2 = (&chs.bs_ris_est * f).norm_squared();
    let n = chs.n_ris() as f64;
    chs.ris_user_est
        .iter()
        .map(|h| s2 * (h.norm_squared() * f2 + hf2) + n * s2 * s2 * f2)
        .collect()
}
