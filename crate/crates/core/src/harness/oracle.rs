use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use super::HarnessError;
use crate::channel::{residual_coeff, ChannelSet, Design, SystemConfig};
use crate::linalg::CVec;
use crate::metrics::{effective_gains, order_from_gains, sinr_from_gains, sum_rate, sum_rate_from_sinr};

/// Exhaustive-search resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleGrid {
    /// Phase levels per RIS element.
    pub psi_levels: usize,
    /// Amplitude-split levels of the 2-antenna beam codebook.
    pub f_theta: usize,
    /// Relative-phase levels of the 2-antenna beam codebook.
    pub f_phi: usize,
    /// Points on the full-budget power segment (K = 2).
    pub p_points: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self { psi_levels: 64, f_theta: 16, f_phi: 16, p_points: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_sum_rate: f64,
    pub best_design: Design,
    /// Whether the best design meets every rate target. When no grid point
    /// does, the best unconstrained point is returned.
    pub feasible: bool,
    pub evaluated: usize,
}

fn beam_codebook(m: usize, grid: &OracleGrid) -> Vec<CVec> {
    if m == 1 {
        return vec![CVec::from_element(1, Complex64::new(1.0, 0.0))];
    }
    let mut book = Vec::with_capacity(grid.f_theta * grid.f_phi);
    for i in 0..grid.f_theta {
        let theta = FRAC_PI_2 * i as f64 / (grid.f_theta.max(2) - 1) as f64;
        for l in 0..grid.f_phi {
            let phi = TAU * l as f64 / grid.f_phi as f64;
            book.push(CVec::from_vec(vec![
                Complex64::new(theta.cos(), 0.0),
                Complex64::from_polar(theta.sin(), phi),
            ]));
        }
    }
    book
}

fn power_grid(users: usize, budget: f64, points: usize) -> Vec<Vec<f64>> {
    if users == 1 {
        return vec![vec![budget]];
    }
    (0..points)
        .map(|i| {
            let a = budget * i as f64 / (points.max(2) - 1) as f64;
            vec![a, budget - a]
        })
        .collect()
}

/// Exhaustive search over RIS phases, a beam codebook and power splits for
/// instances with `M, N, K <= 2`. The first RIS phase is fixed to 1, which
/// loses nothing since a common RIS phase rotation leaves every SINR
/// unchanged.
pub fn brute_force_oracle(chs: &ChannelSet, cfg: &SystemConfig, grid: &OracleGrid) -> Result<OracleResult, HarnessError> {
    let (m, n, k) = (chs.antennas(), chs.n_ris(), chs.users());
    if m > 2 || n > 2 || k > 2 {
        return Err(HarnessError::OracleTooLarge { antennas: m, n_ris: n, users: k });
    }
    let etas = cfg.etas();
    let q = grid.psi_levels.max(1);
    let phases: Vec<Complex64> = (0..q).map(|i| Complex64::from_polar(1.0, TAU * i as f64 / q as f64)).collect();
    let powers = power_grid(k, cfg.power_budget, grid.p_points);
    let mut best: Option<(bool, f64, Design)> = None;
    let mut evaluated = 0;
    for f in beam_codebook(m, grid) {
        let resid = residual_coeff(chs, &f);
        for idx in 0..q.pow(n as u32 - 1) {
            let mut psi = CVec::from_element(n, Complex64::new(1.0, 0.0));
            let mut rest = idx;
            for i in 1..n {
                psi[i] = phases[rest % q];
                rest /= q;
            }
            let gains = effective_gains(chs, &psi, &f);
            let order = order_from_gains(&gains);
            for p in &powers {
                evaluated += 1;
                let gamma = sinr_from_gains(&gains, &resid, p, &order, cfg.noise_power);
                let feasible = gamma.iter().zip(&etas).all(|(g, e)| g >= e);
                let value = sum_rate_from_sinr(&gamma);
                let better = match &best {
                    None => true,
                    Some((bf, bv, _)) => (feasible, value) > (*bf, *bv),
                };
                if better {
                    let design = Design { f: f.clone(), psi: psi.clone(), p: p.clone(), order: order.clone() };
                    best = Some((feasible, value, design));
                }
            }
        }
    }
    let (feasible, _, best_design) = best.expect("grids are non-empty");
    Ok(OracleResult { best_sum_rate: sum_rate(&best_design, chs, cfg), best_design, feasible, evaluated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(users: usize, n: usize, seed: u64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig { antennas: 2, ris_h: n, ris_v: 1, users, ..Default::default() }
            .with_snr_db(10.0)
            .with_uniform_threshold(0.0);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        (cfg, chs)
    }

    #[test]
    fn guard() {
        let cfg = SystemConfig { antennas: 3, ris_h: 1, ris_v: 1, users: 1, ..Default::default() }.with_uniform_threshold(0.0);
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            brute_force_oracle(&chs, &cfg, &OracleGrid::default()),
            Err(HarnessError::OracleTooLarge { antennas: 3, .. })
        ));
    }

    #[test]
    fn codebook_is_unit_norm() {
        let book = beam_codebook(2, &OracleGrid::default());
        assert_eq!(book.len(), 256);
        assert!(book.iter().all(|f| (f.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_element_single_user_matches_phase_scan() {
        let (cfg, chs) = tiny(1, 1, 3);
        let grid = OracleGrid::default();
        let res = brute_force_oracle(&chs, &cfg, &grid).unwrap();
        // scanning the single RIS phase cannot beat the oracle: the phase drops out
        let mut scan: f64 = 0.0;
        for f in beam_codebook(2, &grid) {
            for i in 0..64 {
                let psi = CVec::from_element(1, Complex64::from_polar(1.0, TAU * i as f64 / 64.0));
                let d = Design { f: f.clone(), psi, p: vec![cfg.power_budget], order: vec![0] };
                scan = scan.max(sum_rate(&d, &chs, &cfg));
            }
        }
        assert!((res.best_sum_rate - scan).abs() < 1e-12);
        assert!(res.feasible);
    }

    #[test]
    fn refinement_is_monotone() {
        for seed in 0..3 {
            let (cfg, chs) = tiny(2, 2, seed);
            let coarse = brute_force_oracle(&chs, &cfg, &OracleGrid { psi_levels: 64, ..Default::default() }).unwrap();
            let fine = brute_force_oracle(&chs, &cfg, &OracleGrid { psi_levels: 128, ..Default::default() }).unwrap();
            assert!(fine.best_sum_rate >= coarse.best_sum_rate);
            assert_eq!(coarse.evaluated, 256 * 64 * 64);
        }
    }

    #[test]
    fn reported_value_matches_design() {
        let (cfg, chs) = tiny(2, 2, 9);
        let res = brute_force_oracle(&chs, &cfg, &OracleGrid { psi_levels: 16, f_theta: 8, f_phi: 8, p_points: 16 }).unwrap();
        assert_eq!(res.best_sum_rate, sum_rate(&res.best_design, &chs, &cfg));
        assert!((res.best_design.total_power() - cfg.power_budget).abs() < 1e-9);
    }

    #[test]
    fn infeasible_targets_fall_back() {
        let (cfg, chs) = tiny(2, 2, 1);
        let cfg = cfg.with_uniform_threshold(30.0);
        let res = brute_force_oracle(&chs, &cfg, &OracleGrid { psi_levels: 8, f_theta: 4, f_phi: 4, p_points: 8 }).unwrap();
        assert!(!res.feasible);
        assert!(res.best_sum_rate > 0.0);
    }
}
