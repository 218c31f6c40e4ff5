//! Monte Carlo sweeps over SNR, RIS size, user count and CSI error, with
//! CSV output, SVG plots and a brute-force oracle for tiny instances.

mod config;
mod oracle;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::algorithms::{algorithm1_sum_rate, algorithm2_ee, AlgorithmError, AoTrace};
use crate::baselines::{oma_tdma_baseline, svd_wf_baseline};
use crate::channel::{sample_channels, ChannelSet, Design, SystemConfig};
use crate::metrics::{evaluate, FEASIBILITY_TOL};

pub use config::{ris_grid, AlgorithmKind, AxisPoint, ExperimentConfig};
pub use oracle::{brute_force_oracle, OracleGrid, OracleResult};
pub use output::{emit_csv, emit_plot, parse_csv, summarize, write_csv, PlotSpec, Series, CSV_HEADER};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: malformed record {row}: {message}")]
    Record { path: PathBuf, row: usize, message: String },
    #[error("no records to write")]
    Empty,
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("oracle limited to M, N, K <= 2 (got M={antennas}, N={n_ris}, K={users})")]
    OracleTooLarge { antennas: usize, n_ris: usize, users: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub n_ris: usize,
    pub k_users: usize,
    pub sigma_eps2: f64,
    pub algorithm: AlgorithmKind,
    /// Sum rate for `sr`, `svd_wf` and `oma`; energy efficiency for `ee`.
    pub objective: f64,
    pub sum_rate: f64,
    pub ee: f64,
    pub total_tx_power: f64,
    pub iters: usize,
    pub runtime_ms: Option<f64>,
    pub feasible: bool,
    /// Per-user rates (per-stream for `svd_wf`).
    pub rates: Vec<f64>,
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of the axes that change the channel distribution. SNR is left out
/// so every SNR point reuses the same realizations.
pub fn axis_hash(point: &AxisPoint) -> u64 {
    [point.n_ris as u64, point.users as u64, point.sigma_eps2.to_bits()]
        .into_iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, v| splitmix64(h ^ v))
}

/// Channel seed of `trial` at `point`; shared by every algorithm.
pub fn trial_seed(master: u64, point: &AxisPoint, trial: usize) -> u64 {
    splitmix64(splitmix64(master ^ axis_hash(point)).wrapping_add(trial as u64))
}

/// Runs every algorithm of `config` on every axis point and trial using
/// `jobs` worker threads. Rows come back sorted by (axis point, trial,
/// algorithm), so the result does not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialRecord>, HarnessError> {
    config.validate()?;
    let points = config.axis_points();
    let tasks: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|p| (0..config.trials).map(move |t| (p, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let mut rows: Vec<((usize, usize, AlgorithmKind), TrialRecord)> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(p, t)| {
                run_trial(config, &points[p], t).into_iter().map(move |r| ((p, t, r.algorithm), r))
            })
            .collect()
    });
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Runs the configured algorithms on one channel realization.
pub fn run_trial(config: &ExperimentConfig, point: &AxisPoint, trial: usize) -> Vec<TrialRecord> {
    let cfg = config.system_config(point);
    let seed = trial_seed(config.seed, point, trial);
    let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    config
        .algorithms
        .iter()
        .map(|&alg| {
            let start = Instant::now();
            let mut rec = run_algorithm(config, alg, &chs, &cfg, seed);
            rec.trial = trial;
            rec.seed = seed;
            rec.snr_db = point.snr_db;
            rec.n_ris = point.n_ris;
            rec.k_users = point.users;
            rec.sigma_eps2 = point.sigma_eps2;
            rec.runtime_ms = config.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            rec
        })
        .collect()
}

fn blank(alg: AlgorithmKind) -> TrialRecord {
    TrialRecord {
        trial: 0,
        seed: 0,
        snr_db: 0.0,
        n_ris: 0,
        k_users: 0,
        sigma_eps2: 0.0,
        algorithm: alg,
        objective: f64::NAN,
        sum_rate: f64::NAN,
        ee: f64::NAN,
        total_tx_power: f64::NAN,
        iters: 0,
        runtime_ms: None,
        feasible: false,
        rates: Vec::new(),
    }
}

fn run_algorithm(config: &ExperimentConfig, alg: AlgorithmKind, chs: &ChannelSet, cfg: &SystemConfig, seed: u64) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let from_design = |design: &Design, trace: &AoTrace, feasible: bool| {
        let report = evaluate(design, chs, cfg, FEASIBILITY_TOL);
        TrialRecord {
            objective: if alg == AlgorithmKind::EnergyEfficiency { report.ee } else { report.sum_rate },
            sum_rate: report.sum_rate,
            ee: report.ee,
            total_tx_power: report.total_power,
            iters: trace.iterations,
            feasible: feasible && report.feasible,
            rates: report.rate,
            ..blank(alg)
        }
    };
    let ao = |res: Result<(Design, AoTrace), AlgorithmError>| match res {
        Ok((design, trace)) => from_design(&design, &trace, true),
        Err(AlgorithmError::InfeasibleProblem { design, trace }) => from_design(&design, &trace, false),
        Err(_) => blank(alg),
    };
    match alg {
        AlgorithmKind::SumRate => ao(algorithm1_sum_rate(chs, cfg, &config.settings, &mut rng)),
        AlgorithmKind::EnergyEfficiency => ao(algorithm2_ee(chs, cfg, &config.settings, &mut rng)),
        AlgorithmKind::SvdWf => {
            let r = svd_wf_baseline(chs, cfg);
            TrialRecord {
                objective: r.sum_rate,
                sum_rate: r.sum_rate,
                ee: r.ee,
                total_tx_power: r.total_power,
                feasible: r.sum_rate.is_finite(),
                rates: r.rates,
                ..blank(alg)
            }
        }
        AlgorithmKind::Oma => {
            let r = oma_tdma_baseline(chs, cfg);
            let feasible = r.rates.iter().zip(&cfg.rate_thresholds).all(|(r, t)| *r >= t - FEASIBILITY_TOL);
            TrialRecord {
                objective: r.sum_rate,
                sum_rate: r.sum_rate,
                ee: r.ee,
                total_tx_power: r.total_power,
                feasible,
                rates: r.rates,
                ..blank(alg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::parse(
            "snr_db = 10\nn_ris = 4\nk_users = 2\nsigma_eps2 = 0\ntrials = 2\nalgorithms = sr, oma\nantennas = 4",
        )
        .unwrap()
    }

    #[test]
    fn record_count() {
        let rows = run_experiment(&small(), 1).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.runtime_ms.is_none()));
        assert_eq!(rows[0].algorithm, AlgorithmKind::SumRate);
        assert_eq!(rows[1].algorithm, AlgorithmKind::Oma);
    }

    #[test]
    fn paired_seeds() {
        let rows = run_experiment(&small(), 2).unwrap();
        assert_eq!(rows[0].seed, rows[1].seed);
        assert_eq!(rows[2].seed, rows[3].seed);
        assert_ne!(rows[0].seed, rows[2].seed);
    }

    #[test]
    fn snr_shares_channels() {
        let a = AxisPoint { snr_db: 0.0, n_ris: 16, users: 4, sigma_eps2: 0.05 };
        let b = AxisPoint { snr_db: 30.0, ..a };
        let c = AxisPoint { sigma_eps2: 0.0, ..a };
        assert_eq!(trial_seed(7, &a, 3), trial_seed(7, &b, 3));
        assert_ne!(trial_seed(7, &a, 3), trial_seed(7, &c, 3));
        assert_ne!(trial_seed(7, &a, 3), trial_seed(7, &a, 4));
        assert_ne!(trial_seed(7, &a, 3), trial_seed(8, &a, 3));
    }

    #[test]
    fn jobs_do_not_change_results() {
        let cfg = small();
        assert_eq!(run_experiment(&cfg, 1).unwrap(), run_experiment(&cfg, 3).unwrap());
    }

    #[test]
    fn unreachable_targets_are_flagged() {
        let mut cfg = small();
        cfg.rate_threshold = 40.0;
        cfg.trials = 1;
        let rows = run_experiment(&cfg, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| !r.feasible));
        assert!(rows[0].sum_rate.is_finite());
    }
}
