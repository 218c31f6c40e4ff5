use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_fp_core::baselines::{waterfill, wmse_oracle};
use ris_fp_core::channel::{sample_channels, Design, SystemConfig};
use ris_fp_core::fp::{aux_update_f, aux_update_p, aux_update_psi, build_beamformer_coeffs, build_pa_coeffs, ris_qt_sinr};
use ris_fp_core::harness::{
    brute_force_oracle, emit_csv, emit_plot, run_experiment, trial_seed, ExperimentConfig, OracleGrid, PlotSpec,
    TrialRecord,
};
use ris_fp_core::linalg::CVec;
use ris_fp_core::metrics::{decode_order, sinr, FEASIBILITY_TOL};
use ris_fp_core::{algorithm1_sum_rate, AoSettings};

#[derive(Parser)]
#[command(name = "ris-fp-sim", version, about = "RIS-aided single-RF-chain NOMA design and Monte Carlo sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSV.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Record per-trial wall-clock time (makes the CSV non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Plot mean +/- std of a CSV column as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        series: String,
        #[arg(long)]
        out: PathBuf,
        /// Keep only rows with `column=value` (repeatable).
        #[arg(long = "filter", value_parser = parse_filter)]
        filters: Vec<(String, String)>,
        #[arg(long, default_value = "")]
        title: String,
    },
    /// Compare Algorithm 1 with exhaustive search on tiny instances.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Phase levels per RIS element.
        #[arg(long, default_value_t = 64)]
        levels: usize,
    },
    /// Quick numerical self-checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, env = "RIS_FP_SIM_JOBS")]
    jobs: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_filter(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected column=value, got `{s}`"))
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn jobs(common: &Common) -> usize {
    common
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1)
}

fn summary(records: &[TrialRecord]) {
    let mut groups: BTreeMap<(String, String), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let axis = format!("snr={} N={} K={} s2={}", r.snr_db, r.n_ris, r.k_users, r.sigma_eps2);
        groups.entry((r.algorithm.to_string(), axis)).or_default().push(r);
    }
    println!("{:<8} {:<36} {:>10} {:>10} {:>9}", "alg", "axis", "sum_rate", "ee", "feasible");
    for ((alg, axis), rows) in groups {
        let mean = |f: fn(&TrialRecord) -> f64| {
            let v: Vec<f64> = rows.iter().map(|r| f(r)).filter(|v| v.is_finite()).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        let ok = rows.iter().filter(|r| r.feasible).count();
        println!(
            "{:<8} {:<36} {:>10.4} {:>10.5} {:>5}/{:<3}",
            alg,
            axis,
            mean(|r| r.sum_rate),
            mean(|r| r.ee),
            ok,
            rows.len()
        );
    }
}

fn run(config: &Path, common: &Common, timing: bool) -> Result<()> {
    let mut cfg = load(config, common)?;
    cfg.timing |= timing;
    let records = run_experiment(&cfg, jobs(common))?;
    let path = cfg.csv_path();
    emit_csv(&records, &path)?;
    summary(&records);
    println!("wrote {} rows to {}", records.len(), path.display());
    Ok(())
}

fn oracle(config: &Path, common: &Common, levels: usize) -> Result<()> {
    let cfg = load(config, common)?;
    let grid = OracleGrid { psi_levels: levels, ..OracleGrid::default() };
    let settings = &cfg.settings;
    println!("{:<6} {:<28} {:>10} {:>10} {:>7}", "trial", "axis", "oracle", "ao", "ratio");
    let mut worst = f64::INFINITY;
    for point in cfg.axis_points() {
        let sys = cfg.system_config(&point);
        for trial in 0..cfg.trials {
            let seed = trial_seed(cfg.seed, &point, trial);
            let chs = sample_channels(&sys, &mut ChaCha8Rng::seed_from_u64(seed));
            let best = brute_force_oracle(&chs, &sys, &grid)?;
            let ao = match algorithm1_sum_rate(&chs, &sys, settings, &mut ChaCha8Rng::seed_from_u64(seed)) {
                Ok((d, _)) => ris_fp_core::metrics::sum_rate(&d, &chs, &sys),
                Err(e) => {
                    println!("{trial:<6} algorithm failed: {e}");
                    continue;
                }
            };
            let ratio = ao / best.best_sum_rate;
            worst = worst.min(ratio);
            let axis = format!("snr={} N={} K={}", point.snr_db, point.n_ris, point.users);
            println!("{trial:<6} {axis:<28} {:>10.5} {:>10.5} {:>7.4}", best.best_sum_rate, ao, ratio);
        }
    }
    println!("worst ratio {worst:.4}");
    Ok(())
}

fn random_design(rng: &mut ChaCha8Rng, chs: &ris_fp_core::ChannelSet, cfg: &SystemConfig) -> Design {
    let m = chs.antennas();
    let f = CVec::from_fn(m, |_, _| num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let f = &f / num_complex::Complex64::from(f.norm());
    let psi = CVec::from_fn(chs.n_ris(), |_, _| num_complex::Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
    let w: Vec<f64> = (0..cfg.users).map(|_| rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    let p = w.iter().map(|v| v / s * cfg.power_budget).collect();
    let order = decode_order(chs, &psi, &f);
    Design { f, psi, p, order }
}

/// Largest relative gap between each quadratic-transform SINR at its optimal
/// auxiliary and the direct SINR, and between `1/(1 + SINR)` and the MMSE.
fn identity_gaps(seed: u64, designs: usize) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut qt, mut wmse) = (0.0f64, 0.0f64);
    for i in 0..designs {
        let cfg = SystemConfig {
            antennas: 8,
            ris_h: 4,
            ris_v: 4,
            users: 3,
            csi_error_var: if i % 2 == 0 { 0.0 } else { 0.05 },
            ..Default::default()
        }
        .with_snr_db(10.0)
        .with_uniform_threshold(0.0);
        let chs = sample_channels(&cfg, &mut rng);
        let d = random_design(&mut rng, &chs, &cfg);
        let gamma = sinr(&d, &chs, &cfg);
        let bf = build_beamformer_coeffs(&chs, &d.psi, &d.p, &d.order, &cfg);
        let y = aux_update_f(&bf, &d.f)?;
        let nu = aux_update_psi(&chs, &d.f, &d.psi, &d.p, &d.order, &cfg)?;
        let pa = build_pa_coeffs(&chs, &d.f, &d.psi, &d.order, &cfg)?;
        let x = aux_update_p(&pa, &d.p)?;
        let forms = [bf.qt_sinr(&d.f, &y), ris_qt_sinr(&chs, &d.f, &d.psi, &d.p, &d.order, &nu, &cfg), pa.qt_sinr(&d.p, &x)];
        let state = wmse_oracle(&d, &chs, &cfg);
        for k in 0..cfg.users {
            for form in &forms {
                qt = qt.max((form[k] - gamma[k]).abs() / gamma[k].abs().max(1.0));
            }
            wmse = wmse.max((state.e_mmse[k] * (1.0 + gamma[k]) - 1.0).abs());
        }
    }
    Ok((qt, wmse))
}

fn selftest() -> Result<bool> {
    let mut all = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "ok  " } else { "FAIL" });
        all &= ok;
    };

    let (qt, wmse) = identity_gaps(11, 20)?;
    check("quadratic-transform identity", qt < 1e-10, format!("max gap {qt:.2e}"));
    check("MMSE identity", wmse < 1e-10, format!("max gap {wmse:.2e}"));

    let gains = [3.0, 1.2, 0.05, 0.7];
    let q = waterfill(&gains, 2.0, 1.0)?;
    let levels: Vec<f64> = gains.iter().zip(&q).filter(|(_, q)| **q > 0.0).map(|(g, q)| q + 1.0 / g).collect();
    let spread = levels.iter().fold(0.0f64, |m, l| m.max((l - levels[0]).abs()));
    let budget = (q.iter().sum::<f64>() - 2.0).abs();
    check("water-filling levels", spread < 1e-9 && budget < 1e-9, format!("level spread {spread:.2e}"));

    let cfg = SystemConfig { antennas: 4, ris_h: 2, ris_v: 2, users: 2, ..Default::default() }
        .with_snr_db(10.0)
        .with_uniform_threshold(0.3);
    let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
    let run = |seed| algorithm1_sum_rate(&chs, &cfg, &AoSettings::default(), &mut ChaCha8Rng::seed_from_u64(seed));
    match (run(1), run(1)) {
        (Ok((d1, t1)), Ok((d2, _))) => {
            let report = ris_fp_core::metrics::evaluate(&d1, &chs, &cfg, FEASIBILITY_TOL);
            check("algorithm 1 feasible", report.feasible, format!("sum rate {:.4} in {} passes", report.sum_rate, t1.iterations));
            let trace = t1.accepted_objectives();
            let monotone = trace.windows(2).all(|w| w[1] >= w[0] - 1e-6);
            check("algorithm 1 monotone", monotone, format!("{} accepted passes", trace.len()));
            check("algorithm 1 reproducible", d1 == d2, "same seed, same design".into());
        }
        (Err(e), _) | (_, Err(e)) => check("algorithm 1", false, e.to_string()),
    }
    Ok(all)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common, timing } => run(&config, &common, timing)?,
        Command::Plot { csv, x, y, series, out, filters, title } => {
            let spec = PlotSpec { x, y, series, filters, title };
            let curves = emit_plot(&csv, &spec, &out)?;
            println!("wrote {} ({} series)", out.display(), curves.len());
        }
        Command::Oracle { config, common, levels } => oracle(&config, &common, levels)?,
        Command::Selftest => {
            if !selftest()? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
