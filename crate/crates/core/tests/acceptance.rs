//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_fp_core::algorithms::{algorithm1_sum_rate, algorithm2_ee, AoSettings};
use ris_fp_core::baselines::{waterfill, wmse_oracle};
use ris_fp_core::channel::{sample_channels, ChannelSet, Design, SystemConfig};
use ris_fp_core::fp::{
    aux_update_f, aux_update_p, aux_update_psi, build_beamformer_coeffs, build_pa_coeffs, build_ris_coeffs,
    ris_qt_sinr,
};
use ris_fp_core::harness::{
    brute_force_oracle, run_experiment, write_csv, AlgorithmKind, ExperimentConfig, OracleGrid, TrialRecord,
};
use ris_fp_core::linalg::CVec;
use ris_fp_core::metrics::{check_feasibility, decode_order, sinr, sum_rate, FEASIBILITY_TOL};
use ris_fp_core::solver::{solve_ris_sdp, SolverSettings};

struct Outcome {
    pass: bool,
    detail: String,
}

fn random_design(rng: &mut ChaCha8Rng, chs: &ChannelSet, cfg: &SystemConfig) -> Design {
    let f = CVec::from_fn(chs.antennas(), |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let f = &f / Complex64::from(f.norm());
    let psi = CVec::from_fn(chs.n_ris(), |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * TAU));
    let w: Vec<f64> = (0..cfg.users).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    let p = w.iter().map(|v| v / s * cfg.power_budget).collect();
    let order = decode_order(chs, &psi, &f);
    Design { f, psi, p, order }
}

/// 100 random designs at M=8, N=16, K=3, alternating error variances.
fn identity_designs() -> Vec<(SystemConfig, ChannelSet, Design)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..100)
        .map(|i| {
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
            (cfg, chs, d)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for (cfg, chs, d) in identity_designs() {
        let gamma = sinr(&d, &chs, &cfg);
        let bf = build_beamformer_coeffs(&chs, &d.psi, &d.p, &d.order, &cfg);
        let y = aux_update_f(&bf, &d.f).unwrap();
        let nu = aux_update_psi(&chs, &d.f, &d.psi, &d.p, &d.order, &cfg).unwrap();
        let pa = build_pa_coeffs(&chs, &d.f, &d.psi, &d.order, &cfg).unwrap();
        let x = aux_update_p(&pa, &d.p).unwrap();
        let forms = [bf.qt_sinr(&d.f, &y), ris_qt_sinr(&chs, &d.f, &d.psi, &d.p, &d.order, &nu, &cfg), pa.qt_sinr(&d.p, &x)];
        for form in &forms {
            for k in 0..cfg.users {
                worst = worst.max((form[k] - gamma[k]).abs() / gamma[k].max(1.0));
            }
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max relative gap {worst:.2e} over 100 designs x 3 forms") }
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for (cfg, chs, d) in identity_designs() {
        let gamma = sinr(&d, &chs, &cfg);
        let state = wmse_oracle(&d, &chs, &cfg);
        for k in 0..cfg.users {
            worst = worst.max((state.e_mmse[k] * (1.0 + gamma[k]) - 1.0).abs());
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max |e_mmse (1 + SINR) - 1| = {worst:.2e}") }
}

fn criterion_3() -> Outcome {
    let cfg = SystemConfig { antennas: 16, ris_h: 4, ris_v: 4, users: 3, ..Default::default() }
        .with_snr_db(10.0)
        .with_uniform_threshold(0.3);
    let settings = AoSettings::default();
    let mut bad = Vec::new();
    let mut worst_drop = 0.0f64;
    for seed in 0..20u64 {
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        for (name, res) in [
            ("sr", algorithm1_sum_rate(&chs, &cfg, &settings, &mut ChaCha8Rng::seed_from_u64(seed))),
            ("ee", algorithm2_ee(&chs, &cfg, &settings, &mut ChaCha8Rng::seed_from_u64(seed))),
        ] {
            match res {
                Ok((d, trace)) => {
                    let obj = trace.accepted_objectives();
                    for w in obj.windows(2) {
                        worst_drop = worst_drop.max(w[0] - w[1]);
                    }
                    if obj.windows(2).any(|w| w[1] < w[0] - 1e-6) {
                        bad.push(format!("{name}/{seed}: trace decreases"));
                    }
                    if !check_feasibility(&d, &chs, &cfg, FEASIBILITY_TOL).is_empty() {
                        bad.push(format!("{name}/{seed}: infeasible design"));
                    }
                }
                Err(e) => bad.push(format!("{name}/{seed}: {e}")),
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("40 runs, largest accepted-pass drop {worst_drop:.2e}{}", if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }),
    }
}

fn criterion_4() -> Outcome {
    let cfg = SystemConfig { antennas: 2, ris_h: 2, ris_v: 1, users: 2, ..Default::default() }
        .with_snr_db(10.0)
        .with_uniform_threshold(0.0);
    let mut worst = f64::INFINITY;
    let mut errors = Vec::new();
    for seed in 0..10u64 {
        let chs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let oracle = brute_force_oracle(&chs, &cfg, &OracleGrid::default()).unwrap();
        match algorithm1_sum_rate(&chs, &cfg, &AoSettings::default(), &mut ChaCha8Rng::seed_from_u64(seed)) {
            Ok((d, _)) => worst = worst.min(sum_rate(&d, &chs, &cfg) / oracle.best_sum_rate),
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    Outcome {
        pass: errors.is_empty() && worst >= 0.95,
        detail: format!("worst AO / oracle ratio {worst:.4} over 10 seeds{}", errors.join(", ")),
    }
}

fn mean_by<F: Fn(&TrialRecord) -> bool>(rows: &[TrialRecord], keep: F, value: fn(&TrialRecord) -> f64) -> f64 {
    let v: Vec<f64> = rows.iter().filter(|r| keep(r)).map(value).filter(|v| v.is_finite()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sweep shared by the SVD-WF comparisons.
fn svd_sweep() -> (ExperimentConfig, Vec<TrialRecord>) {
    let cfg = ExperimentConfig {
        snr_db: (-10..=30).step_by(5).map(f64::from).collect(),
        n_ris: vec![32],
        users: vec![4],
        sigma_eps2: vec![0.0],
        trials: 25,
        algorithms: AlgorithmKind::ALL.to_vec(),
        seed: 5,
        ..Default::default()
    };
    let rows = run_experiment(&cfg, 1).unwrap();
    (cfg, rows)
}

fn criterion_5(cfg: &ExperimentConfig, rows: &[TrialRecord]) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for &snr in &cfg.snr_db {
        let noma = mean_by(rows, |r| r.snr_db == snr && r.algorithm == AlgorithmKind::SumRate, |r| r.sum_rate);
        let svd = mean_by(rows, |r| r.snr_db == snr && r.algorithm == AlgorithmKind::SvdWf, |r| r.sum_rate);
        if snr == -10.0 || snr == 0.0 {
            pass &= noma > svd;
        }
        if snr == 30.0 {
            pass &= noma < svd;
        }
        if [-10.0, 0.0, 30.0].contains(&snr) {
            parts.push(format!("{snr} dB: {noma:.2} vs {svd:.2}"));
        }
    }
    Outcome { pass, detail: format!("N=32, 25 trials, NOMA vs SVD-WF sum rate: {}", parts.join("; ")) }
}

fn criterion_6(cfg: &ExperimentConfig, rows: &[TrialRecord]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for &snr in &cfg.snr_db {
        let noma = mean_by(rows, |r| r.snr_db == snr && r.algorithm == AlgorithmKind::EnergyEfficiency, |r| r.ee);
        let svd = mean_by(rows, |r| r.snr_db == snr && r.algorithm == AlgorithmKind::SvdWf, |r| r.ee);
        pass &= noma > svd;
        worst = worst.min(noma / svd);
    }
    Outcome { pass, detail: format!("smallest EE ratio (analog / fully digital) over -10..30 dB: {worst:.2}") }
}

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: vec![25.0, 30.0],
        n_ris: vec![64],
        users: vec![4],
        sigma_eps2: vec![0.0, 0.05],
        trials: 25,
        algorithms: vec![AlgorithmKind::SumRate],
        seed: 7,
        ..Default::default()
    };
    let rows = run_experiment(&cfg, 1).unwrap();
    let at = |snr: f64, s2: f64| mean_by(&rows, |r| r.snr_db == snr && r.sigma_eps2 == s2, |r| r.sum_rate);
    let icsi = (at(30.0, 0.05) - at(25.0, 0.05)).abs() / at(25.0, 0.05);
    let pcsi = (at(30.0, 0.0) - at(25.0, 0.0)) / at(25.0, 0.0);
    Outcome {
        pass: icsi < 0.05 && pcsi > 0.10,
        detail: format!("25->30 dB change: {:.1}% with error variance 0.05, {:.1}% with perfect CSI", icsi * 100.0, pcsi * 100.0),
    }
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: vec![10.0],
        n_ris: vec![16, 32, 64],
        users: vec![4],
        sigma_eps2: vec![0.0],
        trials: 25,
        algorithms: vec![AlgorithmKind::SumRate, AlgorithmKind::EnergyEfficiency],
        seed: 8,
        ..Default::default()
    };
    let rows = run_experiment(&cfg, 1).unwrap();
    let sr: Vec<f64> =
        cfg.n_ris.iter().map(|&n| mean_by(&rows, |r| r.n_ris == n && r.algorithm == AlgorithmKind::SumRate, |r| r.sum_rate)).collect();
    let ee: Vec<f64> = cfg
        .n_ris
        .iter()
        .map(|&n| mean_by(&rows, |r| r.n_ris == n && r.algorithm == AlgorithmKind::EnergyEfficiency, |r| r.ee))
        .collect();
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    Outcome {
        pass: increasing(&sr) && increasing(&ee),
        detail: format!("N = 16, 32, 64: sum rate {sr:.3?}, EE {ee:.4?}"),
    }
}

fn criterion_9() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: vec![40.0],
        n_ris: vec![16, 64],
        users: vec![4],
        sigma_eps2: vec![0.0, 0.05],
        trials: 50,
        algorithms: vec![AlgorithmKind::SumRate, AlgorithmKind::Oma],
        seed: 9,
        ..Default::default()
    };
    let rows = run_experiment(&cfg, 1).unwrap();
    let mut oma: HashMap<(usize, u64, usize), f64> = HashMap::new();
    for r in rows.iter().filter(|r| r.algorithm == AlgorithmKind::Oma) {
        oma.insert((r.n_ris, r.sigma_eps2.to_bits(), r.trial), r.sum_rate);
    }
    let mut parts = Vec::new();
    let mut pass = true;
    for &n in &cfg.n_ris {
        for &s2 in &cfg.sigma_eps2 {
            let noma: Vec<&TrialRecord> = rows
                .iter()
                .filter(|r| r.algorithm == AlgorithmKind::SumRate && r.n_ris == n && r.sigma_eps2 == s2)
                .collect();
            let wins = noma.iter().filter(|r| r.sum_rate >= oma[&(n, s2.to_bits(), r.trial)]).count();
            let share = wins as f64 / noma.len() as f64;
            pass &= share >= 0.9;
            parts.push(format!("N={n} var={s2}: {wins}/{}", noma.len()));
        }
    }
    Outcome { pass, detail: format!("NOMA >= OMA: {}", parts.join(", ")) }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut level_gap = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..8);
        let gains: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let budget = rng.random::<f64>() * 20.0 + 0.01;
        let q = waterfill(&gains, budget, 1.0).unwrap();
        let levels: Vec<f64> = gains.iter().zip(&q).filter(|(_, q)| **q > 0.0).map(|(g, q)| q + 1.0 / g).collect();
        for l in &levels {
            level_gap = level_gap.max((l - levels[0]).abs());
        }
    }
    let cfg = SystemConfig { antennas: 8, ris_h: 4, ris_v: 4, users: 3, ..Default::default() }
        .with_snr_db(10.0)
        .with_uniform_threshold(0.1);
    let (mut diag_gap, mut min_eig) = (0.0f64, f64::INFINITY);
    let mut solved = 0;
    while solved < 50 {
        let chs = sample_channels(&cfg, &mut rng);
        let d = random_design(&mut rng, &chs, &cfg);
        let nu = aux_update_psi(&chs, &d.f, &d.psi, &d.p, &d.order, &cfg).unwrap();
        let coeffs = match build_ris_coeffs(&chs, &d.f, &d.psi, &d.p, &d.order, &nu, &cfg) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let out = solve_ris_sdp(&coeffs, &SolverSettings::default());
        let psi = out.solution.psi;
        for i in 0..psi.nrows() {
            diag_gap = diag_gap.max((psi[(i, i)] - Complex64::new(1.0, 0.0)).norm());
        }
        let herm = (&psi + psi.adjoint()) * Complex64::new(0.5, 0.0);
        min_eig = min_eig.min(SymmetricEigen::new(herm).eigenvalues.min());
        solved += 1;
    }
    Outcome {
        pass: level_gap <= 1e-9 && diag_gap <= 1e-7 && min_eig >= -1e-7,
        detail: format!("water level spread {level_gap:.1e}; SDP |diag - 1| {diag_gap:.1e}, min eigenvalue {min_eig:.1e} (N=16, 50 problems)"),
    }
}

fn criterion_11() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: vec![0.0, 20.0],
        n_ris: vec![16],
        users: vec![3],
        sigma_eps2: vec![0.0, 0.05],
        trials: 4,
        algorithms: AlgorithmKind::ALL.to_vec(),
        seed: 11,
        ..Default::default()
    };
    let bytes = |jobs| {
        let mut buf = Vec::new();
        write_csv(&run_experiment(&cfg, jobs).unwrap(), &mut buf).unwrap();
        buf
    };
    let a = bytes(1);
    let b = bytes(8);
    let c = bytes(1);
    Outcome { pass: a == b && a == c, detail: format!("{} CSV bytes; jobs 1 vs 8 and rerun identical: {}", a.len(), a == b && a == c) }
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let mut failures = 0;
    let mut line = |id: usize, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = budget.map_or(true, |b| elapsed <= b);
        let pass = out.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2}: {} | {} | {:.1}s{}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { " (over time budget)" }
        );
    };
    line(1, Some(Duration::from_secs(10)), &mut criterion_1);
    line(2, Some(Duration::from_secs(5)), &mut criterion_2);
    line(3, Some(Duration::from_secs(600)), &mut criterion_3);
    line(4, Some(Duration::from_secs(900)), &mut criterion_4);
    let mut sweep = None;
    line(5, Some(Duration::from_secs(7200)), &mut || {
        let (cfg, rows) = sweep.insert(svd_sweep());
        criterion_5(cfg, rows)
    });
    let (cfg, rows) = sweep.expect("criterion 5 ran the sweep");
    line(6, None, &mut || criterion_6(&cfg, &rows));
    line(7, None, &mut criterion_7);
    line(8, None, &mut criterion_8);
    line(9, None, &mut criterion_9);
    line(10, None, &mut criterion_10);
    line(11, None, &mut criterion_11);
    println!("acceptance: {} of 11 criteria failed", failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
