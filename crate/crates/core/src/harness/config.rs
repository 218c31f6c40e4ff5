use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::algorithms::AoSettings;
use crate::channel::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AlgorithmKind {
    SumRate,
    EnergyEfficiency,
    SvdWf,
    Oma,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [Self::SumRate, Self::EnergyEfficiency, Self::SvdWf, Self::Oma];

    pub fn name(self) -> &'static str {
        match self {
            Self::SumRate => "sr",
            Self::EnergyEfficiency => "ee",
            Self::SvdWf => "svd_wf",
            Self::Oma => "oma",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected sr, ee, svd_wf, oma or all)"))
    }
}

/// Sweep definition. Every combination of the four axes is run for
/// `trials` channel realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub snr_db: Vec<f64>,
    pub n_ris: Vec<usize>,
    pub users: Vec<usize>,
    pub sigma_eps2: Vec<f64>,
    pub trials: usize,
    pub algorithms: Vec<AlgorithmKind>,
    /// Template for the non-swept scenario constants.
    pub base: SystemConfig,
    /// Uniform per-user rate threshold applied at every axis point.
    pub rate_threshold: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub csv_name: String,
    /// Record wall-clock time per trial. Off by default so output bytes
    /// depend only on the seed.
    pub timing: bool,
    pub settings: AoSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            snr_db: (-10..=30).step_by(5).map(f64::from).collect(),
            n_ris: vec![64],
            users: vec![4],
            sigma_eps2: vec![0.0],
            trials: 100,
            algorithms: AlgorithmKind::ALL.to_vec(),
            base: SystemConfig::default(),
            rate_threshold: 0.3,
            seed: 1,
            out_dir: PathBuf::from("out"),
            csv_name: "results.csv".into(),
            timing: false,
            settings: AoSettings::default(),
        }
    }
}

/// RIS grid `(N_H, N_V)` for `N` elements: `N_V` is the largest divisor of
/// `N` not above `sqrt(N)`.
pub fn ris_grid(n: usize) -> (usize, usize) {
    let mut v = 1;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            v = d;
        }
        d += 1;
    }
    (n / v.max(1), v.max(1))
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPoint {
    pub snr_db: f64,
    pub n_ris: usize,
    pub users: usize,
    pub sigma_eps2: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let empty = |name: &str| Err(HarnessError::Config(format!("axis `{name}` is empty")));
        if self.snr_db.is_empty() {
            return empty("snr_db");
        }
        if self.n_ris.is_empty() {
            return empty("n_ris");
        }
        if self.users.is_empty() {
            return empty("k_users");
        }
        if self.sigma_eps2.is_empty() {
            return empty("sigma_eps2");
        }
        if self.algorithms.is_empty() {
            return empty("algorithms");
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        for point in self.axis_points() {
            self.system_config(&point).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Axis points in sweep order (SNR outermost, then N, K, error variance).
    pub fn axis_points(&self) -> Vec<AxisPoint> {
        let mut points = Vec::new();
        for &snr_db in &self.snr_db {
            for &n_ris in &self.n_ris {
                for &users in &self.users {
                    for &sigma_eps2 in &self.sigma_eps2 {
                        points.push(AxisPoint { snr_db, n_ris, users, sigma_eps2 });
                    }
                }
            }
        }
        points
    }

    pub fn system_config(&self, point: &AxisPoint) -> SystemConfig {
        let (ris_h, ris_v) = ris_grid(point.n_ris);
        SystemConfig { ris_h, ris_v, users: point.users, csi_error_var: point.sigma_eps2, ..self.base.clone() }
            .with_snr_db(point.snr_db)
            .with_uniform_threshold(self.rate_threshold)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out_dir.join(&self.csv_name)
    }

    /// Parses `key = value` lines; `#` starts a comment and lists are
    /// comma-separated.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| HarnessError::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
            cfg.set(key.trim(), value.trim()).map_err(|message| HarnessError::Parse { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "snr_db" => self.snr_db = list(value)?,
            "n_ris" => self.n_ris = list(value)?,
            "k_users" => self.users = list(value)?,
            "sigma_eps2" => self.sigma_eps2 = list(value)?,
            "trials" => self.trials = scalar(value)?,
            "algorithms" => {
                self.algorithms = if value.trim() == "all" { AlgorithmKind::ALL.to_vec() } else { list(value)? };
                self.algorithms.sort();
                self.algorithms.dedup();
            }
            "seed" => self.seed = scalar(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "csv" => self.csv_name = value.to_string(),
            "timing" => self.timing = scalar(value)?,
            "antennas" => self.base.antennas = scalar(value)?,
            "paths_bs_ris" => self.base.paths_bs_ris = scalar(value)?,
            "paths_ris_user" => self.base.paths_ris_user = scalar(value)?,
            "noise_power" => self.base.noise_power = scalar(value)?,
            "rate_threshold" => self.rate_threshold = scalar(value)?,
            "p_bs" => self.base.power_model.bs_residual = scalar(value)?,
            "p_rf" => self.base.power_model.rf_chain = scalar(value)?,
            "p_ris" => self.base.power_model.ris_element = scalar(value)?,
            "max_outer" => self.settings.max_outer = scalar(value)?,
            "outer_tol" => self.settings.outer_tol = scalar(value)?,
            "randomizations" => self.settings.randomizations = scalar(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| format!("invalid value `{}`: {e}", value.trim()))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(scalar).collect()
}
