//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use tmaris_core::admm::{MultiplierMode, MultiplierSolve};
use tmaris_core::system::{db_to_linear, dbm_to_watts, drop_users, DEFAULT_HEIGHT_M, DEFAULT_RADIUS_M};
use tmaris_core::{Rng, SolverOptions, SystemConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Field { line: usize, field: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Per-element power in mW.
    Power,
    /// Element count `N = N_x^2` on a square array.
    Elements,
    /// Rician factor in dB.
    Kappa,
    Users,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Elements => "elements",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Users => "users",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Power => vec![0.5, 1.0, 2.0, 4.0],
            SweepAxis::Elements => vec![9.0, 16.0, 25.0, 36.0],
            SweepAxis::Kappa => vec![0.0, 5.0, 10.0, 15.0],
            SweepAxis::Users => vec![2.0, 3.0, 4.0, 5.0],
        }
    }

    /// Grid used by the timing run when no values are configured.
    pub fn default_timing_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Elements => vec![64.0, 121.0, 256.0, 484.0],
            SweepAxis::Users => vec![2.0, 4.0, 8.0, 16.0],
            other => other.default_values(),
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "power" => Ok(SweepAxis::Power),
            "elements" => Ok(SweepAxis::Elements),
            "kappa" => Ok(SweepAxis::Kappa),
            "users" => Ok(SweepAxis::Users),
            other => Err(format!("unknown sweep axis `{other}` (power, elements, kappa, users)")),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub nx: usize,
    pub nz: usize,
    pub users: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Per-element power budget `P_t` in mW.
    pub pt_mw: f64,
    pub noise_dbm: f64,
    pub path_loss_exp: f64,
    /// Path gain at 1 m in dB.
    pub path_gain_db: f64,
    pub rician_db: f64,
    pub radius_m: f64,
    pub height_m: f64,
    pub solver: SolverOptions,
    pub seeds: Vec<u64>,
    pub sweep_axis: Option<SweepAxis>,
    /// Empty means the axis defaults.
    pub sweep_values: Vec<f64>,
    pub timing_iters: usize,
    pub timing_repeats: usize,
    /// Write measured wall times into the CSV. Off by default so output is
    /// reproducible byte for byte.
    pub record_wall_time: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: "default".into(),
            nx: 4,
            nz: 4,
            users: 5,
            spacing_wavelengths: 0.5,
            pt_mw: 1.0,
            noise_dbm: -50.0,
            path_loss_exp: 3.0,
            path_gain_db: -20.0,
            rician_db: 3.0,
            radius_m: DEFAULT_RADIUS_M,
            height_m: DEFAULT_HEIGHT_M,
            solver: SolverOptions::default(),
            seeds: (0..20).collect(),
            sweep_axis: None,
            sweep_values: Vec::new(),
            timing_iters: 20,
            timing_repeats: 5,
            record_wall_time: false,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut pt_line: Option<(usize, &str)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "pt_mw" || key == "pt_dbm" {
                if let Some((prev, k)) = pt_line {
                    return Err(ConfigError::Field {
                        line,
                        field: key.into(),
                        message: format!("P_t already set by `{k}` on line {prev}"),
                    });
                }
                pt_line = Some((line, key));
            }
            cfg.set(key, value).map_err(|message| ConfigError::Field { line, field: key.into(), message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse `{v}`"))
        }
        let s = &mut self.solver;
        match key {
            "scenario" => self.scenario = value.to_string(),
            "nx" => self.nx = num(value)?,
            "nz" => self.nz = num(value)?,
            "users" => self.users = num(value)?,
            "spacing_wavelengths" => self.spacing_wavelengths = num(value)?,
            "pt_mw" => self.pt_mw = num(value)?,
            "pt_dbm" => self.pt_mw = dbm_to_watts(num(value)?) * 1e3,
            "noise_dbm" => self.noise_dbm = num(value)?,
            "path_loss_exp" => self.path_loss_exp = num(value)?,
            "path_gain_db" => self.path_gain_db = num(value)?,
            "rician_db" => self.rician_db = num(value)?,
            "radius_m" => self.radius_m = num(value)?,
            "height_m" => self.height_m = num(value)?,
            "rho" => s.rho = num(value)?,
            "consensus_weight" => s.consensus_weight = num(value)?,
            "consensus_growth" => s.consensus_growth = num(value)?,
            "penalty_growth" => s.penalty_growth = num(value)?,
            "step_size" => s.step_size = num(value)?,
            "step_decay" => s.step_decay = num(value)?,
            "inner_steps" => s.inner_steps = num(value)?,
            "multiplier_mode" => s.multiplier_mode = value.parse().map_err(|e| format!("{e}"))?,
            "multiplier_solve" => s.multiplier_solve = value.parse().map_err(|e| format!("{e}"))?,
            "tolerance" => s.tolerance = num(value)?,
            "residual_tolerance" => s.residual_tolerance = num(value)?,
            "max_iters" => s.max_iters = num(value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "sweep_axis" => {
                self.sweep_axis = match value {
                    "" | "none" => None,
                    v => Some(v.parse()?),
                }
            }
            "sweep_values" => self.sweep_values = parse_list(value)?,
            "timing_iters" => self.timing_iters = num(value)?,
            "timing_repeats" => self.timing_repeats = num(value)?,
            "record_wall_time" => self.record_wall_time = num(value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Every field, one per line, in a form [`ExperimentConfig::parse`] reads back exactly.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("scenario", self.scenario.clone());
        kv("nx", self.nx.to_string());
        kv("nz", self.nz.to_string());
        kv("users", self.users.to_string());
        kv("spacing_wavelengths", self.spacing_wavelengths.to_string());
        kv("pt_mw", self.pt_mw.to_string());
        kv("noise_dbm", self.noise_dbm.to_string());
        kv("path_loss_exp", self.path_loss_exp.to_string());
        kv("path_gain_db", self.path_gain_db.to_string());
        kv("rician_db", self.rician_db.to_string());
        kv("radius_m", self.radius_m.to_string());
        kv("height_m", self.height_m.to_string());
        kv("rho", s.rho.to_string());
        kv("consensus_weight", s.consensus_weight.to_string());
        kv("consensus_growth", s.consensus_growth.to_string());
        kv("penalty_growth", s.penalty_growth.to_string());
        kv("step_size", s.step_size.to_string());
        kv("step_decay", s.step_decay.to_string());
        kv("inner_steps", s.inner_steps.to_string());
        kv("multiplier_mode", s.multiplier_mode.to_string());
        kv("multiplier_solve", s.multiplier_solve.to_string());
        kv("tolerance", s.tolerance.to_string());
        kv("residual_tolerance", s.residual_tolerance.to_string());
        kv("max_iters", s.max_iters.to_string());
        kv("seeds", join(&self.seeds));
        kv("sweep_axis", self.sweep_axis.map_or("none".into(), |a| a.to_string()));
        kv("sweep_values", join(&self.sweep_values));
        kv("timing_iters", self.timing_iters.to_string());
        kv("timing_repeats", self.timing_repeats.to_string());
        kv("record_wall_time", self.record_wall_time.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_text())
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario.is_empty() || self.scenario.contains([',', '/', '\n']) {
            return Err(invalid("scenario", "must be non-empty without `,` or `/`"));
        }
        if self.nx == 0 || self.nz == 0 {
            return Err(invalid("nx", "array dimensions must be at least 1"));
        }
        if self.users == 0 {
            return Err(invalid("users", "at least one user is required"));
        }
        if !(self.pt_mw > 0.0) || !self.pt_mw.is_finite() {
            return Err(invalid("pt_mw", format!("P_t must be positive, got {} mW", self.pt_mw)));
        }
        let positive = [
            ("spacing_wavelengths", self.spacing_wavelengths),
            ("radius_m", self.radius_m),
            ("height_m", self.height_m),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        let finite = [
            ("noise_dbm", self.noise_dbm),
            ("path_loss_exp", self.path_loss_exp),
            ("path_gain_db", self.path_gain_db),
            ("rician_db", self.rician_db),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        self.solver.validate().map_err(|e| invalid("solver", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "seed list must not be empty"));
        }
        if self.timing_iters == 0 || self.timing_repeats == 0 {
            return Err(invalid("timing_iters", "timing iterations and repeats must be at least 1"));
        }
        if !self.sweep_values.is_empty() {
            let axis =
                self.sweep_axis.ok_or_else(|| invalid("sweep_values", "given without a sweep_axis"))?;
            check_sweep_values(axis, &self.sweep_values)?;
        }
        Ok(())
    }

    /// Configured sweep values, or the axis defaults.
    pub fn sweep_grid(&self, axis: SweepAxis) -> Vec<f64> {
        if self.sweep_values.is_empty() {
            axis.default_values()
        } else {
            self.sweep_values.clone()
        }
    }

    /// Physical system for one seed, with `sweep` overriding one parameter.
    ///
    /// User positions come from a generator owned by the seed alone, so every
    /// sweep value sees the same users (paired comparisons). For the user
    /// axis the largest grid value is dropped and the first `K` kept.
    pub fn system(&self, seed: u64, sweep: Option<(SweepAxis, f64)>) -> Result<SystemConfig, ConfigError> {
        let mut nx = self.nx;
        let mut nz = self.nz;
        let mut users = self.users;
        let mut pt_mw = self.pt_mw;
        let mut rician_db = self.rician_db;
        let mut drop_count = users;
        if let Some((axis, v)) = sweep {
            check_sweep_values(axis, &[v])?;
            match axis {
                SweepAxis::Power => pt_mw = v,
                SweepAxis::Elements => {
                    let side = v.sqrt().round() as usize;
                    nx = side;
                    nz = side;
                }
                SweepAxis::Kappa => rician_db = v,
                SweepAxis::Users => {
                    users = v as usize;
                    let grid = self.sweep_grid(axis);
                    drop_count = grid.iter().fold(v, |a, b| a.max(*b)) as usize;
                }
            }
        }
        let mut rng = stream(seed, 0);
        let mut placed = drop_users(drop_count, self.radius_m, self.height_m, &mut rng);
        placed.truncate(users);
        let cfg = SystemConfig {
            nx,
            nz,
            spacing_m: self.spacing_wavelengths,
            wavelength_m: 1.0,
            element_power_w: pt_mw * 1e-3,
            noise_power_w: vec![dbm_to_watts(self.noise_dbm); users],
            path_gain_ref: db_to_linear(self.path_gain_db),
            path_loss_exp: self.path_loss_exp,
            rician_factor: db_to_linear(rician_db),
            users: placed,
        };
        cfg.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(cfg)
    }
}

/// Independent generator streams per seed: 0 for user drops, 1 for channels,
/// 2 for the solver start.
pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = tmaris_core::rng_from_seed(seed);
    rng.set_stream(id);
    rng
}

fn check_sweep_values(axis: SweepAxis, values: &[f64]) -> Result<(), ConfigError> {
    for &v in values {
        if !v.is_finite() {
            return Err(invalid("sweep_values", format!("{v} is not finite")));
        }
        match axis {
            // dB, so zero and negative values are meaningful.
            SweepAxis::Kappa => {}
            SweepAxis::Power => {
                if !(v > 0.0) {
                    return Err(invalid("sweep_values", format!("power {v} mW must be positive")));
                }
            }
            SweepAxis::Elements => {
                let side = v.sqrt().round();
                if !(v >= 1.0) || side * side != v {
                    return Err(invalid(
                        "sweep_values",
                        format!("element count {v} is not the square of an integer"),
                    ));
                }
            }
            SweepAxis::Users => {
                if !(v >= 1.0) || v.fract() != 0.0 {
                    return Err(invalid(
                        "sweep_values",
                        format!("user count {v} must be a positive integer"),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// `a..b` (half-open) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        return Ok((a..b).collect());
    }
    parse_list(s)
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("cannot parse `{t}`")))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_multiplier_mode(s: &str) -> Result<MultiplierMode, String> {
    s.parse().map_err(|e: tmaris_core::Error| e.to_string())
}

pub fn parse_multiplier_solve(s: &str) -> Result<MultiplierSolve, String> {
    s.parse().map_err(|e: tmaris_core::Error| e.to_string())
}
