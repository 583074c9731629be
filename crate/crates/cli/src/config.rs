//! Flat `key = value` configuration with one `[section]` per module.
//!
//! Every key has a default; a config file only overrides. Unknown sections
//! or keys are parse errors with a line diagnostic, out-of-range values are
//! config errors. `canonical_string` renders the fully-resolved
//! configuration in a fixed order for hashing.

use std::path::Path;

use crate::error::CliError;
use unialign_core::geometry::{Geometry, KernelSpec};
use unialign_core::losses::LossConfig;
use unialign_core::trainer::{Objective, OptimizerSpec, SyntheticSpec};

#[derive(Clone, Debug)]
pub struct Config {
    // [losses]
    pub tau: f64,
    pub geometry: Geometry,
    pub lambda_align: f64,
    pub tau_ctr: f64,
    pub enable_tuple_uniformity: bool,
    pub enable_volume: bool,
    // [trainer]
    pub batch: usize,
    pub dim: usize,
    pub modalities: usize,
    pub rho: f64,
    pub init_gap: f64,
    pub eta: f64,
    pub epochs: usize,
    pub record_every: usize,
    pub objective: Objective,
    pub anchor: usize,
    // [divergence]
    pub divergence_tau: f64,
    pub divergence_normalized: bool,
    // [conflict]
    pub conflict_c0: f64,
    pub conflict_sigma: f64,
    pub conflict_dim: usize,
    pub conflict_trials: usize,
    pub conflict_m_list: Vec<usize>,
    pub conflict_mu_bar: f64,
    pub cancellation_dim: usize,
    pub cancellation_trials: usize,
    // [gradcheck]
    pub gradcheck_batch: usize,
    pub gradcheck_dim: usize,
    pub gradcheck_modalities: usize,
    pub gradcheck_h: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tau: 0.07,
            geometry: Geometry::Euclidean,
            lambda_align: 1.0,
            tau_ctr: 0.07,
            enable_tuple_uniformity: false,
            enable_volume: false,
            batch: 256,
            dim: 32,
            modalities: 3,
            rho: 0.7,
            init_gap: 1.0,
            eta: 0.5,
            epochs: 200,
            record_every: 5,
            objective: Objective::UniAlign,
            anchor: 0,
            divergence_tau: 0.3,
            divergence_normalized: false,
            conflict_c0: 0.5,
            conflict_sigma: 0.25,
            conflict_dim: 16,
            conflict_trials: 10000,
            conflict_m_list: vec![5, 17, 65],
            conflict_mu_bar: 0.25,
            cancellation_dim: 256,
            cancellation_trials: 4000,
            gradcheck_batch: 4,
            gradcheck_dim: 8,
            gradcheck_modalities: 3,
            gradcheck_h: 1e-5,
        }
    }
}

fn parse_value<T: std::str::FromStr>(raw: &str, line: usize, key: &str) -> Result<T, CliError> {
    raw.parse().map_err(|_| {
        CliError::Parse(format!("line {line}: cannot parse value {raw:?} for key {key:?}"))
    })
}

fn parse_bool(raw: &str, line: usize, key: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Parse(format!(
            "line {line}: expected boolean for key {key:?}, got {raw:?}"
        ))),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Parse(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(CliError::Parse(format!(
                        "line {line_no}: unterminated section header {line:?}"
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Parse(format!(
                    "line {line_no}: expected `key = value`, got {line:?}"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value, line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        match (section, key) {
            ("losses", "tau") => self.tau = parse_value(value, line, key)?,
            ("losses", "geometry") => {
                self.geometry = match value {
                    "euclidean" => Geometry::Euclidean,
                    "geodesic" => Geometry::Geodesic,
                    _ => {
                        return Err(CliError::Parse(format!(
                            "line {line}: geometry must be euclidean or geodesic, got {value:?}"
                        )))
                    }
                }
            }
            ("losses", "lambda_align") => self.lambda_align = parse_value(value, line, key)?,
            ("losses", "tau_ctr") => self.tau_ctr = parse_value(value, line, key)?,
            ("losses", "enable_tuple_uniformity") => {
                self.enable_tuple_uniformity = parse_bool(value, line, key)?
            }
            ("losses", "enable_volume") => self.enable_volume = parse_bool(value, line, key)?,
            ("trainer", "batch") => self.batch = parse_value(value, line, key)?,
            ("trainer", "dim") => self.dim = parse_value(value, line, key)?,
            ("trainer", "modalities") => self.modalities = parse_value(value, line, key)?,
            ("trainer", "rho") => self.rho = parse_value(value, line, key)?,
            ("trainer", "init_gap") => self.init_gap = parse_value(value, line, key)?,
            ("trainer", "eta") => self.eta = parse_value(value, line, key)?,
            ("trainer", "epochs") => self.epochs = parse_value(value, line, key)?,
            ("trainer", "record_every") => self.record_every = parse_value(value, line, key)?,
            ("trainer", "objective") => {
                self.objective = match value {
                    "infonce" => Objective::InfoNce,
                    "unialign" => Objective::UniAlign,
                    "unialign_plus" => Objective::UniAlignPlus,
                    _ => {
                        return Err(CliError::Parse(format!(
                            "line {line}: objective must be one of infonce, unialign, \
                             unialign_plus; got {value:?}"
                        )))
                    }
                }
            }
            ("trainer", "anchor") => self.anchor = parse_value(value, line, key)?,
            ("divergence", "tau") => self.divergence_tau = parse_value(value, line, key)?,
            ("divergence", "normalized") => {
                self.divergence_normalized = parse_bool(value, line, key)?
            }
            ("conflict", "c0") => self.conflict_c0 = parse_value(value, line, key)?,
            ("conflict", "sigma") => self.conflict_sigma = parse_value(value, line, key)?,
            ("conflict", "dim") => self.conflict_dim = parse_value(value, line, key)?,
            ("conflict", "trials") => self.conflict_trials = parse_value(value, line, key)?,
            ("conflict", "m_list") => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    list.push(parse_value(part.trim(), line, key)?);
                }
                self.conflict_m_list = list;
            }
            ("conflict", "mu_bar") => self.conflict_mu_bar = parse_value(value, line, key)?,
            ("conflict", "cancellation_dim") => self.cancellation_dim = parse_value(value, line, key)?,
            ("conflict", "cancellation_trials") => {
                self.cancellation_trials = parse_value(value, line, key)?
            }
            ("gradcheck", "batch") => self.gradcheck_batch = parse_value(value, line, key)?,
            ("gradcheck", "dim") => self.gradcheck_dim = parse_value(value, line, key)?,
            ("gradcheck", "modalities") => {
                self.gradcheck_modalities = parse_value(value, line, key)?
            }
            ("gradcheck", "h") => self.gradcheck_h = parse_value(value, line, key)?,
            _ => {
                return Err(CliError::Parse(format!(
                    "line {line}: unknown key {key:?} in section [{section}]"
                )))
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("losses.tau", self.tau),
            ("losses.lambda_align", self.lambda_align),
            ("losses.tau_ctr", self.tau_ctr),
            ("trainer.eta", self.eta),
            ("divergence.tau", self.divergence_tau),
            ("conflict.c0", self.conflict_c0),
            ("gradcheck.h", self.gradcheck_h),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(CliError::Shape(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(CliError::Shape(format!(
                "trainer.rho must be in [0, 1], got {}",
                self.rho
            )));
        }
        if !(0.0..=1.0).contains(&self.conflict_mu_bar) {
            return Err(CliError::Shape(format!(
                "conflict.mu_bar must be in [0, 1], got {}",
                self.conflict_mu_bar
            )));
        }
        if self.conflict_sigma < 0.0 {
            return Err(CliError::Shape("conflict.sigma must be nonnegative".into()));
        }
        if self.init_gap < 0.0 {
            return Err(CliError::Shape("trainer.init_gap must be nonnegative".into()));
        }
        if self.modalities < 2 || self.gradcheck_modalities < 2 {
            return Err(CliError::Shape("modalities must be at least 2".into()));
        }
        if self.anchor >= self.modalities {
            return Err(CliError::Shape(format!(
                "trainer.anchor {} out of range for {} modalities",
                self.anchor, self.modalities
            )));
        }
        if self.record_every == 0 {
            return Err(CliError::Shape("trainer.record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            kernel: KernelSpec {
                geometry: self.geometry,
                tau: self.tau,
            },
            lambda_align: self.lambda_align,
            infonce_weights: None,
            tuple_weights: None,
            tau_ctr: self.tau_ctr,
            enable_tuple_uniformity: self.enable_tuple_uniformity,
            enable_volume: self.enable_volume,
        }
    }

    pub fn synthetic_spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            batch: self.batch,
            dim: self.dim,
            modalities: self.modalities,
            latent_coupling: self.rho,
            init_gap: self.init_gap,
            seed,
        }
    }

    pub fn optimizer_spec(&self) -> OptimizerSpec {
        OptimizerSpec {
            objective: self.objective,
            step_size: self.eta,
            epochs: self.epochs,
            loss_cfg: self.loss_config(),
            record_every: self.record_every,
            divergence_tau: self.divergence_tau,
        }
    }

    /// Fixed-order rendering of every resolved key, used for config hashing.
    pub fn canonical_string(&self, seed: u64) -> String {
        let geometry = match self.geometry {
            Geometry::Euclidean => "euclidean",
            Geometry::Geodesic => "geodesic",
        };
        let objective = match self.objective {
            Objective::InfoNce => "infonce",
            Objective::UniAlign => "unialign",
            Objective::UniAlignPlus => "unialign_plus",
        };
        let m_list: Vec<String> = self.conflict_m_list.iter().map(|m| m.to_string()).collect();
        format!(
            "seed={seed}\nlosses.tau={}\nlosses.geometry={geometry}\nlosses.lambda_align={}\n\
             losses.tau_ctr={}\nlosses.enable_tuple_uniformity={}\nlosses.enable_volume={}\n\
             trainer.batch={}\ntrainer.dim={}\ntrainer.modalities={}\ntrainer.rho={}\n\
             trainer.init_gap={}\ntrainer.eta={}\ntrainer.epochs={}\ntrainer.record_every={}\n\
             trainer.objective={objective}\ntrainer.anchor={}\ndivergence.tau={}\n\
             divergence.normalized={}\nconflict.c0={}\nconflict.sigma={}\nconflict.dim={}\n\
             conflict.trials={}\nconflict.m_list={}\nconflict.mu_bar={}\nconflict.cancellation_dim={}\n\
             conflict.cancellation_trials={}\ngradcheck.batch={}\ngradcheck.dim={}\n\
             gradcheck.modalities={}\ngradcheck.h={}\n",
            self.tau,
            self.lambda_align,
            self.tau_ctr,
            self.enable_tuple_uniformity,
            self.enable_volume,
            self.batch,
            self.dim,
            self.modalities,
            self.rho,
            self.init_gap,
            self.eta,
            self.epochs,
            self.record_every,
            self.anchor,
            self.divergence_tau,
            self.divergence_normalized,
            self.conflict_c0,
            self.conflict_sigma,
            self.conflict_dim,
            self.conflict_trials,
            m_list.join(","),
            self.conflict_mu_bar,
            self.cancellation_dim,
            self.cancellation_trials,
            self.gradcheck_batch,
            self.gradcheck_dim,
            self.gradcheck_modalities,
            self.gradcheck_h,
        )
    }
}
