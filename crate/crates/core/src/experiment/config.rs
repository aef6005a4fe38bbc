//! Experiment configuration: a TOML document with strict keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{FirstOrderSettings, SchemeId};
use crate::beamformer::{AdmmSettings, BeamSettings};
use crate::error::{Error, Result};
use crate::fl::{BlobSpec, Task, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub kind: TaskKind,
    pub lambda_reg: f64,
    /// Hidden width of the network task.
    pub hidden: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Logistic,
            lambda_reg: 0.1,
            hidden: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub admm_rho: f64,
    pub admm_tol: f64,
    pub admm_max_iter: usize,
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Rescale the convexified constraints by the current channel gains.
    pub normalize_slack: bool,
    pub baseline_step: f64,
    pub baseline_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let beam = BeamSettings::default();
        let fo = FirstOrderSettings::default();
        Self {
            admm_rho: beam.admm.rho,
            admm_tol: beam.admm.tol,
            admm_max_iter: beam.admm.max_iter,
            sca_tol: beam.sca_tol,
            sca_max_iter: beam.sca_max_iter,
            outer_tol: beam.outer_tol,
            outer_max_iter: beam.outer_max_iter,
            normalize_slack: beam.normalize_slack,
            baseline_step: fo.step,
            baseline_max_iter: fo.max_iter,
        }
    }
}

impl SolverConfig {
    pub fn beam_settings(&self) -> BeamSettings {
        BeamSettings {
            admm: AdmmSettings {
                rho: self.admm_rho,
                tol: self.admm_tol,
                max_iter: self.admm_max_iter,
            },
            sca_tol: self.sca_tol,
            sca_max_iter: self.sca_max_iter,
            outer_tol: self.outer_tol,
            outer_max_iter: self.outer_max_iter,
            normalize_slack: self.normalize_slack,
            nu: 1.0,
        }
    }

    pub fn first_order_settings(&self) -> FirstOrderSettings {
        FirstOrderSettings {
            step: self.baseline_step,
            max_iter: self.baseline_max_iter,
            restart_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_antennas: usize,
    pub n_devices: usize,
    pub n_segments: usize,
    pub gamma: f64,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    /// Recorded for provenance; no computed quantity depends on it.
    pub bandwidth_mhz: f64,
    /// Recorded for provenance; no computed quantity depends on it.
    pub carrier_ghz: f64,
    pub schemes: Vec<SchemeId>,
    pub rounds: usize,
    pub local_iters: usize,
    /// Requested learning rate; clipped to `0.9 / L` when it is not below `1 / L`.
    pub eta: f64,
    pub batch_size: usize,
    pub n_drops: usize,
    pub n_realizations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub task: TaskConfig,
    pub data: BlobSpec,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_antennas: 16,
            n_devices: 5,
            n_segments: 3,
            gamma: 0.1,
            power_dbm: 47.0,
            noise_dbm: -96.0,
            bandwidth_mhz: 10.0,
            carrier_ghz: 2.0,
            schemes: SchemeId::ALL.to_vec(),
            rounds: 20,
            local_iters: 5,
            eta: 0.1,
            batch_size: 20,
            n_drops: 1,
            n_realizations: 1,
            seed: 1,
            output_dir: PathBuf::from("out"),
            task: TaskConfig::default(),
            data: BlobSpec::default(),
            solver: SolverConfig::default(),
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Parses a TOML document. Diagnostics carry line and column.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn task(&self) -> Task {
        match self.task.kind {
            TaskKind::Logistic => Task::logistic(self.data.n_features, self.data.n_classes, self.task.lambda_reg),
            TaskKind::Mlp => Task::mlp(
                self.data.n_features,
                self.data.n_classes,
                self.task.hidden,
                self.task.lambda_reg,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_antennas", self.n_antennas),
            ("n_devices", self.n_devices),
            ("n_segments", self.n_segments),
            ("rounds", self.rounds),
            ("local_iters", self.local_iters),
            ("batch_size", self.batch_size),
            ("n_drops", self.n_drops),
            ("n_realizations", self.n_realizations),
            ("data.n_features", self.data.n_features),
            ("data.samples_per_device", self.data.samples_per_device),
            ("data.test_samples", self.data.test_samples),
            ("solver.admm_max_iter", self.solver.admm_max_iter),
            ("solver.sca_max_iter", self.solver.sca_max_iter),
            ("solver.outer_max_iter", self.solver.outer_max_iter),
            ("solver.baseline_max_iter", self.solver.baseline_max_iter),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(field_err(name, "must be positive"));
            }
        }
        if self.schemes.is_empty() {
            return Err(field_err("schemes", "at least one scheme is required"));
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return Err(field_err("schemes", "duplicate entries"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(field_err("gamma", "must lie in [0, 1)"));
        }
        let reals = [
            ("eta", self.eta),
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("carrier_ghz", self.carrier_ghz),
            ("data.separation", self.data.separation),
            ("solver.admm_rho", self.solver.admm_rho),
            ("solver.admm_tol", self.solver.admm_tol),
            ("solver.sca_tol", self.solver.sca_tol),
            ("solver.outer_tol", self.solver.outer_tol),
            ("solver.baseline_step", self.solver.baseline_step),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field_err(name, "must be positive and finite"));
            }
        }
        if !self.power_dbm.is_finite() || !self.noise_dbm.is_finite() {
            return Err(field_err("power_dbm/noise_dbm", "must be finite"));
        }
        if !(self.data.noise_std >= 0.0) {
            return Err(field_err("data.noise_std", "must be nonnegative"));
        }
        if self.data.n_classes < 2 {
            return Err(field_err("data.n_classes", "at least two classes are required"));
        }
        if self.batch_size > self.data.samples_per_device {
            return Err(field_err("batch_size", "exceeds samples per device"));
        }
        if !(self.task.lambda_reg >= 0.0) {
            return Err(field_err("task.lambda_reg", "must be nonnegative"));
        }
        if self.task.kind == TaskKind::Logistic && self.task.lambda_reg == 0.0 {
            return Err(field_err("task.lambda_reg", "the logistic task needs positive regularization"));
        }
        if self.task.kind == TaskKind::Mlp && self.task.hidden == 0 {
            return Err(field_err("task.hidden", "must be positive"));
        }
        let dim = self.task().dim();
        if self.n_segments > dim {
            return Err(field_err("n_segments", format!("exceeds the model dimension {dim}")));
        }
        Ok(())
    }
}
