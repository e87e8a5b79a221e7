//! TOML run configuration shared by the command-line subcommands.
//!
//! ```toml
//! gamma = 1.0
//! lambda = 1.0
//! sizes = [64, 128, 256]
//! kept_states = 40
//! sweeps = 6
//! window = [0.1, 3.0]
//! output = "ising.csv"
//! format = "csv"            # or "json"
//! log_negativity = false
//! jobs = 1
//! mu = "2/3"                # lambda-scan only
//! lambdas = [0.95, 1.0, 1.05]
//! eigensolver_tol = 1e-12
//! target_epsilon = 1e-10
//! ```
//!
//! Every key is optional; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fit::{validate_window, DEFAULT_WINDOW};
use super::records::Format;
use crate::dmrg::DmrgConfig;
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub kept_states: Option<usize>,
    pub sweeps: Option<usize>,
    pub window: Option<[f64; 2]>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub log_negativity: Option<bool>,
    pub jobs: Option<usize>,
    pub mu: Option<String>,
    pub lambdas: Option<Vec<f64>>,
    pub eigensolver_tol: Option<f64>,
    pub target_epsilon: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            gamma: over.gamma.or(self.gamma),
            lambda: over.lambda.or(self.lambda),
            sizes: over.sizes.or(self.sizes),
            kept_states: over.kept_states.or(self.kept_states),
            sweeps: over.sweeps.or(self.sweeps),
            window: over.window.or(self.window),
            output: over.output.or(self.output),
            format: over.format.or(self.format),
            log_negativity: over.log_negativity.or(self.log_negativity),
            jobs: over.jobs.or(self.jobs),
            mu: over.mu.or(self.mu),
            lambdas: over.lambdas.or(self.lambdas),
            eigensolver_tol: over.eigensolver_tol.or(self.eigensolver_tol),
            target_epsilon: over.target_epsilon.or(self.target_epsilon),
        }
    }

    pub fn dmrg(&self) -> Result<DmrgConfig> {
        let d = DmrgConfig::default();
        let cfg = DmrgConfig {
            max_kept_states: self.kept_states.unwrap_or(d.max_kept_states),
            n_sweeps: self.sweeps.unwrap_or(d.n_sweeps),
            eigensolver_tol: self.eigensolver_tol.unwrap_or(d.eigensolver_tol),
            target_epsilon: self.target_epsilon.unwrap_or(d.target_epsilon),
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| Error::Config("gamma is not set".into()))
    }

    pub fn lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::Config("lambda is not set".into()))
    }

    /// Chain lengths, each checked against the model constraints.
    pub fn sizes(&self, gamma: f64, lambda: f64) -> Result<Vec<usize>> {
        let sizes = self.sizes.clone().ok_or_else(|| Error::Config("sizes is not set".into()))?;
        if sizes.is_empty() {
            return Err(Error::Config("sizes is empty".into()));
        }
        for &n in &sizes {
            ModelParams::new(n, gamma, lambda).map_err(|e| Error::Config(e.to_string()))?;
            if n % 2 != 0 || n < 4 {
                return Err(Error::Config(format!("chain length {n} must be even and at least 4")));
            }
        }
        Ok(sizes)
    }

    pub fn window(&self) -> Result<[f64; 2]> {
        let w = self.window.unwrap_or(DEFAULT_WINDOW);
        validate_window(w).map_err(|e| Error::Config(e.to_string()))?;
        Ok(w)
    }

    pub fn jobs(&self) -> Result<usize> {
        match self.jobs.unwrap_or(1) {
            0 => Err(Error::Config("jobs must be at least 1".into())),
            j => Ok(j),
        }
    }

    /// Output format: explicit, else from the output extension, else CSV.
    pub fn format(&self) -> Result<Format> {
        match (&self.format, &self.output) {
            (Some(f), _) => Format::parse(f),
            (None, Some(p)) => Ok(Format::from_path(p).unwrap_or(Format::Csv)),
            (None, None) => Ok(Format::Csv),
        }
    }
}
