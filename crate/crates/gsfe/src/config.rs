//! TOML run configuration.

use std::path::{Path, PathBuf};

use gsfe_core::dgp::DgpConfig;
use gsfe_core::exposure::ExposureConfig;
use gsfe_core::fe::{FitOptions, RegressionSpec};
use gsfe_core::harness::StudyPlan;
use gsfe_core::oracle::DiscreteInstance;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::PersonSchema;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub persons: Option<PathBuf>,
    pub death_rates: Option<PathBuf>,
    pub exposures: Option<PathBuf>,
}

/// Overrides for the estimation engine.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub absorb_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub collinearity_tol: Option<f64>,
}

impl Tolerance {
    pub fn apply(&self, opts: &mut FitOptions) {
        if let Some(t) = self.absorb_tol {
            opts.absorb.tol = t;
        }
        if let Some(m) = self.max_iter {
            opts.absorb.max_iter = m;
        }
        if let Some(c) = self.collinearity_tol {
            opts.collinearity_tol = c;
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::config(key, format!("must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("tolerance.absorb_tol", self.absorb_tol)?;
        positive("tolerance.collinearity_tol", self.collinearity_tol)?;
        if self.max_iter == Some(0) {
            return Err(CliError::config("tolerance.max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Largest accepted relative deviation of the fitted attenuation ratio.
    pub attenuation_tol: f64,
    /// Discrete instances to enumerate.
    pub discrete: Vec<DiscreteInstance>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            attenuation_tol: 0.02,
            discrete: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub inputs: Inputs,
    pub schema: PersonSchema,
    /// Shared by exposure construction, the simulator and the study.
    pub exposure: Option<ExposureConfig>,
    pub tolerance: Tolerance,
    pub dgp: DgpConfig,
    pub study: StudyPlan,
    pub fit: Option<RegressionSpec>,
    pub oracle: OracleConfig,
}

impl RunConfig {
    /// Parses TOML; errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config("config", e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "config".to_string() } else { path };
            CliError::config(&key, e.into_inner().message().trim().to_string())
        })
    }

    /// Reads a config file; relative input and output paths are taken
    /// relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&crate::io::read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.inputs.persons);
        rebase(&mut cfg.inputs.death_rates);
        rebase(&mut cfg.inputs.exposures);
        rebase(&mut cfg.out);
        Ok(cfg)
    }

    /// Pushes the shared sections into the places that use them.
    pub fn resolve(&mut self) {
        if let Some(e) = self.exposure {
            self.dgp.exposure = e;
            self.study.exposure = e;
        }
        self.tolerance.apply(&mut self.study.fit);
    }

    pub fn exposure_config(&self) -> ExposureConfig {
        self.exposure.unwrap_or(self.study.exposure)
    }

    pub fn fit_options(&self) -> FitOptions {
        self.study.fit
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerance.validate()?;
        if self.reps == Some(0) {
            return Err(CliError::config("reps", "must be at least 1"));
        }
        if !(self.oracle.attenuation_tol > 0.0) {
            return Err(CliError::config("oracle.attenuation_tol", "must be positive"));
        }
        prefixed("dgp", self.dgp.validate())?;
        prefixed("study", self.study.validate())?;
        if let Some(spec) = &self.fit {
            spec.validate()
                .map_err(|e| CliError::config("fit", e.to_string()))?;
        }
        Ok(())
    }

    /// The configuration that determines outputs: everything except where
    /// they are written and where inputs are read from.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("out");
            m.remove("inputs");
        }
        v
    }
}

fn prefixed(prefix: &str, r: gsfe_core::Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        gsfe_core::Error::Config { key, message } => CliError::config(&format!("{prefix}.{key}"), message),
        other => CliError::config(prefix, other.to_string()),
    })
}
