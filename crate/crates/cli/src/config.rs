use std::path::{Path, PathBuf};

use fracvolt_core::kernels::KernelSpec;
use fracvolt_core::operators::{build_operator, Operator, OperatorSpec};
use fracvolt_core::resolvent::method_by_name;
use fracvolt_core::stochastic::NoiseSpec;
use fracvolt_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::experiments::{experiment_by_name, Field};
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_end: f64,
    pub steps: usize,
}

/// One experiment. Which optional fields are required depends on
/// `experiment`; see [`ExperimentConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Kernel `g_alpha`; exclusive with `kernel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Resolvent method name, defaults per experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Moment order for the Yosida Monte Carlo study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Grid levels in the strong-residual refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

fn bad(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks presence of every field the experiment needs and the
    /// validity of each, before any computation.
    pub fn validate(&self) -> Result<(), RunError> {
        let exp = experiment_by_name(&self.experiment).map_err(|e| bad(e.to_string()))?;
        self.time_grid()?;
        if self.alpha.is_some() && self.kernel.is_some() {
            return Err(bad("give either `alpha` or `kernel`, not both"));
        }
        for field in exp.requires() {
            let present = match field {
                Field::Operator => self.operator.is_some(),
                Field::Kernel => self.alpha.is_some() || self.kernel.is_some(),
                Field::Noise => self.noise.is_some(),
                Field::Paths => self.paths.is_some(),
            };
            if !present {
                return Err(bad(format!(
                    "experiment `{}` needs `{}`",
                    self.experiment,
                    field.key()
                )));
            }
        }
        if let Some(k) = self.kernel_spec() {
            k.validate().map_err(|e| bad(e.to_string()))?;
        }
        let dim = match &self.operator {
            Some(_) => Some(self.build_operator()?.dim()),
            None => None,
        };
        if let (Some(noise), Some(d)) = (&self.noise, dim) {
            noise.validate(d).map_err(|e| bad(e.to_string()))?;
        }
        if let Some(m) = &self.method {
            method_by_name(m).map_err(|e| bad(e.to_string()))?;
        }
        if let Some(n) = &self.n_list {
            if n.is_empty() || n.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(bad("`n_list` must be a nonempty list of positive numbers"));
            }
        }
        if let Some(mu) = &self.mu_grid {
            if mu.is_empty() || mu.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(bad("`mu_grid` must be a nonempty list of positive numbers"));
            }
        }
        if matches!(self.paths, Some(p) if p < 2) {
            return Err(bad("`paths` must be >= 2"));
        }
        if matches!(self.p, Some(p) if !(p >= 2.0 && p.is_finite())) {
            return Err(bad("`p` must be >= 2"));
        }
        if matches!(self.tol, Some(t) if !(t > 0.0 && t.is_finite())) {
            return Err(bad("`tol` must be finite and > 0"));
        }
        if matches!(self.levels, Some(l) if l < 2) {
            return Err(bad("`levels` must be >= 2"));
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid, RunError> {
        TimeGrid::new(self.grid.t_end, self.grid.steps).map_err(|e| bad(e.to_string()))
    }

    pub fn kernel_spec(&self) -> Option<KernelSpec> {
        match (&self.kernel, self.alpha) {
            (Some(k), _) => Some(k.clone()),
            (None, Some(a)) => Some(KernelSpec::fractional(a)),
            _ => None,
        }
    }

    pub fn build_operator(&self) -> Result<Operator, RunError> {
        let spec = self
            .operator
            .as_ref()
            .ok_or_else(|| bad("missing `operator`"))?;
        build_operator(spec).map_err(|e| bad(e.to_string()))
    }

    /// Bundle directory name: `<out_dir>/<experiment>`.
    pub fn bundle_dir(&self) -> PathBuf {
        self.out_dir.join(&self.experiment)
    }
}
