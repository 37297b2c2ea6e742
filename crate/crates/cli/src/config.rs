//! Run configuration: a single JSON document shared by every subcommand.
//!
//! Unknown keys are rejected so typos in experiment scripts fail loudly
//! instead of silently running defaults. Reports embed the fully resolved
//! configuration under a top-level `"config"` key, and the loader accepts
//! such a report as a config file again, so any emitted report can be re-run
//! as-is.

use bspde::cond_exp::Estimator;
use bspde::{Error, Result, StepperConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which conditional-expectation estimator a run uses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    /// Hermite-polynomial regression of the given degree across paths.
    LeastSquares { degree: usize },
    /// Gauss-Hermite quadrature with the given node count per integral.
    GaussQuadrature { points: usize },
}

impl EstimatorConfig {
    pub fn build(&self) -> Result<Estimator> {
        match self {
            EstimatorConfig::LeastSquares { degree } => Ok(Estimator::least_squares(*degree)),
            EstimatorConfig::GaussQuadrature { points } => Estimator::gauss_quadrature(*points),
        }
    }
}

/// Everything a run needs, matching the JSON schema documented in the
/// README. `n` is the spatial mode count, `N` the number of time steps and
/// `M` the number of simulated paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem_name: String,
    pub domain_length: f64,
    #[serde(rename = "horizon_T")]
    pub horizon: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "M")]
    pub paths: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iters")]
    pub picard_max_iters: usize,
    /// Refinement levels: mode counts for `converge-space`, step counts for
    /// `converge-time`. Ignored by the other subcommands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// Reference mode count for `converge-space`; defaults to four times the
    /// finest level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_modes: Option<usize>,
    /// Reference for `converge-time`: "oracle", "noise_free" or
    /// "fine_solve"; defaults to the problem's closed form when it has one,
    /// otherwise to the noise-free trajectory for deterministic data and a
    /// refined solve for stochastic data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_reference: Option<String>,
    /// Step lags probed by `regularity`; defaults to {1, 2, 4, 8} clipped to
    /// the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<usize>>,
    /// Spatial points where `solve` reports the sample mean/std of the
    /// time-zero solution; defaults to the midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_points: Option<Vec<f64>>,
    /// Include the full coefficient arrays in the `solve` summary.
    #[serde(default)]
    pub dump_coefficients: bool,
    /// Run past the spectral stiffness bound; also set by `--override-cfl`.
    #[serde(default)]
    pub override_cfl: bool,
    /// Output stem: `solve` writes `<stem>.json`, the study subcommands
    /// write `<stem>.csv` and `<stem>.json`.
    pub output_path: String,
}

fn default_picard_tol() -> f64 {
    1e-12
}

fn default_picard_max_iters() -> usize {
    50
}

impl RunConfig {
    /// Read a config from `path`. The file may be a bare config or a
    /// previously emitted report, in which case its embedded `"config"`
    /// object is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        let config_value = match value.get("config") {
            Some(embedded) if embedded.is_object() => embedded.clone(),
            _ => value,
        };
        serde_json::from_value(config_value)
            .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))
    }

    /// Basic cross-field checks shared by all subcommands; the numeric
    /// domain checks live in the library types they feed.
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if let Some(points) = &self.eval_points {
            if points
                .iter()
                .any(|&x| !(0.0..=self.domain_length).contains(&x))
            {
                return Err(Error::InvalidArgument(format!(
                    "eval_points must lie in [0, {}]",
                    self.domain_length
                )));
            }
        }
        Ok(())
    }

    /// The stepper settings this config describes.
    pub fn stepper(&self) -> Result<StepperConfig> {
        let mut config = StepperConfig::new(self.estimator.build()?);
        config.picard_tol = self.picard_tol;
        config.picard_max_iters = self.picard_max_iters;
        config.override_cfl = self.override_cfl;
        Ok(config)
    }

    /// The levels list, required by the convergence subcommands.
    pub fn levels_required(&self) -> Result<&[usize]> {
        self.levels
            .as_deref()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| {
                Error::InvalidArgument(
                    "this subcommand needs a non-empty `levels` list in the config".into(),
                )
            })
    }
}
