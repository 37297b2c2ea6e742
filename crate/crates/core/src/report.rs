//! Structured results of convergence and regularity studies.
//!
//! A study produces one [`ErrorReport`]: a table of per-level error rows plus
//! fitted rates, iteration diagnostics, and warnings. Reports serialize to a
//! fixed-column CSV (the error table alone) and to JSON (everything). Both
//! encodings are deterministic: field order is fixed and floats print in
//! shortest round-trip form, so identical runs produce identical bytes.

use serde::Serialize;

/// One resolution level of a study.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    /// Spectral modes `n`.
    pub modes: usize,
    /// Time steps `N`.
    pub steps: usize,
    /// Monte Carlo paths `M`.
    pub paths: usize,
    /// Time step `T / N`.
    pub mesh: f64,
    /// Mean over paths of the worst-node squared coefficient error.
    pub err_q_max: f64,
    /// Mean over paths of the time-integrated squared integrand error.
    pub err_r_int: f64,
    /// Monte Carlo standard error of `err_q_max`.
    pub mc_stderr_q: f64,
    /// Monte Carlo standard error of `err_r_int`.
    pub mc_stderr_r: f64,
    /// For spatial studies: whether this level respects the fitted
    /// `C / lambda_{n+1}` envelope (within Monte Carlo slack).
    pub bound_satisfied: Option<bool>,
}

/// Picard iteration totals aggregated over every solve in a study.
#[derive(Debug, Clone, Serialize)]
pub struct PicardSummary {
    pub total_iterations: usize,
    pub max_per_step: usize,
    pub mean_per_step: f64,
}

impl PicardSummary {
    /// Summarize per-step iteration counts pooled from one or more solves.
    pub fn from_counts(per_step: &[usize]) -> Self {
        let total: usize = per_step.iter().sum();
        PicardSummary {
            total_iterations: total,
            max_per_step: per_step.iter().copied().max().unwrap_or(0),
            mean_per_step: if per_step.is_empty() {
                0.0
            } else {
                total as f64 / per_step.len() as f64
            },
        }
    }
}

/// One lag of a temporal regularity probe.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityRow {
    /// Lag in steps.
    pub lag_steps: usize,
    /// Lag in time, `s = lag * mesh`.
    pub lag_time: f64,
    /// `mean_m avg_j |alpha_{j+lag} - alpha_j|^2`.
    pub alpha_increment_msq: f64,
    pub alpha_stderr: f64,
    /// Same statistic for the integrand; absent when no step pairs exist at
    /// this lag.
    pub z_increment_msq: Option<f64>,
    pub z_stderr: Option<f64>,
    /// `alpha_increment_msq / ((1 + lambda_n^2 s) s)`; zero at lag zero.
    pub bound_ratio: f64,
}

/// Regularity-in-time statistics of a solved coefficient process.
#[derive(Debug, Clone, Serialize)]
pub struct RegularityTable {
    pub rows: Vec<RegularityRow>,
    /// Least-squares fit of `alpha_increment_msq ~ c (1 + lambda_n^2 s) s`.
    pub fitted_constant: f64,
    /// True when `bound_ratio` is non-increasing across positive lags, the
    /// signature of the expected modulus of continuity.
    pub ratio_non_increasing: bool,
}

impl RegularityTable {
    /// The probe table as CSV, one line per lag; integrand columns are empty
    /// when the lag leaves no step pairs to compare.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lag_steps,lag_time,alpha_increment_msq,alpha_stderr,z_increment_msq,z_stderr,bound_ratio\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.lag_steps,
                r.lag_time,
                r.alpha_increment_msq,
                r.alpha_stderr,
                opt(r.z_increment_msq),
                opt(r.z_stderr),
                r.bound_ratio
            ));
        }
        out
    }
}

/// Complete result of a study run.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub rows: Vec<LevelRow>,
    /// Log-log slope of total error against `lambda_{n+1}` (spatial studies).
    pub fitted_slope_space: Option<f64>,
    /// Log-log slope of total error against the mesh (temporal studies).
    pub fitted_slope_time: Option<f64>,
    /// Fitted constant of the spatial `C / lambda_{n+1}` envelope.
    pub space_bound_constant: Option<f64>,
    pub regularity: Option<RegularityTable>,
    pub picard: PicardSummary,
    /// True when any solve in the study ran past the stiffness bound.
    pub cfl_overridden: bool,
    pub warnings: Vec<String>,
}

impl ErrorReport {
    /// The error table as CSV with the fixed header
    /// `n,N,M,mesh,err_q_max,err_r_int,mc_stderr_q,mc_stderr_r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,N,M,mesh,err_q_max,err_r_int,mc_stderr_q,mc_stderr_r\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.modes,
                r.steps,
                r.paths,
                r.mesh,
                r.err_q_max,
                r.err_r_int,
                r.mc_stderr_q,
                r.mc_stderr_r
            ));
        }
        out
    }

    /// The full report as pretty-printed JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
