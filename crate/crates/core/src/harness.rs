//! Convergence and regularity studies over solved coefficient processes.
//!
//! The studies here answer three questions about a discretization:
//!
//! * **Spatial accuracy** ([`converge_space`]): does the error fall like
//!   `C / lambda_{n+1}` as modes are added, with everything else fixed?
//! * **Temporal accuracy** ([`converge_time`]): does the error fall linearly
//!   in the mesh as steps are added, with everything else fixed?
//! * **Temporal regularity** ([`regularity_probe`]): do coefficient
//!   increments over a lag `s` stay below `C (1 + lambda_n^2 s) s`, the
//!   modulus the error analysis leans on?
//!
//! Errors are measured against a [`Reference`]: a closed-form solution where
//! one exists, a noise-free Runge-Kutta solution for deterministic data, or
//! a finer discretization of the same problem. The two error statistics are
//!
//! ```text
//! err_q_max = mean_m max_j |alpha_j(m) - ref(t_j)|^2
//! err_r_int = mean_m sum_j dt |z_j(m) - ref_z(t_j)|^2
//! ```
//!
//! i.e. squared worst-node and squared time-integrated errors, averaged over
//! paths. Per-path statistics are summed in sorted order, so the results do
//! not depend on path ordering or thread count.

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::paths::{PathEnsemble, TimeGrid};
use crate::problem::BspdeProblem;
use crate::report::{ErrorReport, LevelRow, PicardSummary, RegularityRow, RegularityTable};
use crate::stepper::{
    solve_backward, solve_deterministic_ode, CoefficientProcess, SolveStats, StepperConfig,
};

/// A solution known in closed form, affine in the Brownian value:
/// `alpha(t, w) = slope(t) w + intercept(t)`, `z(t) = slope(t)`.
///
/// Every catalog problem with a closed form is of this shape (linear drivers
/// and affine terminal data stay affine under conditioning), and affineness
/// is what lets error evaluation reuse one slope/intercept pair per time node
/// across all paths.
pub struct OracleSolution {
    slope: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    intercept: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
}

impl OracleSolution {
    pub fn new(
        slope: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        intercept: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        OracleSolution {
            slope: Box::new(slope),
            intercept: Box::new(intercept),
        }
    }

    /// Driverless solution: each mode decays at its eigenvalue, so
    /// `alpha_i(t, w) = exp(-lambda_i (T - t)) (det_i + wiener_i w)`.
    pub fn heat_semigroup(
        eigenvalues: Vec<f64>,
        horizon: f64,
        det: Vec<f64>,
        wiener: Vec<f64>,
    ) -> Result<Self> {
        if det.len() != eigenvalues.len() || wiener.len() != eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues with {} + {} terminal coefficients",
                eigenvalues.len(),
                det.len(),
                wiener.len()
            )));
        }
        let ev = eigenvalues;
        let ev2 = ev.clone();
        let det2 = det;
        Ok(OracleSolution::new(
            move |t: f64| {
                ev.iter()
                    .zip(&wiener)
                    .map(|(l, c)| (-l * (horizon - t)).exp() * c)
                    .collect()
            },
            move |t: f64| {
                ev2.iter()
                    .zip(&det2)
                    .map(|(l, c)| (-l * (horizon - t)).exp() * c)
                    .collect()
            },
        ))
    }

    /// Wrap a noise-free Runge-Kutta solution: the Brownian slope is zero and
    /// the intercept is the ODE trajectory.
    pub fn from_noise_free(solution: crate::stepper::DeterministicSolution) -> Self {
        let modes = solution.modes();
        OracleSolution::new(
            move |_t: f64| vec![0.0; modes],
            move |t: f64| {
                solution
                    .eval(t)
                    .expect("reference trajectory evaluation failed")
            },
        )
    }

    /// `alpha(t, w)` as a coefficient vector.
    pub fn alpha_exact(&self, t: f64, w: f64) -> Vec<f64> {
        let s = (self.slope)(t);
        let b = (self.intercept)(t);
        s.iter().zip(&b).map(|(si, bi)| si * w + bi).collect()
    }

    /// The exact integrand `z(t)`, independent of the path for affine
    /// solutions.
    pub fn beta_exact(&self, t: f64) -> Vec<f64> {
        (self.slope)(t)
    }
}

/// What to measure a solved process against.
pub enum Reference<'a> {
    /// A closed-form solution.
    Oracle(&'a OracleSolution),
    /// A finer (or otherwise trusted) solve on the same grid and paths;
    /// compared mode by mode with the shorter coefficient vector zero-padded.
    Process(&'a CoefficientProcess),
}

/// Squared error statistics of one solve, with Monte Carlo standard errors.
#[derive(Debug, Clone, Copy)]
pub struct ErrorEstimate {
    pub err_q_max: f64,
    pub err_r_int: f64,
    pub mc_stderr_q: f64,
    pub mc_stderr_r: f64,
}

/// Sum in ascending order, so the result is independent of input order.
fn sorted_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

fn mean_and_stderr(mut values: Vec<f64>) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = sorted_sum(&mut values) / m;
    let mut devs: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = sorted_sum(&mut devs) / m;
    (mean, (var / m).sqrt())
}

/// Evaluate the error statistics of `process` against `reference` along the
/// paths of `ensemble`.
pub fn error_norms(
    process: &CoefficientProcess,
    reference: &Reference,
    ensemble: &PathEnsemble,
) -> Result<ErrorEstimate> {
    let grid = process.grid();
    if grid != ensemble.grid() {
        return Err(Error::GridMismatch(
            "process and ensemble use different time grids".into(),
        ));
    }
    let m = process.paths();
    if m != ensemble.num_paths() {
        return Err(Error::DimensionMismatch(format!(
            "process has {m} paths, ensemble has {}",
            ensemble.num_paths()
        )));
    }
    let steps = grid.steps();
    let dt = grid.mesh();
    let n_proc = process.modes();

    // reference coefficients per (node, mode): for oracles, slope/intercept
    // rows; for processes, the arrays themselves
    enum RefData<'r> {
        Affine {
            slope: Array2<f64>,
            intercept: Array2<f64>,
        },
        Tabulated(&'r CoefficientProcess),
    }

    let (n_ref, refdata) = match reference {
        Reference::Oracle(oracle) => {
            let n_ref = oracle.beta_exact(0.0).len();
            let mut slope = Array2::zeros((steps + 1, n_ref));
            let mut intercept = Array2::zeros((steps + 1, n_ref));
            for (j, &t) in grid.nodes().iter().enumerate() {
                let s = (oracle.slope)(t);
                let b = (oracle.intercept)(t);
                if s.len() != n_ref || b.len() != n_ref {
                    return Err(Error::DimensionMismatch(
                        "oracle returned vectors of varying length".into(),
                    ));
                }
                for i in 0..n_ref {
                    slope[[j, i]] = s[i];
                    intercept[[j, i]] = b[i];
                }
            }
            (n_ref, RefData::Affine { slope, intercept })
        }
        Reference::Process(fine) => {
            if fine.grid() != grid {
                return Err(Error::GridMismatch(
                    "reference process uses a different time grid".into(),
                ));
            }
            if fine.paths() != m {
                return Err(Error::DimensionMismatch(format!(
                    "reference process has {} paths, expected {m}",
                    fine.paths()
                )));
            }
            (fine.modes(), RefData::Tabulated(fine))
        }
    };
    let n_cmp = n_proc.max(n_ref);

    let coeff = |arr: &Array3<f64>, j: usize, path: usize, i: usize, n: usize| -> f64 {
        if i < n {
            arr[[j, path, i]]
        } else {
            0.0
        }
    };

    let stats: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|path| {
            let w_row = ensemble.values().row(path);
            let mut worst_q = 0.0f64;
            let mut int_r = 0.0f64;
            for j in 0..=steps {
                let mut dist = 0.0;
                for i in 0..n_cmp {
                    let a = coeff(&process.alpha, j, path, i, n_proc);
                    let r = match &refdata {
                        RefData::Affine { slope, intercept } => {
                            let (s, b) = if i < n_ref {
                                (slope[[j, i]], intercept[[j, i]])
                            } else {
                                (0.0, 0.0)
                            };
                            s * w_row[j] + b
                        }
                        RefData::Tabulated(fine) => coeff(&fine.alpha, j, path, i, n_ref),
                    };
                    let d = a - r;
                    dist += d * d;
                }
                worst_q = worst_q.max(dist);
                if j < steps {
                    let mut dist_z = 0.0;
                    for i in 0..n_cmp {
                        let z = coeff(&process.z, j, path, i, n_proc);
                        let r = match &refdata {
                            RefData::Affine { slope, .. } => {
                                if i < n_ref {
                                    slope[[j, i]]
                                } else {
                                    0.0
                                }
                            }
                            RefData::Tabulated(fine) => coeff(&fine.z, j, path, i, n_ref),
                        };
                        let d = z - r;
                        dist_z += d * d;
                    }
                    int_r += dt * dist_z;
                }
            }
            (worst_q, int_r)
        })
        .collect();

    let (q, se_q) = mean_and_stderr(stats.iter().map(|s| s.0).collect());
    let (r, se_r) = mean_and_stderr(stats.iter().map(|s| s.1).collect());
    Ok(ErrorEstimate {
        err_q_max: q,
        err_r_int: r,
        mc_stderr_q: se_q,
        mc_stderr_r: se_r,
    })
}

/// Common knobs of a study: ensemble size, seed, and solver configuration.
#[derive(Debug, Clone)]
pub struct StudySettings {
    pub paths: usize,
    pub seed: u64,
    pub stepper: StepperConfig,
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

fn basis_for(problem: &BspdeProblem, modes: usize) -> Result<SpectralBasis> {
    SpectralBasis::with_default_quadrature(problem.domain(), modes)
}

fn absorb_stats(
    pooled: &mut Vec<usize>,
    warnings: &mut Vec<String>,
    overridden: &mut bool,
    label: &str,
    stats: &SolveStats,
) {
    pooled.extend_from_slice(&stats.picard_per_step);
    *overridden |= stats.cfl_overridden;
    if !stats.truncated_steps.is_empty() {
        warnings.push(format!(
            "{label}: regression degree truncated at {} of {} steps (worst condition {:.3e})",
            stats.truncated_steps.len(),
            stats.picard_per_step.len(),
            stats.max_condition
        ));
    }
}

/// Spatial refinement study: solve at each mode count in `levels` and measure
/// against a solve at `reference_modes`, everything else held fixed.
///
/// The time grid is deliberately held fixed while the mode count grows, so
/// the stiffness bound `lambda_n^2 dt <= 1` is waived for these solves (the
/// implicit step is unconditionally stable; the bound matters for error
/// constants, which is exactly what the study measures). A warning records
/// when that happened.
pub fn converge_space(
    problem: &BspdeProblem,
    grid: &TimeGrid,
    levels: &[usize],
    reference_modes: usize,
    settings: &StudySettings,
) -> Result<ErrorReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no refinement levels given".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "mode levels must be strictly increasing".into(),
        ));
    }
    let top = *levels.last().expect("levels nonempty");
    if reference_modes < 2 * top {
        return Err(Error::InvalidArgument(format!(
            "reference mode count {reference_modes} must be at least twice the finest level {top}"
        )));
    }
    if settings.paths == 0 {
        return Err(Error::InvalidArgument("study needs at least one path".into()));
    }

    let ensemble = PathEnsemble::sample(grid.clone(), settings.paths, settings.seed)?;
    let mut config = settings.stepper.clone();
    config.override_cfl = true;

    let mut pooled = Vec::new();
    let mut warnings = Vec::new();
    let mut overridden = false;

    let ref_basis = basis_for(problem, reference_modes)?;
    let lambda_ref = *ref_basis.eigenvalues().last().expect("nonempty");
    if lambda_ref * lambda_ref * grid.mesh() > 1.0 && !settings.stepper.override_cfl {
        warnings.push(format!(
            "stiffness bound waived for the spatial study: lambda^2 * mesh = {:.3e} at the reference level",
            lambda_ref * lambda_ref * grid.mesh()
        ));
    }
    let reference = solve_backward(problem, &ref_basis, &ensemble, &config)?;
    absorb_stats(
        &mut pooled,
        &mut warnings,
        &mut overridden,
        &format!("reference (n = {reference_modes})"),
        &reference.stats,
    );

    let mut rows = Vec::new();
    let mut lambda_next = Vec::new();
    let mut totals = Vec::new();
    let mut slacks = Vec::new();
    for &n in levels {
        let basis = basis_for(problem, n)?;
        let out = solve_backward(problem, &basis, &ensemble, &config)?;
        absorb_stats(
            &mut pooled,
            &mut warnings,
            &mut overridden,
            &format!("level n = {n}"),
            &out.stats,
        );
        let est = error_norms(
            &out.process,
            &Reference::Process(&reference.process),
            &ensemble,
        )?;
        let length = problem.domain().length();
        let next_freq = (n + 1) as f64 * std::f64::consts::PI / length;
        lambda_next.push(next_freq * next_freq);
        totals.push(est.err_q_max + est.err_r_int);
        slacks.push(est.mc_stderr_q + est.mc_stderr_r);
        rows.push(LevelRow {
            modes: n,
            steps: grid.steps(),
            paths: settings.paths,
            mesh: grid.mesh(),
            err_q_max: est.err_q_max,
            err_r_int: est.err_r_int,
            mc_stderr_q: est.mc_stderr_q,
            mc_stderr_r: est.mc_stderr_r,
            bound_satisfied: None,
        });
    }

    // envelope fitted to the coarsest level: err <= C / lambda_{n+1}, checked
    // in the multiplied-out form so the anchoring level compares equal even
    // when the sampling slack is exactly zero
    let constant = totals[0] * lambda_next[0];
    for (k, row) in rows.iter_mut().enumerate() {
        row.bound_satisfied =
            Some(totals[k] * lambda_next[k] <= constant + 3.0 * slacks[k] * lambda_next[k]);
    }

    Ok(ErrorReport {
        fitted_slope_space: log_log_slope(&lambda_next, &totals),
        fitted_slope_time: None,
        space_bound_constant: Some(constant),
        regularity: None,
        picard: PicardSummary::from_counts(&pooled),
        cfl_overridden: overridden,
        warnings,
        rows,
    })
}

/// Reference used by [`converge_time`].
pub enum TimeReference<'a> {
    /// Closed-form solution.
    Oracle(&'a OracleSolution),
    /// Noise-free Runge-Kutta trajectory (deterministic data only);
    /// `substeps` is the resolution floor over the whole horizon.
    NoiseFree { substeps: usize },
    /// A solve at `factor` times as many steps on the same Brownian paths,
    /// subsampled to each level's grid.
    FineSolve { factor: usize },
}

/// Temporal refinement study: solve at each step count in `levels` with the
/// mode count fixed and measure against the chosen reference.
pub fn converge_time(
    problem: &BspdeProblem,
    modes: usize,
    levels: &[usize],
    reference: &TimeReference,
    settings: &StudySettings,
) -> Result<ErrorReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no refinement levels given".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "step levels must be strictly increasing".into(),
        ));
    }
    if settings.paths == 0 {
        return Err(Error::InvalidArgument("study needs at least one path".into()));
    }
    if let TimeReference::FineSolve { factor } = reference {
        if *factor < 2 {
            return Err(Error::InvalidArgument(
                "a fine-solve reference needs a refinement factor of at least 2".into(),
            ));
        }
    }

    let basis = basis_for(problem, modes)?;
    let config = settings.stepper.clone();

    // the coarsest level has the largest mesh; the stiffness check inside
    // solve_backward then covers every finer level
    let oracle_holder;
    let oracle: Option<&OracleSolution> = match reference {
        TimeReference::Oracle(o) => Some(o),
        TimeReference::NoiseFree { substeps } => {
            oracle_holder =
                OracleSolution::from_noise_free(solve_deterministic_ode(problem, &basis, *substeps)?);
            Some(&oracle_holder)
        }
        TimeReference::FineSolve { .. } => None,
    };

    let mut pooled = Vec::new();
    let mut warnings = Vec::new();
    let mut overridden = false;
    let mut rows = Vec::new();
    let mut meshes = Vec::new();
    let mut totals = Vec::new();

    for &steps in levels {
        let grid = TimeGrid::new(problem.horizon(), steps)?;
        let est = match (oracle, reference) {
            (Some(o), _) => {
                let ensemble = PathEnsemble::sample(grid.clone(), settings.paths, settings.seed)?;
                let out = solve_backward(problem, &basis, &ensemble, &config)?;
                absorb_stats(
                    &mut pooled,
                    &mut warnings,
                    &mut overridden,
                    &format!("level N = {steps}"),
                    &out.stats,
                );
                error_norms(&out.process, &Reference::Oracle(o), &ensemble)?
            }
            (None, TimeReference::FineSolve { factor }) => {
                let fine_grid = TimeGrid::new(problem.horizon(), steps * factor)?;
                let fine_ensemble =
                    PathEnsemble::sample(fine_grid.clone(), settings.paths, settings.seed)?;
                // the coarse ensemble is the same Brownian motion observed at
                // the coarse nodes, so the two solves are pathwise coupled
                let mut coarse_values = Array2::zeros((settings.paths, steps + 1));
                for j in 0..=steps {
                    coarse_values
                        .column_mut(j)
                        .assign(&fine_ensemble.values().column(j * factor));
                }
                let ensemble =
                    PathEnsemble::from_values(grid.clone(), settings.seed, coarse_values)?;
                let fine = solve_backward(problem, &basis, &fine_ensemble, &config)?;
                absorb_stats(
                    &mut pooled,
                    &mut warnings,
                    &mut overridden,
                    &format!("reference N = {}", steps * factor),
                    &fine.stats,
                );
                let out = solve_backward(problem, &basis, &ensemble, &config)?;
                absorb_stats(
                    &mut pooled,
                    &mut warnings,
                    &mut overridden,
                    &format!("level N = {steps}"),
                    &out.stats,
                );
                // restrict the fine solution to the coarse nodes
                let n = fine.process.modes();
                let mut alpha = Array3::zeros((steps + 1, settings.paths, n));
                let mut z = Array3::zeros((steps, settings.paths, n));
                for j in 0..=steps {
                    alpha
                        .index_axis_mut(Axis(0), j)
                        .assign(&fine.process.alpha.index_axis(Axis(0), j * factor));
                    if j < steps {
                        z.index_axis_mut(Axis(0), j)
                            .assign(&fine.process.z.index_axis(Axis(0), j * factor));
                    }
                }
                let restricted = CoefficientProcess::from_parts(grid.clone(), alpha, z)?;
                error_norms(&out.process, &Reference::Process(&restricted), &ensemble)?
            }
            _ => unreachable!("oracle handled above"),
        };
        meshes.push(grid.mesh());
        totals.push(est.err_q_max + est.err_r_int);
        rows.push(LevelRow {
            modes,
            steps,
            paths: settings.paths,
            mesh: grid.mesh(),
            err_q_max: est.err_q_max,
            err_r_int: est.err_r_int,
            mc_stderr_q: est.mc_stderr_q,
            mc_stderr_r: est.mc_stderr_r,
            bound_satisfied: None,
        });
    }

    Ok(ErrorReport {
        fitted_slope_space: None,
        fitted_slope_time: log_log_slope(&meshes, &totals),
        space_bound_constant: None,
        regularity: None,
        picard: PicardSummary::from_counts(&pooled),
        cfl_overridden: overridden,
        warnings,
        rows,
    })
}

/// Measure mean squared coefficient increments over the given lags and
/// compare them with the modulus `C (1 + lambda_n^2 s) s`.
///
/// For each lag `l` the statistic averages `|alpha_{j+l} - alpha_j|^2` over
/// all admissible nodes `j` and paths; `bound_ratio` divides by the modulus
/// so that a non-increasing sequence over growing lags certifies the bound
/// with some constant.
pub fn regularity_probe(
    process: &CoefficientProcess,
    basis: &SpectralBasis,
    lags: &[usize],
) -> Result<RegularityTable> {
    if basis.modes() != process.modes() {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} modes, process has {}",
            basis.modes(),
            process.modes()
        )));
    }
    if lags.is_empty() {
        return Err(Error::InvalidArgument("no lags given".into()));
    }
    let steps = process.grid().steps();
    if lags.iter().any(|&l| l > steps) {
        return Err(Error::InvalidArgument(format!(
            "lag exceeds the {steps} steps of the grid"
        )));
    }
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();

    let dt = process.grid().mesh();
    let lambda_max = *basis.eigenvalues().last().expect("nonempty basis");
    let m = process.paths();
    let n = process.modes();

    let mut rows = Vec::new();
    for &lag in &lags {
        let s = lag as f64 * dt;
        if lag == 0 {
            rows.push(RegularityRow {
                lag_steps: 0,
                lag_time: 0.0,
                alpha_increment_msq: 0.0,
                alpha_stderr: 0.0,
                z_increment_msq: Some(0.0),
                z_stderr: Some(0.0),
                bound_ratio: 0.0,
            });
            continue;
        }
        let alpha_pairs = steps + 1 - lag;
        let per_path: Vec<(f64, Option<f64>)> = (0..m)
            .into_par_iter()
            .map(|path| {
                let mut acc = 0.0;
                for j in 0..alpha_pairs {
                    let mut d2 = 0.0;
                    for i in 0..n {
                        let d = process.alpha[[j + lag, path, i]] - process.alpha[[j, path, i]];
                        d2 += d * d;
                    }
                    acc += d2;
                }
                let a_stat = acc / alpha_pairs as f64;
                let z_stat = if steps >= 1 && lag <= steps - 1 {
                    let z_pairs = steps - lag;
                    let mut acc = 0.0;
                    for j in 0..z_pairs {
                        let mut d2 = 0.0;
                        for i in 0..n {
                            let d = process.z[[j + lag, path, i]] - process.z[[j, path, i]];
                            d2 += d * d;
                        }
                        acc += d2;
                    }
                    Some(acc / z_pairs as f64)
                } else {
                    None
                };
                (a_stat, z_stat)
            })
            .collect();
        let (a_msq, a_se) = mean_and_stderr(per_path.iter().map(|p| p.0).collect());
        let (z_msq, z_se) = if per_path.iter().all(|p| p.1.is_some()) {
            let (mz, sz) = mean_and_stderr(per_path.iter().map(|p| p.1.unwrap()).collect());
            (Some(mz), Some(sz))
        } else {
            (None, None)
        };
        let modulus = (1.0 + lambda_max * lambda_max * s) * s;
        rows.push(RegularityRow {
            lag_steps: lag,
            lag_time: s,
            alpha_increment_msq: a_msq,
            alpha_stderr: a_se,
            z_increment_msq: z_msq,
            z_stderr: z_se,
            bound_ratio: a_msq / modulus,
        });
    }

    // least-squares fit of msq = c * modulus over positive lags
    let mut num = 0.0;
    let mut den = 0.0;
    for row in &rows {
        if row.lag_steps == 0 {
            continue;
        }
        let g = (1.0 + lambda_max * lambda_max * row.lag_time) * row.lag_time;
        num += row.alpha_increment_msq * g;
        den += g * g;
    }
    let fitted_constant = if den > 0.0 { num / den } else { 0.0 };

    let positive: Vec<f64> = rows
        .iter()
        .filter(|r| r.lag_steps > 0)
        .map(|r| r.bound_ratio)
        .collect();
    let ratio_non_increasing = positive.windows(2).all(|w| w[1] <= w[0]);

    Ok(RegularityTable {
        rows,
        fitted_constant,
        ratio_non_increasing,
    })
}
