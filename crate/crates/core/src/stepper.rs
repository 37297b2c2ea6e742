//! Implicit backward time stepping for the coefficient system.
//!
//! After Galerkin projection the unknowns at each time node are, per path,
//! a coefficient vector `alpha_j` and a martingale integrand `z_j`. One
//! backward Euler step from `t_{j+1}` to `t_j` solves
//!
//! ```text
//! (1 + lambda_i dt) alpha_j[i] = E(alpha_{j+1}[i] | W_j) - dt f_i(t_j, alpha_j, z_j)
//! z_j[i]                       = E(alpha_{j+1}[i] dW_j | W_j) / dt
//! ```
//!
//! where `f_i` is the projected driver. The implicit equation is solved by
//! Picard iteration, which contracts at rate `lipschitz * dt / (1 + lambda_1
//! dt)`; the solver refuses configurations with `lipschitz * dt >= 1`.
//!
//! All per-path work is chunked at a fixed size, so results are bitwise
//! identical for any worker thread count.

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::basis::SpectralBasis;
use crate::cond_exp::{Estimator, Payload};
use crate::error::{Error, Result};
use crate::paths::{PathEnsemble, TimeGrid};
use crate::problem::{BspdeProblem, TerminalDatum};

/// Fixed row chunk for parallel loops; never derived from the thread count.
const CHUNK: usize = 1024;

/// Number of interpolation nodes (cubic fit) used when the solution must be
/// carried as a function of the Brownian value for quadrature estimators.
const COLLOCATION_POINTS: usize = 4;

/// Solver knobs. `estimator` picks the conditional expectation backend; the
/// Picard controls bound the inner fixed-point iteration of the implicit
/// step.
#[derive(Debug, Clone)]
pub struct StepperConfig {
    pub estimator: Estimator,
    /// Iteration stops when the largest per-path coefficient update (L2 over
    /// modes) falls below this.
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    /// Run even when the spectral stiffness bound `lambda_n^2 dt <= 1` fails.
    /// The run is then outside the regime the error analysis covers, and the
    /// report records that.
    pub override_cfl: bool,
}

impl StepperConfig {
    pub fn new(estimator: Estimator) -> Self {
        StepperConfig {
            estimator,
            picard_tol: 1e-12,
            picard_max_iters: 50,
            override_cfl: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.picard_tol.is_finite() || self.picard_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "picard_tol must be finite and positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iters == 0 {
            return Err(Error::InvalidArgument(
                "picard_max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Polynomial in the Brownian value `w`, stored in the shifted and scaled
/// variable `(w - center) / scale` for conditioning; one coefficient column
/// per mode. This is how quadrature estimators carry "the solution as a
/// function of `W(t_j)`" from one step to the next.
#[derive(Debug, Clone)]
pub struct WPoly {
    center: f64,
    scale: f64,
    /// `(degree + 1) x modes`, row `k` holding the coefficients of `s^k`.
    coeffs: Array2<f64>,
}

impl WPoly {
    pub fn constant(values: &[f64]) -> WPoly {
        let mut coeffs = Array2::zeros((1, values.len()));
        coeffs.row_mut(0).assign(&ndarray::ArrayView1::from(values));
        WPoly {
            center: 0.0,
            scale: 1.0,
            coeffs,
        }
    }

    /// Interpolate values given at `nodes` (one row of `values` per node).
    /// The node count fixes the degree; nodes must be pairwise distinct.
    pub fn interpolate(
        center: f64,
        scale: f64,
        nodes: &[f64],
        values: ArrayView2<f64>,
    ) -> Result<WPoly> {
        let p = nodes.len();
        if p == 0 || values.nrows() != p {
            return Err(Error::DimensionMismatch(format!(
                "{p} interpolation nodes with {} value rows",
                values.nrows()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(
                "interpolation center/scale must be finite, scale positive".into(),
            ));
        }
        let n = values.ncols();
        let vandermonde = nalgebra::DMatrix::from_fn(p, p, |i, k| {
            ((nodes[i] - center) / scale).powi(k as i32)
        });
        let rhs = nalgebra::DMatrix::from_fn(p, n, |i, j| values[[i, j]]);
        let solved = vandermonde
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("interpolation nodes coincide".into()))?;
        let mut coeffs = Array2::zeros((p, n));
        for k in 0..p {
            for j in 0..n {
                coeffs[[k, j]] = solved[(k, j)];
            }
        }
        Ok(WPoly {
            center,
            scale,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn modes(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Evaluate all mode polynomials at Brownian value `w` (Horner form).
    pub fn eval(&self, w: f64) -> Vec<f64> {
        let s = (w - self.center) / self.scale;
        let d = self.degree();
        let mut out: Vec<f64> = self.coeffs.row(d).to_vec();
        for k in (0..d).rev() {
            for (j, o) in out.iter_mut().enumerate() {
                *o = *o * s + self.coeffs[[k, j]];
            }
        }
        out
    }
}

/// What the step needs from time `t_{j+1}`: per-path coefficient samples,
/// and (for quadrature estimators) the same object as a function of the
/// Brownian value.
pub struct StepInput<'a> {
    pub values: ArrayView2<'a, f64>,
    pub function: Option<&'a WPoly>,
}

/// Result of one backward step at node `j`.
#[derive(Debug)]
pub struct StepOutput {
    pub alpha: Array2<f64>,
    pub z: Array2<f64>,
    /// Picard iterations of the per-path solve.
    pub picard_iters: usize,
    /// Largest per-path update after each Picard iteration, for contraction
    /// diagnostics.
    pub update_norms: Vec<f64>,
    /// Solution as a function of `W(t_j)`, when the estimator carries one.
    pub fitted: Option<WPoly>,
    /// True when the regression had to lower its polynomial degree.
    pub regression_truncated: bool,
    /// Condition estimate of the regression design (1 for quadrature).
    pub condition: f64,
}

/// Solution of the full backward sweep: `alpha[j]` is the `M x n` coefficient
/// array at node `j = 0..=N`, `z[j]` the integrand array at `j = 0..N`.
#[derive(Debug, Clone)]
pub struct CoefficientProcess {
    grid: TimeGrid,
    pub alpha: Array3<f64>,
    pub z: Array3<f64>,
}

impl CoefficientProcess {
    /// Assemble a process from raw arrays; `alpha` must be `(N+1) x M x n`
    /// and `z` must be `N x M x n` for the grid's `N` steps.
    pub fn from_parts(grid: TimeGrid, alpha: Array3<f64>, z: Array3<f64>) -> Result<Self> {
        let steps = grid.steps();
        let (a_sh, z_sh) = (alpha.shape().to_vec(), z.shape().to_vec());
        if a_sh[0] != steps + 1 || z_sh[0] != steps || a_sh[1] != z_sh[1] || a_sh[2] != z_sh[2] {
            return Err(Error::DimensionMismatch(format!(
                "coefficient array {a_sh:?} and integrand array {z_sh:?} do not fit a grid with {steps} steps"
            )));
        }
        Ok(CoefficientProcess { grid, alpha, z })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn paths(&self) -> usize {
        self.alpha.shape()[1]
    }

    pub fn modes(&self) -> usize {
        self.alpha.shape()[2]
    }

    pub fn alpha_at(&self, j: usize) -> ArrayView2<'_, f64> {
        self.alpha.index_axis(Axis(0), j)
    }

    pub fn z_at(&self, j: usize) -> ArrayView2<'_, f64> {
        self.z.index_axis(Axis(0), j)
    }

    /// Per-path field values `q(t_j, x)` reconstructed from the coefficients.
    pub fn field_values(&self, basis: &SpectralBasis, j: usize, x: f64) -> Result<Vec<f64>> {
        if basis.modes() != self.modes() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} modes, process has {}",
                basis.modes(),
                self.modes()
            )));
        }
        self.alpha_at(j)
            .outer_iter()
            .map(|row| basis.reconstruct(row.as_slice().expect("row is contiguous"), x))
            .collect()
    }
}

/// Aggregate diagnostics of a backward sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolveStats {
    /// Picard iteration count per step, indexed by time node `j = 0..N`.
    pub picard_per_step: Vec<usize>,
    pub picard_total: usize,
    pub picard_max: usize,
    /// Steps at which the regression lowered its degree.
    pub truncated_steps: Vec<usize>,
    /// Worst regression condition estimate seen.
    pub max_condition: f64,
    /// True when the stiffness bound was overridden by configuration.
    pub cfl_overridden: bool,
}

#[derive(Debug)]
pub struct SolveOutput {
    pub process: CoefficientProcess,
    pub stats: SolveStats,
}

/// Check the preconditions that tie a problem, basis, ensemble and
/// configuration together; returns whether the stiffness bound was
/// overridden.
fn check_preconditions(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    grid: &TimeGrid,
    config: &StepperConfig,
) -> Result<bool> {
    config.validate()?;
    if problem.domain() != basis.domain() {
        return Err(Error::DomainMismatch(format!(
            "problem domain length {} vs basis domain length {}",
            problem.domain().length(),
            basis.domain().length()
        )));
    }
    if problem.horizon().to_bits() != grid.horizon().to_bits() {
        return Err(Error::GridMismatch(format!(
            "problem horizon {} vs grid horizon {}",
            problem.horizon(),
            grid.horizon()
        )));
    }
    let dt = grid.mesh();
    let lipschitz = problem.driver().lipschitz();
    if lipschitz * dt >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "implicit step is not contractive: lipschitz {lipschitz} * mesh {dt} >= 1; refine the time grid"
        )));
    }
    let lambda_max = *basis
        .eigenvalues()
        .last()
        .expect("basis has at least one mode");
    let stiff = lambda_max * lambda_max * dt > 1.0;
    if stiff && !config.override_cfl {
        return Err(Error::CflViolated(format!(
            "lambda_n^2 * mesh = {:.6e} exceeds 1; refine the time grid, lower the mode count, or set override_cfl",
            lambda_max * lambda_max * dt
        )));
    }
    Ok(stiff)
}

/// Solve the implicit fixed point for every row: find `a` with
/// `a[i] = (cond[i] - dt f_i(t, a, z)) / (1 + lambda_i dt)`.
///
/// Returns the solution, the iteration count, and the update norm history.
fn picard_solve(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    t: f64,
    dt: f64,
    step: usize,
    cond: &Array2<f64>,
    z: &Array2<f64>,
    config: &StepperConfig,
) -> Result<(Array2<f64>, usize, Vec<f64>)> {
    let n = basis.modes();
    let inv_gain: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .map(|l| 1.0 / (1.0 + l * dt))
        .collect();

    // starting guess: the linear part alone
    let mut alpha = cond.clone();
    scale_columns(&mut alpha, &inv_gain);

    let mut fbuf = Array2::zeros(cond.raw_dim());
    let mut norms = Vec::new();
    for k in 1..=config.picard_max_iters {
        problem.project_driver_batch(basis, t, alpha.view(), z.view(), fbuf.view_mut())?;
        let chunk_norms: Vec<f64> = fbuf
            .axis_chunks_iter_mut(Axis(0), CHUNK)
            .into_par_iter()
            .zip(cond.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
            .zip(alpha.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
            .map(|((mut f_chunk, c_chunk), a_chunk)| {
                let mut worst = 0.0f64;
                for r in 0..f_chunk.nrows() {
                    let mut dist_sq = 0.0;
                    for i in 0..n {
                        let next = (c_chunk[[r, i]] - dt * f_chunk[[r, i]]) * inv_gain[i];
                        let diff = next - a_chunk[[r, i]];
                        dist_sq += diff * diff;
                        f_chunk[[r, i]] = next;
                    }
                    worst = worst.max(dist_sq);
                }
                worst
            })
            .collect();
        let norm = chunk_norms.into_iter().fold(0.0f64, f64::max).sqrt();
        std::mem::swap(&mut alpha, &mut fbuf);
        norms.push(norm);
        if norm <= config.picard_tol {
            return Ok((alpha, k, norms));
        }
    }
    Err(Error::IterationFailure {
        step,
        residual: *norms.last().expect("at least one iteration ran"),
    })
}

fn scale_columns(a: &mut Array2<f64>, factors: &[f64]) {
    for mut row in a.outer_iter_mut() {
        for (i, v) in row.iter_mut().enumerate() {
            *v *= factors[i];
        }
    }
}

/// Chebyshev-spaced interpolation nodes for carrying the solution as a
/// function of the Brownian value, covering roughly four standard deviations
/// of `W(t)`. At `t = 0` the Brownian value is the point `0`.
fn collocation_nodes(t: f64) -> (Vec<f64>, f64) {
    if t == 0.0 {
        return (vec![0.0], 1.0);
    }
    let radius = 4.0 * t.sqrt();
    let p = COLLOCATION_POINTS;
    let nodes = (0..p)
        .map(|i| radius * ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * p) as f64).cos())
        .collect();
    (nodes, radius)
}

/// One backward step at node `j` (from `t_{j+1}` down to `t_j`).
///
/// `input.values` must hold the per-path coefficients at `t_{j+1}`; for a
/// quadrature estimator `input.function` must hold their functional form.
/// This is exposed for scheme diagnostics; most callers want
/// [`solve_backward`].
pub fn backward_step(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    ensemble: &PathEnsemble,
    config: &StepperConfig,
    j: usize,
    input: StepInput,
) -> Result<StepOutput> {
    let grid = ensemble.grid().clone();
    check_preconditions(problem, basis, &grid, config)?;
    let steps = grid.steps();
    if j >= steps {
        return Err(Error::InvalidArgument(format!(
            "step index {j} out of range for {steps} steps"
        )));
    }
    let m = ensemble.num_paths();
    let n = basis.modes();
    if input.values.nrows() != m || input.values.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "coefficient input is {} x {}, expected {m} x {n}",
            input.values.nrows(),
            input.values.ncols()
        )));
    }
    let t_j = grid.nodes()[j];
    let dt = grid.mesh();
    let x: Vec<f64> = ensemble.values().column(j).to_vec();
    let dw = ensemble.increments(j)?;

    // conditional expectations of the next coefficients and their increment
    // moment, per path
    let (cond, zed, truncated, condition) = match &config.estimator {
        Estimator::LeastSquares { .. } => {
            let payload = Payload::Samples(input.values);
            let mean = config.estimator.cond_mean(&x, &payload, dt)?;
            let slope = config.estimator.cond_z(&x, &payload, &dw, dt)?;
            let truncated = mean.diagnostics.truncated || slope.diagnostics.truncated;
            let condition = mean.diagnostics.condition.max(slope.diagnostics.condition);
            (mean.values, slope.values, truncated, condition)
        }
        Estimator::GaussQuadrature { .. } => {
            let poly = input.function.ok_or_else(|| {
                Error::InvalidArgument(
                    "quadrature estimators need the next-step solution in functional form".into(),
                )
            })?;
            if poly.modes() != n {
                return Err(Error::DimensionMismatch(format!(
                    "functional input has {} modes, expected {n}",
                    poly.modes()
                )));
            }
            let f = |w: f64| poly.eval(w);
            let payload = Payload::Function(&f);
            let mean = config.estimator.cond_mean(&x, &payload, dt)?;
            let slope = config.estimator.cond_z(&x, &payload, &dw, dt)?;
            (mean.values, slope.values, false, 1.0)
        }
    };

    let (alpha, iters, norms) = picard_solve(problem, basis, t_j, dt, j, &cond, &zed, config)?;

    // quadrature estimators additionally solve at a handful of interpolation
    // nodes to carry the solution forward as a function of W(t_j)
    let fitted = match &config.estimator {
        Estimator::LeastSquares { .. } => None,
        Estimator::GaussQuadrature { .. } => {
            let poly_next = input.function.expect("checked above");
            let f = |w: f64| poly_next.eval(w);
            let payload = Payload::Function(&f);
            let (nodes, scale) = collocation_nodes(t_j);
            let mean = config.estimator.cond_mean(&nodes, &payload, dt)?;
            let slope = config.estimator.cond_z(&nodes, &payload, &vec![0.0; nodes.len()], dt)?;
            let (node_alpha, _, _) = picard_solve(
                problem,
                basis,
                t_j,
                dt,
                j,
                &mean.values,
                &slope.values,
                config,
            )?;
            Some(WPoly::interpolate(
                0.0,
                scale,
                &nodes,
                node_alpha.view(),
            )?)
        }
    };

    Ok(StepOutput {
        alpha,
        z: zed,
        picard_iters: iters,
        update_norms: norms,
        fitted,
        regression_truncated: truncated,
        condition,
    })
}

/// Project the terminal datum for every path.
fn terminal_coefficients(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    ensemble: &PathEnsemble,
) -> Result<Array2<f64>> {
    let m = ensemble.num_paths();
    let n = basis.modes();
    let steps = ensemble.grid().steps();
    let mut out = Array2::zeros((m, n));
    match problem.terminal() {
        TerminalDatum::Deterministic(_) => {
            let coeffs = problem.project_terminal(basis, 0.0)?;
            for mut row in out.outer_iter_mut() {
                row.assign(&ndarray::ArrayView1::from(&coeffs[..]));
            }
        }
        TerminalDatum::WienerFunctional(_) => {
            let w_final: Vec<f64> = ensemble.values().column(steps).to_vec();
            let rows: Vec<Result<Vec<f64>>> = w_final
                .par_iter()
                .map(|&w| problem.project_terminal(basis, w))
                .collect();
            for (mut row, r) in out.outer_iter_mut().zip(rows) {
                row.assign(&ndarray::ArrayView1::from(&r?[..]));
            }
        }
    }
    Ok(out)
}

/// Terminal datum as a function of the Brownian value, for quadrature runs.
fn terminal_poly(problem: &BspdeProblem, basis: &SpectralBasis) -> Result<WPoly> {
    match problem.terminal() {
        TerminalDatum::Deterministic(_) => {
            Ok(WPoly::constant(&problem.project_terminal(basis, 0.0)?))
        }
        TerminalDatum::WienerFunctional(_) => {
            let (nodes, scale) = collocation_nodes(problem.horizon());
            let mut values = Array2::zeros((nodes.len(), basis.modes()));
            for (i, &w) in nodes.iter().enumerate() {
                let c = problem.project_terminal(basis, w)?;
                values.row_mut(i).assign(&ndarray::ArrayView1::from(&c[..]));
            }
            WPoly::interpolate(0.0, scale, &nodes, values.view())
        }
    }
}

/// Run the full backward sweep over the ensemble.
///
/// Requires matching problem/basis domains and problem/ensemble horizons, a
/// contractive implicit step (`lipschitz * mesh < 1`), and — unless
/// overridden — the stiffness bound `lambda_n^2 * mesh <= 1`.
pub fn solve_backward(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    ensemble: &PathEnsemble,
    config: &StepperConfig,
) -> Result<SolveOutput> {
    let grid = ensemble.grid().clone();
    let overridden = check_preconditions(problem, basis, &grid, config)?;
    let steps = grid.steps();
    let m = ensemble.num_paths();
    let n = basis.modes();

    let mut alpha = Array3::zeros((steps + 1, m, n));
    let mut z = Array3::zeros((steps, m, n));
    alpha
        .index_axis_mut(Axis(0), steps)
        .assign(&terminal_coefficients(problem, basis, ensemble)?);

    let mut poly = match &config.estimator {
        Estimator::GaussQuadrature { .. } => Some(terminal_poly(problem, basis)?),
        Estimator::LeastSquares { .. } => None,
    };

    let mut stats = SolveStats {
        picard_per_step: vec![0; steps],
        picard_total: 0,
        picard_max: 0,
        truncated_steps: Vec::new(),
        max_condition: 1.0,
        cfl_overridden: overridden,
    };

    for j in (0..steps).rev() {
        let out = {
            let input = StepInput {
                values: alpha.index_axis(Axis(0), j + 1),
                function: poly.as_ref(),
            };
            backward_step(problem, basis, ensemble, config, j, input)?
        };
        alpha.index_axis_mut(Axis(0), j).assign(&out.alpha);
        z.index_axis_mut(Axis(0), j).assign(&out.z);
        stats.picard_per_step[j] = out.picard_iters;
        stats.picard_total += out.picard_iters;
        stats.picard_max = stats.picard_max.max(out.picard_iters);
        if out.regression_truncated {
            stats.truncated_steps.push(j);
        }
        stats.max_condition = stats.max_condition.max(out.condition);
        poly = out.fitted;
    }
    stats.truncated_steps.reverse();

    Ok(SolveOutput {
        process: CoefficientProcess {
            grid,
            alpha,
            z,
        },
        stats,
    })
}

/// Galerkin solution of the noise-free problem: with a deterministic terminal
/// datum and no randomness the coefficient system is the backward ODE
///
/// ```text
/// d alpha / dt = Lambda alpha + f_n(t, alpha, 0),   alpha(T) given,
/// ```
///
/// integrated here with classical fourth-order Runge-Kutta. Serves as a
/// high-accuracy reference for time-convergence studies.
#[derive(Clone)]
pub struct DeterministicSolution {
    problem: BspdeProblem,
    basis: SpectralBasis,
    terminal: Vec<f64>,
    substeps: usize,
}

/// Build a [`DeterministicSolution`]. `substeps` sets the RK4 resolution over
/// the whole horizon and is raised automatically when the stiffest mode needs
/// more for stability.
pub fn solve_deterministic_ode(
    problem: &BspdeProblem,
    basis: &SpectralBasis,
    substeps: usize,
) -> Result<DeterministicSolution> {
    if problem.domain() != basis.domain() {
        return Err(Error::DomainMismatch(format!(
            "problem domain length {} vs basis domain length {}",
            problem.domain().length(),
            basis.domain().length()
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument(
            "substeps must be at least 1".into(),
        ));
    }
    if !matches!(problem.terminal(), TerminalDatum::Deterministic(_)) {
        return Err(Error::InvalidArgument(
            "the noise-free reference needs a deterministic terminal datum".into(),
        ));
    }
    let lambda_max = *basis.eigenvalues().last().expect("at least one mode");
    // keep lambda * h comfortably inside the RK4 stability interval
    let stiff_floor = (lambda_max * problem.horizon()).ceil() as usize;
    let substeps = substeps.max(stiff_floor.max(1));
    let terminal = problem.project_terminal(basis, 0.0)?;
    Ok(DeterministicSolution {
        problem: problem.clone(),
        basis: basis.clone(),
        terminal,
        substeps,
    })
}

impl DeterministicSolution {
    pub fn horizon(&self) -> f64 {
        self.problem.horizon()
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    fn rhs(&self, t: f64, a: &[f64]) -> Result<Vec<f64>> {
        let zeros = vec![0.0; a.len()];
        let mut f = self.problem.project_driver(&self.basis, t, a, &zeros)?;
        for (i, l) in self.basis.eigenvalues().iter().enumerate() {
            f[i] += l * a[i];
        }
        Ok(f)
    }

    /// Coefficient vector at time `t`, integrating backward from the
    /// horizon. Exact at `t = horizon` by construction.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let horizon = self.horizon();
        if !t.is_finite() || t < 0.0 || t > horizon {
            return Err(Error::InvalidArgument(format!(
                "evaluation time {t} outside [0, {horizon}]"
            )));
        }
        let span = horizon - t;
        if span == 0.0 {
            return Ok(self.terminal.clone());
        }
        let base = horizon / self.substeps as f64;
        let nsteps = (span / base).ceil().max(1.0) as usize;
        let h = span / nsteps as f64;
        let n = self.terminal.len();
        let mut a = self.terminal.clone();
        let mut s = horizon;
        for _ in 0..nsteps {
            let ds = -h;
            let k1 = self.rhs(s, &a)?;
            let a2: Vec<f64> = (0..n).map(|i| a[i] + 0.5 * ds * k1[i]).collect();
            let k2 = self.rhs(s + 0.5 * ds, &a2)?;
            let a3: Vec<f64> = (0..n).map(|i| a[i] + 0.5 * ds * k2[i]).collect();
            let k3 = self.rhs(s + 0.5 * ds, &a3)?;
            let a4: Vec<f64> = (0..n).map(|i| a[i] + ds * k3[i]).collect();
            let k4 = self.rhs(s + ds, &a4)?;
            for i in 0..n {
                a[i] += ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            s += ds;
        }
        Ok(a)
    }
}
