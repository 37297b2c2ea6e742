//! Equation data: the nonlinear driver, the terminal datum, and their
//! Galerkin projections onto a [`SpectralBasis`].
//!
//! The continuous problem is a backward stochastic heat equation on an
//! interval: find `(q, r)` with
//!
//! ```text
//! dq(t, x) = (-q_xx(t, x) + f(t, x, q, r)) dt + r(t, x) dW(t),
//! q(t, 0) = q(t, length) = 0,      q(T, x) given.
//! ```
//!
//! Projecting onto the first `n` eigenmodes turns this into a finite system
//! for coefficient vectors; this module supplies the two projections the
//! solver needs (terminal datum and driver) plus a sampling-based audit of
//! the declared driver regularity constants.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::basis::{IntervalDomain, SpectralBasis};
use crate::error::{Error, Result};

/// Nonlinearity `f(t, x, y, z)` together with its declared regularity:
/// `lipschitz` bounds `|f(t,x,y1,z1) - f(t,x,y2,z2)| / (|y1-y2| + |z1-z2|)`
/// and `holder` bounds `|f(t1,..) - f(t2,..)| / |t1 - t2|^(1/2)`.
///
/// The declared constants drive the implicit-step contraction guard, so they
/// should be honest; [`BspdeProblem::probe_assumptions`] exists to catch
/// declarations that are too optimistic.
#[derive(Clone)]
pub struct Driver {
    eval: Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>,
    lipschitz: f64,
    holder: f64,
}

impl Driver {
    pub fn new(
        eval: impl Fn(f64, f64, f64, f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        holder: f64,
    ) -> Result<Self> {
        for (name, v) in [("lipschitz", lipschitz), ("holder", holder)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} constant must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(Driver {
            eval: Arc::new(eval),
            lipschitz,
            holder,
        })
    }

    /// Driver that is identically zero (plain backward heat equation).
    pub fn zero() -> Self {
        Driver {
            eval: Arc::new(|_, _, _, _| 0.0),
            lipschitz: 0.0,
            holder: 0.0,
        }
    }

    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> f64 {
        (self.eval)(t, x, y, z)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn holder(&self) -> f64 {
        self.holder
    }
}

impl std::fmt::Debug for Driver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Driver")
            .field("lipschitz", &self.lipschitz)
            .field("holder", &self.holder)
            .finish_non_exhaustive()
    }
}

/// Terminal condition `q(T, .)`, either a fixed profile or a profile driven
/// by the terminal value of the Brownian motion.
#[derive(Clone)]
pub enum TerminalDatum {
    /// `q(T, x) = psi(x)`.
    Deterministic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// `q(T, x) = Phi(x, W(T))`.
    WienerFunctional(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl TerminalDatum {
    pub fn deterministic(psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TerminalDatum::Deterministic(Arc::new(psi))
    }

    pub fn wiener(phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        TerminalDatum::WienerFunctional(Arc::new(phi))
    }

    fn eval(&self, x: f64, w: f64) -> f64 {
        match self {
            TerminalDatum::Deterministic(psi) => psi(x),
            TerminalDatum::WienerFunctional(phi) => phi(x, w),
        }
    }
}

impl std::fmt::Debug for TerminalDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TerminalDatum::Deterministic(_) => f.write_str("TerminalDatum::Deterministic"),
            TerminalDatum::WienerFunctional(_) => f.write_str("TerminalDatum::WienerFunctional"),
        }
    }
}

/// Full problem description. Immutable once built and cheap to clone, so a
/// single instance can be shared across solver threads.
#[derive(Clone, Debug)]
pub struct BspdeProblem {
    domain: IntervalDomain,
    horizon: f64,
    driver: Driver,
    terminal: TerminalDatum,
}

/// Result of [`BspdeProblem::probe_assumptions`]: largest difference
/// quotients seen while sampling the driver, against the declared constants.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AssumptionReport {
    pub lipschitz_declared: f64,
    pub lipschitz_observed: f64,
    pub lipschitz_flagged: bool,
    pub holder_declared: f64,
    pub holder_observed: f64,
    pub holder_flagged: bool,
    pub samples: usize,
}

// Probe points for y and z are drawn uniformly from this symmetric range.
// The scale is arbitrary; difference quotients of the drivers we care about
// are scale free or nearly so.
const PROBE_AMPLITUDE: f64 = 3.0;
// Observed/declared ratios above 1 + this slack raise a flag.
const PROBE_SLACK: f64 = 0.01;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    const TWO_POW_53: f64 = 9007199254740992.0;
    lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / TWO_POW_53)
}

impl BspdeProblem {
    pub fn new(
        domain: IntervalDomain,
        horizon: f64,
        driver: Driver,
        terminal: TerminalDatum,
    ) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        Ok(BspdeProblem {
            domain,
            horizon,
            driver,
            terminal,
        })
    }

    pub fn domain(&self) -> IntervalDomain {
        self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn terminal(&self) -> &TerminalDatum {
        &self.terminal
    }

    fn check_domain(&self, basis: &SpectralBasis) -> Result<()> {
        if basis.domain() != self.domain {
            return Err(Error::DomainMismatch(format!(
                "problem lives on (0, {}) but basis on (0, {})",
                self.domain.length(),
                basis.domain().length()
            )));
        }
        Ok(())
    }

    /// Coefficients of the terminal datum for terminal Brownian value `w`.
    ///
    /// For a [`TerminalDatum::Deterministic`] datum the result does not
    /// depend on `w`. The profile must vanish at both interval ends
    /// (relative to its overall size); a datum incompatible with the
    /// boundary conditions is rejected.
    pub fn project_terminal(&self, basis: &SpectralBasis, w: f64) -> Result<Vec<f64>> {
        self.check_domain(basis)?;
        let nodes = basis.quadrature().nodes();
        let mut values = Vec::with_capacity(nodes.len());
        let mut scale = 0.0f64;
        for &x in nodes {
            let v = self.terminal.eval(x, w);
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "terminal datum evaluated to {v} at x = {x}"
                )));
            }
            scale = scale.max(v.abs());
            values.push(v);
        }
        self.check_dirichlet(nodes, &values, w, scale)?;
        Ok(basis.project_node_values(&values))
    }

    // Boundary compatibility: the datum must vanish at x = 0 and x = length.
    // Evaluate there directly when possible, otherwise extrapolate linearly
    // from the two nearest quadrature nodes.
    fn check_dirichlet(&self, nodes: &[f64], values: &[f64], w: f64, scale: f64) -> Result<()> {
        let length = self.domain.length();
        let tol = 1e-8 * scale.max(1e-300);
        let q = nodes.len();
        let ends = [
            (0.0, nodes[0], values[0], nodes[1], values[1]),
            (
                length,
                nodes[q - 1],
                values[q - 1],
                nodes[q - 2],
                values[q - 2],
            ),
        ];
        for (xb, x1, v1, x2, v2) in ends {
            let direct = self.terminal.eval(xb, w);
            let at_boundary = if direct.is_finite() {
                direct
            } else {
                v1 + (v1 - v2) * (xb - x1) / (x1 - x2)
            };
            if at_boundary.abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "terminal datum does not vanish at x = {xb}: value {at_boundary:e} \
                     exceeds {tol:e}"
                )));
            }
        }
        Ok(())
    }

    /// Coefficients of `f(t, ., q_n(.), r_n(.))` where `q_n`, `r_n` are the
    /// expansions with coefficients `alpha`, `beta`.
    pub fn project_driver(
        &self,
        basis: &SpectralBasis,
        t: f64,
        alpha: &[f64],
        beta: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_domain(basis)?;
        let n = basis.modes();
        if alpha.len() != n || beta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} coefficients, got {} for q and {} for r",
                alpha.len(),
                beta.len()
            )));
        }
        let phi = basis.eigenfunctions_at_nodes();
        let pw = basis.projection_weights();
        let nodes = basis.quadrature().nodes();
        let mut out = vec![0.0; n];
        for (q, &x) in nodes.iter().enumerate() {
            let mut y = 0.0;
            let mut r = 0.0;
            for i in 0..n {
                y += alpha[i] * phi[[i, q]];
                r += beta[i] * phi[[i, q]];
            }
            let fv = self.driver.eval(t, x, y, r);
            for i in 0..n {
                out[i] += pw[[q, i]] * fv;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "driver projection produced non-finite coefficients at t = {t}"
            )));
        }
        Ok(out)
    }

    /// Row-batched [`BspdeProblem::project_driver`]: `alpha` and `beta` are
    /// `M x n`, row `m` is projected into row `m` of `out`.
    ///
    /// Rows are processed in fixed-size chunks that are independent of the
    /// thread count, so results are bitwise reproducible under any
    /// parallelism.
    pub fn project_driver_batch(
        &self,
        basis: &SpectralBasis,
        t: f64,
        alpha: ArrayView2<f64>,
        beta: ArrayView2<f64>,
        mut out: ArrayViewMut2<f64>,
    ) -> Result<()> {
        self.check_domain(basis)?;
        let n = basis.modes();
        let m = alpha.nrows();
        if alpha.ncols() != n || beta.ncols() != n || out.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "coefficient arrays must have {n} columns"
            )));
        }
        if beta.nrows() != m || out.nrows() != m {
            return Err(Error::DimensionMismatch(
                "alpha, beta and output row counts differ".into(),
            ));
        }
        let phi = basis.eigenfunctions_at_nodes();
        let pw = basis.projection_weights();
        let nodes = basis.quadrature().nodes();

        const CHUNK: usize = 1024;
        let results: Vec<Result<()>> = alpha
            .axis_chunks_iter(Axis(0), CHUNK)
            .into_par_iter()
            .zip(beta.axis_chunks_iter(Axis(0), CHUNK).into_par_iter())
            .zip(out.axis_chunks_iter_mut(Axis(0), CHUNK).into_par_iter())
            .map(|((a_chunk, b_chunk), mut o_chunk)| {
                let y_vals = a_chunk.dot(phi);
                let r_vals = b_chunk.dot(phi);
                let mut f_vals: Array2<f64> = Array2::zeros(y_vals.raw_dim());
                for row in 0..y_vals.nrows() {
                    for (q, &x) in nodes.iter().enumerate() {
                        f_vals[[row, q]] =
                            self.driver.eval(t, x, y_vals[[row, q]], r_vals[[row, q]]);
                    }
                }
                o_chunk.assign(&f_vals.dot(pw));
                if o_chunk.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "driver projection produced non-finite coefficients at t = {t}"
                    )));
                }
                Ok(())
            })
            .collect();
        for r in results {
            r?;
        }
        Ok(())
    }

    /// Sample difference quotients of the driver and compare with the
    /// declared Lipschitz and Holder constants. `samples` controls the probe
    /// count; the probe is deterministic in `seed`.
    pub fn probe_assumptions(&self, seed: u64, samples: usize) -> AssumptionReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let length = self.domain.length();
        let a = PROBE_AMPLITUDE;
        let mut lip_obs = 0.0f64;
        let mut hol_obs = 0.0f64;
        for _ in 0..samples {
            let t = uniform(&mut rng, 0.0, self.horizon);
            let x = uniform(&mut rng, 1e-6 * length, (1.0 - 1e-6) * length);
            let y1 = uniform(&mut rng, -a, a);
            let z1 = uniform(&mut rng, -a, a);
            let y2 = uniform(&mut rng, -a, a);
            let z2 = uniform(&mut rng, -a, a);

            // joint move plus the two axis-aligned moves, so purely
            // y-dependent or z-dependent drivers still reach their extremes
            let base = self.driver.eval(t, x, y1, z1);
            for (yb, zb) in [(y2, z2), (y2, z1), (y1, z2)] {
                let denom = (y1 - yb).abs() + (z1 - zb).abs();
                if denom > 1e-12 {
                    let ratio = (base - self.driver.eval(t, x, yb, zb)).abs() / denom;
                    lip_obs = lip_obs.max(ratio);
                }
            }

            let t2 = uniform(&mut rng, 0.0, self.horizon);
            let dt = (t - t2).abs();
            if dt > 1e-12 {
                let ratio = (base - self.driver.eval(t2, x, y1, z1)).abs() / dt.sqrt();
                hol_obs = hol_obs.max(ratio);
            }
        }
        AssumptionReport {
            lipschitz_declared: self.driver.lipschitz,
            lipschitz_observed: lip_obs,
            lipschitz_flagged: lip_obs > self.driver.lipschitz * (1.0 + PROBE_SLACK),
            holder_declared: self.driver.holder,
            holder_observed: hol_obs,
            holder_flagged: hol_obs > self.driver.holder * (1.0 + PROBE_SLACK),
            samples,
        }
    }
}

use rayon::prelude::*;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn setup(modes: usize) -> (BspdeProblem, SpectralBasis) {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, modes).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::zero(),
            TerminalDatum::deterministic(|x| x * (1.0 - x)),
        )
        .unwrap();
        (problem, basis)
    }

    #[test]
    fn terminal_projection_of_first_eigenfunction_is_unit_vector() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 3).unwrap();
        let problem = BspdeProblem::new(
            domain,
            0.1,
            Driver::zero(),
            TerminalDatum::deterministic(|x| 2.0f64.sqrt() * (PI * x).sin()),
        )
        .unwrap();
        let c = problem.project_terminal(&basis, 0.7).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[2], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn deterministic_terminal_ignores_brownian_value() {
        let (problem, basis) = setup(4);
        let a = problem.project_terminal(&basis, -3.0).unwrap();
        let b = problem.project_terminal(&basis, 2.5).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a[0], 4.0 * 2.0f64.sqrt() / PI.powi(3), epsilon = 1e-10);
    }

    #[test]
    fn wiener_terminal_is_linear_in_w_when_the_profile_is() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 2).unwrap();
        let problem = BspdeProblem::new(
            domain,
            0.25,
            Driver::zero(),
            TerminalDatum::wiener(|x, w| w * 2.0f64.sqrt() * (PI * x).sin()),
        )
        .unwrap();
        let c = problem.project_terminal(&basis, 2.5).unwrap();
        assert_abs_diff_eq!(c[0], 2.5, epsilon = 1e-10);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn terminal_must_vanish_at_the_boundary() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 2).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::zero(),
            TerminalDatum::deterministic(|_| 1.0),
        )
        .unwrap();
        let err = problem.project_terminal(&basis, 0.0).unwrap_err();
        assert_eq!(err.code(), "invalid_argument");
    }

    #[test]
    fn domain_mismatch_is_detected() {
        let (problem, _) = setup(2);
        let other = IntervalDomain::new(2.0).unwrap();
        let basis2 = SpectralBasis::with_default_quadrature(other, 2).unwrap();
        assert!(matches!(
            problem.project_terminal(&basis2, 0.0),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn driver_projection_reproduces_identity_drivers() {
        // f = y must project to alpha, f = z to beta.
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 3).unwrap();
        let alpha = [0.7, -0.2, 0.05];
        let beta = [-1.0, 0.4, 0.3];
        let p_y = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, _| y, 1.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let f = p_y.project_driver(&basis, 0.0, &alpha, &beta).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(f[i], alpha[i], epsilon = 1e-10);
        }
        let p_z = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, _, z| z, 1.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let f = p_z.project_driver(&basis, 0.0, &alpha, &beta).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(f[i], beta[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn driver_projection_exact_for_affine_drivers() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 3).unwrap();
        let alpha = [0.3, 1.1, -0.8];
        let beta = [0.9, -0.5, 0.2];
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, z| 2.0 * y - 3.0 * z, 5.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let f = problem.project_driver(&basis, 0.5, &alpha, &beta).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(f[i], 2.0 * alpha[i] - 3.0 * beta[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn pure_forcing_projects_to_its_coefficients() {
        // f = phi_2(x), independent of state, projects onto the second
        // coordinate axis.
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 3).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, x, _, _| 2.0f64.sqrt() * (2.0 * PI * x).sin(), 0.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let f = problem
            .project_driver(&basis, 0.0, &[0.0; 3], &[0.0; 3])
            .unwrap();
        assert_abs_diff_eq!(f[0], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f[1], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f[2], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn batched_projection_matches_single_rows() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 2).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|t, x, y, z| y * z + t * x.sin(), 4.0, 1.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let alpha =
            Array2::from_shape_vec((3, 2), vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6]).unwrap();
        let beta = Array2::from_shape_vec((3, 2), vec![1.0, 0.0, 0.5, 0.5, -1.0, 2.0]).unwrap();
        let mut out = Array2::zeros((3, 2));
        problem
            .project_driver_batch(&basis, 0.3, alpha.view(), beta.view(), out.view_mut())
            .unwrap();
        for m in 0..3 {
            let single = problem
                .project_driver(
                    &basis,
                    0.3,
                    alpha.row(m).as_slice().unwrap(),
                    beta.row(m).as_slice().unwrap(),
                )
                .unwrap();
            for i in 0..2 {
                assert_abs_diff_eq!(out[[m, i]], single[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn probe_confirms_honest_lipschitz_declaration() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, _| 2.0 * y, 2.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let report = problem.probe_assumptions(7, 5000);
        assert!(report.lipschitz_observed <= 2.0 * (1.0 + 1e-12));
        assert!(!report.lipschitz_flagged);
        assert!(!report.holder_flagged);
    }

    #[test]
    fn probe_flags_understated_lipschitz_constant() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, _| 2.0 * y, 1.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let report = problem.probe_assumptions(7, 5000);
        assert!(report.lipschitz_flagged);
    }

    #[test]
    fn probe_accepts_sine_driver_with_unit_constant() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, _| y.sin(), 1.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let report = problem.probe_assumptions(13, 5000);
        // |sin a - sin b| <= |a - b|, so nothing to flag
        assert!(!report.lipschitz_flagged);
        // dense sweep as an independent cross-check of the probe's verdict
        let mut max_ratio = 0.0f64;
        for i in 0..200 {
            for j in (i + 1)..200 {
                let a = -3.0 + 6.0 * (i as f64) / 199.0;
                let b = -3.0 + 6.0 * (j as f64) / 199.0;
                max_ratio = max_ratio.max((a.sin() - b.sin()).abs() / (a - b).abs());
            }
        }
        assert!(max_ratio <= 1.0 + 1e-12);
        assert!(report.lipschitz_observed <= max_ratio + 1e-12);
    }

    #[test]
    fn probe_is_deterministic_in_seed() {
        let (problem, _) = setup(2);
        let a = problem.probe_assumptions(3, 1000);
        let b = problem.probe_assumptions(3, 1000);
        assert_eq!(a, b);
    }

    #[test]
    fn driver_constructor_rejects_bad_constants() {
        assert!(Driver::new(|_, _, _, _| 0.0, -1.0, 0.0).is_err());
        assert!(Driver::new(|_, _, _, _| 0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn non_finite_driver_values_are_reported() {
        let domain = IntervalDomain::new(1.0).unwrap();
        let basis = SpectralBasis::with_default_quadrature(domain, 2).unwrap();
        let problem = BspdeProblem::new(
            domain,
            1.0,
            Driver::new(|_, _, y, _| 1.0 / y, 1.0, 0.0).unwrap(),
            TerminalDatum::deterministic(|_| 0.0),
        )
        .unwrap();
        let res = problem.project_driver(&basis, 0.0, &[0.0, 0.0], &[0.0, 0.0]);
        assert!(res.is_err());
    }
}
