//! Conditional expectation estimators for the backward recursion.
//!
//! At each time step the solver needs `E(Y | W(t_j) = x_m)` and the related
//! increment moment `E(Y dW | W(t_j) = x_m) / delta` across all paths. Two
//! estimators are provided:
//!
//! * [`Estimator::LeastSquares`] regresses per-path samples of `Y` on
//!   probabilists' Hermite polynomials in the standardized `W(t_j)` values.
//!   This is the general-purpose Monte Carlo route.
//! * [`Estimator::GaussQuadrature`] integrates a *function* of `W(t_{j+1})`
//!   against the exact Gaussian transition density with a Gauss-Hermite rule.
//!   It applies only when the conditioned quantity is available in functional
//!   form and serves as the high-precision reference.
//!
//! Both return one estimate per path and are linear in the payload.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
///
/// Nodes and weights come from the Golub-Welsch eigendecomposition of the
/// Jacobi matrix, so any point count is available. A rule with `P` points
/// integrates polynomials of degree `2P - 1` exactly.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one point".into(),
            ));
        }
        let mut jacobi = DMatrix::<f64>::zeros(points, points);
        for k in 1..points {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..points)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(mean + std Z)]` for standard normal `Z`.
    pub fn gaussian_mean(&self, mean: f64, std: f64, g: impl Fn(f64) -> f64) -> f64 {
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let s = std * 2.0f64.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * g(mean + s * y))
            .sum::<f64>()
            * inv_sqrt_pi
    }
}

/// Payload passed to an estimator: either per-path samples at `t_{j+1}`
/// (an `M x n` array) or the same quantity as a function of `W(t_{j+1})`.
pub enum Payload<'a> {
    Samples(ArrayView2<'a, f64>),
    Function(&'a (dyn Fn(f64) -> Vec<f64> + Sync)),
}

/// Diagnostics from a least-squares fit. The quadrature estimator reports a
/// trivial instance.
#[derive(Debug, Clone, Default)]
pub struct FitDiagnostics {
    pub requested_degree: usize,
    pub effective_degree: usize,
    pub condition: f64,
    /// True when rank problems forced a lower degree than requested.
    pub truncated: bool,
}

/// Estimate values (one row per path) plus fit diagnostics.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub values: Array2<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Conditional expectation backend. See the module docs for the trade-off.
#[derive(Debug, Clone)]
pub enum Estimator {
    LeastSquares { degree: usize },
    GaussQuadrature { points: usize, rule: GaussHermite },
}

/// Regressions whose design matrix condition number exceeds this are retried
/// with a smaller polynomial degree.
pub const CONDITION_LIMIT: f64 = 1e12;

impl Estimator {
    pub fn least_squares(degree: usize) -> Self {
        Estimator::LeastSquares { degree }
    }

    pub fn gauss_quadrature(points: usize) -> Result<Self> {
        Ok(Estimator::GaussQuadrature {
            points,
            rule: GaussHermite::new(points)?,
        })
    }

    pub fn describe(&self) -> String {
        match self {
            Estimator::LeastSquares { degree } => format!("least_squares(degree={degree})"),
            Estimator::GaussQuadrature { points, .. } => {
                format!("gauss_quadrature(points={points})")
            }
        }
    }

    /// Per-path estimate of `E(Y | W(t_j) = x_m)`.
    ///
    /// `delta` is the step `t_{j+1} - t_j`; the quadrature estimator needs it
    /// to form the transition density, the regression ignores it.
    pub fn cond_mean(&self, x: &[f64], payload: &Payload, delta: f64) -> Result<Estimate> {
        validate_common(x, payload, delta)?;
        match (self, payload) {
            (Estimator::LeastSquares { degree }, Payload::Samples(y)) => {
                fit_hermite(x, *y, *degree)
            }
            (Estimator::GaussQuadrature { rule, .. }, Payload::Function(f)) => {
                gauss_conditional(rule, x, f, delta, Moment::Mean)
            }
            (Estimator::LeastSquares { .. }, Payload::Function(_)) => Err(Error::InvalidArgument(
                "least-squares estimator needs per-path samples, not a function payload".into(),
            )),
            (Estimator::GaussQuadrature { .. }, Payload::Samples(_)) => {
                Err(Error::InvalidArgument(
                    "quadrature estimator needs a function payload, not raw samples".into(),
                ))
            }
        }
    }

    /// Per-path estimate of `E(Y dW | W(t_j) = x_m) / delta`, the discrete
    /// counterpart of the martingale integrand.
    pub fn cond_z(
        &self,
        x: &[f64],
        payload: &Payload,
        increments: &[f64],
        delta: f64,
    ) -> Result<Estimate> {
        validate_common(x, payload, delta)?;
        match (self, payload) {
            (Estimator::LeastSquares { degree }, Payload::Samples(y)) => {
                if increments.len() != x.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} increments for {} paths",
                        increments.len(),
                        x.len()
                    )));
                }
                if increments.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "non-finite Brownian increment".into(),
                    ));
                }
                let mut weighted = y.to_owned();
                for (m, mut row) in weighted.outer_iter_mut().enumerate() {
                    row.map_inplace(|v| *v *= increments[m]);
                }
                let mut est = fit_hermite(x, weighted.view(), *degree)?;
                est.values.map_inplace(|v| *v /= delta);
                Ok(est)
            }
            (Estimator::GaussQuadrature { rule, .. }, Payload::Function(f)) => {
                gauss_conditional(rule, x, f, delta, Moment::Slope)
            }
            (Estimator::LeastSquares { .. }, Payload::Function(_)) => Err(Error::InvalidArgument(
                "least-squares estimator needs per-path samples, not a function payload".into(),
            )),
            (Estimator::GaussQuadrature { .. }, Payload::Samples(_)) => {
                Err(Error::InvalidArgument(
                    "quadrature estimator needs a function payload, not raw samples".into(),
                ))
            }
        }
    }
}

fn validate_common(x: &[f64], payload: &Payload, delta: f64) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("no paths to condition on".into()));
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step size must be finite and positive, got {delta}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite conditioning value".into(),
        ));
    }
    if let Payload::Samples(y) = payload {
        if y.nrows() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} payload rows for {} paths",
                y.nrows(),
                x.len()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::InvalidArgument("payload has no columns".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite payload value".into()));
        }
    }
    Ok(())
}

enum Moment {
    Mean,
    Slope,
}

/// Evaluate the conditional moment of a functional payload at every path by
/// Gauss-Hermite integration against `N(x_m, delta)`.
fn gauss_conditional(
    rule: &GaussHermite,
    x: &[f64],
    f: &(dyn Fn(f64) -> Vec<f64> + Sync),
    delta: f64,
    moment: Moment,
) -> Result<Estimate> {
    let probe = f(x[0]);
    let n = probe.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "function payload returned an empty vector".into(),
        ));
    }
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let shift = (2.0 * delta).sqrt();
    let m = x.len();
    let mut values = Array2::<f64>::zeros((m, n));
    let failed = {
        use ndarray::Axis;
        use rayon::prelude::*;
        let flags: Vec<bool> = values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(mi, mut row)| {
                let xm = x[mi];
                for (&node, &weight) in rule.nodes.iter().zip(&rule.weights) {
                    let xi = shift * node; // increment value at this quadrature node
                    let fv = f(xm + xi);
                    if fv.len() != n {
                        return true;
                    }
                    let factor = match moment {
                        Moment::Mean => weight * inv_sqrt_pi,
                        Moment::Slope => weight * inv_sqrt_pi * xi / delta,
                    };
                    for i in 0..n {
                        row[i] += factor * fv[i];
                    }
                }
                row.iter().any(|v| !v.is_finite())
            })
            .collect();
        flags.into_iter().any(|f| f)
    };
    if failed {
        return Err(Error::InvalidArgument(
            "function payload produced inconsistent or non-finite values".into(),
        ));
    }
    Ok(Estimate {
        values,
        diagnostics: FitDiagnostics {
            requested_degree: 0,
            effective_degree: 0,
            condition: 1.0,
            truncated: false,
        },
    })
}

/// Probabilists' Hermite design matrix in the standardized variable.
fn hermite_design(x_std: &[f64], degree: usize) -> DMatrix<f64> {
    let m = x_std.len();
    let mut phi = DMatrix::zeros(m, degree + 1);
    for (row, &w) in x_std.iter().enumerate() {
        phi[(row, 0)] = 1.0;
        if degree >= 1 {
            phi[(row, 1)] = w;
        }
        for k in 2..=degree {
            phi[(row, k)] = w * phi[(row, k - 1)] - (k as f64 - 1.0) * phi[(row, k - 2)];
        }
    }
    phi
}

/// Least-squares fit of every payload column on Hermite polynomials in the
/// standardized conditioning variable; returns the fitted values.
///
/// The requested degree drops automatically when the conditioning values
/// carry no spread (all paths equal, as at `t_0 = 0`) or when the design is
/// numerically rank deficient.
fn fit_hermite(x: &[f64], y: ArrayView2<f64>, degree: usize) -> Result<Estimate> {
    let m = x.len();
    let n = y.ncols();
    let requested = degree;
    let mean = x.iter().sum::<f64>() / m as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
    let std = var.sqrt();

    let (x_std, mut degree) = if std == 0.0 || !std.is_normal() {
        (vec![0.0; m], 0)
    } else {
        (x.iter().map(|v| (v - mean) / std).collect(), degree)
    };
    // a polynomial through M points of degree >= M would be interpolation,
    // not regression; cap well below that
    degree = degree.min(m - 1);

    let rhs = DMatrix::from_fn(m, n, |i, j| y[[i, j]]);
    let mut truncated = false;
    loop {
        let phi = hermite_design(&x_std, degree);
        let qr = phi.clone().qr();
        let r = qr.r();
        let svals = r.clone().svd(false, false).singular_values;
        let s_max = svals.iter().cloned().fold(0.0f64, f64::max);
        let s_min = svals.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
        if condition > CONDITION_LIMIT {
            if degree == 0 {
                return Err(Error::DegenerateRegression(format!(
                    "constant design is singular (condition {condition:e})"
                )));
            }
            degree -= 1;
            truncated = true;
            continue;
        }
        let qt_y = qr.q().transpose() * &rhs;
        let coeffs = match r.solve_upper_triangular(&qt_y) {
            Some(c) => c,
            None => {
                if degree == 0 {
                    return Err(Error::DegenerateRegression(
                        "triangular solve failed at degree zero".into(),
                    ));
                }
                degree -= 1;
                truncated = true;
                continue;
            }
        };
        let fitted = phi * coeffs;
        let mut values = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                values[[i, j]] = fitted[(i, j)];
            }
        }
        return Ok(Estimate {
            values,
            diagnostics: FitDiagnostics {
                requested_degree: requested,
                effective_degree: degree,
                condition,
                truncated,
            },
        });
    }
}
