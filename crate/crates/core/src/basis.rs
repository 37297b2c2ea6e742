//! Dirichlet eigenbasis of the negative Laplacian on an interval, plus the
//! fixed quadrature rule used for every inner product in the crate.
//!
//! On `(0, length)` the operator `-d^2/dx^2` with zero boundary conditions has
//! eigenvalues `lambda_k = (k pi / length)^2` and orthonormal eigenfunctions
//! `phi_k(x) = sqrt(2/length) sin(k pi x / length)`, `k = 1, 2, ...`. A
//! [`SpectralBasis`] holds the first `modes` of these together with a
//! composite Gauss-Legendre rule, so projections and reconstructions are
//! plain weighted sums over precomputed node values.
//!
//! Quadrature resolution is expressed in panels of four Gauss-Legendre points
//! each. Four points integrate polynomials up to degree seven exactly per
//! panel; resolving mode `k` to around 1e-10 takes a few panels per
//! oscillation, which is why [`SpectralBasis::default_panels`] scales with the
//! mode count instead of staying constant.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Open interval `(0, length)` on which the equation lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalDomain {
    length: f64,
}

impl IntervalDomain {
    pub fn new(length: f64) -> Result<Self> {
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "interval length must be finite and positive, got {length}"
            )));
        }
        Ok(IntervalDomain { length })
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

/// Composite Gauss-Legendre rule on `[0, length]`, four points per panel.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

// Four-point Gauss-Legendre abscissae/weights on [-1, 1], from the closed
// forms x = +-sqrt(3/7 -+ 2/7 sqrt(6/5)), w = (18 +- sqrt(30))/36.
fn gauss_legendre_4() -> ([f64; 4], [f64; 4]) {
    let s = (6.0f64 / 5.0).sqrt();
    let x_inner = (3.0 / 7.0 - 2.0 / 7.0 * s).sqrt();
    let x_outer = (3.0 / 7.0 + 2.0 / 7.0 * s).sqrt();
    let w_inner = (18.0 + 30.0f64.sqrt()) / 36.0;
    let w_outer = (18.0 - 30.0f64.sqrt()) / 36.0;
    (
        [-x_outer, -x_inner, x_inner, x_outer],
        [w_outer, w_inner, w_inner, w_outer],
    )
}

impl QuadratureRule {
    /// Build the rule with `panels` equal panels over `[0, length]`.
    pub fn new(domain: IntervalDomain, panels: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one panel".into(),
            ));
        }
        let (xs, ws) = gauss_legendre_4();
        let h = domain.length() / panels as f64;
        let mut nodes = Vec::with_capacity(4 * panels);
        let mut weights = Vec::with_capacity(4 * panels);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for i in 0..4 {
                nodes.push(mid + 0.5 * h * xs[i]);
                weights.push(0.5 * h * ws[i]);
            }
        }
        Ok(QuadratureRule {
            nodes,
            weights,
            panels,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// Integrate a function over the interval.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// First `modes` Dirichlet eigenpairs with their quadrature rule and
/// precomputed eigenfunction values at the nodes.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: IntervalDomain,
    modes: usize,
    eigenvalues: Vec<f64>,
    quadrature: QuadratureRule,
    /// `modes x Q`: `phi_nodes[[i, q]] = phi_{i+1}(x_q)`.
    phi_nodes: Array2<f64>,
    /// `Q x modes`: `proj_weights[[q, i]] = w_q phi_{i+1}(x_q)`, so that
    /// projecting a vector of node values is a single matrix product.
    proj_weights: Array2<f64>,
}

impl SpectralBasis {
    /// Panel count used when the caller has no opinion: enough panels that
    /// orthonormality of the first `modes` eigenfunctions holds to 1e-10.
    pub fn default_panels(modes: usize) -> usize {
        (4 * modes).max(64)
    }

    pub fn new(domain: IntervalDomain, modes: usize, panels: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument(
                "basis needs at least one mode".into(),
            ));
        }
        if panels < modes {
            return Err(Error::InvalidArgument(format!(
                "{panels} quadrature panels cannot resolve {modes} modes; need panels >= modes"
            )));
        }
        let quadrature = QuadratureRule::new(domain, panels)?;
        let length = domain.length();
        let eigenvalues: Vec<f64> = (1..=modes)
            .map(|k| {
                let f = k as f64 * std::f64::consts::PI / length;
                f * f
            })
            .collect();
        let q = quadrature.nodes().len();
        let mut phi_nodes = Array2::zeros((modes, q));
        let mut proj_weights = Array2::zeros((q, modes));
        for i in 0..modes {
            for (qi, (&x, &w)) in quadrature
                .nodes()
                .iter()
                .zip(quadrature.weights())
                .enumerate()
            {
                let v = eigenfunction_value(length, i, x);
                phi_nodes[[i, qi]] = v;
                proj_weights[[qi, i]] = w * v;
            }
        }
        Ok(SpectralBasis {
            domain,
            modes,
            eigenvalues,
            quadrature,
            phi_nodes,
            proj_weights,
        })
    }

    /// Convenience constructor using [`SpectralBasis::default_panels`].
    pub fn with_default_quadrature(domain: IntervalDomain, modes: usize) -> Result<Self> {
        Self::new(domain, modes, Self::default_panels(modes))
    }

    pub fn domain(&self) -> IntervalDomain {
        self.domain
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Eigenvalues in ascending order; index `i` holds `((i+1) pi / length)^2`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    /// Eigenfunction for mode index `i` (frequency `i + 1`) at `x`.
    pub fn eigenfunction(&self, i: usize, x: f64) -> f64 {
        eigenfunction_value(self.domain.length(), i, x)
    }

    /// `modes x Q` eigenfunction values at the quadrature nodes.
    pub fn eigenfunctions_at_nodes(&self) -> &Array2<f64> {
        &self.phi_nodes
    }

    /// `Q x modes` matrix turning node values into coefficients.
    pub fn projection_weights(&self) -> &Array2<f64> {
        &self.proj_weights
    }

    /// Coefficients of the L2 projection of `g` onto the span of the basis.
    ///
    /// `g` is sampled at the quadrature nodes only; a non-finite value at any
    /// node is reported as an input error rather than poisoning the sums.
    pub fn project(&self, g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let nodes = self.quadrature.nodes();
        let mut values = Vec::with_capacity(nodes.len());
        for &x in nodes {
            let v = g(x);
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "function evaluated to {v} at quadrature node x = {x}"
                )));
            }
            values.push(v);
        }
        Ok(self.project_node_values(&values))
    }

    /// Projection given values already sampled at the quadrature nodes.
    pub fn project_node_values(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.quadrature.nodes().len());
        let mut coeffs = vec![0.0; self.modes];
        for i in 0..self.modes {
            let mut acc = 0.0;
            for (q, &v) in values.iter().enumerate() {
                acc += self.proj_weights[[q, i]] * v;
            }
            coeffs[i] = acc;
        }
        coeffs
    }

    /// Evaluate the basis expansion with the given coefficients at `x`.
    pub fn reconstruct(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        if coeffs.len() != self.modes {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.modes,
                coeffs.len()
            )));
        }
        let length = self.domain.length();
        Ok(coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * eigenfunction_value(length, i, x))
            .sum())
    }

    /// Squared L2 norm of the expansion, which by orthonormality is just the
    /// squared Euclidean norm of the coefficients.
    pub fn l2_norm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().map(|c| c * c).sum()
    }
}

fn eigenfunction_value(length: f64, mode_index: usize, x: f64) -> f64 {
    let k = (mode_index + 1) as f64;
    (2.0 / length).sqrt() * (k * std::f64::consts::PI * x / length).sin()
}
