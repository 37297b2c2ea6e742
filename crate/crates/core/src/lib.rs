//! Spectral Galerkin solver for backward stochastic heat equations on an
//! interval.
//!
//! The library discretizes terminal-value problems of the form
//!
//! ```text
//! dq(t,x) = ( -d^2q/dx^2 + f(t, x, q, r) ) dt + r(t,x) dW(t),
//! q(T, x) = terminal datum,   q(t, 0) = q(t, length) = 0,
//! ```
//!
//! driven by a single scalar Brownian motion, by expanding `q` and `r` in the
//! Dirichlet Laplacian eigenbasis and stepping the resulting coupled system of
//! coefficient equations backward in time with an implicit scheme. Conditional
//! expectations along simulated paths come from either Hermite-polynomial
//! least squares or Gauss-Hermite quadrature.
//!
//! Entry points:
//! * [`SpectralBasis`] / [`IntervalDomain`] — spatial discretization,
//! * [`TimeGrid`] / [`PathEnsemble`] — time grid and Brownian driver,
//! * [`BspdeProblem`] — problem data (driver and terminal datum),
//! * [`solve_backward`] — the backward sweep itself,
//! * [`catalog`] — ready-made benchmark problems with known solutions,
//! * [`harness`] — convergence and regularity studies over the catalog.

pub mod basis;
pub mod catalog;
pub mod cond_exp;
pub mod error;
pub mod harness;
pub mod paths;
pub mod problem;
pub mod report;
pub mod stepper;

pub use basis::{IntervalDomain, QuadratureRule, SpectralBasis};
pub use cond_exp::{Estimate, Estimator, FitDiagnostics, GaussHermite, Payload};
pub use error::{Error, Result};
pub use paths::{PathEnsemble, TimeGrid};
pub use problem::{AssumptionReport, BspdeProblem, Driver, TerminalDatum};
pub use harness::{
    converge_space, converge_time, error_norms, regularity_probe, ErrorEstimate, OracleSolution,
    Reference, StudySettings, TimeReference,
};
pub use report::{ErrorReport, LevelRow, PicardSummary, RegularityRow, RegularityTable};
pub use stepper::{
    solve_backward, solve_deterministic_ode, CoefficientProcess, DeterministicSolution,
    SolveOutput, SolveStats, StepperConfig,
};
