//! Named benchmark problems with known structure.
//!
//! Each entry fixes a driver and terminal datum over a configurable interval
//! length and horizon. Where the solution is known in closed form the catalog
//! also hands out the matching [`OracleSolution`], built for whatever mode
//! count the caller is solving with:
//!
//! | name            | driver            | terminal datum          | closed form |
//! |-----------------|-------------------|-------------------------|-------------|
//! | `heat_phi1`     | none              | first eigenfunction     | yes         |
//! | `heat_parabola` | none              | `x (L - x)`             | yes         |
//! | `linear_wiener` | none              | `phi_1(x) W(T)`         | yes         |
//! | `reaction`      | `sin(y) + sin(pi x / L)` | `x (L - x)`      | no (noise-free reference) |
//! | `coupled`       | `y + z`           | `x (L - x) W(T)`        | yes         |
//!
//! `reaction` has no closed form; pair it with a noise-free Runge-Kutta
//! reference (its data are deterministic). The rest are affine in the
//! Brownian value, which is what [`OracleSolution`] represents.

use crate::basis::{IntervalDomain, SpectralBasis};
use crate::error::{Error, Result};
use crate::harness::OracleSolution;
use crate::problem::{BspdeProblem, Driver, TerminalDatum};

/// Names accepted by [`problem`] and [`oracle`], in presentation order.
pub const NAMES: [&str; 5] = [
    "heat_phi1",
    "heat_parabola",
    "linear_wiener",
    "reaction",
    "coupled",
];

/// One-line description of a catalog entry.
pub fn describe(name: &str) -> Result<&'static str> {
    Ok(match name {
        "heat_phi1" => "driverless, first-eigenfunction terminal; single decaying mode",
        "heat_parabola" => "driverless, parabola terminal; all odd modes decay",
        "linear_wiener" => "driverless, first-eigenfunction terminal scaled by W(T)",
        "reaction" => "sine reaction term with spatial forcing, parabola terminal",
        "coupled" => "driver y + z, parabola terminal scaled by W(T)",
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown catalog problem '{other}' (known: {})",
                NAMES.join(", ")
            )))
        }
    })
}

/// Build a catalog problem over `(0, length)` with the given horizon.
pub fn problem(name: &str, length: f64, horizon: f64) -> Result<BspdeProblem> {
    let domain = IntervalDomain::new(length)?;
    let first_mode = move |x: f64| (2.0 / length).sqrt() * (std::f64::consts::PI * x / length).sin();
    let parabola = move |x: f64| x * (length - x);
    match name {
        "heat_phi1" => BspdeProblem::new(
            domain,
            horizon,
            Driver::zero(),
            TerminalDatum::deterministic(first_mode),
        ),
        "heat_parabola" => BspdeProblem::new(
            domain,
            horizon,
            Driver::zero(),
            TerminalDatum::deterministic(parabola),
        ),
        "linear_wiener" => BspdeProblem::new(
            domain,
            horizon,
            Driver::zero(),
            TerminalDatum::wiener(move |x, w| first_mode(x) * w),
        ),
        "reaction" => BspdeProblem::new(
            domain,
            horizon,
            Driver::new(
                move |_t, x, y, _z| y.sin() + (std::f64::consts::PI * x / length).sin(),
                1.0,
                0.0,
            )?,
            TerminalDatum::deterministic(parabola),
        ),
        "coupled" => BspdeProblem::new(
            domain,
            horizon,
            Driver::new(|_t, _x, y, z| y + z, 1.0, 0.0)?,
            TerminalDatum::wiener(move |x, w| parabola(x) * w),
        ),
        other => Err(Error::InvalidArgument(format!(
            "unknown catalog problem '{other}' (known: {})",
            NAMES.join(", ")
        ))),
    }
}

/// The closed-form solution of a catalog problem, projected on `basis`, or
/// `None` when the entry has no closed form.
///
/// * Driverless entries follow the heat semigroup mode by mode.
/// * `coupled` (driver `y + z`) stays affine in `w`: writing the solution as
///   `a(t) w + b(t)` per mode, matching drift and noise terms gives
///   `a' = (lambda + 1) a` with `a(T)` the terminal coefficients, and
///   `b' = (lambda + 1) b + a` with `b(T) = 0`, so
///   `a(t) = e^{-(lambda+1)(T-t)} a(T)` and `b(t) = -(T-t) a(t)`.
pub fn oracle(name: &str, basis: &SpectralBasis, horizon: f64) -> Result<Option<OracleSolution>> {
    let prob = problem(name, basis.domain().length(), horizon)?;
    let eigenvalues = basis.eigenvalues().to_vec();
    let n = eigenvalues.len();
    match name {
        "heat_phi1" | "heat_parabola" => {
            let det = prob.project_terminal(basis, 0.0)?;
            Ok(Some(OracleSolution::heat_semigroup(
                eigenvalues,
                horizon,
                det,
                vec![0.0; n],
            )?))
        }
        "linear_wiener" => {
            let wiener = prob.project_terminal(basis, 1.0)?;
            Ok(Some(OracleSolution::heat_semigroup(
                eigenvalues,
                horizon,
                vec![0.0; n],
                wiener,
            )?))
        }
        "coupled" => {
            let wiener = prob.project_terminal(basis, 1.0)?;
            let ev = eigenvalues;
            let ev2 = ev.clone();
            let wiener2 = wiener.clone();
            Ok(Some(OracleSolution::new(
                move |t: f64| {
                    ev.iter()
                        .zip(&wiener)
                        .map(|(l, c)| (-(l + 1.0) * (horizon - t)).exp() * c)
                        .collect()
                },
                move |t: f64| {
                    ev2.iter()
                        .zip(&wiener2)
                        .map(|(l, c)| -(horizon - t) * (-(l + 1.0) * (horizon - t)).exp() * c)
                        .collect()
                },
            )))
        }
        "reaction" => Ok(None),
        other => Err(Error::InvalidArgument(format!(
            "unknown catalog problem '{other}' (known: {})",
            NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cond_exp::Estimator;
    use crate::harness::{error_norms, Reference};
    use crate::paths::{PathEnsemble, TimeGrid};
    use crate::stepper::{solve_backward, StepperConfig};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn every_name_builds_and_describes() {
        for name in NAMES {
            let p = problem(name, 1.0, 0.1).unwrap();
            assert_eq!(p.horizon(), 0.1);
            assert!(!describe(name).unwrap().is_empty());
        }
        assert!(problem("no_such", 1.0, 0.1).is_err());
        assert!(describe("no_such").is_err());
    }

    #[test]
    fn terminal_data_respect_the_boundary_on_other_lengths() {
        for name in NAMES {
            for length in [0.5, 2.0, PI] {
                let p = problem(name, length, 0.05).unwrap();
                let basis =
                    SpectralBasis::with_default_quadrature(p.domain(), 4).unwrap();
                // projection enforces the boundary check internally
                p.project_terminal(&basis, 0.7).unwrap();
            }
        }
    }

    #[test]
    fn first_eigenfunction_projects_to_the_first_unit_vector() {
        let p = problem("heat_phi1", 2.0, 0.1).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 3).unwrap();
        let c = p.project_terminal(&basis, 0.0).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-12);
        assert!(c[1].abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn parabola_coefficients_follow_the_odd_mode_formula() {
        // <x(L-x), phi_k> = sqrt(2/L) (2 (L/(k pi))^3 / L^0) ... computed from
        // the antiderivative: 4 sqrt(2) L^(5/2) / (k pi)^3 for odd k, 0 even
        let length = 1.5f64;
        let p = problem("heat_parabola", length, 0.1).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 4).unwrap();
        let c = p.project_terminal(&basis, 0.0).unwrap();
        for (i, &ci) in c.iter().enumerate() {
            let k = (i + 1) as f64;
            let expected = if (i + 1) % 2 == 1 {
                4.0 * 2.0f64.sqrt() * length.powf(2.5) / (k * PI).powi(3)
            } else {
                0.0
            };
            assert_abs_diff_eq!(ci, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_wiener_oracle_matches_its_per_path_solve() {
        let horizon = 0.04;
        let p = problem("linear_wiener", 1.0, horizon).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 1).unwrap();
        let oracle = oracle("linear_wiener", &basis, horizon).unwrap().unwrap();
        // exact solution at the terminal time equals the terminal datum
        let at_end = oracle.alpha_exact(horizon, 0.8);
        assert_abs_diff_eq!(at_end[0], 0.8, epsilon = 1e-12);
        // discrete solve converges to it: with a fine grid the gap is small
        let grid = TimeGrid::new(horizon, 40).unwrap();
        let ensemble = PathEnsemble::sample(grid, 64, 3).unwrap();
        let config = StepperConfig::new(Estimator::gauss_quadrature(20).unwrap());
        let out = solve_backward(&p, &basis, &ensemble, &config).unwrap();
        let est = error_norms(&out.process, &Reference::Oracle(&oracle), &ensemble).unwrap();
        assert!(est.err_q_max < 1e-6, "got {}", est.err_q_max);
        // the slope estimate carries a first-order-in-mesh bias from the
        // implicit gain, so its integrated error sits near (lambda mesh)^2
        assert!(est.err_r_int < 1e-5, "got {}", est.err_r_int);
    }

    #[test]
    fn coupled_oracle_satisfies_its_terminal_condition_and_decay() {
        let horizon = 0.1;
        let p = problem("coupled", 1.0, horizon).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 3).unwrap();
        let oracle = oracle("coupled", &basis, horizon).unwrap().unwrap();
        let cw = p.project_terminal(&basis, 1.0).unwrap();
        // at t = T: alpha = c w, beta = c
        let a = oracle.alpha_exact(horizon, 1.7);
        let b = oracle.beta_exact(horizon);
        for i in 0..3 {
            assert_abs_diff_eq!(a[i], 1.7 * cw[i], epsilon = 1e-12);
            assert_abs_diff_eq!(b[i], cw[i], epsilon = 1e-12);
        }
        // at earlier times each mode is damped by e^{-(lambda+1)(T-t)}
        let t = 0.03;
        let b_early = oracle.beta_exact(t);
        for i in 0..3 {
            let damp = (-(basis.eigenvalues()[i] + 1.0) * (horizon - t)).exp();
            assert_abs_diff_eq!(b_early[i], damp * cw[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn coupled_solve_approaches_the_closed_form() {
        // one mode, fine grid: the discrete solve should sit within the
        // first-order-in-mesh band of the closed form
        let horizon = 0.04;
        let p = problem("coupled", 1.0, horizon).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 1).unwrap();
        let oracle = oracle("coupled", &basis, horizon).unwrap().unwrap();
        let grid = TimeGrid::new(horizon, 40).unwrap();
        let ensemble = PathEnsemble::sample(grid, 128, 7).unwrap();
        let config = StepperConfig::new(Estimator::gauss_quadrature(20).unwrap());
        let out = solve_backward(&p, &basis, &ensemble, &config).unwrap();
        let est = error_norms(&out.process, &Reference::Oracle(&oracle), &ensemble).unwrap();
        assert!(est.err_q_max < 1e-5, "got {}", est.err_q_max);
        assert!(est.err_r_int < 1e-5, "got {}", est.err_r_int);
    }

    #[test]
    fn reaction_problem_has_no_closed_form_but_a_noise_free_reference() {
        let p = problem("reaction", 1.0, 0.1).unwrap();
        let basis = SpectralBasis::with_default_quadrature(p.domain(), 2).unwrap();
        assert!(oracle("reaction", &basis, 0.1).unwrap().is_none());
        // deterministic data admit the Runge-Kutta reference
        let sol = crate::stepper::solve_deterministic_ode(&p, &basis, 64).unwrap();
        let a = sol.eval(0.0).unwrap();
        assert!(a.iter().all(|v| v.is_finite()));
    }
}
