//! Identity suite validating the special-function kernel against the
//! independent quadrature oracle. Runs under `cargo test` and behind the
//! CLI `selfcheck` verb.

use crate::dynamics::{misestimation_sensitivity, step_mean, DynamicsParams};
use crate::error::Result;
use crate::par;
use crate::population::PopulationState;
use crate::quad;
use crate::specfun::{
    beta_pdf, inv_reg_inc_beta, reg_inc_beta, selected_mean, selected_proportion, BetaParams,
};
use serde::Serialize;

/// Quadrature reference for the upper tail mass `integral of pi over
/// [A, 1]`. Integrates the mirrored density `Beta(u; 1-mu, c)` over
/// `[0, 1-A]` so an endpoint singularity (shape below 1) sits at the left
/// end, where tanh-sinh node positions are exact distances.
pub fn oracle_tail_mass(threshold: f64, mu: f64, c: f64, tol: f64) -> f64 {
    quad::integrate(
        |u| beta_pdf(u, 1.0 - mu, c).unwrap(),
        0.0,
        1.0 - threshold,
        tol,
    )
}

/// Quadrature reference for the tail first moment
/// `integral of x pi(x) over [A, 1]`, mirrored like [`oracle_tail_mass`].
pub fn oracle_tail_first_moment(threshold: f64, mu: f64, c: f64, tol: f64) -> f64 {
    quad::integrate(
        |u| (1.0 - u) * beta_pdf(u, 1.0 - mu, c).unwrap(),
        0.0,
        1.0 - threshold,
        tol,
    )
}

/// Quadrature reference for the full normalization `integral of pi over
/// (0, 1)`, split so each half is singular only at its left end.
pub fn oracle_normalization(mu: f64, c: f64, tol: f64) -> f64 {
    quad::integrate(|x| beta_pdf(x, mu, c).unwrap(), 0.0, 0.5, tol)
        + oracle_tail_mass(0.5, mu, c, tol)
}

/// Worst-case errors across the identity grids, with their tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecfunReport {
    /// max |inv(I(x)) - x| over the grid; tolerance 1e-10.
    pub round_trip_max_err: f64,
    /// I is monotone in x along every grid row.
    pub monotone_ok: bool,
    /// max |mu+ * p+ - tail integral| vs quadrature; tolerance 1e-8.
    pub moment_identity_max_err: f64,
    /// max |integral of the density - 1|; tolerance 1e-8.
    pub normalization_max_err: f64,
    /// max |analytic - central-difference| misestimation derivative;
    /// tolerance 1e-6.
    pub misestimation_fd_max_err: f64,
    pub passed: bool,
}

pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const MOMENT_IDENTITY_TOL: f64 = 1e-8;
pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const MISESTIMATION_FD_TOL: f64 = 1e-6;

const SHAPES: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 20.0];

/// Run the full identity suite. Deterministic; data-parallel across the
/// shape grid.
pub fn specfun_suite() -> Result<SpecfunReport> {
    let mut pairs = Vec::new();
    for &a in &SHAPES {
        for &b in &SHAPES {
            pairs.push((a, b));
        }
    }

    struct PairErrors {
        round_trip: f64,
        monotone: bool,
        moment: f64,
        normalization: f64,
    }

    let per_pair: Vec<Result<PairErrors>> = par::map_slice(&pairs, |&(a, b)| {
        let params = BetaParams::new(a, b)?;
        let mu = params.mean();
        let c = params.concentration();

        let mut round_trip = 0.0_f64;
        let mut monotone = true;
        let mut prev = -1.0;
        for k in 1..=99 {
            let x = k as f64 / 100.0;
            let q = reg_inc_beta(x, &params)?;
            if q < prev {
                monotone = false;
            }
            prev = q;
            // Skewed shapes flatten the CDF to the float grid well inside
            // (0,1): near q = 1 the absolute spacing is ~1.1e-16, so where
            // the density is tiny a whole interval of x maps to the same
            // representable q and no inverse can tell them apart. Test the
            // round trip only where one ulp of q resolves x to better than
            // the 1e-10 tolerance. (Near q = 0 the spacing is relative, so
            // even e-40-scale quantiles stay resolvable.)
            if q == 0.0 || q == 1.0 {
                continue;
            }
            let q_spacing = if q > 0.5 {
                f64::EPSILON
            } else {
                f64::EPSILON * q
            };
            let pdf = beta_pdf(x, mu, c)?;
            if pdf * 1e-10 <= 16.0 * q_spacing {
                continue;
            }
            let back = inv_reg_inc_beta(q, &params)?;
            round_trip = round_trip.max((back - x).abs());
        }

        let mut moment = 0.0_f64;
        for k in 1..=9 {
            let threshold = k as f64 / 10.0;
            let p_plus = selected_proportion(threshold, mu, c)?;
            if p_plus == 0.0 {
                continue;
            }
            let mu_plus = selected_mean(threshold, mu, c)?;
            let tail = oracle_tail_first_moment(threshold, mu, c, 1e-13);
            moment = moment.max((mu_plus * p_plus - tail).abs());
        }

        let total = oracle_normalization(mu, c, 1e-13);
        Ok(PairErrors {
            round_trip,
            monotone,
            moment,
            normalization: (total - 1.0).abs(),
        })
    });

    let mut report = SpecfunReport {
        round_trip_max_err: 0.0,
        monotone_ok: true,
        moment_identity_max_err: 0.0,
        normalization_max_err: 0.0,
        misestimation_fd_max_err: 0.0,
        passed: false,
    };
    for entry in per_pair {
        let e = entry?;
        report.round_trip_max_err = report.round_trip_max_err.max(e.round_trip);
        report.monotone_ok &= e.monotone;
        report.moment_identity_max_err = report.moment_identity_max_err.max(e.moment);
        report.normalization_max_err = report.normalization_max_err.max(e.normalization);
    }

    // Analytic misestimation derivative vs central differences; the update
    // is affine in alpha, so the differences are exact up to rounding.
    let h = 1e-5;
    for &alpha in &[0.2, 0.5, 0.8] {
        for &threshold in &[0.1, 0.5, 0.9] {
            for &mu in &[0.3, 0.6] {
                for &c in &[1.0, 5.0] {
                    let state = PopulationState::new(mu, c)?;
                    let up = step_mean(
                        threshold,
                        &state,
                        &DynamicsParams::new(0.95, 0.15, alpha + h)?,
                    )?;
                    let dn = step_mean(
                        threshold,
                        &state,
                        &DynamicsParams::new(0.95, 0.15, alpha - h)?,
                    )?;
                    let fd = (up - dn) / (2.0 * h);
                    let analytic = misestimation_sensitivity(
                        threshold,
                        &state,
                        &DynamicsParams::new(0.95, 0.15, alpha)?,
                    )?;
                    report.misestimation_fd_max_err =
                        report.misestimation_fd_max_err.max((fd - analytic).abs());
                }
            }
        }
    }

    report.passed = report.round_trip_max_err <= ROUND_TRIP_TOL
        && report.monotone_ok
        && report.moment_identity_max_err <= MOMENT_IDENTITY_TOL
        && report.normalization_max_err <= NORMALIZATION_TOL
        && report.misestimation_fd_max_err <= MISESTIMATION_FD_TOL;
    Ok(report)
}
