//! Long-run population dynamics of threshold lending policies.
//!
//! A population's repayment probabilities are modeled as a mean-parameterized
//! Beta distribution `Beta(c*mu, c*(1-mu))`. A lender grants credit above a
//! threshold; granting and withholding credit feed back into the population
//! mean. This crate provides:
//!
//! - [`specfun`]: the regularized incomplete beta function, its inverse, and
//!   tail moments of the mean-parameterized Beta family;
//! - [`population`]: population states and moment fits from histograms;
//! - [`policy`]: the analytic family of fair thresholding policies
//!   (demographic parity, equality of opportunity, the equalized-odds
//!   intersection, blindness) plus fixed thresholds;
//! - [`dynamics`]: one-step and trajectory evolution of group means, with
//!   optional misestimation of individual repayment probabilities;
//! - [`equilibrium`]: fixed points of fixed-threshold dynamics, equilibrium
//!   curves, outcome classification, and uniqueness scans;
//! - [`control`]: lender utility, greedy and discounted-optimal policies via
//!   value iteration on a monotone-cubic interpolant, basin/bifurcation
//!   detection, and policy-floor checks;
//! - [`ingest`]: credit-score tables (CDF + delinquency) to fitted Beta
//!   population states;
//! - [`quad`] and [`selfcheck`]: an independent quadrature oracle and the
//!   identity suite built on it.
//!
//! Grid scans, Bellman sweeps and basin detection are data-parallel; the
//! default `parallel` feature runs them on rayon, and disabling it yields a
//! sequential build with identical results.

pub mod control;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod ingest;
pub mod policy;
pub mod population;
pub mod quad;
pub mod selfcheck;
pub mod specfun;

mod interp;
mod par;

pub use error::{Error, Result};
