//! The analytic family of fair thresholding policies and fixed thresholds.
//!
//! A fair policy grants loans above the group-specific threshold
//! `A = I^{-1}_{1-s}(c*mu + k1, c*(1-mu) + k2)`, where `s` is the proportion
//! being equalized across groups. The offsets select the fairness notion:
//! `(0,0)` equalizes the selection rate (demographic parity), `(1,0)` the
//! true-positive rate (equality of opportunity), `(0,1)` the false-positive
//! rate, and the `k -> infinity` limit erases the group dependence entirely
//! (blindness). Equalized odds — equal TPR and FPR simultaneously — has no
//! closed form and is exposed as a two-group intersection solve.
//!
//! Every member of the family is monotone in the group mean: a group with a
//! lower mean never faces a stricter threshold.

use crate::error::{Error, Result};
use crate::population::PopulationState;
use crate::specfun::{inv_reg_inc_beta, reg_inc_beta_upper, BetaParams};
use serde::Serialize;

/// Which equal-treatment notion a policy encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FairnessNotion {
    DemographicParity,
    EqualityOfOpportunity,
    EqualizedOdds,
    Blind,
    Custom,
}

/// A fair thresholding policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FairPolicy {
    /// The `(s, k1, k2)` family described at the module level.
    Family {
        notion: FairnessNotion,
        s: f64,
        k1: f64,
        k2: f64,
    },
    /// Joint two-group policy equalizing TPR and FPR simultaneously; the
    /// rate is solved per pair of states, so thresholds only exist jointly.
    EqualizedOdds,
    /// One shared threshold for every group. Semantically the k -> infinity
    /// limit of the family; implemented directly because pushing the
    /// sentinel through the inverse is numerically useless.
    Blind { threshold: f64 },
}

fn check_rate_open(s: f64) -> Result<()> {
    if s.is_nan() || s <= 0.0 || s >= 1.0 {
        return Err(Error::Domain(format!(
            "equal-treatment proportion must lie strictly inside (0,1), got {s}; \
             use a fixed policy for the degenerate rates"
        )));
    }
    Ok(())
}

impl FairPolicy {
    /// Equal selection rate `s` across groups.
    pub fn demographic_parity(s: f64) -> Result<Self> {
        check_rate_open(s)?;
        Ok(FairPolicy::Family {
            notion: FairnessNotion::DemographicParity,
            s,
            k1: 0.0,
            k2: 0.0,
        })
    }

    /// Equal true-positive rate `s` across groups.
    pub fn equality_of_opportunity(s: f64) -> Result<Self> {
        check_rate_open(s)?;
        Ok(FairPolicy::Family {
            notion: FairnessNotion::EqualityOfOpportunity,
            s,
            k1: 1.0,
            k2: 0.0,
        })
    }

    /// Arbitrary member of the family. The closed rates 0 and 1 are allowed
    /// here (they reduce to the all/none thresholds exactly).
    pub fn custom(s: f64, k1: f64, k2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || s.is_nan() {
            return Err(Error::Domain(format!(
                "equal-treatment proportion must lie in [0,1], got {s}"
            )));
        }
        if !k1.is_finite() || !k2.is_finite() {
            return Err(Error::Domain(
                "offsets must be finite; blindness has its own constructor".to_string(),
            ));
        }
        Ok(FairPolicy::Family {
            notion: FairnessNotion::Custom,
            s,
            k1,
            k2,
        })
    }

    pub fn equalized_odds() -> Self {
        FairPolicy::EqualizedOdds
    }

    /// Group-independent threshold.
    pub fn blind(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
            return Err(Error::Domain(format!(
                "threshold must lie in [0,1], got {threshold}"
            )));
        }
        Ok(FairPolicy::Blind { threshold })
    }

    pub fn notion(&self) -> FairnessNotion {
        match self {
            FairPolicy::Family { notion, .. } => *notion,
            FairPolicy::EqualizedOdds => FairnessNotion::EqualizedOdds,
            FairPolicy::Blind { .. } => FairnessNotion::Blind,
        }
    }

    /// The `(k1, k2)` offsets, with the infinite sentinel for blindness.
    pub fn offsets(&self) -> Option<(f64, f64)> {
        match self {
            FairPolicy::Family { k1, k2, .. } => Some((*k1, *k2)),
            FairPolicy::Blind { .. } => Some((f64::INFINITY, f64::INFINITY)),
            FairPolicy::EqualizedOdds => None,
        }
    }
}

/// Construct the blindness policy (shared threshold for every group).
pub fn blind_threshold(threshold: f64) -> Result<FairPolicy> {
    FairPolicy::blind(threshold)
}

/// A constant threshold, independent of the population state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPolicy {
    pub threshold: f64,
}

impl FixedPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
            return Err(Error::Domain(format!(
                "threshold must lie in [0,1], got {threshold}"
            )));
        }
        Ok(FixedPolicy { threshold })
    }
}

/// Beta parameters shifted by the policy offsets, validating the bounds
/// `k1 > -c*mu` and `k2 > -c*(1-mu)` that keep the shapes positive.
fn shifted_params(state: &PopulationState, k1: f64, k2: f64) -> Result<BetaParams> {
    let base = state.beta_params();
    let a = base.a() + k1;
    let b = base.b() + k2;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::ParameterBound(format!(
            "offsets (k1={k1}, k2={k2}) require k1 > {} and k2 > {} for mu={}, c={}",
            -base.a(),
            -base.b(),
            state.mean(),
            state.shape()
        )));
    }
    BetaParams::new(a, b)
}

/// Threshold assigned to one group by a fair policy.
///
/// Monotone non-decreasing in the group mean for fixed `(s, k1, k2)`, so a
/// disadvantaged group never faces a stricter threshold. Equalized odds has
/// no per-group threshold; use [`fair_thresholds`] for it.
pub fn fair_threshold(policy: &FairPolicy, state: &PopulationState) -> Result<f64> {
    match policy {
        FairPolicy::Family { s, k1, k2, .. } => {
            let shifted = shifted_params(state, *k1, *k2)?;
            inv_reg_inc_beta(1.0 - s, &shifted)
        }
        FairPolicy::Blind { threshold } => Ok(*threshold),
        FairPolicy::EqualizedOdds => Err(Error::Domain(
            "equalized odds defines thresholds jointly over a pair of groups; \
             use fair_thresholds"
                .to_string(),
        )),
    }
}

/// Per-group thresholds of a joint fair policy.
///
/// Family policies require a shared shape parameter across groups (the
/// family's fairness guarantees are stated for equal shapes); blindness does
/// not touch the state at all.
pub fn fair_thresholds(policy: &FairPolicy, states: &[PopulationState]) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::GroupCount {
            expected: 1,
            got: 0,
        });
    }
    match policy {
        FairPolicy::Blind { threshold } => Ok(vec![*threshold; states.len()]),
        FairPolicy::Family { .. } => {
            require_shared_shape(states)?;
            states.iter().map(|s| fair_threshold(policy, s)).collect()
        }
        FairPolicy::EqualizedOdds => {
            if states.len() != 2 {
                return Err(Error::GroupCount {
                    expected: 2,
                    got: states.len(),
                });
            }
            match equalized_odds_intersection(&states[0], &states[1])? {
                Some(sol) => Ok(vec![sol.thresholds.0, sol.thresholds.1]),
                None => Err(Error::Domain(format!(
                    "no non-trivial equalized-odds threshold exists for means ({}, {})",
                    states[0].mean(),
                    states[1].mean()
                ))),
            }
        }
    }
}

fn require_shared_shape(states: &[PopulationState]) -> Result<()> {
    let c0 = states[0].shape();
    for s in &states[1..] {
        if (s.shape() - c0).abs() > 1e-12 * c0.max(1.0) {
            return Err(Error::ShapeMismatch(format!(
                "joint fair policies require equal shapes, got {} and {}",
                c0,
                s.shape()
            )));
        }
    }
    Ok(())
}

/// The rate a policy's threshold realizes on a state — the quantity that
/// [`fair_threshold`] inverts: selection rate for demographic parity,
/// true-positive rate for equality of opportunity, and so on through the
/// offsets. For equalized odds this reports the TPR side.
pub fn achieved_proportion(
    policy: &FairPolicy,
    threshold: f64,
    state: &PopulationState,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
        return Err(Error::Domain(format!(
            "threshold must lie in [0,1], got {threshold}"
        )));
    }
    let (k1, k2) = match policy {
        FairPolicy::Family { k1, k2, .. } => (*k1, *k2),
        FairPolicy::EqualizedOdds => (1.0, 0.0),
        FairPolicy::Blind { .. } => {
            return Err(Error::Domain(
                "blindness does not fix an equal-treatment rate".to_string(),
            ))
        }
    };
    let shifted = shifted_params(state, k1, k2)?;
    reg_inc_beta_upper(threshold, &shifted)
}

/// The unique non-trivial equalized-odds point for a pair of groups, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqualizedOddsSolution {
    /// Shared true-positive rate.
    pub s_tpr: f64,
    /// Per-group thresholds (same order as the inputs).
    pub thresholds: (f64, f64),
    /// Shared false-positive rate at those thresholds.
    pub false_positive_rate: f64,
}

fn tpr_threshold(state: &PopulationState, s: f64) -> Result<f64> {
    let shifted = shifted_params(state, 1.0, 0.0)?;
    inv_reg_inc_beta(1.0 - s, &shifted)
}

fn fpr_at(state: &PopulationState, threshold: f64) -> Result<f64> {
    let shifted = shifted_params(state, 0.0, 1.0)?;
    reg_inc_beta_upper(threshold, &shifted)
}

/// Solve for the one non-trivial rate equalizing both TPR and FPR across two
/// groups, by scanning the FPR gap along the equal-TPR family for a sign
/// change and bisecting.
///
/// Returns `Ok(None)` when only the trivial rates (accept all / reject all)
/// satisfy both constraints — which is the generic situation for groups
/// whose score distributions dominate one another. Identical groups admit
/// every rate; the canonical `s = 1/2` point is returned for them.
pub fn equalized_odds_intersection(
    state_i: &PopulationState,
    state_j: &PopulationState,
) -> Result<Option<EqualizedOddsSolution>> {
    require_shared_shape(&[*state_i, *state_j])?;

    if (state_i.mean() - state_j.mean()).abs() <= 1e-12 {
        let s = 0.5;
        let a = tpr_threshold(state_i, s)?;
        return Ok(Some(EqualizedOddsSolution {
            s_tpr: s,
            thresholds: (a, a),
            false_positive_rate: fpr_at(state_i, a)?,
        }));
    }

    let gap = |s: f64| -> Result<f64> {
        let ai = tpr_threshold(state_i, s)?;
        let aj = tpr_threshold(state_j, s)?;
        Ok(fpr_at(state_i, ai)? - fpr_at(state_j, aj)?)
    };

    const SCAN: usize = 256;
    let mut prev: Option<(f64, f64)> = None;
    for k in 1..SCAN {
        let s = k as f64 / SCAN as f64;
        let g = gap(s)?;
        if let Some((s_prev, g_prev)) = prev {
            if g_prev * g < 0.0 {
                // Bisect the bracket down to the working precision of s.
                let (mut lo, mut hi) = (s_prev, s);
                let (mut g_lo, _) = (g_prev, g);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let g_mid = gap(mid)?;
                    if g_mid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (g_mid > 0.0) == (g_lo > 0.0) {
                        lo = mid;
                        g_lo = g_mid;
                    } else {
                        hi = mid;
                    }
                }
                let s_star = 0.5 * (lo + hi);
                let ai = tpr_threshold(state_i, s_star)?;
                let aj = tpr_threshold(state_j, s_star)?;
                return Ok(Some(EqualizedOddsSolution {
                    s_tpr: s_star,
                    thresholds: (ai, aj),
                    false_positive_rate: 0.5 * (fpr_at(state_i, ai)? + fpr_at(state_j, aj)?),
                }));
            }
        }
        prev = Some((s, g));
    }
    Ok(None)
}
