//! One-step and trajectory evolution of group means under lending policies.
//!
//! The mean update is
//!
//! ```text
//! f(A, mu) = beta * p+(A, mu) * ((1 - alpha) * mu+(A, mu) + alpha * mu)
//!          + nu * (1 - p+(A, mu))
//! ```
//!
//! `beta` scales the benefit flowing back from granted (and repaid) credit,
//! `nu` is the reversion mean for those denied credit, and `alpha` models
//! misestimation of individual repayment probabilities: with `alpha = 0` the
//! selected cohort contributes its true mean `mu+`, with `alpha = 1` the
//! policy is effectively selecting at random within the group and only the
//! group mean `mu` carries through. When a threshold excludes everyone
//! (`p+ = 0`), `mu+` is a 0/0 and the update collapses to its analytic
//! limit `nu`.
//!
//! The update acts on the distribution parameter directly. At the
//! distribution level this is equivalent to transporting the whole density
//! each step onto `Beta(c*f, c*(1-f))` — the shape never moves, so the mean
//! carries the entire state and the process is Markov in `mu` (iterating
//! the update twice equals one step from the once-stepped state).
//!
//! Groups with unequal shapes can be simulated under fixed and per-group
//! optimal rules; the joint fair policies require a shared shape, which is
//! also the regime their parity behavior is understood in.

use crate::control::{reward_from_selection, LenderParams};
use crate::error::{Error, Result};
use crate::policy::{fair_thresholds, FairPolicy, FixedPolicy};
use crate::population::PopulationState;
use crate::specfun::selection_stats;
use serde::Serialize;

/// Evolution constants for one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsParams {
    /// Repayment-benefit scale in [0,1].
    pub beta: f64,
    /// No-loan reversion mean in [0,1].
    pub nu: f64,
    /// Misestimation level in [0,1]; 0 recovers the exact-knowledge model.
    pub alpha: f64,
}

impl DynamicsParams {
    pub fn new(beta: f64, nu: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("nu", nu), ("alpha", alpha)] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Domain(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(DynamicsParams { beta, nu, alpha })
    }

    /// Exact-knowledge dynamics (`alpha = 0`).
    pub fn exact(beta: f64, nu: f64) -> Result<Self> {
        DynamicsParams::new(beta, nu, 0.0)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        DynamicsParams::new(self.beta, self.nu, alpha)
    }
}

/// The update given precomputed selection statistics.
pub(crate) fn step_from_selection(
    p_plus: f64,
    mu_plus: Option<f64>,
    mu: f64,
    params: &DynamicsParams,
) -> f64 {
    match mu_plus {
        None => params.nu,
        Some(mu_plus) => {
            let effective = (1.0 - params.alpha) * mu_plus + params.alpha * mu;
            (params.beta * p_plus * effective + params.nu * (1.0 - p_plus)).clamp(0.0, 1.0)
        }
    }
}

/// One step of the mean update `f(A, mu)`.
pub fn step_mean(threshold: f64, state: &PopulationState, params: &DynamicsParams) -> Result<f64> {
    let (p_plus, mu_plus) = selection_stats(threshold, state.mean(), state.shape())?;
    Ok(step_from_selection(p_plus, mu_plus, state.mean(), params))
}

/// Sensitivity of the update to the misestimation level:
/// `df/dalpha = beta * p+ * (mu - mu+)`.
///
/// Strictly negative for thresholds in (0,1) — misestimation always harms a
/// partially selected group — and zero at A = 0 (`mu+ = mu`) and A = 1
/// (`p+ = 0`).
pub fn misestimation_sensitivity(
    threshold: f64,
    state: &PopulationState,
    params: &DynamicsParams,
) -> Result<f64> {
    let (p_plus, mu_plus) = selection_stats(threshold, state.mean(), state.shape())?;
    Ok(match mu_plus {
        None => 0.0,
        Some(mu_plus) => params.beta * p_plus * (state.mean() - mu_plus),
    })
}

// ---------------------------------------------------------------------------
// policies as threshold rules
// ---------------------------------------------------------------------------

/// Anything that can assign per-group thresholds from the current states.
///
/// Fair policies act jointly (shared rate, per-group thresholds); fixed and
/// optimal policies act on each group independently.
pub trait ThresholdRule {
    fn thresholds(&self, states: &[PopulationState]) -> Result<Vec<f64>>;

    /// Whether the rule's guarantees require all groups to share the shape
    /// parameter. `simulate` pre-validates this.
    fn requires_shared_shape(&self) -> bool {
        false
    }
}

impl ThresholdRule for FairPolicy {
    fn thresholds(&self, states: &[PopulationState]) -> Result<Vec<f64>> {
        fair_thresholds(self, states)
    }

    fn requires_shared_shape(&self) -> bool {
        !matches!(self, FairPolicy::Blind { .. })
    }
}

impl ThresholdRule for FixedPolicy {
    fn thresholds(&self, states: &[PopulationState]) -> Result<Vec<f64>> {
        Ok(vec![self.threshold; states.len()])
    }
}

/// Applies a separate rule to each group — e.g. independently solved
/// optimal policies, the unconstrained setting.
pub struct PerGroup<'a> {
    rules: Vec<&'a dyn ThresholdRule>,
}

impl<'a> PerGroup<'a> {
    pub fn new(rules: Vec<&'a dyn ThresholdRule>) -> Self {
        PerGroup { rules }
    }
}

impl ThresholdRule for PerGroup<'_> {
    fn thresholds(&self, states: &[PopulationState]) -> Result<Vec<f64>> {
        if states.len() != self.rules.len() {
            return Err(Error::GroupCount {
                expected: self.rules.len(),
                got: states.len(),
            });
        }
        states
            .iter()
            .zip(&self.rules)
            .map(|(s, r)| Ok(r.thresholds(std::slice::from_ref(s))?[0]))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// trajectories
// ---------------------------------------------------------------------------

/// Per-group record at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStep {
    pub mu: f64,
    pub threshold: f64,
    pub p_plus: f64,
    /// None when the threshold selects no one (p+ = 0).
    pub mu_plus: Option<f64>,
    pub reward: f64,
}

/// One time step across all groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub groups: Vec<GroupStep>,
}

/// A full simulation record: means, thresholds, selection statistics and
/// lender rewards at t = 0..=horizon, plus a snapshot of the parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub horizon: usize,
    pub shapes: Vec<f64>,
    pub group_params: Vec<DynamicsParams>,
    pub lender: LenderParams,
}

impl Trajectory {
    pub fn group_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn final_means(&self) -> Vec<f64> {
        self.steps
            .last()
            .map(|s| s.groups.iter().map(|g| g.mu).collect())
            .unwrap_or_default()
    }

    /// Mean series of one group over time.
    pub fn mean_series(&self, group: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.groups[group].mu).collect()
    }
}

/// Evolve the groups for `horizon` steps under a threshold rule.
///
/// At each step the thresholds are computed from the current means (jointly
/// for fair policies), the per-step lender reward is recorded, and every
/// mean is advanced by `f`. Records cover t = 0..=horizon inclusive; the
/// row at t also carries the action taken at t.
pub fn simulate(
    groups: &[(PopulationState, DynamicsParams)],
    policy: &dyn ThresholdRule,
    horizon: usize,
    lender: &LenderParams,
) -> Result<Trajectory> {
    if groups.is_empty() {
        return Err(Error::GroupCount {
            expected: 1,
            got: 0,
        });
    }
    if horizon < 1 {
        return Err(Error::Domain("horizon must be at least 1".to_string()));
    }
    let shapes: Vec<f64> = groups.iter().map(|(s, _)| s.shape()).collect();
    if policy.requires_shared_shape() {
        let c0 = shapes[0];
        if shapes.iter().any(|&c| (c - c0).abs() > 1e-12 * c0.max(1.0)) {
            return Err(Error::ShapeMismatch(format!(
                "joint fair policies require equal shapes, got {shapes:?}"
            )));
        }
    }

    let params: Vec<DynamicsParams> = groups.iter().map(|&(_, p)| p).collect();
    let mut states: Vec<PopulationState> = groups.iter().map(|&(s, _)| s).collect();
    let mut steps = Vec::with_capacity(horizon + 1);

    for t in 0..=horizon {
        let thresholds = policy.thresholds(&states)?;
        let mut row = Vec::with_capacity(states.len());
        let mut next = Vec::with_capacity(states.len());
        for (g, state) in states.iter().enumerate() {
            let threshold = thresholds[g];
            let (p_plus, mu_plus) = selection_stats(threshold, state.mean(), state.shape())?;
            row.push(GroupStep {
                mu: state.mean(),
                threshold,
                p_plus,
                mu_plus,
                reward: reward_from_selection(p_plus, mu_plus, lender),
            });
            if t < horizon {
                let mu_next = step_from_selection(p_plus, mu_plus, state.mean(), &params[g]);
                next.push(PopulationState::with_clamped_mean(mu_next, state.shape())?);
            }
        }
        steps.push(StepRecord { t, groups: row });
        if t < horizon {
            states = next;
        }
    }

    Ok(Trajectory {
        steps,
        horizon,
        shapes,
        group_params: params,
        lender: *lender,
    })
}

/// Absolute gap between the two group means, per step and at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityGap {
    pub final_gap: f64,
    pub series: Vec<f64>,
}

pub fn parity_gap(traj: &Trajectory) -> Result<ParityGap> {
    if traj.group_count() != 2 {
        return Err(Error::GroupCount {
            expected: 2,
            got: traj.group_count(),
        });
    }
    let series: Vec<f64> = traj
        .steps
        .iter()
        .map(|s| (s.groups[0].mu - s.groups[1].mu).abs())
        .collect();
    let final_gap = *series.last().expect("non-empty trajectory");
    Ok(ParityGap { final_gap, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use crate::specfun::beta_pdf;

    fn state(mu: f64, c: f64) -> PopulationState {
        PopulationState::new(mu, c).unwrap()
    }

    fn lender() -> LenderParams {
        LenderParams::new(0.25, 0.6).unwrap()
    }

    #[test]
    fn deny_all_reverts_to_nu() {
        let params = DynamicsParams::new(0.9, 0.35, 0.7).unwrap();
        for &mu in &[0.1, 0.5, 0.9] {
            let f = step_mean(1.0, &state(mu, 3.0), &params).unwrap();
            assert_eq!(f, 0.35, "mu={mu}");
        }
    }

    #[test]
    fn accept_all_scales_by_beta() {
        let params = DynamicsParams::exact(0.8, 0.2).unwrap();
        let f = step_mean(0.0, &state(0.6, 2.5), &params).unwrap();
        assert!((f - 0.8 * 0.6).abs() < 1e-14, "got {f}");
    }

    #[test]
    fn uniform_closed_form() {
        // p+ = 0.5, mu+ = 0.75 for the uniform at A = 0.5.
        let params = DynamicsParams::exact(1.0, 0.0).unwrap();
        let f = step_mean(0.5, &state(0.5, 2.0), &params).unwrap();
        assert!((f - 0.375).abs() < 1e-13, "got {f}");
    }

    #[test]
    fn misestimated_step_against_oracle() {
        // 40-digit reference for A=0.4, mu=0.6, c=3, beta=0.9, nu=0.2,
        // alpha=0.3: f = 0.51124378168262745.
        let params = DynamicsParams::new(0.9, 0.2, 0.3).unwrap();
        let f = step_mean(0.4, &state(0.6, 3.0), &params).unwrap();
        assert!((f - 0.511_243_781_682_627_4).abs() < 1e-12, "got {f}");

        // Rebuild the update from quadrature selection statistics.
        let p = quad::integrate(|x| beta_pdf(x, 0.6, 3.0).unwrap(), 0.4, 1.0, 1e-13);
        let mu_plus =
            quad::integrate(|x| x * beta_pdf(x, 0.6, 3.0).unwrap(), 0.4, 1.0, 1e-13) / p;
        let oracle = 0.9 * p * (0.7 * mu_plus + 0.3 * 0.6) + 0.2 * (1.0 - p);
        assert!((f - oracle).abs() < 1e-8, "cf={f} quad={oracle}");
    }

    #[test]
    fn sensitivity_vanishes_at_trivial_thresholds() {
        let params = DynamicsParams::new(1.0, 0.2, 0.5).unwrap();
        assert_eq!(
            misestimation_sensitivity(0.0, &state(0.5, 2.0), &params).unwrap(),
            0.0
        );
        assert_eq!(
            misestimation_sensitivity(1.0, &state(0.5, 2.0), &params).unwrap(),
            0.0
        );
        // Uniform closed form: 0.5 * (0.5 - 0.75) = -0.125.
        let s = misestimation_sensitivity(0.5, &state(0.5, 2.0), &params).unwrap();
        assert!((s + 0.125).abs() < 1e-13, "got {s}");
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        // f is affine in alpha, so central differences are exact to rounding.
        for &a in &[0.25, 0.6] {
            for &mu in &[0.4, 0.7] {
                for &c in &[2.0, 5.0] {
                    let st = state(mu, c);
                    let h = 1e-5;
                    let up = step_mean(a, &st, &DynamicsParams::new(0.95, 0.1, 0.5 + h).unwrap())
                        .unwrap();
                    let dn = step_mean(a, &st, &DynamicsParams::new(0.95, 0.1, 0.5 - h).unwrap())
                        .unwrap();
                    let fd = (up - dn) / (2.0 * h);
                    let formula = misestimation_sensitivity(
                        a,
                        &st,
                        &DynamicsParams::new(0.95, 0.1, 0.5).unwrap(),
                    )
                    .unwrap();
                    assert!(
                        (fd - formula).abs() < 1e-6,
                        "A={a} mu={mu} c={c}: fd={fd} formula={formula}"
                    );
                }
            }
        }
    }

    #[test]
    fn misestimation_strictly_harms_interior_thresholds() {
        let st = state(0.6, 3.0);
        for &a in &[0.2, 0.5, 0.8] {
            let mut prev = f64::INFINITY;
            for &alpha in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                let f = step_mean(a, &st, &DynamicsParams::new(0.95, 0.1, alpha).unwrap())
                    .unwrap();
                assert!(f < prev, "A={a} alpha={alpha}: {f} !< {prev}");
                prev = f;
            }
        }
    }

    #[test]
    fn range_preserved_on_grid() {
        for &a in &[0.0, 0.3, 0.7, 1.0] {
            for &mu in &[0.05, 0.5, 0.95] {
                for &c in &[0.5, 2.0, 20.0] {
                    for &(beta, nu, alpha) in
                        &[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.99, 0.2, 0.4)]
                    {
                        let f = step_mean(
                            a,
                            &state(mu, c),
                            &DynamicsParams::new(beta, nu, alpha).unwrap(),
                        )
                        .unwrap();
                        assert!((0.0..=1.0).contains(&f), "escaped range: {f}");
                    }
                }
            }
        }
    }

    #[test]
    fn markov_in_the_mean() {
        // Two steps from mu0 equals one step from the once-stepped state.
        let params = DynamicsParams::new(0.97, 0.15, 0.1).unwrap();
        let policy = FixedPolicy::new(0.45).unwrap();
        let st = state(0.62, 2.5);
        let traj = simulate(&[(st, params)], &policy, 2, &lender()).unwrap();

        let one = step_mean(0.45, &st, &params).unwrap();
        let two = step_mean(0.45, &state(one, 2.5), &params).unwrap();
        assert!((traj.steps[1].groups[0].mu - one).abs() < 1e-15);
        assert!((traj.steps[2].groups[0].mu - two).abs() < 1e-15);
    }

    #[test]
    fn deny_all_trajectory_jumps_to_nu() {
        let params = DynamicsParams::exact(0.9, 0.3).unwrap();
        let groups = [(state(0.5, 2.0), params), (state(0.8, 2.0), params)];
        let policy = FixedPolicy::new(1.0).unwrap();
        let traj = simulate(&groups, &policy, 1, &lender()).unwrap();
        for g in &traj.steps[1].groups {
            assert_eq!(g.mu, 0.3);
        }
    }

    #[test]
    fn blind_policy_preserves_symmetry() {
        let params = DynamicsParams::exact(0.95, 0.2).unwrap();
        let groups = [(state(0.6, 2.0), params), (state(0.6, 2.0), params)];
        let policy = FairPolicy::blind(0.5).unwrap();
        let traj = simulate(&groups, &policy, 50, &lender()).unwrap();
        for step in &traj.steps {
            assert_eq!(step.groups[0], step.groups[1]);
        }
        let gap = parity_gap(&traj).unwrap();
        assert!(gap.series.iter().all(|&g| g == 0.0));
        assert_eq!(gap.final_gap, 0.0);
    }

    #[test]
    fn equal_treatment_reaches_parity() {
        // Equality of opportunity drives distinct groups together.
        let params = DynamicsParams::exact(0.99, 0.2).unwrap();
        let groups = [(state(0.55, 2.0), params), (state(0.75, 2.0), params)];
        let policy = FairPolicy::equality_of_opportunity(0.5).unwrap();
        let traj = simulate(&groups, &policy, 200, &lender()).unwrap();
        let gap = parity_gap(&traj).unwrap();
        assert!(
            gap.final_gap < 1e-3,
            "groups failed to converge: gap {}",
            gap.final_gap
        );
        // The gap series is eventually non-increasing.
        let tail = &gap.series[gap.series.len() / 2..];
        for w in tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "gap series rose in the tail: {w:?}");
        }
    }

    #[test]
    fn unequal_misestimation_blocks_parity() {
        let base = DynamicsParams::exact(0.99, 0.2).unwrap();
        let groups = [
            (state(0.55, 2.0), base.with_alpha(0.1).unwrap()),
            (state(0.75, 2.0), base.with_alpha(0.4).unwrap()),
        ];
        let policy = FairPolicy::demographic_parity(0.5).unwrap();
        let traj = simulate(&groups, &policy, 1500, &lender()).unwrap();
        let gap = parity_gap(&traj).unwrap();
        assert!(
            gap.final_gap > 1e-3,
            "gap unexpectedly closed: {}",
            gap.final_gap
        );
    }

    #[test]
    fn parity_gap_needs_two_groups() {
        let params = DynamicsParams::exact(0.9, 0.2).unwrap();
        let traj = simulate(
            &[(state(0.5, 2.0), params)],
            &FixedPolicy::new(0.4).unwrap(),
            5,
            &lender(),
        )
        .unwrap();
        assert!(matches!(
            parity_gap(&traj),
            Err(Error::GroupCount { expected: 2, .. })
        ));
    }

    #[test]
    fn shape_mismatch_rejected_for_joint_policies() {
        let params = DynamicsParams::exact(0.9, 0.2).unwrap();
        let groups = [(state(0.5, 2.0), params), (state(0.7, 3.0), params)];
        let policy = FairPolicy::demographic_parity(0.5).unwrap();
        assert!(matches!(
            simulate(&groups, &policy, 5, &lender()),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
