//! Lender utility and optimal thresholding policies.
//!
//! The per-step lender reward for a threshold A on a group with mean mu is
//! `g(A, mu) = p+ * ((1 + R) * mu+ - 1)`: every granted loan returns `1 + R`
//! when repaid and loses the unit when not. The discounted-optimal policy
//! solves `J(mu) = max_A { g(A, mu) + gamma * J(f(A, mu)) }` by synchronous
//! value iteration on a mean grid, with the value function carried between
//! grid nodes by a monotone cubic interpolant and the action maximization
//! done on a coarse threshold grid plus golden-section refinement around the
//! incumbent.
//!
//! Depending on the discount and the initial mean, the optimal policy can
//! split the population into basins converging to different long-run means;
//! [`detect_bifurcation`] maps those basins and locates their boundaries.

use crate::dynamics::{
    parity_gap, simulate, step_from_selection, DynamicsParams, ThresholdRule, Trajectory,
};
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::par;
use crate::policy::FairPolicy;
use crate::population::{PopulationState, MEAN_CLAMP};
use crate::specfun::selection_stats;
use serde::Serialize;

/// Interest and discount defining the institution's utility and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LenderParams {
    /// Interest rate R earned on a repaid unit loan.
    pub interest: f64,
    /// Discount factor, strictly below 1.
    pub discount: f64,
}

impl LenderParams {
    pub fn new(interest: f64, discount: f64) -> Result<Self> {
        if interest < 0.0 || !interest.is_finite() {
            return Err(Error::Domain(format!(
                "interest rate must be non-negative, got {interest}"
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Domain(format!(
                "discount must lie in [0,1), got {discount}"
            )));
        }
        Ok(LenderParams { interest, discount })
    }
}

/// Reward from precomputed selection statistics; 0 when no one is selected.
pub fn reward_from_selection(p_plus: f64, mu_plus: Option<f64>, lender: &LenderParams) -> f64 {
    match mu_plus {
        None => 0.0,
        Some(mu_plus) => p_plus * ((1.0 + lender.interest) * mu_plus - 1.0),
    }
}

/// Per-step lender reward `g(A, mu)`. Negative rewards are loss-making
/// thresholds; `g(1, .) = 0` since nobody is selected.
pub fn reward(threshold: f64, state: &PopulationState, lender: &LenderParams) -> Result<f64> {
    let (p_plus, mu_plus) = selection_stats(threshold, state.mean(), state.shape())?;
    Ok(reward_from_selection(p_plus, mu_plus, lender))
}

/// The myopic (one-step) optimal threshold `1 / (1 + R)`, independent of
/// the population state. Degenerates to 1 at R = 0 (lend only to certain
/// repayers) and tends to 0 as R grows.
pub fn greedy_threshold(lender: &LenderParams) -> f64 {
    1.0 / (1.0 + lender.interest)
}

// ---------------------------------------------------------------------------
// value iteration
// ---------------------------------------------------------------------------

/// Knobs for the Bellman solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Number of mean-grid nodes.
    pub grid_size: usize,
    /// Sup-norm residual at which iteration stops.
    pub tol: f64,
    /// Coarse action-grid size; golden-section refinement runs around the
    /// incumbent maximizer, so this only needs to separate the modes of
    /// `g + gamma J(f)`.
    pub action_grid: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid_size: 513,
            tol: 1e-9,
            action_grid: 257,
        }
    }
}

/// A solved value function and its policy on a mean grid.
#[derive(Debug, Clone, Serialize)]
pub struct ValueFunction {
    mu_grid: Vec<f64>,
    values: Vec<f64>,
    policy: Vec<f64>,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    shape: f64,
    params: DynamicsParams,
    lender: LenderParams,
    action_grid: usize,
    #[serde(skip)]
    interp: MonotoneCubic,
}

impl ValueFunction {
    pub fn mu_grid(&self) -> &[f64] {
        &self.mu_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Maximizing threshold per grid node.
    pub fn policy(&self) -> &[f64] {
        &self.policy
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    pub fn lender(&self) -> &LenderParams {
        &self.lender
    }

    pub fn grid_spacing(&self) -> f64 {
        self.mu_grid[1] - self.mu_grid[0]
    }

    /// Interpolated value at an arbitrary mean.
    pub fn value_at(&self, mu: f64) -> f64 {
        self.interp.eval(mu)
    }

    /// Policy at an arbitrary mean, extracted by re-running the one-step
    /// lookahead maximization against the converged value interpolant.
    /// (Interpolating the policy column itself would smear the policy's
    /// genuine discontinuities, which is exactly what basin detection must
    /// not do.)
    pub fn policy_at(&self, mu: f64) -> Result<f64> {
        let (_, a_star) = maximize_action(
            mu,
            self.shape,
            &self.params,
            &self.lender,
            &self.interp,
            self.action_grid,
        )?;
        Ok(a_star)
    }
}

impl ThresholdRule for ValueFunction {
    fn thresholds(&self, states: &[PopulationState]) -> Result<Vec<f64>> {
        states
            .iter()
            .map(|s| {
                if (s.shape() - self.shape).abs() > 1e-12 * self.shape.max(1.0) {
                    return Err(Error::ShapeMismatch(format!(
                        "value function solved for shape {}, asked about {}",
                        self.shape,
                        s.shape()
                    )));
                }
                self.policy_at(s.mean())
            })
            .collect()
    }
}

/// Objective of the inner maximization: `g(A, mu) + gamma * J(f(A, mu))`.
fn action_value(
    threshold: f64,
    mu: f64,
    shape: f64,
    params: &DynamicsParams,
    lender: &LenderParams,
    value: &MonotoneCubic,
) -> Result<f64> {
    let (p_plus, mu_plus) = selection_stats(threshold, mu, shape)?;
    let g = reward_from_selection(p_plus, mu_plus, lender);
    let next = step_from_selection(p_plus, mu_plus, mu, params);
    Ok(g + lender.discount * value.eval(next.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP)))
}

/// Ties on the coarse grid resolve to the largest threshold within this of
/// the maximum (the most conservative lending), keeping basins reproducible.
const TIE_EPS: f64 = 1e-12;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn maximize_action(
    mu: f64,
    shape: f64,
    params: &DynamicsParams,
    lender: &LenderParams,
    value: &MonotoneCubic,
    action_grid: usize,
) -> Result<(f64, f64)> {
    let m = action_grid;
    let mut row = Vec::with_capacity(m);
    for j in 0..m {
        let a = j as f64 / (m - 1) as f64;
        row.push(action_value(a, mu, shape, params, lender, value)?);
    }
    let vmax = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let best_j = (0..m)
        .rev()
        .find(|&j| row[j] >= vmax - TIE_EPS)
        .expect("non-empty action row");

    // Golden-section refinement between the incumbent's neighbours.
    let h = 1.0 / (m - 1) as f64;
    let mut lo = (best_j as f64 * h - h).max(0.0);
    let mut hi = (best_j as f64 * h + h).min(1.0);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = action_value(x1, mu, shape, params, lender, value)?;
    let mut f2 = action_value(x2, mu, shape, params, lender, value)?;
    for _ in 0..40 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = action_value(x2, mu, shape, params, lender, value)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = action_value(x1, mu, shape, params, lender, value)?;
        }
        if hi - lo < 1e-11 {
            break;
        }
    }
    let (refined_a, refined_v) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if refined_v > vmax {
        Ok((refined_v, refined_a))
    } else {
        Ok((vmax, best_j as f64 * h))
    }
}

/// Solve the discounted Bellman equation by synchronous value iteration.
///
/// Per-node updates within a sweep are independent and run data-parallel;
/// sweeps synchronize on a fresh monotone-cubic interpolant of the values.
/// The operator is a `gamma`-contraction, so the iteration count is bounded
/// by `log(tol (1-gamma) / range) / log(gamma)`; exceeding a padded version
/// of that bound is reported as a convergence failure.
pub fn solve_bellman(
    shape: f64,
    params: &DynamicsParams,
    lender: &LenderParams,
    options: &SolverOptions,
) -> Result<ValueFunction> {
    if options.grid_size < 64 {
        return Err(Error::Domain(format!(
            "grid size must be at least 64, got {}",
            options.grid_size
        )));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".to_string()));
    }
    if options.action_grid < 3 {
        return Err(Error::Domain("action grid must have at least 3 points".to_string()));
    }
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::Domain(format!("shape must be positive, got {shape}")));
    }

    let n = options.grid_size;
    let lo = MEAN_CLAMP;
    let hi = 1.0 - MEAN_CLAMP;
    let mu_grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();

    let mut values = vec![0.0_f64; n];
    let mut policy = vec![0.0_f64; n];
    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut sweep_cap = usize::MAX;
    let gamma = lender.discount;

    let mut sweeps = 0;
    while sweeps < sweep_cap.max(3) {
        sweeps += 1;
        let interp = MonotoneCubic::new(mu_grid.clone(), values.clone());
        let updated: Vec<Result<(f64, f64)>> = par::map_range(n, |i| {
            maximize_action(mu_grid[i], shape, params, lender, &interp, options.action_grid)
        });
        let mut residual = 0.0_f64;
        for (i, entry) in updated.into_iter().enumerate() {
            let (v, a) = entry?;
            residual = residual.max((v - values[i]).abs());
            values[i] = v;
            policy[i] = a;
        }
        residual_history.push(residual);

        if sweeps == 1 {
            // Contraction bound on the remaining sweeps, padded for the
            // interpolation step not being an exact non-expansion.
            sweep_cap = if gamma == 0.0 {
                3
            } else {
                let range = residual.max(options.tol);
                let bound = ((options.tol * (1.0 - gamma) / range).ln() / gamma.ln()).ceil();
                (bound.max(1.0) as usize) * 2 + 20
            };
        }
        if residual <= options.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::Convergence {
            context: "solve_bellman",
            detail: format!(
                "residual {:e} after {} sweeps (cap {})",
                residual_history.last().unwrap_or(&f64::NAN),
                sweeps,
                sweep_cap
            ),
        });
    }

    let interp = MonotoneCubic::new(mu_grid.clone(), values.clone());
    Ok(ValueFunction {
        mu_grid,
        values,
        policy,
        converged,
        residual: *residual_history.last().unwrap(),
        iterations: sweeps,
        residual_history,
        shape,
        params: *params,
        lender: *lender,
        action_grid: options.action_grid,
        interp,
    })
}

// ---------------------------------------------------------------------------
// basins and bifurcations
// ---------------------------------------------------------------------------

/// Knobs for basin detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationOptions {
    /// Steps to iterate each initial mean before reading off its limit.
    pub horizon: usize,
    /// Resolution of the dense policy table the simulations run against.
    pub policy_resolution: usize,
    /// Limit means closer than this belong to the same cluster.
    pub cluster_gap: f64,
    /// Basin boundaries are bisected down to this width.
    pub boundary_tol: f64,
}

impl Default for BifurcationOptions {
    fn default() -> Self {
        BifurcationOptions {
            horizon: 4000,
            policy_resolution: 4097,
            cluster_gap: 1e-3,
            boundary_tol: 1e-3,
        }
    }
}

/// A maximal run of initial means converging to the same limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Basin {
    pub mu0_lo: f64,
    pub mu0_hi: f64,
    pub limit_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub basins: Vec<Basin>,
    /// Bisected boundary estimates between adjacent basins.
    pub boundaries: Vec<f64>,
    /// (initial mean, limit mean) for every grid sample.
    pub samples: Vec<(f64, f64)>,
}

impl BifurcationReport {
    pub fn cluster_count(&self) -> usize {
        self.basins.len()
    }
}

/// Dense tabulation of the extracted policy, so that the many basin
/// trajectories do not re-run the action maximization every step.
/// Lookups interpolate linearly between table nodes: a nearest-node table
/// would quantize the policy into micro-plateaus whose composed map gains
/// spurious fixed points near slow attractors (the displacement is
/// amplified by 1/(1 - g')), which shows up as basin limits scattered by
/// ~1e-3. Linear interpolation keeps the composed map continuous; genuine
/// policy discontinuities are smeared by at most one table cell, far below
/// the boundary tolerance.
struct PolicyTable {
    lo: f64,
    step: f64,
    thresholds: Vec<f64>,
}

impl PolicyTable {
    fn build(vf: &ValueFunction, resolution: usize) -> Result<Self> {
        let lo = MEAN_CLAMP;
        let hi = 1.0 - MEAN_CLAMP;
        let step = (hi - lo) / (resolution - 1) as f64;
        let entries: Vec<Result<f64>> =
            par::map_range(resolution, |k| vf.policy_at(lo + step * k as f64));
        let thresholds = entries.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(PolicyTable {
            lo,
            step,
            thresholds,
        })
    }

    fn threshold(&self, mu: f64) -> f64 {
        let pos = ((mu - self.lo) / self.step).clamp(0.0, (self.thresholds.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.thresholds.len() - 2);
        let t = pos - k as f64;
        self.thresholds[k] * (1.0 - t) + self.thresholds[k + 1] * t
    }
}

fn iterate_to_limit(
    mu0: f64,
    shape: f64,
    params: &DynamicsParams,
    table: &PolicyTable,
    horizon: usize,
) -> Result<f64> {
    let mut mu = mu0.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP);
    for _ in 0..horizon {
        let a = table.threshold(mu);
        let (p_plus, mu_plus) = selection_stats(a, mu, shape)?;
        mu = step_from_selection(p_plus, mu_plus, mu, params)
            .clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP);
    }
    Ok(mu)
}

/// Simulate every initial mean under the extracted optimal policy, cluster
/// the limits, and bisect the boundaries between adjacent clusters.
pub fn detect_bifurcation(
    vf: &ValueFunction,
    mu0_grid: &[f64],
    options: &BifurcationOptions,
) -> Result<BifurcationReport> {
    if mu0_grid.len() < 2 {
        return Err(Error::Domain(
            "need at least two initial means to scan for basins".to_string(),
        ));
    }
    if mu0_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "initial means must be strictly increasing".to_string(),
        ));
    }

    let table = PolicyTable::build(vf, options.policy_resolution.max(2))?;
    let shape = vf.shape();
    let params = *vf.params();

    let limits: Vec<Result<f64>> = par::map_slice(mu0_grid, |&mu0| {
        iterate_to_limit(mu0, shape, &params, &table, options.horizon)
    });
    let limits = limits.into_iter().collect::<Result<Vec<f64>>>()?;
    let samples: Vec<(f64, f64)> = mu0_grid.iter().cloned().zip(limits.iter().cloned()).collect();

    // Group consecutive samples whose limits agree within the cluster gap.
    let mut basins: Vec<Basin> = Vec::new();
    for &(mu0, limit) in &samples {
        match basins.last_mut() {
            Some(b) if (limit - b.limit_mean).abs() <= options.cluster_gap => {
                b.mu0_hi = mu0;
                b.limit_mean = 0.5 * (b.limit_mean + limit);
            }
            _ => basins.push(Basin {
                mu0_lo: mu0,
                mu0_hi: mu0,
                limit_mean: limit,
            }),
        }
    }

    // Bisect each boundary between adjacent basins.
    let mut boundaries = Vec::new();
    for w in basins.windows(2) {
        let (left, right) = (w[0], w[1]);
        let mut lo = left.mu0_hi;
        let mut hi = right.mu0_lo;
        while hi - lo > options.boundary_tol {
            let mid = 0.5 * (lo + hi);
            let limit = iterate_to_limit(mid, shape, &params, &table, options.horizon)?;
            if (limit - left.limit_mean).abs() <= (limit - right.limit_mean).abs() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        boundaries.push(0.5 * (lo + hi));
    }

    Ok(BifurcationReport {
        basins,
        boundaries,
        samples,
    })
}

// ---------------------------------------------------------------------------
// reward-bound check
// ---------------------------------------------------------------------------

/// Result of checking the policy floor `A*(mu) >= nu/beta - spacing`, which
/// holds whenever the interest rate satisfies `R <= beta/nu - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyFloorReport {
    /// Whether `R <= beta/nu - 1` holds, so the floor is expected.
    pub hypothesis_holds: bool,
    /// The interest bound `beta/nu - 1` (infinite when nu = 0).
    pub interest_bound: f64,
    /// `nu/beta - grid spacing`.
    pub threshold_floor: f64,
    /// `(mu, A*)` pairs that fall below the floor.
    pub violations: Vec<(f64, f64)>,
    /// True when the hypothesis fails and the check was not run.
    pub skipped: bool,
    pub passed: bool,
}

pub fn policy_floor_check(vf: &ValueFunction) -> PolicyFloorReport {
    let params = vf.params();
    let lender = vf.lender();
    let interest_bound = if params.nu == 0.0 {
        f64::INFINITY
    } else {
        params.beta / params.nu - 1.0
    };
    let hypothesis_holds = lender.interest <= interest_bound + 1e-12;
    let floor_center = if params.beta == 0.0 {
        f64::INFINITY
    } else {
        params.nu / params.beta
    };
    let threshold_floor = floor_center - vf.grid_spacing();

    if !hypothesis_holds {
        return PolicyFloorReport {
            hypothesis_holds,
            interest_bound,
            threshold_floor,
            violations: Vec::new(),
            skipped: true,
            passed: true,
        };
    }

    let violations: Vec<(f64, f64)> = vf
        .mu_grid()
        .iter()
        .zip(vf.policy())
        .filter(|&(_, &a)| a < threshold_floor)
        .map(|(&mu, &a)| (mu, a))
        .collect();
    let passed = violations.is_empty();
    PolicyFloorReport {
        hypothesis_holds,
        interest_bound,
        threshold_floor,
        violations,
        skipped: false,
        passed,
    }
}

// ---------------------------------------------------------------------------
// fair-constrained runs
// ---------------------------------------------------------------------------

/// Outcome of a fair-constrained two-group run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ParityVerdict {
    /// Final gap below the parity tolerance.
    Converged { final_gap: f64 },
    /// Gap persisted through the horizon.
    NotConverged { final_gap: f64 },
    /// The interest rate exceeds the reward bound, so neither outcome is
    /// implied; the gap is reported without a claim.
    Informational { final_gap: f64, note: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct FairRun {
    pub trajectory: Trajectory,
    pub verdict: ParityVerdict,
}

/// Parity tolerance separating "converged" from "not converged".
pub const PARITY_TOLERANCE: f64 = 1e-3;

/// Run two groups under a joint fair policy and judge parity at the horizon.
///
/// With equal misestimation levels the groups are expected to converge;
/// with unequal levels (and non-trivial thresholds) they are expected not
/// to. When the interest rate violates `R <= beta/nu - 1` the verdict is
/// downgraded to informational.
pub fn fair_constrained_simulation(
    groups: &[(PopulationState, DynamicsParams)],
    policy: &FairPolicy,
    lender: &LenderParams,
    horizon: usize,
) -> Result<FairRun> {
    if groups.len() != 2 {
        return Err(Error::GroupCount {
            expected: 2,
            got: groups.len(),
        });
    }
    let c0 = groups[0].0.shape();
    let c1 = groups[1].0.shape();
    if (c0 - c1).abs() > 1e-12 * c0.max(1.0) {
        return Err(Error::ShapeMismatch(format!(
            "fair-constrained runs require equal shapes, got {c0} and {c1}"
        )));
    }

    let trajectory = simulate(groups, policy, horizon, lender)?;
    let gap = parity_gap(&trajectory)?;

    let bound_ok = groups.iter().all(|(_, p)| {
        let bound = if p.nu == 0.0 {
            f64::INFINITY
        } else {
            p.beta / p.nu - 1.0
        };
        lender.interest <= bound + 1e-12
    });

    let verdict = if !bound_ok {
        ParityVerdict::Informational {
            final_gap: gap.final_gap,
            note: "interest rate exceeds beta/nu - 1; parity is not implied".to_string(),
        }
    } else if gap.final_gap < PARITY_TOLERANCE {
        ParityVerdict::Converged {
            final_gap: gap.final_gap,
        }
    } else {
        ParityVerdict::NotConverged {
            final_gap: gap.final_gap,
        }
    };

    Ok(FairRun {
        trajectory,
        verdict,
    })
}
