//! Fixed points of fixed-threshold dynamics and their structure.
//!
//! For a fixed threshold A the map `mu -> f(A, mu)` has an attracting fixed
//! point `mu_inf` wherever the bracketing `f(A, 0+) - 0 = nu > 0` and
//! `f(A, 1-) - 1 = beta - 1 < 0` holds; the root is located by scanning and
//! bisection. Thresholds whose dynamics run into the boundary of (0,1)
//! (accept-everyone with beta < 1, or nu = 0) are reported with a boundary
//! flag rather than rejected. The uniqueness of interior roots is a
//! numerical claim, so [`uniqueness_scan`] counts sign changes over a
//! parameter grid and reports — never assumes — the result.

use crate::dynamics::{step_mean, DynamicsParams};
use crate::error::{Error, Result};
use crate::par;
use crate::population::PopulationState;
use serde::Serialize;

/// Interior margin for root scans; matches the mean clamp used by the
/// dynamics.
const EDGE: f64 = 1e-6;

/// A fixed point of the fixed-threshold dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumPoint {
    pub threshold: f64,
    pub mu_inf: f64,
    /// Sign change of `f - mu` runs + to - across the root.
    pub stable: bool,
    /// The root sits on the boundary of (0,1) rather than inside it.
    pub boundary: bool,
    /// Interior sign changes seen on the scan mesh. The dynamics are
    /// expected to have exactly one; anything else is surfaced here.
    pub sign_changes: usize,
}

/// Position of an equilibrium relative to two groups' initial means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumClass {
    /// At or above both initial means.
    Positive,
    /// At or below both initial means.
    Negative,
    /// Strictly between them.
    Mixed,
}

fn gap(threshold: f64, mu: f64, c: f64, params: &DynamicsParams) -> Result<f64> {
    let state = PopulationState::new(mu, c)?;
    Ok(step_mean(threshold, &state, params)? - mu)
}

/// Locate the fixed point of `f(A, .)` for a fixed threshold.
///
/// Scans a mesh over the interior of (0,1) for sign changes of `f - mu`,
/// bisects the first stable crossing to 1e-12 in mu, and counts every
/// crossing seen (more than one is a uniqueness anomaly, reported in
/// [`EquilibriumPoint::sign_changes`]). A gap that never changes sign means
/// the dynamics run into a boundary, reported with `boundary = true`.
pub fn fixed_point(threshold: f64, c: f64, params: &DynamicsParams) -> Result<EquilibriumPoint> {
    if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
        return Err(Error::Domain(format!(
            "threshold must lie in [0,1], got {threshold}"
        )));
    }
    const MESH: usize = 1024;
    let lo = EDGE;
    let hi = 1.0 - EDGE;

    let mut sign_changes = 0usize;
    let mut first_crossing: Option<(f64, f64, bool)> = None; // (lo, hi, stable)
    let mut prev_mu = lo;
    let mut prev_g = gap(threshold, lo, c, params)?;
    let g_lo = prev_g;
    let mut last_g = prev_g;

    for k in 1..=MESH {
        let mu = lo + (hi - lo) * k as f64 / MESH as f64;
        let g = gap(threshold, mu, c, params)?;
        if prev_g != 0.0 && g != 0.0 && (prev_g > 0.0) != (g > 0.0) {
            sign_changes += 1;
            let stable = prev_g > 0.0;
            // Keep the first crossing, upgrading to the first stable one if
            // the earliest happened to be unstable.
            match first_crossing {
                None => first_crossing = Some((prev_mu, mu, stable)),
                Some((_, _, false)) if stable => {
                    first_crossing = Some((prev_mu, mu, stable));
                }
                _ => {}
            }
        }
        if g != 0.0 {
            prev_g = g;
        }
        prev_mu = mu;
        last_g = g;
    }

    if let Some((mut a, mut b, stable)) = first_crossing {
        let mut g_a = gap(threshold, a, c, params)?;
        for _ in 0..80 {
            if b - a <= 1e-13 {
                break;
            }
            let mid = 0.5 * (a + b);
            let g_mid = gap(threshold, mid, c, params)?;
            if g_mid == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if (g_mid > 0.0) == (g_a > 0.0) {
                a = mid;
                g_a = g_mid;
            } else {
                b = mid;
            }
        }
        return Ok(EquilibriumPoint {
            threshold,
            mu_inf: 0.5 * (a + b),
            stable,
            boundary: false,
            sign_changes,
        });
    }

    // No interior crossing: the gap keeps one sign and the iteration runs
    // into a boundary of (0,1).
    if g_lo <= 0.0 {
        Ok(EquilibriumPoint {
            threshold,
            mu_inf: 0.0,
            stable: true,
            boundary: true,
            sign_changes: 0,
        })
    } else {
        debug_assert!(last_g >= 0.0);
        Ok(EquilibriumPoint {
            threshold,
            mu_inf: 1.0,
            stable: true,
            boundary: true,
            sign_changes: 0,
        })
    }
}

/// Fixed points across a grid of thresholds (data-parallel).
pub fn equilibrium_curve(
    thresholds: &[f64],
    c: f64,
    params: &DynamicsParams,
) -> Result<Vec<EquilibriumPoint>> {
    par::map_slice(thresholds, |&a| fixed_point(a, c, params))
        .into_iter()
        .collect()
}

/// Classify an equilibrium against two initial means.
pub fn classify(eq: &EquilibriumPoint, mu0_i: f64, mu0_j: f64) -> EquilibriumClass {
    let max = mu0_i.max(mu0_j);
    let min = mu0_i.min(mu0_j);
    if eq.mu_inf >= max {
        EquilibriumClass::Positive
    } else if eq.mu_inf <= min {
        EquilibriumClass::Negative
    } else {
        EquilibriumClass::Mixed
    }
}

/// The fixed threshold maximizing the next-step mean (and with it the
/// long-run equilibrium): `nu / beta` under exact knowledge, and
/// `(nu - alpha beta mu) / (beta (1 - alpha))` under misestimation, both
/// clamped into [0,1]. The misestimated form follows from
/// `df/dA = pi(A) (nu - alpha beta mu - beta (1 - alpha) A)`, and reduces
/// to `nu / beta` at alpha = 0.
pub fn social_welfare_threshold(params: &DynamicsParams, state_mu: f64) -> Result<f64> {
    if params.beta <= 0.0 {
        return Err(Error::Domain(
            "social-welfare threshold needs beta > 0".to_string(),
        ));
    }
    if params.alpha >= 1.0 {
        return Err(Error::Domain(
            "alpha = 1 is the point-mass regime: every threshold harms the population"
                .to_string(),
        ));
    }
    if params.alpha == 0.0 {
        return Ok((params.nu / params.beta).clamp(0.0, 1.0));
    }
    if !(0.0..=1.0).contains(&state_mu) {
        return Err(Error::Domain(format!(
            "state mean must lie in [0,1], got {state_mu}"
        )));
    }
    let numer = params.nu - params.alpha * params.beta * state_mu;
    let denom = params.beta * (1.0 - params.alpha);
    Ok((numer / denom).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// uniqueness scan
// ---------------------------------------------------------------------------

/// Parameter grid for [`uniqueness_scan`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanGrid {
    pub thresholds: Vec<f64>,
    pub shapes: Vec<f64>,
    pub betas: Vec<f64>,
    pub nus: Vec<f64>,
    /// Points in the mu mesh per cell (at least 1000 for the default scan).
    pub mesh: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        let tenths: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        ScanGrid {
            thresholds: tenths.clone(),
            shapes: vec![0.5, 1.0, 2.0, 5.0, 20.0, 100.0],
            betas: tenths.clone(),
            nus: tenths,
            mesh: 1001,
        }
    }
}

/// One grid cell's result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanCell {
    pub threshold: f64,
    pub shape: f64,
    pub beta: f64,
    pub nu: f64,
    pub sign_changes: usize,
    /// The gap `f - mu` fails the interior bracketing at one of the ends,
    /// so the root sits on the boundary (e.g. A = 0, nu = 0, beta = 1).
    pub boundary: bool,
}

/// Scan outcome: interior cells are expected to show exactly one sign
/// change; anything else lands in `anomalies`. Boundary-degenerate cells
/// are flagged separately, not failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub cells: usize,
    pub unique_interior: usize,
    pub boundary_cells: Vec<ScanCell>,
    pub anomalies: Vec<ScanCell>,
}

impl ScanReport {
    /// True when every non-boundary cell shows exactly one sign change.
    pub fn all_unique(&self) -> bool {
        self.anomalies.is_empty()
    }
}

/// Count sign changes of `f(A, mu) - mu` over a dense mu mesh for every
/// parameter cell (data-parallel across cells).
pub fn uniqueness_scan(grid: &ScanGrid) -> Result<ScanReport> {
    if grid.mesh < 10 {
        return Err(Error::Domain("mesh must have at least 10 points".to_string()));
    }
    let mut cells = Vec::new();
    for &a in &grid.thresholds {
        for &c in &grid.shapes {
            for &beta in &grid.betas {
                for &nu in &grid.nus {
                    cells.push((a, c, beta, nu));
                }
            }
        }
    }

    let mesh = grid.mesh;
    let results: Vec<Result<ScanCell>> = par::map_slice(&cells, |&(a, c, beta, nu)| {
        let params = DynamicsParams::exact(beta, nu)?;
        let lo = EDGE;
        let hi = 1.0 - EDGE;
        let mut sign_changes = 0usize;
        let mut first = 0.0;
        let mut last = 0.0;
        let mut prev = 0.0_f64;
        for k in 0..mesh {
            let mu = lo + (hi - lo) * k as f64 / (mesh - 1) as f64;
            let g = gap(a, mu, c, &params)?;
            if k == 0 {
                first = g;
            } else if prev != 0.0 && g != 0.0 && (prev > 0.0) != (g > 0.0) {
                sign_changes += 1;
            }
            if g != 0.0 {
                prev = g;
            }
            last = g;
        }
        Ok(ScanCell {
            threshold: a,
            shape: c,
            beta,
            nu,
            sign_changes,
            boundary: first <= 0.0 || last >= 0.0,
        })
    });

    let mut report = ScanReport {
        cells: cells.len(),
        unique_interior: 0,
        boundary_cells: Vec::new(),
        anomalies: Vec::new(),
    };
    for cell in results {
        let cell = cell?;
        if cell.boundary {
            report.boundary_cells.push(cell);
        } else if cell.sign_changes == 1 {
            report.unique_interior += 1;
        } else {
            report.anomalies.push(cell);
        }
    }
    Ok(report)
}
