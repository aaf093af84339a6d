//! Special-function kernel: regularized incomplete beta function, its
//! inverse, and the mean-parameterized Beta density with its tail moments.
//!
//! Everything above this module (policies, dynamics, equilibria, control)
//! expresses tail probabilities and truncated means through these routines;
//! quadrature exists only as an independent oracle in `quad`.

use crate::error::{Error, Result};
use serde::Serialize;

/// Shape parameter beyond which a Beta distribution is treated as a point
/// mass at its mean. The tails of `Beta(c*mu, c*(1-mu))` are numerically
/// indistinguishable from a step function well before this.
pub const POINT_MASS_SHAPE: f64 = 1e4;

/// Standard-shape parameters of a Beta distribution.
///
/// The mean parameterization `(mu, c)` maps to `a = c*mu`, `b = c*(1-mu)`
/// and back via `mu = a/(a+b)`, `c = a+b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a <= 0.0 || b <= 0.0 {
            return Err(Error::Domain(format!(
                "beta shapes must be positive and finite, got a={a}, b={b}"
            )));
        }
        Ok(BetaParams { a, b })
    }

    /// Mean-parameterized constructor: `a = c*mu`, `b = c*(1-mu)`.
    pub fn from_mean(mu: f64, c: f64) -> Result<Self> {
        if mu.is_nan() || mu <= 0.0 || mu >= 1.0 {
            return Err(Error::Domain(format!(
                "mean must lie strictly inside (0,1), got {mu}"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::Domain(format!("shape must be positive, got {c}")));
        }
        BetaParams::new(c * mu, c * (1.0 - mu))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn concentration(&self) -> f64 {
        self.a + self.b
    }

    /// Same distribution with the first shape raised by one; this is the
    /// shift that turns a tail probability into a truncated first moment.
    fn first_moment_shift(&self) -> BetaParams {
        BetaParams {
            a: self.a + 1.0,
            b: self.b,
        }
    }

    fn swapped(&self) -> BetaParams {
        BetaParams {
            a: self.b,
            b: self.a,
        }
    }
}

// ---------------------------------------------------------------------------
// log-gamma and log-beta
// ---------------------------------------------------------------------------

/// Stirling tail `ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2]`, valid for
/// x >= 12.
fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli series B_2n / (2n (2n-1) x^(2n-1)).
    inv * (1.0 / 12.0
        + inv2
            * (-1.0 / 360.0
                + inv2
                    * (1.0 / 1260.0
                        + inv2
                            * (-1.0 / 1680.0
                                + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360360.0))))))
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for positive arguments.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut shift = 0.0;
    let mut y = x;
    while y < 12.0 {
        shift += y.ln();
        y += 1.0;
    }
    (y - 0.5) * y.ln() - y + HALF_LN_TWO_PI + stirling_correction(y) - shift
}

/// `ln Gamma(x + d) - ln Gamma(x)` for x >= 12, d >= 0, without cancellation.
fn ln_gamma_ratio(x: f64, d: f64) -> f64 {
    debug_assert!(x >= 12.0 && d >= 0.0);
    let xd = x + d;
    (x - 0.5) * (d / x).ln_1p() + d * xd.ln() - d + stirling_correction(xd)
        - stirling_correction(x)
}

/// Natural log of the (complete) beta function, well conditioned for large
/// shapes where the naive `lgamma` combination cancels catastrophically.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let sum = a + b;
    if lo >= 12.0 {
        // Symmetric Stirling form; both ratio logs are well conditioned.
        (lo - 0.5) * (lo / sum).ln() + (hi - 0.5) * (-lo / sum).ln_1p() + HALF_LN_TWO_PI
            - 0.5 * sum.ln()
            + stirling_correction(lo)
            + stirling_correction(hi)
            - stirling_correction(sum)
    } else if hi >= 12.0 {
        ln_gamma(lo) - ln_gamma_ratio(hi, lo)
    } else {
        ln_gamma(lo) + ln_gamma(hi) - ln_gamma(sum)
    }
}

// ---------------------------------------------------------------------------
// regularized incomplete beta
// ---------------------------------------------------------------------------

const CF_MAX_ITER: usize = 800;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for I_x(a, b) by the modified Lentz method, valid on
/// the branch x <= (a+1)/(a+b+2).
fn betacf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;

        if (delta - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::Convergence {
        context: "reg_inc_beta",
        detail: format!("continued fraction stalled at a={a}, b={b}, x={x}"),
    })
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Monotone non-decreasing in x with `I_0 = 0`, `I_1 = 1`. Uses the
/// symmetry split `I_x(a,b) = 1 - I_{1-x}(b,a)` so the continued fraction
/// always runs on its fast branch.
pub fn reg_inc_beta(x: f64, p: &BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(Error::Domain(format!("x must lie in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let (a, b) = (p.a, p.b);
    let ln_prefix = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_prefix.exp() * betacf(a, b, x)? / a)
    } else {
        let tail = ln_prefix.exp() * betacf(b, a, 1.0 - x)? / b;
        Ok(1.0 - tail)
    }
}

/// Upper tail `1 - I_x(a,b) = I_{1-x}(b,a)`, computed without the
/// cancellation that `1.0 - reg_inc_beta(..)` would suffer in small tails.
pub fn reg_inc_beta_upper(x: f64, p: &BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(Error::Domain(format!("x must lie in [0,1], got {x}")));
    }
    reg_inc_beta(1.0 - x, &p.swapped())
}

// ---------------------------------------------------------------------------
// inverse
// ---------------------------------------------------------------------------

/// Rational approximation to the inverse standard normal CDF (Acklam).
/// Only used to seed the inverse-beta iteration, so ~1e-9 accuracy suffices.
fn inv_norm_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inv_norm_cdf(1.0 - p)
    }
}

fn inverse_initial_guess(q: f64, a: f64, b: f64) -> f64 {
    let x = if a >= 1.0 && b >= 1.0 {
        // Normal-approximation seed (Abramowitz & Stegun 26.5.22).
        let yp = -inv_norm_cdf(q);
        let al = (yp * yp - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = yp * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * (2.0 * w).exp())
    } else {
        // Small-shape seed based on the leading power behaviour of the tails.
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        if q < t / w {
            (a * w * q).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - q)).powf(1.0 / b)
        }
    };
    x.clamp(1e-300, 1.0 - 1e-16)
}

/// Inverse regularized incomplete beta: the x with `I_x(a, b) = q`.
///
/// Seeded by a normal/power-law approximation, then polished by a
/// bracket-safeguarded Newton iteration that falls back to bisection
/// whenever a Newton step leaves the bracket or progresses too slowly, so
/// the iteration converges for every valid input.
pub fn inv_reg_inc_beta(q: f64, p: &BetaParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) || q.is_nan() {
        return Err(Error::Domain(format!("q must lie in [0,1], got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return Ok(1.0);
    }
    let (a, b) = (p.a, p.b);
    let lbeta = ln_beta(a, b);

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = inverse_initial_guess(q, a, b);
    let mut step_prev = hi - lo;

    for _ in 0..500 {
        let err = reg_inc_beta(x, p)? - q;
        if err == 0.0 {
            return Ok(x);
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= f64::EPSILON * x {
            return Ok(x);
        }

        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lbeta;
        let pdf = ln_pdf.exp();
        let newton = x - err / pdf;
        let newton_ok = pdf.is_finite()
            && pdf > 0.0
            && newton > lo
            && newton < hi
            // Insist on real progress relative to the last step, else bisect.
            && 2.0 * err.abs() < (step_prev * pdf).abs();
        let next = if newton_ok {
            newton
        } else if lo > 0.0 && hi > 1e6 * lo {
            // Roots can live hundreds of orders of magnitude below 1;
            // bisect geometrically until the bracket is commensurate.
            (lo * hi).sqrt()
        } else if lo == 0.0 && hi < 1e-3 {
            0.125 * hi
        } else {
            0.5 * (lo + hi)
        };
        step_prev = (next - x).abs();
        x = next;
        if step_prev <= f64::EPSILON * x {
            return Ok(x);
        }
    }

    // The bisection fallback halves the bracket at least every other
    // iteration, so reaching this point means something is badly wrong.
    let residual = reg_inc_beta(x, p)? - q;
    if residual.abs() <= 1e-12 {
        return Ok(x);
    }
    Err(Error::Convergence {
        context: "inv_reg_inc_beta",
        detail: format!("no convergence at q={q}, a={a}, b={b}; residual {residual:e}"),
    })
}

// ---------------------------------------------------------------------------
// mean-parameterized density and tail moments
// ---------------------------------------------------------------------------

fn validate_mean_shape(mu: f64, c: f64) -> Result<()> {
    if mu.is_nan() || mu <= 0.0 || mu >= 1.0 {
        return Err(Error::Domain(format!(
            "mean must lie strictly inside (0,1), got {mu}"
        )));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Domain(format!("shape must be positive, got {c}")));
    }
    Ok(())
}

/// Density of `Beta(c*mu, c*(1-mu))` at x in (0, 1).
pub fn beta_pdf(x: f64, mu: f64, c: f64) -> Result<f64> {
    validate_mean_shape(mu, c)?;
    if x.is_nan() || x <= 0.0 || x >= 1.0 {
        return Err(Error::Domain(format!(
            "density argument must lie strictly inside (0,1), got {x}"
        )));
    }
    let a = c * mu;
    let b = c * (1.0 - mu);
    Ok(((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp())
}

/// Proportion of the population above the threshold:
/// `p+(A, mu) = 1 - I_A(c*mu, c*(1-mu))`.
///
/// Non-increasing in A, with `p+(0, .) = 1` and `p+(1, .) = 0`. Shapes above
/// [`POINT_MASS_SHAPE`] use the point-mass limit.
pub fn selected_proportion(threshold: f64, mu: f64, c: f64) -> Result<f64> {
    validate_mean_shape(mu, c)?;
    if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
        return Err(Error::Domain(format!(
            "threshold must lie in [0,1], got {threshold}"
        )));
    }
    if c > POINT_MASS_SHAPE {
        return Ok(if threshold < mu {
            1.0
        } else if threshold > mu {
            0.0
        } else {
            0.5
        });
    }
    let p = BetaParams::from_mean(mu, c)?;
    reg_inc_beta_upper(threshold, &p)
}

/// Mean repayment probability among the selected:
/// `mu+ = mu * (1 - I_A(c*mu + 1, c*(1-mu))) / p+(A, mu)`.
///
/// The shape shift `a -> a+1` is the truncated-first-moment identity.
/// Always satisfies `mu+ >= mu` and `mu+ >= A`; errors with
/// [`Error::DegenerateSelection`] when `p+ = 0`.
pub fn selected_mean(threshold: f64, mu: f64, c: f64) -> Result<f64> {
    match selection_stats(threshold, mu, c)? {
        (_, Some(mu_plus)) => Ok(mu_plus),
        (_, None) => Err(Error::DegenerateSelection { threshold }),
    }
}

/// Both tail statistics in one call: `(p+, mu+)`, with `mu+ = None` exactly
/// when `p+ = 0`. The hot loops (dynamics, Bellman sweeps, scans) use this
/// to avoid evaluating the incomplete beta function twice for `p+`.
pub fn selection_stats(threshold: f64, mu: f64, c: f64) -> Result<(f64, Option<f64>)> {
    let p_plus = selected_proportion(threshold, mu, c)?;
    if p_plus == 0.0 {
        return Ok((0.0, None));
    }
    if c > POINT_MASS_SHAPE {
        // Point mass at mu; anyone selected repays with probability mu.
        return Ok((p_plus, Some(mu)));
    }
    let p = BetaParams::from_mean(mu, c)?;
    let tail_first_moment = mu * reg_inc_beta_upper(threshold, &p.first_moment_shift())?;
    let mu_plus = (tail_first_moment / p_plus).max(mu).max(threshold).min(1.0);
    Ok((p_plus, Some(mu_plus)))
}
