//! Group population states and moment fits from empirical histograms.

use crate::error::{Error, Result};
use crate::specfun::BetaParams;
use serde::Serialize;

/// Means are kept this far inside (0, 1); the dynamics can push a group mean
/// asymptotically toward the boundary where the Beta density degenerates.
pub const MEAN_CLAMP: f64 = 1e-6;

/// One group's repayment-probability distribution: `Beta(c*mu, c*(1-mu))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationState {
    mu: f64,
    c: f64,
}

impl PopulationState {
    pub fn new(mu: f64, c: f64) -> Result<Self> {
        // Delegates range validation; also guarantees a = c*mu > 0, b > 0.
        BetaParams::from_mean(mu, c)?;
        Ok(PopulationState { mu, c })
    }

    /// Construct with the mean clamped into `[MEAN_CLAMP, 1 - MEAN_CLAMP]`.
    /// Used by iteration loops whose update can reach the boundary exactly.
    pub fn with_clamped_mean(mu: f64, c: f64) -> Result<Self> {
        PopulationState::new(mu.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP), c)
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn shape(&self) -> f64 {
        self.c
    }

    pub fn beta_params(&self) -> BetaParams {
        BetaParams::from_mean(self.mu, self.c).expect("state invariant")
    }
}

/// Identifies one group in a multi-group scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupLabel {
    pub id: usize,
    pub name: String,
}

impl GroupLabel {
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        GroupLabel {
            id,
            name: name.into(),
        }
    }
}

/// Fit a population state to a weighted histogram of repayment
/// probabilities by the method of moments.
///
/// `bins` holds (bin center in (0,1), non-negative weight) pairs; weights
/// need not be normalized (the fit is scale-invariant). The fitted mean
/// equals the histogram mean exactly; the shape comes from
/// `c = mu(1-mu)/var - 1`, clamped to at least `1e-3`.
pub fn fit_beta_from_histogram(bins: &[(f64, f64)]) -> Result<PopulationState> {
    if bins.len() < 3 {
        return Err(Error::DegenerateHistogram(format!(
            "need at least 3 bins, got {}",
            bins.len()
        )));
    }
    let mut total = 0.0;
    for &(center, weight) in bins {
        if center.is_nan() || center <= 0.0 || center >= 1.0 {
            return Err(Error::Domain(format!(
                "bin center must lie strictly inside (0,1), got {center}"
            )));
        }
        if weight < 0.0 || !weight.is_finite() {
            return Err(Error::Domain(format!(
                "bin weight must be non-negative, got {weight}"
            )));
        }
        total += weight;
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::DegenerateHistogram(
            "weights sum to zero".to_string(),
        ));
    }

    let mean = bins.iter().map(|&(x, w)| x * w).sum::<f64>() / total;
    let var = bins
        .iter()
        .map(|&(x, w)| w * (x - mean) * (x - mean))
        .sum::<f64>()
        / total;

    if var == 0.0 {
        return Err(Error::DegenerateHistogram(
            "zero variance: histogram is a point mass".to_string(),
        ));
    }
    let bernoulli_limit = mean * (1.0 - mean);
    if var >= bernoulli_limit {
        return Err(Error::DegenerateHistogram(format!(
            "variance {var} is not below mu(1-mu) = {bernoulli_limit}; no Beta matches"
        )));
    }

    let c = (bernoulli_limit / var - 1.0).max(1e-3);
    PopulationState::new(mean.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP), c)
}

/// Replace every state's shape with the arithmetic mean of the shapes,
/// leaving the means untouched. Joint fair policies require a shared shape.
pub fn equalize_shapes(states: &[PopulationState]) -> Result<Vec<PopulationState>> {
    if states.is_empty() {
        return Err(Error::GroupCount {
            expected: 1,
            got: 0,
        });
    }
    let mean_shape = states.iter().map(|s| s.c).sum::<f64>() / states.len() as f64;
    states
        .iter()
        .map(|s| PopulationState::new(s.mu, mean_shape))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{reg_inc_beta, BetaParams};

    /// Discretize Beta(mu, c) onto `n` equal-width bins by exact bin
    /// masses (CDF differences), which stays faithful even when the
    /// density is singular at an endpoint.
    fn discretized(mu: f64, c: f64, n: usize) -> Vec<(f64, f64)> {
        let params = BetaParams::from_mean(mu, c).unwrap();
        let cdf: Vec<f64> = (0..=n)
            .map(|i| reg_inc_beta(i as f64 / n as f64, &params).unwrap())
            .collect();
        (0..n)
            .map(|i| ((i as f64 + 0.5) / n as f64, cdf[i + 1] - cdf[i]))
            .collect()
    }

    #[test]
    fn recovers_known_density() {
        let state = fit_beta_from_histogram(&discretized(0.7, 3.0, 200)).unwrap();
        assert!((state.mean() - 0.7).abs() < 0.005, "mu = {}", state.mean());
        assert!((state.shape() - 3.0).abs() < 0.1, "c = {}", state.shape());
    }

    #[test]
    fn moment_recovery_grid() {
        for &mu in &[0.2, 0.4, 0.6, 0.8] {
            for &c in &[1.0, 2.0, 5.0, 10.0] {
                let state = fit_beta_from_histogram(&discretized(mu, c, 500)).unwrap();
                assert!(
                    (state.mean() - mu).abs() / mu < 0.02,
                    "mu={mu} c={c}: got {}",
                    state.mean()
                );
                assert!(
                    (state.shape() - c).abs() / c < 0.02,
                    "mu={mu} c={c}: got {}",
                    state.shape()
                );
            }
        }
    }

    #[test]
    fn symmetric_concentration() {
        let delta = 1e-3;
        let bins = vec![(0.5 - delta, 1.0), (0.5, 0.0), (0.5 + delta, 1.0)];
        let state = fit_beta_from_histogram(&bins).unwrap();
        assert!((state.mean() - 0.5).abs() < 1e-12);
        assert!(state.shape() > 1e5, "c = {}", state.shape());
    }

    #[test]
    fn uniform_weights_give_uniform_fit() {
        let bins: Vec<(f64, f64)> = (0..500)
            .map(|i| ((i as f64 + 0.5) / 500.0, 1.0))
            .collect();
        let state = fit_beta_from_histogram(&bins).unwrap();
        assert!((state.mean() - 0.5).abs() < 1e-12);
        assert!((state.shape() - 2.0).abs() < 0.02, "c = {}", state.shape());
    }

    #[test]
    fn degenerate_histograms_are_rejected() {
        // Too few bins.
        assert!(fit_beta_from_histogram(&[(0.5, 1.0), (0.6, 1.0)]).is_err());
        // Point mass.
        let bins = vec![(0.5, 1.0), (0.5, 2.0), (0.5, 3.0)];
        assert!(matches!(
            fit_beta_from_histogram(&bins),
            Err(Error::DegenerateHistogram(_))
        ));
        // Interior centers always satisfy var < mu(1-mu); a near-limit
        // two-point histogram fits with the shape clamped near zero.
        let bins = vec![(0.001, 1.0), (0.5, 0.0), (0.999, 1.0)];
        let state = fit_beta_from_histogram(&bins).unwrap();
        assert!(state.shape() < 0.01, "c = {}", state.shape());
    }

    #[test]
    fn weight_scale_invariance() {
        let bins = discretized(0.35, 4.0, 120);
        let s1 = fit_beta_from_histogram(&bins).unwrap();
        // Power-of-two scaling is exact in floating point: bit-identical.
        let pow2: Vec<(f64, f64)> = bins.iter().map(|&(x, w)| (x, w * 64.0)).collect();
        assert_eq!(s1, fit_beta_from_histogram(&pow2).unwrap());
        // Arbitrary scaling agrees to rounding.
        let scaled: Vec<(f64, f64)> = bins.iter().map(|&(x, w)| (x, w * 73.5)).collect();
        let s2 = fit_beta_from_histogram(&scaled).unwrap();
        assert!((s1.mean() - s2.mean()).abs() < 1e-12);
        assert!((s1.shape() - s2.shape()).abs() < 1e-10);
    }

    #[test]
    fn equalize_shapes_averages() {
        let states = vec![
            PopulationState::new(0.6, 2.0).unwrap(),
            PopulationState::new(0.8, 4.0).unwrap(),
        ];
        let out = equalize_shapes(&states).unwrap();
        assert_eq!(out[0].shape(), 3.0);
        assert_eq!(out[1].shape(), 3.0);
        assert_eq!(out[0].mean(), 0.6);
        assert_eq!(out[1].mean(), 0.8);

        // Identity cases.
        let single = equalize_shapes(&states[..1]).unwrap();
        assert_eq!(single[0], states[0]);
        let equal = vec![
            PopulationState::new(0.5, 3.0).unwrap(),
            PopulationState::new(0.5, 3.0).unwrap(),
        ];
        assert_eq!(equalize_shapes(&equal).unwrap(), equal);

        assert!(equalize_shapes(&[]).is_err());
    }
}
