//! Monotone piecewise-cubic (Fritsch-Carlson) interpolation.
//!
//! Shape-preserving: the interpolant never overshoots the data, so values
//! interpolated between monotone samples stay monotone and derivatives of a
//! non-decreasing data set stay non-negative. Used for the Bellman value
//! interpolant and for differentiating empirical score CDFs.

/// A C1 piecewise-cubic Hermite interpolant with Fritsch-Carlson slopes.
#[derive(Debug, Clone)]
pub(crate) struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from strictly increasing abscissae. Panics on unsorted input;
    /// callers construct grids, so this is a programming error, not data.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "need at least two nodes");
        assert!(
            xs.windows(2).all(|w| w[0] < w[1]),
            "abscissae must be strictly increasing"
        );
        let n = xs.len();
        let mut slopes = vec![0.0; n];

        if n == 2 {
            let secant = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            slopes[0] = secant;
            slopes[1] = secant;
            return MonotoneCubic { xs, ys, slopes };
        }

        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // Interior slopes: weighted harmonic mean of adjacent secants, zero
        // at local extrema (Fritsch-Carlson).
        for i in 1..n - 1 {
            let (s0, s1) = (secants[i - 1], secants[i]);
            if s0 * s1 <= 0.0 {
                slopes[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }

        slopes[0] = endpoint_slope(h[0], h[1], secants[0], secants[1]);
        slopes[n - 1] = endpoint_slope(
            h[n - 2],
            h[n - 3],
            secants[n - 2],
            secants[n - 3],
        );

        MonotoneCubic { xs, ys, slopes }
    }

    fn segment(&self, x: f64) -> usize {
        // partition_point returns the first index with xs[i] > x.
        let idx = self.xs.partition_point(|&t| t <= x);
        idx.clamp(1, self.xs.len() - 1) - 1
    }

    /// Evaluate at `x`; arguments outside the grid clamp to the end values.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h * (h10 * self.slopes[i] + h11 * self.slopes[i + 1])
            + h01 * self.ys[i + 1]
    }

    /// Analytic derivative of the interpolant; zero outside the grid.
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = self.segment(x.min(self.xs[n - 1] * (1.0 - f64::EPSILON)).max(self.xs[0]));
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        dh00 * self.ys[i]
            + dh10 * self.slopes[i]
            + dh11 * self.slopes[i + 1]
            + dh01 * self.ys[i + 1]
    }
}

/// One-sided three-point endpoint slope with the standard monotonicity
/// clamps (zero if it points the wrong way, capped at three secants).
fn endpoint_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 <= 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}
