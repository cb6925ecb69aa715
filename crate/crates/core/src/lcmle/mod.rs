//! The log-concave NPMLE and the objects derived from it.

mod io;
pub mod kernel;
mod solver;

pub(crate) use io::fmt_f64;
pub use io::{read_fit, write_fit};
pub use kernel::{exp_linear_first_moment, exp_linear_integral};
pub use solver::{fit_mle, SolverConfig};

use crate::error::{Error, Result};
use kernel::segment_moments;

/// Ordered, tie-merged observations with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    n_obs: usize,
}

impl SortedSample {
    /// Builds the sample from raw observations, each with weight `1/n`.
    /// Ties are merged into one support point carrying the summed weight.
    pub fn new(observations: &[f64]) -> Result<Self> {
        let n = observations.len();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 observations, got {n}")));
        }
        if let Some(x) = observations.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite observation {x}")));
        }
        let mut sorted = observations.to_vec();
        sorted.sort_by(f64::total_cmp);
        let w = 1.0 / n as f64;
        let mut values: Vec<f64> = Vec::with_capacity(n);
        let mut counts: Vec<usize> = Vec::with_capacity(n);
        for x in sorted {
            match values.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    values.push(x);
                    counts.push(1);
                }
            }
        }
        if values.len() < 2 {
            return Err(Error::invalid("all observations are equal"));
        }
        let weights = counts.iter().map(|&c| c as f64 * w).collect();
        Ok(Self {
            values,
            weights,
            n_obs: n,
        })
    }

    /// Builds a weighted sample. `values` must be strictly increasing and
    /// the weights positive; they are rescaled to sum to one.
    pub fn from_weighted(values: Vec<f64>, weights: Vec<f64>, n_obs: usize) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid("values and weights differ in length"));
        }
        if values.len() < 2 {
            return Err(Error::invalid("need at least 2 distinct support points"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite support point"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("support points must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            values,
            weights,
            n_obs: n_obs.max(2),
        })
    }

    /// Distinct support points, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of raw observations before tie-merging.
    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Empirical distribution function `Σ_{x_i <= x} w_i`.
    pub fn ecdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        if k == self.values.len() {
            return 1.0;
        }
        self.weights[..k].iter().sum()
    }

    /// Empirical mean excess `Σ w_i (x_i - x)⁺ / Σ_{x_i > x} w_i`, zero when
    /// no support point exceeds `x`.
    pub fn mean_excess_emp(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= x);
        let (mut mass, mut excess) = (0.0, 0.0);
        for (v, w) in self.values[k..].iter().zip(&self.weights[k..]) {
            mass += w;
            excess += w * (v - x);
        }
        if mass > 0.0 {
            excess / mass
        } else {
            0.0
        }
    }

    /// Weighted mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.values.iter().zip(&self.weights).map(|(x, w)| w * x).sum();
        let var = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * (x - mean).powi(2))
            .sum();
        (mean, var)
    }
}

/// A concave, piecewise-linear log-density supported on `[knots[0], knots[m-1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogConcaveFit {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `mass_left[l] = ∫_{knots[0]}^{knots[l]} exp(phi)`
    mass_left: Vec<f64>,
    /// `mass_right[l] = ∫_{knots[l]}^{knots[m-1]} exp(phi)`
    mass_right: Vec<f64>,
    /// `excess_right[l] = ∫_{knots[l]}^{knots[m-1]} (y - knots[l]) exp(phi(y)) dy`
    excess_right: Vec<f64>,
    norm_residual: f64,
    iterations: usize,
    converged: bool,
    n_obs: usize,
}

impl LogConcaveFit {
    /// Assembles a fit from knot positions and log-density values at the
    /// knots. Concavity is not enforced here; use [`LogConcaveFit::is_concave`]
    /// or certify the result.
    pub fn from_parts(knots: Vec<f64>, values: Vec<f64>, n_obs: usize) -> Result<Self> {
        Self::assemble(knots, values, n_obs, 0, true)
    }

    pub(crate) fn assemble(
        knots: Vec<f64>,
        values: Vec<f64>,
        n_obs: usize,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        let m = knots.len();
        if m < 2 || values.len() != m {
            return Err(Error::invalid("a fit needs at least two knots with one value each"));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::invalid("knots and values must be finite"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("knots must be strictly increasing"));
        }
        let slopes: Vec<f64> = (0..m - 1)
            .map(|l| (values[l + 1] - values[l]) / (knots[l + 1] - knots[l]))
            .collect();
        let mut mass_left = vec![0.0; m];
        for l in 0..m - 1 {
            let len = knots[l + 1] - knots[l];
            mass_left[l + 1] = mass_left[l] + len * segment_moments(values[l], values[l + 1])[0];
        }
        let mut mass_right = vec![0.0; m];
        let mut excess_right = vec![0.0; m];
        for l in (0..m - 1).rev() {
            let len = knots[l + 1] - knots[l];
            let mom = segment_moments(values[l], values[l + 1]);
            mass_right[l] = mass_right[l + 1] + len * mom[0];
            excess_right[l] = excess_right[l + 1] + len * mass_right[l + 1] + len * len * mom[1];
        }
        let norm_residual = (mass_right[0] - 1.0).abs();
        Ok(Self {
            knots,
            values,
            slopes,
            mass_left,
            mass_right,
            excess_right,
            norm_residual,
            iterations,
            converged,
            n_obs,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `phi_hat` at the knots.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Segment slopes; `slopes()[l]` is the slope on `[knots[l], knots[l+1]]`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// `|∫ exp(phi_hat) - 1|`.
    pub fn norm_residual(&self) -> f64 {
        self.norm_residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn lower(&self) -> f64 {
        self.knots[0]
    }

    pub fn upper(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Scale-relative threshold above which a slope drop counts as a kink.
    pub fn kink_tol(&self) -> f64 {
        let max_slope = self.slopes.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
        1e-8 * (max_slope + 1.0)
    }

    /// True when the slopes strictly decrease from segment to segment.
    pub fn is_concave(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] < w[0])
    }

    /// Index `l` of the segment `[knots[l], knots[l+1])` containing `x`, for
    /// `x` in `[lower, upper)`.
    fn segment_of(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// `phi_hat(x)`; `-inf` outside the knot hull.
    pub fn eval_phi(&self, x: f64) -> f64 {
        if !(x >= self.lower() && x <= self.upper()) {
            return f64::NEG_INFINITY;
        }
        let l = self.segment_of(x);
        if x == self.knots[l + 1] {
            return self.values[l + 1];
        }
        self.values[l] + self.slopes[l] * (x - self.knots[l])
    }

    /// Right derivative `phi_hat'(x+)`, with `-inf` for `x >= X_(n)`.
    ///
    /// Left of the support no convention applies and a domain error is
    /// returned.
    pub fn eval_phi_rderiv(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < self.lower() {
            return Err(Error::domain(format!(
                "right derivative undefined at {x} below the support start {}",
                self.lower()
            )));
        }
        if x >= self.upper() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.slopes[self.segment_of(x)])
    }

    /// Fitted density `exp(phi_hat(x))`.
    pub fn density(&self, x: f64) -> f64 {
        self.eval_phi(x).exp()
    }

    /// `Σ w_i phi_hat(x_i)`.
    pub fn log_likelihood(&self, sample: &SortedSample) -> f64 {
        sample
            .values()
            .iter()
            .zip(sample.weights())
            .map(|(&x, w)| w * self.eval_phi(x))
            .sum()
    }

    /// `F_hat(x) = ∫_{-inf}^x exp(phi_hat)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lower() || x.is_nan() {
            return 0.0;
        }
        if x >= self.upper() {
            return *self.mass_left.last().unwrap();
        }
        let l = self.segment_of(x);
        let part = x - self.knots[l];
        if part == 0.0 {
            return self.mass_left[l];
        }
        self.mass_left[l] + part * segment_moments(self.values[l], self.eval_phi(x))[0]
    }

    /// `(∫_x^inf exp(phi_hat), ∫ (y - x)⁺ exp(phi_hat(y)) dy)`, computed
    /// without cancellation against the total mass.
    pub fn upper_tail(&self, x: f64) -> (f64, f64) {
        if x >= self.upper() {
            return (0.0, 0.0);
        }
        if x <= self.lower() {
            let mass = self.mass_right[0];
            return (mass, self.excess_right[0] + (self.lower() - x) * mass);
        }
        let l = self.segment_of(x);
        let r = l + 1;
        let len = self.knots[r] - x;
        let mom = segment_moments(self.eval_phi(x), self.values[r]);
        let mass = len * mom[0] + self.mass_right[r];
        let excess = len * len * mom[1] + len * self.mass_right[r] + self.excess_right[r];
        (mass, excess)
    }

    /// Fitted mean excess `∫ (y - x)⁺ f_hat(y) dy / (1 - F_hat(x))`, zero
    /// beyond the support.
    pub fn mean_excess(&self, x: f64) -> f64 {
        let (mass, excess) = self.upper_tail(x);
        if mass > 0.0 {
            excess / mass
        } else {
            0.0
        }
    }

    /// The kink set: both end knots plus every interior knot where the slope
    /// drops by more than [`LogConcaveFit::kink_tol`].
    pub fn kink_set(&self) -> Vec<f64> {
        let tol = self.kink_tol();
        let m = self.knots.len();
        let mut out = vec![self.knots[0]];
        for l in 1..m - 1 {
            if self.slopes[l - 1] - self.slopes[l] > tol {
                out.push(self.knots[l]);
            }
        }
        out.push(self.knots[m - 1]);
        out
    }

    /// Returns a copy with `phi_hat` transformed as the density of `c X + d`.
    pub fn affine_image(&self, scale: f64, shift: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("affine scale must be positive"));
        }
        let knots = self.knots.iter().map(|x| scale * x + shift).collect();
        let values = self.values.iter().map(|v| v - scale.ln()).collect();
        Self::assemble(knots, values, self.n_obs, self.iterations, self.converged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_fit(a: f64, b: f64) -> LogConcaveFit {
        let v = -(b - a).ln();
        LogConcaveFit::from_parts(vec![a, b], vec![v, v], 2).unwrap()
    }

    #[test]
    fn sample_merges_ties() {
        let s = SortedSample::new(&[3.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.weights(), &[0.5, 0.25, 0.25]);
        assert_eq!(s.n_obs(), 4);
    }

    #[test]
    fn sample_rejects_degenerate_input() {
        assert!(SortedSample::new(&[1.0]).is_err());
        assert!(SortedSample::new(&[1.0, 1.0]).is_err());
        assert!(SortedSample::new(&[1.0, f64::NAN]).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 1.0], vec![0.5, 0.5], 2).is_err());
        assert!(SortedSample::from_weighted(vec![1.0, 2.0], vec![0.5, 0.0], 2).is_err());
    }

    #[test]
    fn empirical_mean_excess_at_order_statistic() {
        let xs = [0.3, 1.1, 1.7, 2.0, 4.5];
        let s = SortedSample::new(&xs).unwrap();
        for k in 0..xs.len() {
            let tail = &xs[k + 1..];
            let expected = if tail.is_empty() {
                0.0
            } else {
                tail.iter().map(|x| x - xs[k]).sum::<f64>() / tail.len() as f64
            };
            assert!((s.mean_excess_emp(xs[k]) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn ecdf_steps() {
        let s = SortedSample::new(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.ecdf(-1.0), 0.0);
        assert_eq!(s.ecdf(0.0), 0.25);
        assert_eq!(s.ecdf(2.5), 0.75);
        assert_eq!(s.ecdf(3.0), 1.0);
    }

    #[test]
    fn uniform_fit_quantities() {
        let f = uniform_fit(0.2, 0.7);
        assert!(f.norm_residual() < 1e-15);
        assert!((f.cdf(0.7) - 1.0).abs() < 1e-10);
        assert!((f.cdf(0.45) - 0.5).abs() < 1e-14);
        assert!((f.mean_excess(0.2) - 0.25).abs() < 1e-14);
        assert_eq!(f.mean_excess(0.7), 0.0);
        assert_eq!(f.kink_set(), vec![0.2, 0.7]);
    }

    #[test]
    fn eval_conventions() {
        let f = LogConcaveFit::from_parts(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, -1.0], 3).unwrap();
        assert_eq!(f.eval_phi(-0.1), f64::NEG_INFINITY);
        assert_eq!(f.eval_phi(3.1), f64::NEG_INFINITY);
        assert_eq!(f.eval_phi(0.5), 0.5);
        assert_eq!(f.eval_phi(2.0), 0.0);
        assert!(f.eval_phi(3.0).is_finite());
        assert_eq!(f.eval_phi_rderiv(3.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(f.eval_phi_rderiv(1.0).unwrap(), -1.0);
        assert_eq!(f.eval_phi_rderiv(1.0 - 1e-9).unwrap(), 1.0);
        assert!(f.eval_phi_rderiv(-1e-9).is_err());
        assert!(f.is_concave());
    }

    #[test]
    fn tail_moments_match_direct_integration() {
        let f = LogConcaveFit::from_parts(vec![0.0, 1.0, 3.0], vec![-1.0, -0.2, -2.5], 3).unwrap();
        for &x in &[-0.5, 0.0, 0.4, 1.0, 2.2, 2.999] {
            let (mass, excess) = f.upper_tail(x);
            let lo = x.max(0.0);
            let n = 200_000;
            let h = (3.0 - lo) / n as f64;
            let (mut m, mut e) = (0.0, 0.0);
            for i in 0..n {
                let y = lo + (i as f64 + 0.5) * h;
                let d = f.density(y);
                m += d * h;
                e += (y - x) * d * h;
            }
            assert!((mass - m).abs() < 1e-8, "x={x}: {mass} vs {m}");
            assert!((excess - e).abs() < 1e-8, "x={x}: {excess} vs {e}");
            assert!((f.cdf(x) + mass - f.cdf(3.0)).abs() < 1e-13);
        }
    }
}
