//! Independent reference computations used to validate the solver and the
//! tail bounds: a brute-force MLE for tiny samples, adaptive quadrature and
//! seeded Monte Carlo estimators.
//!
//! Nothing here shares code with the active-set solver. Monte Carlo
//! replication `r` always draws from a generator seeded with `seed + r`, so
//! results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::ReferenceDensity;
use crate::error::{Error, Result};
use crate::lcmle::{LogConcaveFit, SortedSample};
use crate::tails::{prop2_threshold, Tail, TailBoundSpec};

pub use crate::quadrature::adaptive_quadrature;

/// Largest sample the brute-force solver accepts.
pub const MAX_ORACLE_POINTS: usize = 5;

/// Refinement levels used when no explicit resolution is requested.
pub const DEFAULT_RESOLUTION: usize = 14;

const SCAN_POINTS: usize = 41;
const INITIAL_HALF_WIDTH: f64 = 64.0;
const SHRINK: f64 = 4.0;
const MAX_SWEEPS: usize = 400;

/// Result of [`brute_force_mle`]: log-density values at the support points.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFit {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    /// `Σ w_i phi(x_i)` of the normalized candidate.
    pub log_likelihood: f64,
}

impl OracleFit {
    pub fn to_fit(&self, n_obs: usize) -> Result<LogConcaveFit> {
        LogConcaveFit::from_parts(self.points.clone(), self.values.clone(), n_obs)
    }

    /// `phi` by linear interpolation on the hull, `-inf` outside.
    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if !(x >= p[0] && x <= *p.last().unwrap()) {
            return f64::NEG_INFINITY;
        }
        let k = p.partition_point(|&v| v <= x).clamp(1, p.len() - 1);
        let t = (x - p[k - 1]) / (p[k] - p[k - 1]);
        (1.0 - t) * self.values[k - 1] + t * self.values[k]
    }
}

/// Plain `∫₀^len exp(a + (b-a) t/len) dt`, kept separate from the solver's
/// series-based kernel on purpose.
fn naive_segment(a: f64, b: f64, len: f64) -> f64 {
    let d = b - a;
    if d.abs() > 1e-5 {
        len * (b.exp() - a.exp()) / d
    } else {
        len * a.exp() * (1.0 + d / 2.0 + d * d / 6.0 + d * d * d / 24.0)
    }
}

/// Candidate `psi` at the normalized points from a slope parameter vector
/// `[s_1, δ_1, …, δ_{m-2}]` with `s_{k+1} = s_k - δ_k`.
fn candidate(u: &[f64], params: &[f64]) -> Vec<f64> {
    let mut psi = vec![0.0; u.len()];
    let mut slope = params[0];
    for k in 1..u.len() {
        if k >= 2 {
            slope -= params[k - 1];
        }
        psi[k] = psi[k - 1] + slope * (u[k] - u[k - 1]);
    }
    psi
}

/// Normalized log-likelihood `Σ w_i psi_i - log ∫ exp psi` in normalized
/// coordinates.
fn score(u: &[f64], w: &[f64], params: &[f64]) -> f64 {
    let psi = candidate(u, params);
    let top = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = (0..u.len() - 1)
        .map(|k| naive_segment(psi[k] - top, psi[k + 1] - top, u[k + 1] - u[k]))
        .sum();
    let lin: f64 = psi.iter().zip(w).map(|(p, w)| p * w).sum();
    lin - top - mass.ln()
}

/// Maximizes the log-likelihood over concave candidates by nested coordinate
/// scans: each of `resolution` levels scans every coordinate on a
/// 41-point grid around the incumbent until no scan improves, then narrows
/// the grid by a factor of four.
pub fn brute_force_mle(sample: &SortedSample, resolution: usize) -> Result<OracleFit> {
    let xs = sample.values();
    let m = xs.len();
    if m > MAX_ORACLE_POINTS {
        return Err(Error::invalid(format!(
            "brute-force oracle supports at most {MAX_ORACLE_POINTS} support points, got {m}"
        )));
    }
    if resolution == 0 {
        return Err(Error::invalid("resolution must be at least 1"));
    }
    let range = xs[m - 1] - xs[0];
    let u: Vec<f64> = xs.iter().map(|x| (x - xs[0]) / range).collect();
    let w = sample.weights();
    let dims = m - 1;
    let mut best = vec![0.0; dims];
    let mut best_score = score(&u, w, &best);
    let mut half = INITIAL_HALF_WIDTH;
    let mut trial = best.clone();
    for _ in 0..resolution {
        for _ in 0..MAX_SWEEPS {
            let mut improved = false;
            for c in 0..dims {
                let center = best[c];
                let (lo, hi) = if c == 0 {
                    (center - half, center + half)
                } else {
                    ((center - half).max(0.0), center + half)
                };
                trial.copy_from_slice(&best);
                for i in 0..SCAN_POINTS {
                    trial[c] = lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64;
                    let s = score(&u, w, &trial);
                    if s > best_score {
                        best_score = s;
                        best[c] = trial[c];
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        half /= SHRINK;
    }
    let psi = candidate(&u, &best);
    let top = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = (0..m - 1)
        .map(|k| naive_segment(psi[k] - top, psi[k + 1] - top, u[k + 1] - u[k]))
        .sum();
    let shift = top + mass.ln() + range.ln();
    let values: Vec<f64> = psi.iter().map(|p| p - shift).collect();
    let log_likelihood = values.iter().zip(w).map(|(v, w)| v * w).sum();
    Ok(OracleFit {
        points: xs.to_vec(),
        values,
        log_likelihood,
    })
}

fn rng_for(seed: u64, rep: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64))
}

fn sorted_draw(d: &ReferenceDensity, n: usize, seed: u64, rep: usize) -> Vec<f64> {
    let mut xs = d.draw(n, &mut rng_for(seed, rep));
    xs.sort_by(f64::total_cmp);
    xs
}

/// Whether `|mu_emp(X_(k)) / mu(X_(k)) - 1|` reaches its threshold for some
/// `k` in `1..n`. `xs` must be sorted.
pub fn prop2_violated(d: &ReferenceDensity, xs: &[f64], tau: f64) -> Result<bool> {
    let n = xs.len();
    // excess[i] = Σ_{l > i} (x_l - x_i)
    let mut excess = 0.0;
    for i in (0..n - 1).rev() {
        let above = n - 1 - i;
        excess += above as f64 * (xs[i + 1] - xs[i]);
        let emp = excess / above as f64;
        let mu = d.mean_excess(xs[i])?;
        let threshold = prop2_threshold(&TailBoundSpec::new(n, i + 1, tau)?);
        if (emp / mu - 1.0).abs() >= threshold {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Fraction of `reps` samples of size `n` in which the empirical mean
/// excess at some order statistic misses the truth by its threshold.
pub fn mc_violation_rate(d: &ReferenceDensity, n: usize, tau: f64, reps: usize, seed: u64) -> Result<f64> {
    if !(tau > 1.0) {
        return Err(Error::invalid(format!("tau must exceed 1, got {tau}")));
    }
    if reps < 100 {
        return Err(Error::invalid(format!("need at least 100 replications, got {reps}")));
    }
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    let hits: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| prop2_violated(d, &sorted_draw(d, n, seed, r), tau))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / reps as f64)
}

/// Fraction of replications with `±(mean(X - a_o) / mu(a_o) - 1) >= eps`,
/// the event controlled by the one-sided Chernov bound. Needs a finite
/// lower support end `a_o`.
pub fn mc_chernov_exceedance(
    d: &ReferenceDensity,
    n: usize,
    eps: f64,
    tail: Tail,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let (a_o, _) = d.support();
    if !a_o.is_finite() {
        return Err(Error::domain("Chernov exceedance needs a finite lower support end"));
    }
    if !(eps >= 0.0) || n == 0 || reps == 0 {
        return Err(Error::invalid("need eps >= 0, n >= 1 and reps >= 1"));
    }
    let mu = d.mean() - a_o;
    let hits = (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let xs = d.draw(n, &mut rng_for(seed, r));
            let ratio = xs.iter().map(|x| x - a_o).sum::<f64>() / n as f64 / mu;
            match tail {
                Tail::Upper => ratio - 1.0 >= eps,
                Tail::Lower => 1.0 - ratio >= eps,
                Tail::Both => (ratio - 1.0).abs() >= eps,
            }
        })
        .count();
    Ok(hits as f64 / reps as f64)
}

/// `sup_{x <= b} |(F_emp(x) - F(x)) / (1 - F(x))|²` for one sample, given
/// the sorted probability-integral transforms `u_i = F(X_i)` and `F(b)`.
pub fn doob_sup_square(u_sorted: &[f64], f_b: f64) -> f64 {
    let n = u_sorted.len() as f64;
    let g = |c: f64, f: f64| ((c - f) / (1.0 - f)).abs();
    // below X_(1) the ratio is -F/(1-F), largest in size at the right end
    let mut sup = g(0.0, u_sorted.first().map_or(f_b, |&u| u.min(f_b)));
    for (i, &u) in u_sorted.iter().enumerate() {
        if u > f_b {
            break;
        }
        let c = (i + 1) as f64 / n;
        let right = u_sorted.get(i + 1).map_or(f_b, |&v| v.min(f_b));
        sup = sup.max(g(c, u)).max(g(c, right));
    }
    sup * sup
}

/// Mean and standard deviation over `reps` samples of [`doob_sup_square`],
/// with `b` the `f_b`-quantile of `d`.
pub fn mc_doob_sup_square(
    d: &ReferenceDensity,
    n: usize,
    f_b: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(f_b > 0.0 && f_b < 1.0) {
        return Err(Error::invalid(format!("F(b) must lie in (0, 1), got {f_b}")));
    }
    if n == 0 || reps < 2 {
        return Err(Error::invalid("need n >= 1 and reps >= 2"));
    }
    let b = d.quantile(f_b)?;
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let xs = sorted_draw(d, n, seed, r);
            let u: Vec<f64> = xs.iter().map(|&x| d.cdf(x)).collect();
            doob_sup_square(&u, d.cdf(b))
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    Ok((mean, var.sqrt()))
}
