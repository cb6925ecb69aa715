//! Active-set computation of the log-concave NPMLE.
//!
//! The solver maximizes `L(psi) = Σ w_i psi(x_i) - ∫ exp(psi) + 1` over
//! concave functions that are linear between consecutive knots, the knots
//! being a subset of the support points. The maximizer of `L` integrates to
//! one, so no explicit normalization constraint is needed.
//!
//! For a fixed knot set, `L` is smooth and strictly concave in the knot
//! values and its Hessian is tridiagonal, so damped Newton solves the inner
//! problem. The outer loop
//!
//! * drops a knot when the inner optimum would make `psi` non-concave there,
//!   stopping on the segment between the old and new iterates at the first
//!   knot whose slope change reaches zero, and
//! * adds the support point where the integrated-tail inequality
//!   `∫(x-b)⁺ dP_emp >= ∫(x-b)⁺ dP_hat` is most violated.
//!
//! Termination is certified by [`crate::tails::certify`].

use crate::error::{Error, Result};
use crate::lcmle::kernel::segment_moments;
use crate::lcmle::{LogConcaveFit, SortedSample};
use crate::tails::{certify, integrated_tail_slack, CertTolerances};

/// Settings for [`fit_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Cap on knot insertions plus removals.
    pub max_iter: usize,
    /// Cap on Newton steps per restricted problem.
    pub max_newton: usize,
    /// Required bound on the final Newton decrement `g' H^{-1} g / 2`.
    pub newton_tol: f64,
    /// A support point `b` becomes a knot when its integrated-tail slack is
    /// below `-add_tol_rel * (X_(n) - X_(1))`.
    pub add_tol_rel: f64,
    /// Tolerances the final fit must pass. The two slack tolerances are
    /// multiplied by `max(1, X_(n) - X_(1))`.
    pub cert: CertTolerances,
    /// Log-likelihood tolerance against competing concave fits, used by
    /// callers that compare against a reference solution.
    pub obj_tol: f64,
    /// Interior knots in the Gaussian starting point.
    pub initial_interior_knots: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            max_newton: 200,
            newton_tol: 1e-10,
            add_tol_rel: 1e-13,
            cert: CertTolerances::default(),
            obj_tol: 1e-6,
            initial_interior_knots: 8,
        }
    }
}

/// Iteration state: knots as indices into the support points, and the
/// log-density values at those knots.
struct ActiveSet {
    idx: Vec<usize>,
    theta: Vec<f64>,
}

/// Restricted problem for a fixed knot set.
struct Restricted {
    /// knot positions
    xk: Vec<f64>,
    /// `c[l] = Σ_i w_i · hat_l(x_i)`, the gradient of the linear term
    lin: Vec<f64>,
    max_slope: f64,
}

struct NewtonOutcome {
    decrement: f64,
    at_clamp: bool,
}

impl Restricted {
    fn new(xs: &[f64], ws: &[f64], idx: &[usize], max_slope: f64) -> Self {
        let m = idx.len();
        let mut lin = vec![0.0; m];
        for l in 0..m - 1 {
            let (i0, i1) = (idx[l], idx[l + 1]);
            let (x0, len) = (xs[i0], xs[i1] - xs[i0]);
            lin[l] += ws[i0];
            for j in i0 + 1..i1 {
                let t = (xs[j] - x0) / len;
                lin[l] += ws[j] * (1.0 - t);
                lin[l + 1] += ws[j] * t;
            }
        }
        lin[m - 1] += ws[idx[m - 1]];
        Self {
            xk: idx.iter().map(|&i| xs[i]).collect(),
            lin,
            max_slope,
        }
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let lin: f64 = self.lin.iter().zip(theta).map(|(c, t)| c * t).sum();
        let integral: f64 = (0..theta.len() - 1)
            .map(|l| (self.xk[l + 1] - self.xk[l]) * segment_moments(theta[l], theta[l + 1])[0])
            .sum();
        lin - integral
    }

    /// Gradient of the objective and the tridiagonal Hessian of the integral
    /// term (the objective's Hessian is its negative).
    fn derivatives(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = theta.len();
        let mut grad = self.lin.clone();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        for l in 0..m - 1 {
            let len = self.xk[l + 1] - self.xk[l];
            let [i0, i1, i2] = segment_moments(theta[l], theta[l + 1]);
            grad[l] -= len * (i0 - i1);
            grad[l + 1] -= len * i1;
            diag[l] += len * (i0 - 2.0 * i1 + i2);
            diag[l + 1] += len * i2;
            off[l] = len * (i1 - i2);
        }
        (grad, diag, off)
    }

    fn slopes_ok(&self, theta: &[f64]) -> bool {
        (0..theta.len() - 1).all(|l| {
            let s = (theta[l + 1] - theta[l]) / (self.xk[l + 1] - self.xk[l]);
            s.abs() <= self.max_slope
        })
    }

    fn near_clamp(&self, theta: &[f64]) -> bool {
        (0..theta.len() - 1).any(|l| {
            let s = (theta[l + 1] - theta[l]) / (self.xk[l + 1] - self.xk[l]);
            s.abs() >= 0.999 * self.max_slope
        })
    }

    /// Damped Newton ascent to the restricted optimum, in place.
    fn newton(&self, theta: &mut [f64], max_steps: usize) -> NewtonOutcome {
        let mut decrement = f64::INFINITY;
        let mut trial = theta.to_vec();
        let mut stalls = 0;
        for _ in 0..max_steps {
            let (grad, diag, off) = self.derivatives(theta);
            let step = solve_tridiagonal(&diag, &off, &grad);
            let lam2: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            if !lam2.is_finite() {
                break;
            }
            if lam2 >= 0.5 * decrement && decrement < 1e-16 {
                // rounding floor reached
                stalls += 1;
                if stalls >= 2 {
                    decrement = decrement.min(0.5 * lam2);
                    break;
                }
            }
            decrement = 0.5 * lam2;
            if decrement < 1e-26 {
                break;
            }
            let base = self.objective(theta);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-14 {
                for (k, v) in trial.iter_mut().enumerate() {
                    *v = theta[k] + t * step[k];
                }
                if self.slopes_ok(&trial) {
                    // near the optimum the objective change drowns in rounding
                    if lam2 < 1e-12 || self.objective(&trial) >= base + 1e-4 * t * lam2 {
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            theta.copy_from_slice(&trial);
        }
        NewtonOutcome {
            decrement,
            at_clamp: self.near_clamp(theta),
        }
    }
}

/// Solves `A x = b` for the symmetric positive definite tridiagonal `A`
/// with diagonal `diag` and off-diagonal `off`.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    d[0] = rhs[0] / denom;
    for k in 1..m {
        c[k - 1] = off[k - 1] / denom;
        denom = diag[k] - off[k - 1] * c[k - 1];
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / denom;
    }
    let mut x = d;
    for k in (0..m - 1).rev() {
        x[k] -= c[k] * x[k + 1];
    }
    x
}

/// Slope changes `s_l - s_{l-1}` at the interior knots; concavity needs
/// every entry negative.
fn slope_changes(xk: &[f64], theta: &[f64]) -> Vec<f64> {
    let m = theta.len();
    let slope = |l: usize| (theta[l + 1] - theta[l]) / (xk[l + 1] - xk[l]);
    (1..m - 1).map(|l| slope(l) - slope(l - 1)).collect()
}

fn gaussian_start(sample: &SortedSample, interior: usize) -> ActiveSet {
    let xs = sample.values();
    let m = xs.len();
    let (mean, var) = sample.moments();
    let var = var.max(f64::MIN_POSITIVE);
    let interior = interior.min(m - 2);
    let mut idx = vec![0];
    for k in 1..=interior {
        let i = k * (m - 1) / (interior + 1);
        if i > *idx.last().unwrap() && i < m - 1 {
            idx.push(i);
        }
    }
    idx.push(m - 1);
    let log_norm = 0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let theta = idx
        .iter()
        .map(|&i| -(xs[i] - mean).powi(2) / (2.0 * var) - log_norm)
        .collect();
    ActiveSet { idx, theta }
}

fn build_fit(sample: &SortedSample, set: &ActiveSet, iterations: usize, converged: bool) -> Result<LogConcaveFit> {
    let xs = sample.values();
    LogConcaveFit::assemble(
        set.idx.iter().map(|&i| xs[i]).collect(),
        set.theta.clone(),
        sample.n_obs(),
        iterations,
        converged,
    )
}

/// Computes the log-concave maximum-likelihood estimator for `sample`.
///
/// On failure the error carries the last iterate and its certificate.
pub fn fit_mle(sample: &SortedSample, cfg: &SolverConfig) -> Result<LogConcaveFit> {
    let xs = sample.values();
    let ws = sample.weights();
    let m = xs.len();
    let range = xs[m - 1] - xs[0];
    let max_slope = 1e6 / range;
    let add_tol = cfg.add_tol_rel * range;

    let mut set = gaussian_start(sample, cfg.initial_interior_knots);
    let mut updates = 0usize;
    let mut blocked: Vec<usize> = Vec::new();
    let mut last_added: Option<usize> = None;
    let mut outcome;

    let fail = |set: &ActiveSet, updates: usize, reason: String| -> Error {
        match build_fit(sample, set, updates, false) {
            Ok(last) => {
                let report = certify(&last, sample, &cfg.cert);
                Error::NotConverged {
                    iterations: updates,
                    reason,
                    last: Box::new(last),
                    report,
                }
            }
            Err(e) => e,
        }
    };

    loop {
        // restricted optimum, dropping knots until it is concave
        loop {
            let problem = Restricted::new(xs, ws, &set.idx, max_slope);
            let mut cand = set.theta.clone();
            outcome = problem.newton(&mut cand, cfg.max_newton);
            let new_changes = slope_changes(&problem.xk, &cand);
            if new_changes.iter().all(|&c| c < 0.0) {
                set.theta = cand;
                break;
            }
            let old_changes = slope_changes(&problem.xk, &set.theta);
            let mut step = 1.0f64;
            let mut hit = Vec::new();
            for (l, (&c0, &c1)) in old_changes.iter().zip(&new_changes).enumerate() {
                if c1 < 0.0 {
                    continue;
                }
                let denom = c0 - c1;
                let s = if denom < 0.0 { (c0 / denom).clamp(0.0, 1.0) } else { 0.0 };
                if s < step - 1e-12 {
                    step = s;
                    hit.clear();
                }
                if s <= step + 1e-12 {
                    hit.push(l + 1);
                }
            }
            for (t, c) in set.theta.iter_mut().zip(&cand) {
                *t += step * (c - *t);
            }
            for &k in hit.iter().rev() {
                if Some(set.idx[k]) == last_added && step == 0.0 {
                    blocked.push(set.idx[k]);
                }
                set.idx.remove(k);
                set.theta.remove(k);
            }
            last_added = None;
            updates += hit.len();
            if updates > cfg.max_iter {
                return Err(fail(&set, updates, "iteration cap reached while dropping knots".into()));
            }
        }

        let fit = build_fit(sample, &set, updates, true)?;
        let slack = integrated_tail_slack(&fit, sample);
        let mut worst: Option<(usize, f64)> = None;
        let mut k = 0;
        for (j, &s) in slack.iter().enumerate() {
            while k < set.idx.len() && set.idx[k] < j {
                k += 1;
            }
            if k < set.idx.len() && set.idx[k] == j {
                continue;
            }
            if blocked.contains(&j) {
                continue;
            }
            if s < -add_tol && worst.is_none_or(|(_, w)| s < w) {
                worst = Some((j, s));
            }
        }
        let Some((j, _)) = worst else {
            break;
        };
        let pos = set.idx.partition_point(|&i| i < j);
        set.idx.insert(pos, j);
        set.theta.insert(pos, fit.eval_phi(xs[j]));
        last_added = Some(j);
        blocked.clear();
        updates += 1;
        if updates > cfg.max_iter {
            return Err(fail(&set, updates, "iteration cap reached while adding knots".into()));
        }
    }

    if outcome.at_clamp {
        return Err(fail(&set, updates, "slope clamp active at the optimum".into()));
    }
    if !(outcome.decrement < cfg.newton_tol) {
        return Err(fail(
            &set,
            updates,
            format!("Newton decrement {:e} above tolerance", outcome.decrement),
        ));
    }
    let fit = build_fit(sample, &set, updates, true)?;
    // the integrated-tail slack is a length, so its tolerances follow the data scale
    let gate = CertTolerances {
        char1: cfg.cert.char1 * range.max(1.0),
        eq: cfg.cert.eq * range.max(1.0),
        char2: cfg.cert.char2,
    };
    let report = certify(&fit, sample, &gate);
    if !report.pass {
        return Err(Error::NotConverged {
            iterations: updates,
            reason: "certificate failed".into(),
            last: Box::new(build_fit(sample, &set, updates, false)?),
            report,
        });
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let diag = [4.0, 5.0, 6.0];
        let off = [1.0, 2.0];
        let x = solve_tridiagonal(&diag, &off, &[1.0, 2.0, 3.0]);
        let ax = [
            4.0 * x[0] + 1.0 * x[1],
            1.0 * x[0] + 5.0 * x[1] + 2.0 * x[2],
            2.0 * x[1] + 6.0 * x[2],
        ];
        for (a, b) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let xs = [0.0, 0.4, 1.0, 1.7, 3.0];
        let ws = [0.1, 0.3, 0.2, 0.25, 0.15];
        let p = Restricted::new(&xs, &ws, &[0, 2, 4], 1e9);
        let theta = [-1.2, 0.1, -0.8];
        let (g, diag, off) = p.derivatives(&theta);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = theta;
            let mut dn = theta;
            up[k] += h;
            dn[k] -= h;
            let fd = (p.objective(&up) - p.objective(&dn)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
            let (gu, _, _) = p.derivatives(&up);
            let (gd, _, _) = p.derivatives(&dn);
            let col: Vec<f64> = (0..3).map(|r| -(gu[r] - gd[r]) / (2.0 * h)).collect();
            assert!((col[k] - diag[k]).abs() < 1e-7);
            if k > 0 {
                assert!((col[k - 1] - off[k - 1]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn linear_term_reproduces_interpolation() {
        let xs = [0.0, 0.4, 1.0, 1.7, 3.0];
        let ws = [0.1, 0.3, 0.2, 0.25, 0.15];
        let idx = [0, 3, 4];
        let p = Restricted::new(&xs, &ws, &idx, 1e9);
        let theta = [0.5, -0.3, -2.0];
        let fit = LogConcaveFit::from_parts(vec![0.0, 1.7, 3.0], theta.to_vec(), 5).unwrap();
        let direct: f64 = xs.iter().zip(&ws).map(|(&x, w)| w * fit.eval_phi(x)).sum();
        let via: f64 = p.lin.iter().zip(&theta).map(|(c, t)| c * t).sum();
        assert!((direct - via).abs() < 1e-14);
    }

    #[test]
    fn two_points_give_uniform() {
        let s = SortedSample::new(&[0.2, 0.7]).unwrap();
        let fit = fit_mle(&s, &SolverConfig::default()).unwrap();
        assert_eq!(fit.knots(), &[0.2, 0.7]);
        assert!(fit.slopes()[0].abs() < 1e-6);
        for v in fit.values() {
            assert!((v - 2f64.ln()).abs() < 1e-6);
        }
    }

    #[test]
    fn start_is_concave() {
        let s = SortedSample::new(&[0.0, 0.1, 0.5, 0.6, 0.61, 2.0, 2.2, 3.0, 7.0, 7.5, 9.0, 10.0]).unwrap();
        let set = gaussian_start(&s, 8);
        let xk: Vec<f64> = set.idx.iter().map(|&i| s.values()[i]).collect();
        assert!(slope_changes(&xk, &set.theta).iter().all(|&c| c < 0.0));
        assert_eq!(set.idx[0], 0);
        assert_eq!(*set.idx.last().unwrap(), s.values().len() - 1);
    }
}
