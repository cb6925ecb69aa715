//! Tail functions and bounds for log-concave laws, and the certificate that
//! checks a fit against the characterization inequalities of the MLE.
//!
//! Infinite-slope conventions live here and nowhere else:
//! `nu(-inf) = 0`, `nu(+inf) = 1` and `-1 / (-inf) = 0`.

use crate::distributions::ReferenceDensity;
use crate::error::{Error, Result};
use crate::lcmle::{LogConcaveFit, SortedSample};

/// Below this `|t|`, [`nu`] uses its Taylor expansion.
const NU_SERIES_RADIUS: f64 = 1e-4;

/// Mean of the log-linear density `u ↦ e^{tu}` on `[0, 1]`:
/// `∫₀¹ u e^{tu} du / ∫₀¹ e^{tu} du`, with `nu(-inf) = 0` and `nu(inf) = 1`.
pub fn nu(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t.abs() < NU_SERIES_RADIUS {
        let t2 = t * t;
        return 0.5 + t * (1.0 / 12.0 - t2 * (1.0 / 720.0 - t2 / 30240.0));
    }
    if t > 0.0 {
        let em = -(-t).exp_m1(); // 1 - e^{-t}
        (t - em) / (t * em)
    } else {
        let em = t.exp_m1(); // e^t - 1
        (t * t.exp() - em) / (t * em)
    }
}

/// Chernov exponent `H(t) = t - log(1 + t)` for `t > -1`, `+inf` otherwise.
pub fn chernov_h(t: f64) -> f64 {
    if t > -1.0 {
        t - t.ln_1p()
    } else if t.is_nan() {
        f64::NAN
    } else {
        f64::INFINITY
    }
}

/// Which deviation of a normalized sample mean a Chernov bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// `ratio - 1 >= eps`
    Upper,
    /// `-(ratio - 1) >= eps`
    Lower,
    /// `|ratio - 1| >= eps`
    Both,
}

/// Chernov bound on `P(±(mean/mu - 1) >= eps)` for a mean of `n` draws:
/// `exp(-n H(±eps))` one-sided, `2 exp(-n H(eps))` two-sided (not clamped
/// to 1).
pub fn chernov_tail_bound(n: usize, eps: f64, tail: Tail) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::invalid(format!("eps must be >= 0, got {eps}")));
    }
    let n = n as f64;
    Ok(match tail {
        Tail::Upper => (-n * chernov_h(eps)).exp(),
        Tail::Lower => (-n * chernov_h(-eps)).exp(),
        Tail::Both => 2.0 * (-n * chernov_h(eps)).exp(),
    })
}

/// Parameters of the simultaneous mean-excess bound at order statistic `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBoundSpec {
    n: usize,
    k: usize,
    tau: f64,
}

impl TailBoundSpec {
    /// `1 <= k < n` and `tau > 1`.
    pub fn new(n: usize, k: usize, tau: f64) -> Result<Self> {
        if !(tau > 1.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must exceed 1, got {tau}")));
        }
        if k < 1 || k >= n {
            return Err(Error::invalid(format!("need 1 <= k < n, got k={k}, n={n}")));
        }
        Ok(Self { n, k, tau })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `rho_n = log(n) / n`.
    pub fn rho(&self) -> f64 {
        (self.n as f64).ln() / self.n as f64
    }
}

/// Threshold `sqrt(2 tau log n / (n-k)) + tau log n / (n-k)` for the
/// relative error of the empirical mean excess at `X_(k)`.
pub fn prop2_threshold(spec: &TailBoundSpec) -> f64 {
    threshold_from_log_n((spec.n as f64).ln(), (spec.n - spec.k) as f64, spec.tau)
}

/// [`prop2_threshold`] written in terms of `log n` and the number `n - k` of
/// observations above `X_(k)`.
pub fn threshold_from_log_n(log_n: f64, above: f64, tau: f64) -> f64 {
    let r = tau * log_n / above;
    (2.0 * r).sqrt() + r
}

/// Probability bound `2 n^{1 - tau}` for any `k` exceeding its threshold.
pub fn prop2_global_bound(n: usize, tau: f64) -> f64 {
    2.0 * (n as f64).powf(1.0 - tau)
}

/// Bound `4 / (n (1 - F(b)))` on `E sup_{x <= b} |(F_emp(x) - F(x)) / (1 - F(x))|²`.
pub fn doob_sup_bound(n: usize, f_b: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&f_b) {
        return Err(Error::invalid(format!("F(b) must lie in [0, 1), got {f_b}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Ok(4.0 / (n as f64 * (1.0 - f_b)))
}

/// `(w ν(slope_end · w), w ν(slope_right · w))` with `w = b_o - x`.
pub fn log_linear_envelope(width: f64, slope_end: f64, slope_right: f64) -> (f64, f64) {
    (width * nu(slope_end * width), width * nu(slope_right * width))
}

/// Mean-excess envelope for a bounded upper end `b_o`:
/// `(b_o - x) ν(φ'(b_o-)(b_o - x)) <= μ(x) <= (b_o - x) ν(φ'(x+)(b_o - x))`.
pub fn prop1b_envelope(d: &ReferenceDensity, x: f64) -> Result<(f64, f64)> {
    let (a_o, b_o) = d.support();
    if b_o.is_infinite() {
        return Err(Error::domain("bounded-support envelope needs a finite upper end"));
    }
    if !(x >= a_o && x < b_o) {
        return Err(Error::domain(format!("x = {x} outside [{a_o}, {b_o})")));
    }
    Ok(log_linear_envelope(
        b_o - x,
        d.upper_end_slope(),
        d.log_density_rderiv(x),
    ))
}

/// `-1/s` with the convention `-1/(-inf) = 0`.
fn neg_recip(s: f64) -> f64 {
    if s == f64::NEG_INFINITY {
        0.0
    } else {
        -1.0 / s
    }
}

/// Mean-excess envelope for an unbounded upper end:
/// `-1/φ'(∞-) <= μ(x) <= -1/φ'(x+)`.
pub fn prop1c_envelope(d: &ReferenceDensity, x: f64) -> Result<(f64, f64)> {
    let (_, b_o) = d.support();
    if b_o.is_finite() {
        return Err(Error::domain("unbounded-support envelope needs b_o = inf"));
    }
    let right = d.log_density_rderiv(x);
    if !(right < 0.0) {
        return Err(Error::domain(format!("needs phi'(x+) < 0, got {right} at x = {x}")));
    }
    Ok((neg_recip(d.upper_end_slope()), neg_recip(right)))
}

/// Tolerances for [`certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertTolerances {
    /// Allowed negative slack of the integrated-tail inequality.
    pub char1: f64,
    /// Allowed absolute slack of that inequality on the kink set.
    pub eq: f64,
    /// Allowed breach of the distribution-function sandwich on the kink set.
    pub char2: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        Self {
            char1: 1e-6,
            eq: 1e-6,
            char2: 1e-8,
        }
    }
}

/// Residuals of the characterization inequalities for one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateReport {
    /// `min_b [∫(x-b)⁺ dP_emp - ∫(x-b)⁺ dP_hat]` over sample values `b`.
    pub max_violation_char1: f64,
    /// Largest `|∫(x-b)⁺ dP_emp - ∫(x-b)⁺ dP_hat|` over the kink set.
    pub max_eq_residual_char1: f64,
    /// Largest breach of `F_emp(b) - w_b <= F_hat(b) <= F_emp(b)` over the
    /// kink set, where `w_b` is the sample weight at `b` (`1/n` without ties).
    pub max_violation_char2: f64,
    pub pass: bool,
}

impl CertificateReport {
    pub const CSV_HEADER: &'static str =
        "max_violation_char1,max_eq_residual_char1,max_violation_char2,pass";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{}",
            self.max_violation_char1,
            self.max_eq_residual_char1,
            self.max_violation_char2,
            self.pass
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        let bad = || Error::Parse {
            line: 1,
            message: format!("malformed certificate row '{row}'"),
        };
        if fields.len() != 4 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(Self {
            max_violation_char1: num(fields[0])?,
            max_eq_residual_char1: num(fields[1])?,
            max_violation_char2: num(fields[2])?,
            pass: fields[3].parse().map_err(|_| bad())?,
        })
    }
}

/// Slack `∫(x-b)⁺ dP_emp - ∫(x-b)⁺ dP_hat` at every support point of the
/// sample, in sample order.
pub fn integrated_tail_slack(fit: &LogConcaveFit, sample: &SortedSample) -> Vec<f64> {
    let xs = sample.values();
    let ws = sample.weights();
    let m = xs.len();
    let mut emp = vec![0.0; m];
    let mut mass_above = 0.0;
    for i in (0..m - 1).rev() {
        mass_above += ws[i + 1];
        emp[i] = emp[i + 1] + (xs[i + 1] - xs[i]) * mass_above;
    }
    xs.iter()
        .zip(emp)
        .map(|(&b, e)| e - fit.upper_tail(b).1)
        .collect()
}

fn slack_at(fit: &LogConcaveFit, sample: &SortedSample, b: f64) -> f64 {
    let emp: f64 = sample
        .values()
        .iter()
        .zip(sample.weights())
        .map(|(&x, w)| w * (x - b).max(0.0))
        .sum();
    emp - fit.upper_tail(b).1
}

/// Evaluates both characterization inequalities for `fit` on `sample`.
pub fn certify(fit: &LogConcaveFit, sample: &SortedSample, tol: &CertTolerances) -> CertificateReport {
    let slack = integrated_tail_slack(fit, sample);
    let xs = sample.values();
    let ws = sample.weights();
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);

    let mut eq = 0.0f64;
    let mut char2 = 0.0f64;
    let mut ecdf = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for w in ws {
        acc += w;
        ecdf.push(acc);
    }
    for b in fit.kink_set() {
        let (s, f_emp, w_b) = match xs.binary_search_by(|v| v.total_cmp(&b)) {
            Ok(i) => (slack[i], ecdf[i], ws[i]),
            Err(_) => (slack_at(fit, sample, b), sample.ecdf(b), 0.0),
        };
        eq = eq.max(s.abs());
        let f_hat = fit.cdf(b);
        char2 = char2.max(f_hat - f_emp).max(f_emp - w_b - f_hat);
    }
    let pass = min_slack >= -tol.char1 && eq <= tol.eq && char2 <= tol.char2;
    CertificateReport {
        max_violation_char1: min_slack,
        max_eq_residual_char1: eq,
        max_violation_char2: char2,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_fixed_points() {
        assert_eq!(nu(0.0), 0.5);
        assert_eq!(nu(f64::INFINITY), 1.0);
        assert_eq!(nu(f64::NEG_INFINITY), 0.0);
        let h = 1e-6;
        let d = (nu(h) - nu(-h)) / (2.0 * h);
        assert!((d - 1.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn nu_matches_quadrature_oracle() {
        for &t in &[-30.0, -3.0, -0.5, -2e-4, 5e-5, 0.7, 4.0, 60.0] {
            let num = crate::quadrature::adaptive_quadrature(|u| u * (t * u).exp(), 0.0, 1.0, 1e-12)
                .unwrap();
            let den =
                crate::quadrature::adaptive_quadrature(|u| (t * u).exp(), 0.0, 1.0, 1e-12).unwrap();
            assert!((nu(t) - num / den).abs() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn nu_symmetry_and_monotone() {
        for &t in &[1e-3, 0.1, 1.0, 10.0, 50.0] {
            assert!((nu(t) + nu(-t) - 1.0).abs() < 1e-10);
        }
        let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.125).collect();
        assert!(grid.windows(2).all(|w| nu(w[1]) > nu(w[0])));
    }

    #[test]
    fn chernov_h_values() {
        assert_eq!(chernov_h(0.0), 0.0);
        assert_eq!(chernov_h(-1.0), f64::INFINITY);
        assert_eq!(chernov_h(-3.0), f64::INFINITY);
        let r = 0.5f64;
        assert!(chernov_h((2.0 * r).sqrt() + r) >= r);
    }

    #[test]
    fn chernov_bound_values() {
        assert_eq!(chernov_tail_bound(10, 0.0, Tail::Upper).unwrap(), 1.0);
        assert_eq!(chernov_tail_bound(10, 0.0, Tail::Both).unwrap(), 2.0);
        let expected = (-50.0 * (0.5 - 1.5f64.ln())).exp();
        let got = chernov_tail_bound(50, 0.5, Tail::Upper).unwrap();
        assert!((got / expected - 1.0).abs() < 1e-14);
        assert!((50.0 * (0.5 - 1.5f64.ln()) - 4.726_744).abs() < 1e-6);
        assert_eq!(chernov_tail_bound(50, 1.0, Tail::Lower).unwrap(), 0.0);
        assert!(chernov_tail_bound(5, -0.1, Tail::Upper).is_err());
    }

    #[test]
    fn chernov_bound_at_designed_eps() {
        // solve H(eps) = 2 log(100) / 100 by bisection
        let target = 2.0 * 100f64.ln() / 100.0;
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if chernov_h(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = chernov_tail_bound(100, 0.5 * (lo + hi), Tail::Both).unwrap();
        assert!((b - 2e-4).abs() < 1e-15);
    }

    #[test]
    fn threshold_values() {
        assert_eq!(threshold_from_log_n(1.0, 1.0, 2.0), 4.0);
        let t = prop2_threshold(&TailBoundSpec::new(100, 50, 2.0).unwrap());
        let r = 2.0 * 100f64.ln() / 50.0;
        assert!((t - ((2.0 * r).sqrt() + r)).abs() < 1e-15);
        assert!((t - 0.791_177_659).abs() < 1e-8);
        let ts: Vec<f64> = (1..100)
            .map(|k| prop2_threshold(&TailBoundSpec::new(100, k, 2.0).unwrap()))
            .collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert!((prop2_global_bound(100, 2.0) - 0.02).abs() < 1e-15);
        assert!(TailBoundSpec::new(100, 0, 2.0).is_err());
        assert!(TailBoundSpec::new(100, 100, 2.0).is_err());
        assert!(TailBoundSpec::new(100, 5, 1.0).is_err());
    }

    #[test]
    fn doob_values() {
        assert_eq!(doob_sup_bound(4, 0.0).unwrap(), 1.0);
        assert!((doob_sup_bound(100, 0.9).unwrap() - 0.4).abs() < 1e-14);
        assert!(
            (doob_sup_bound(200, 0.3).unwrap() * 2.0 - doob_sup_bound(100, 0.3).unwrap()).abs()
                < 1e-15
        );
        assert!(doob_sup_bound(10, 1.0).is_err());
    }

    #[test]
    fn infinite_slope_upper_envelope() {
        let (_, upper) = log_linear_envelope(0.75, 0.0, f64::INFINITY);
        assert_eq!(upper, 0.75);
        let (lower, _) = log_linear_envelope(0.75, f64::NEG_INFINITY, 0.0);
        assert_eq!(lower, 0.0);
    }

    #[test]
    fn csv_row_roundtrip() {
        let r = CertificateReport {
            max_violation_char1: -1.5e-9,
            max_eq_residual_char1: 2e-12,
            max_violation_char2: 0.0,
            pass: true,
        };
        assert_eq!(CertificateReport::from_csv_row(&r.to_csv_row()).unwrap(), r);
    }
}
