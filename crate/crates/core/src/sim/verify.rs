//! Self-check battery behind `logconcave verify`.

use std::io::Write;

use crate::distributions::ReferenceDensity;
use crate::error::Result;
use crate::lcmle::{fit_mle, LogConcaveFit, SolverConfig};
use crate::oracle::{mc_doob_sup_square, mc_violation_rate};
use crate::tails::{
    certify, chernov_h, doob_sup_bound, nu, prop1b_envelope, prop1c_envelope, prop2_global_bound,
    CertTolerances,
};

pub const VERIFY_CSV_HEADER: &str = "suite,pass,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Perturb one fit before certifying it; the certificate suite must
    /// then fail.
    pub tamper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn result(suite: &'static str, pass: bool, detail: String) -> SuiteResult {
    SuiteResult { suite, pass, detail }
}

fn nu_identities() -> SuiteResult {
    let at_zero = (nu(0.0) - 0.5).abs();
    let sym = [-40.0, -5.0, -1.0, -0.3, 1e-5, 0.3, 1.0, 5.0, 40.0]
        .iter()
        .map(|&t: &f64| (nu(t) + nu(-t) - 1.0).abs())
        .fold(0.0, f64::max);
    let h = 1e-3;
    let deriv = (nu(h) - nu(-h)) / (2.0 * h);
    let pass = at_zero <= 1e-12 && sym <= 1e-10 && (deriv - 1.0 / 12.0).abs() <= 1e-6;
    result(
        "nu_identities",
        pass,
        format!("|nu(0)-1/2|={at_zero:e} max|nu(t)+nu(-t)-1|={sym:e} nu'(0)~{deriv}"),
    )
}

fn chernov_inequality() -> SuiteResult {
    let mut worst = f64::INFINITY;
    for i in 0..200 {
        let r = 100.0 * i as f64 / 199.0;
        worst = worst.min(chernov_h((2.0 * r).sqrt() + r) - r);
    }
    let mut sym_ok = true;
    for i in 1..100 {
        let e = i as f64 / 100.0;
        sym_ok &= chernov_h(-e) >= chernov_h(e);
    }
    result(
        "chernov_h",
        worst >= 0.0 && sym_ok,
        format!("min H(sqrt(2r)+r)-r={worst:e} H(-e)>=H(e):{sym_ok}"),
    )
}

/// Checks the mean-excess envelopes on a 50-point grid per family and the
/// Gaussian asymptote `x mu(x) -> 1`.
fn envelopes() -> Result<SuiteResult> {
    let cases = [
        (ReferenceDensity::standard_uniform(), 0.0, 0.98),
        (ReferenceDensity::standard_gaussian(), 0.05, 6.0),
        (ReferenceDensity::logistic(0.0, 1.0)?, 0.05, 10.0),
        (ReferenceDensity::exponential(1.0)?, 0.0, 10.0),
        (ReferenceDensity::gamma(2.0, 1.0)?, 1.05, 12.0),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (d, lo, hi) in &cases {
        for i in 0..50 {
            let x = lo + (hi - lo) * i as f64 / 49.0;
            let (l, u) = if d.support().1.is_finite() {
                prop1b_envelope(d, x)?
            } else {
                prop1c_envelope(d, x)?
            };
            let mu = d.mean_excess(x)?;
            worst = worst.max(l - mu).max(mu - u);
        }
    }
    let asym = 10.0 * ReferenceDensity::standard_gaussian().mean_excess(10.0)?;
    Ok(result(
        "mean_excess_envelopes",
        worst <= 1e-8 && asym > 0.98 && asym <= 1.0,
        format!("max envelope breach={worst:e} 10*mu(10)={asym}"),
    ))
}

fn families() -> Result<Vec<ReferenceDensity>> {
    Ok(vec![
        ReferenceDensity::standard_uniform(),
        ReferenceDensity::standard_gaussian(),
        ReferenceDensity::exponential(1.0)?,
        ReferenceDensity::logistic(0.0, 1.0)?,
        ReferenceDensity::gamma(2.0, 1.0)?,
    ])
}

/// Raises the fit at its middle knot; concavity survives, optimality and
/// normalization do not.
fn tampered(fit: &LogConcaveFit) -> Result<LogConcaveFit> {
    let mut values = fit.values().to_vec();
    let mid = values.len() / 2;
    values[mid] += 0.25;
    LogConcaveFit::from_parts(fit.knots().to_vec(), values, fit.n_obs())
}

/// Fits fresh samples from every family and certifies each fit.
fn certificates(cfg: &VerifyConfig) -> Result<(SuiteResult, SuiteResult)> {
    let solver = SolverConfig::default();
    let tol = CertTolerances::default();
    let mut fits = 0;
    let mut cert_fail = 0;
    let mut worst_norm = 0.0f64;
    let mut first = true;
    for (f, d) in families()?.iter().enumerate() {
        for n in [10, 100, 500] {
            for r in 0..4u64 {
                let seed = cfg.seed.wrapping_add(1000 * f as u64 + 10 * n as u64 + r);
                let sample = d.sample(n, seed)?;
                let mut fit = fit_mle(&sample, &solver)?;
                if cfg.tamper && first {
                    fit = tampered(&fit)?;
                    first = false;
                }
                fits += 1;
                if !certify(&fit, &sample, &tol).pass {
                    cert_fail += 1;
                }
                worst_norm = worst_norm.max(fit.norm_residual());
            }
        }
    }
    Ok((
        result(
            "certificates",
            cert_fail == 0,
            format!("{cert_fail} of {fits} fits failed certification"),
        ),
        result(
            "normalization",
            worst_norm <= 1e-8,
            format!("max |int f_hat - 1|={worst_norm:e} over {fits} fits"),
        ),
    ))
}

fn doob(cfg: &VerifyConfig) -> Result<SuiteResult> {
    let (n, f_b, reps) = (200, 0.9, 2000);
    let (mean, sd) = mc_doob_sup_square(&ReferenceDensity::standard_uniform(), n, f_b, reps, cfg.seed)?;
    let bound = doob_sup_bound(n, f_b)?;
    let se = sd / (reps as f64).sqrt();
    Ok(result(
        "doob_bound",
        mean <= bound + 3.0 * se,
        format!("mean sup-square={mean} (se {se:e}) bound={bound}"),
    ))
}

fn prop2(cfg: &VerifyConfig) -> Result<SuiteResult> {
    let (n, tau, reps) = (100, 2.0, 2000);
    let rate = mc_violation_rate(&ReferenceDensity::exponential(1.0)?, n, tau, reps, cfg.seed)?;
    let bound = prop2_global_bound(n, tau);
    Ok(result(
        "mean_excess_concentration",
        rate <= bound,
        format!("violation rate={rate} bound={bound}"),
    ))
}

/// Runs every suite. Errors from the numerical routines themselves are
/// returned as errors rather than failed rows.
pub fn verify(cfg: &VerifyConfig) -> Result<Vec<SuiteResult>> {
    let (certs, norm) = certificates(cfg)?;
    Ok(vec![
        nu_identities(),
        chernov_inequality(),
        envelopes()?,
        certs,
        norm,
        doob(cfg)?,
        prop2(cfg)?,
    ])
}

pub fn write_verify_csv<W: Write>(rows: &[SuiteResult], mut out: W) -> Result<()> {
    writeln!(out, "{VERIFY_CSV_HEADER}")?;
    for r in rows {
        // details never contain commas or quotes
        writeln!(out, "{},{},{}", r.suite, r.pass, r.detail.replace(',', ";"))?;
    }
    Ok(())
}
