//! Seeded Monte Carlo experiments over repeated MLE fits.
//!
//! Replication `r` fits a sample drawn with seed `seed + r`. Replications
//! run in parallel and are merged by index, so every output is identical
//! for any thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::distributions::ReferenceDensity;
use crate::error::{Error, Result};
use crate::lcmle::{fit_mle, fmt_f64, LogConcaveFit, SolverConfig, SortedSample};

pub mod tailprob;
pub mod verify;

pub const DEFAULT_GAMMAS: [f64; 7] = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99];

pub const QUANTILE_CSV_HEADER: &str = "x,stat,gamma,value,n_minus_inf";

/// Evenly spaced evaluation points `lo, lo + step, …` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
            return Err(Error::invalid(format!(
                "grid needs finite lo <= hi and step > 0, got {lo}:{hi}:{step}"
            )));
        }
        Ok(Self { lo, hi, step })
    }

    pub fn points(&self) -> Vec<f64> {
        // the slack keeps `hi` when (hi - lo) / step is integral up to rounding
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// `lo:hi:step`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("grid must be 'lo:hi:step', got '{s}'")));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad grid number '{p}'")))?;
        }
        Grid::new(v[0], v[1], v[2])
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Parses a comma-separated list of quantile levels.
pub fn parse_gammas(s: &str) -> Result<Vec<f64>> {
    let gammas = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad quantile level '{p}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    check_gammas(&gammas)?;
    Ok(gammas)
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() || gammas.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(Error::invalid("quantile levels must lie in (0, 1)"));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("quantile levels must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub family: ReferenceDensity,
    pub n: usize,
    pub reps: usize,
    pub grid: Grid,
    pub gammas: Vec<f64>,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be >= 2, got {}", self.n)));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be >= 1"));
        }
        check_gammas(&self.gammas)
    }
}

/// Runs `f` on `reps` independent fits of `n`-samples from `family`.
///
/// Returns the per-replication results in replication order, `None` where
/// the fit failed. More than 1% failures is an error.
pub fn replicate_fits<T, F>(
    family: &ReferenceDensity,
    n: usize,
    reps: usize,
    seed: u64,
    threads: usize,
    f: F,
) -> Result<Vec<Option<T>>>
where
    T: Send,
    F: Fn(&LogConcaveFit, &SortedSample) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    let cfg = SolverConfig::default();
    let out: Vec<Option<T>> = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let sample = family.sample(n, seed.wrapping_add(r as u64)).ok()?;
                let fit = fit_mle(&sample, &cfg).ok()?;
                Some(f(&fit, &sample))
            })
            .collect()
    });
    let failed = out.iter().filter(|o| o.is_none()).count();
    if failed * 100 > reps {
        return Err(Error::TooManyFailures { failed, total: reps });
    }
    Ok(out)
}

/// Type-1 empirical quantile of sorted data: the `ceil(gamma m)`-th
/// smallest of `m` values.
pub fn empirical_quantile(sorted: &[f64], gamma: f64) -> f64 {
    let m = sorted.len();
    let idx = ((gamma * m as f64).ceil() as usize).clamp(1, m) - 1;
    sorted[idx]
}

/// Per-grid-point quantiles of `phi_hat(x)` and `phi_hat'(x+)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    pub xs: Vec<f64>,
    pub gammas: Vec<f64>,
    /// `phi[i][j]`: `gammas[j]`-quantile at `xs[i]`.
    pub phi: Vec<Vec<f64>>,
    pub phiprime: Vec<Vec<f64>>,
    /// Replications with `phi_hat(xs[i]) = -inf`.
    pub phi_minus_inf: Vec<usize>,
    pub phiprime_minus_inf: Vec<usize>,
    /// Replications whose fit failed and were skipped.
    pub failures: usize,
}

/// `phi_hat'(x+)`, with `+inf` left of the sample hull where the estimator
/// jumps up from `-inf`.
fn rderiv_or_inf(fit: &LogConcaveFit, x: f64) -> f64 {
    fit.eval_phi_rderiv(x).unwrap_or(f64::INFINITY)
}

pub fn simulate(cfg: &SimulationConfig) -> Result<QuantileGrid> {
    cfg.validate()?;
    let xs = cfg.grid.points();
    let rows = replicate_fits(&cfg.family, cfg.n, cfg.reps, cfg.seed, cfg.threads, |fit, _| {
        let phi: Vec<f64> = xs.iter().map(|&x| fit.eval_phi(x)).collect();
        let der: Vec<f64> = xs.iter().map(|&x| rderiv_or_inf(fit, x)).collect();
        (phi, der)
    })?;
    let failures = rows.iter().filter(|r| r.is_none()).count();
    let ok: Vec<&(Vec<f64>, Vec<f64>)> = rows.iter().flatten().collect();
    let mut grid = QuantileGrid {
        xs: xs.clone(),
        gammas: cfg.gammas.clone(),
        phi: Vec::with_capacity(xs.len()),
        phiprime: Vec::with_capacity(xs.len()),
        phi_minus_inf: Vec::with_capacity(xs.len()),
        phiprime_minus_inf: Vec::with_capacity(xs.len()),
        failures,
    };
    for i in 0..xs.len() {
        for stat in 0..2 {
            let mut col: Vec<f64> = ok.iter().map(|r| if stat == 0 { r.0[i] } else { r.1[i] }).collect();
            // -inf sorts below every finite value
            col.sort_by(f64::total_cmp);
            let q: Vec<f64> = cfg.gammas.iter().map(|&g| empirical_quantile(&col, g)).collect();
            let minus_inf = col.iter().filter(|&&v| v == f64::NEG_INFINITY).count();
            if stat == 0 {
                grid.phi.push(q);
                grid.phi_minus_inf.push(minus_inf);
            } else {
                grid.phiprime.push(q);
                grid.phiprime_minus_inf.push(minus_inf);
            }
        }
    }
    Ok(grid)
}

/// Shortest round-trip decimal, `-inf` and `inf` for infinities.
pub fn format_value(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        fmt_f64(v)
    }
}

impl QuantileGrid {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{QUANTILE_CSV_HEADER}")?;
        for (i, &x) in self.xs.iter().enumerate() {
            let stats = [
                ("phi", &self.phi[i], self.phi_minus_inf[i]),
                ("phiprime", &self.phiprime[i], self.phiprime_minus_inf[i]),
            ];
            for (name, q, minus_inf) in stats {
                for (g, v) in self.gammas.iter().zip(q) {
                    writeln!(out, "{},{name},{g},{},{minus_inf}", fmt_f64(x), format_value(*v))?;
                }
            }
        }
        Ok(())
    }
}
