//! Observed tail-event rates next to their theoretical bounds.

use std::io::Write;

use crate::distributions::ReferenceDensity;
use crate::error::{Error, Result};
use crate::oracle::{mc_chernov_exceedance, mc_violation_rate};
use crate::sim::format_value;
use crate::tails::{chernov_tail_bound, prop2_global_bound, Tail};

pub const TAILPROB_CSV_HEADER: &str = "kind,param,tail,observed,bound,mc_sigma";

pub const DEFAULT_EPS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct TailProbConfig {
    pub family: ReferenceDensity,
    pub n: usize,
    pub tau: f64,
    pub reps: usize,
    pub seed: u64,
    pub eps: Vec<f64>,
}

/// One row of the table. `param` is `tau` for the simultaneous mean-excess
/// row and `eps` for the Chernov rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TailProbRow {
    pub kind: &'static str,
    pub param: f64,
    pub tail: Tail,
    pub observed: f64,
    pub bound: f64,
    /// Binomial standard error of a rate equal to the bound.
    pub mc_sigma: f64,
}

impl TailProbRow {
    /// `observed <= bound + 3 mc_sigma`
    pub fn within_bound(&self) -> bool {
        self.observed <= self.bound + 3.0 * self.mc_sigma
    }
}

fn binomial_sigma(p: f64, reps: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn tail_name(t: Tail) -> &'static str {
    match t {
        Tail::Upper => "upper",
        Tail::Lower => "lower",
        Tail::Both => "both",
    }
}

/// Simultaneous mean-excess violation rate against `2 n^{1-tau}`, then,
/// for laws with a finite lower end `a_o`, one-sided exceedance rates of
/// `mean(X - a_o) / (E X - a_o)` against `exp(-n H(±eps))`.
pub fn tailprob(cfg: &TailProbConfig) -> Result<Vec<TailProbRow>> {
    if cfg.eps.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::invalid("eps values must be >= 0"));
    }
    let mut rows = Vec::new();
    let observed = mc_violation_rate(&cfg.family, cfg.n, cfg.tau, cfg.reps, cfg.seed)?;
    let bound = prop2_global_bound(cfg.n, cfg.tau);
    rows.push(TailProbRow {
        kind: "prop2",
        param: cfg.tau,
        tail: Tail::Both,
        observed,
        bound,
        mc_sigma: binomial_sigma(bound, cfg.reps),
    });
    if cfg.family.support().0.is_finite() {
        for &eps in &cfg.eps {
            for tail in [Tail::Upper, Tail::Lower] {
                let observed = mc_chernov_exceedance(&cfg.family, cfg.n, eps, tail, cfg.reps, cfg.seed)?;
                let bound = chernov_tail_bound(cfg.n, eps, tail)?;
                rows.push(TailProbRow {
                    kind: "chernov",
                    param: eps,
                    tail,
                    observed,
                    bound,
                    mc_sigma: binomial_sigma(bound, cfg.reps),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_tailprob_csv<W: Write>(rows: &[TailProbRow], mut out: W) -> Result<()> {
    writeln!(out, "{TAILPROB_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.kind,
            r.param,
            tail_name(r.tail),
            r.observed,
            format_value(r.bound),
            r.mc_sigma
        )?;
    }
    Ok(())
}
