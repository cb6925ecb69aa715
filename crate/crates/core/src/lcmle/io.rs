//! Flat text serialization of a fit.
//!
//! ```text
//! # logconcave fit
//! n    150
//! norm_residual    2.1e-16
//! converged    true
//! iterations    17
//! x    phi    slope_right
//! 0.0132    0.0571    -0.013
//! ...
//! 0.9961    -0.0412    -inf
//! ```
//!
//! Header lines are tab-separated key/value pairs, then one knot per line.
//! The last knot carries `slope_right = -inf`. Lines starting with `#` are
//! comments; a comment after the knot table ends it, so trailers such as a
//! certificate row can follow.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::lcmle::LogConcaveFit;

const COLUMNS: &str = "x\tphi\tslope_right";

/// Shortest round-trip decimal, in exponent form for very small or very
/// large magnitudes.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn write_fit<W: Write>(fit: &LogConcaveFit, mut out: W) -> Result<()> {
    writeln!(out, "# logconcave fit")?;
    writeln!(out, "n\t{}", fit.n_obs())?;
    writeln!(out, "norm_residual\t{:e}", fit.norm_residual())?;
    writeln!(out, "converged\t{}", fit.converged())?;
    writeln!(out, "iterations\t{}", fit.iterations())?;
    writeln!(out, "{COLUMNS}")?;
    let m = fit.knots().len();
    for l in 0..m {
        let slope = if l + 1 < m { fit.slopes()[l] } else { f64::NEG_INFINITY };
        writeln!(
            out,
            "{}\t{}\t{}",
            fmt_f64(fit.knots()[l]),
            fmt_f64(fit.values()[l]),
            fmt_f64(slope)
        )?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("not a number: '{s}'")))
}

/// Reads a fit written by [`write_fit`]. Knot values are authoritative; the
/// slope column is checked against them.
pub fn read_fit<R: BufRead>(input: R) -> Result<LogConcaveFit> {
    let mut n_obs = None;
    let mut converged = None;
    let mut iterations = 0usize;
    let mut in_table = false;
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if in_table && !knots.is_empty() {
                break;
            }
            continue;
        }
        if !in_table {
            if line == COLUMNS {
                in_table = true;
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(lineno, "expected 'key<TAB>value'"))?;
            match key {
                "n" => {
                    n_obs = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|_| parse_err(lineno, "bad sample size"))?,
                    )
                }
                "converged" => {
                    converged = Some(
                        value
                            .trim()
                            .parse::<bool>()
                            .map_err(|_| parse_err(lineno, "bad converged flag"))?,
                    )
                }
                "iterations" => {
                    iterations = value
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad iteration count"))?
                }
                "norm_residual" => {
                    parse_f64(value, lineno)?;
                }
                other => return Err(parse_err(lineno, format!("unknown header key '{other}'"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, "expected 3 tab-separated columns"));
        }
        knots.push(parse_f64(fields[0], lineno)?);
        values.push(parse_f64(fields[1], lineno)?);
        slopes.push((parse_f64(fields[2], lineno)?, lineno));
    }
    if !in_table {
        return Err(parse_err(0, "missing knot table header"));
    }
    let n_obs = n_obs.ok_or_else(|| parse_err(0, "missing 'n' header"))?;
    let converged = converged.ok_or_else(|| parse_err(0, "missing 'converged' header"))?;
    let fit = LogConcaveFit::assemble(knots, values, n_obs, iterations, converged)?;
    for (l, &(s, lineno)) in slopes.iter().enumerate() {
        let expected = fit.slopes().get(l).copied().unwrap_or(f64::NEG_INFINITY);
        let agree = if expected.is_finite() {
            (s - expected).abs() <= 1e-9 * (1.0 + expected.abs())
        } else {
            s == expected
        };
        if !agree {
            return Err(parse_err(
                lineno,
                format!("slope {s} inconsistent with knot values (expected {expected})"),
            ));
        }
    }
    Ok(fit)
}
