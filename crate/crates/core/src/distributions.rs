//! Analytic log-concave reference laws used as ground truth in experiments.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::lcmle::SortedSample;
use crate::quadrature::integrate_to_infinity;

/// Relative tolerance of the quadrature behind [`ReferenceDensity::mean_excess`].
const MEAN_EXCESS_REL_TOL: f64 = 1e-10;

/// Absolute tolerance of the bisection used to invert the Gamma cdf.
const GAMMA_QUANTILE_TOL: f64 = 1e-12;

/// A log-concave law with closed-form log-density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceDensity {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Logistic { location: f64, scale: f64 },
    /// Shape at least one, so that the density is log-concave.
    Gamma { shape: f64, rate: f64 },
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ReferenceDensity {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::invalid(format!("bad uniform support [{lower}, {upper}]")));
        }
        Ok(Self::Uniform { lower, upper })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("gaussian mean must be finite"));
        }
        Ok(Self::Gaussian {
            mean,
            sd: positive("sd", sd)?,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential {
            rate: positive("rate", rate)?,
        })
    }

    pub fn logistic(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::invalid("logistic location must be finite"));
        }
        Ok(Self::Logistic {
            location,
            scale: positive("scale", scale)?,
        })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape >= 1.0 && shape.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma shape must be >= 1 for log-concavity, got {shape}"
            )));
        }
        Ok(Self::Gamma {
            shape,
            rate: positive("rate", rate)?,
        })
    }

    pub fn standard_gaussian() -> Self {
        Self::Gaussian { mean: 0.0, sd: 1.0 }
    }

    pub fn standard_uniform() -> Self {
        Self::Uniform {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Gaussian { .. } => "gaussian",
            Self::Exponential { .. } => "exponential",
            Self::Logistic { .. } => "logistic",
            Self::Gamma { .. } => "gamma",
        }
    }

    /// `(a_o, b_o)`, the interior of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lower, upper } => (lower, upper),
            Self::Gaussian { .. } | Self::Logistic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Exponential { .. } | Self::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::Gaussian { mean, .. } => mean,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Logistic { location, .. } => location,
            Self::Gamma { shape, rate } => shape / rate,
        }
    }

    /// A point where the log-density is maximal.
    fn mode(&self) -> f64 {
        match *self {
            Self::Uniform { lower, .. } => lower,
            Self::Gaussian { mean, .. } => mean,
            Self::Exponential { .. } => 0.0,
            Self::Logistic { location, .. } => location,
            Self::Gamma { shape, rate } => (shape - 1.0) / rate,
        }
    }

    /// `phi(x) = log f(x)`, `-inf` off the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => {
                if x >= lower && x <= upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            Self::Exponential { rate } => {
                if x >= 0.0 {
                    rate.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Logistic { location, scale } => {
                let z = (x - location) / scale;
                -z - scale.ln() - 2.0 * softplus(-z)
            }
            Self::Gamma { shape, rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    if shape == 1.0 {
                        rate.ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    (shape - 1.0) * x.ln() - rate * x + shape * rate.ln() - ln_gamma(shape)
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Right derivative `phi'(x+)`: `-inf` at and beyond a finite upper end,
    /// `+inf` below the support where `phi` jumps up from `-inf`.
    pub fn log_density_rderiv(&self, x: f64) -> f64 {
        let (a_o, b_o) = self.support();
        if x >= b_o {
            return f64::NEG_INFINITY;
        }
        if x < a_o {
            return f64::INFINITY;
        }
        match *self {
            Self::Uniform { .. } => 0.0,
            Self::Gaussian { mean, sd } => -(x - mean) / (sd * sd),
            Self::Exponential { rate } => -rate,
            Self::Logistic { location, scale } => -((x - location) / (2.0 * scale)).tanh() / scale,
            Self::Gamma { shape, rate } => {
                if x == 0.0 {
                    if shape == 1.0 {
                        -rate
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (shape - 1.0) / x - rate
                }
            }
        }
    }

    /// Limit of `phi'` at the upper end of the support: `phi'(b_o-)` or `phi'(∞-)`.
    pub fn upper_end_slope(&self) -> f64 {
        match *self {
            Self::Uniform { .. } => 0.0,
            Self::Gaussian { .. } => f64::NEG_INFINITY,
            Self::Exponential { rate } => -rate,
            Self::Logistic { scale, .. } => -1.0 / scale,
            Self::Gamma { rate, .. } => -rate,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Self::Gaussian { mean, sd } => 0.5 * erfc(-(x - mean) / sd * FRAC_1_SQRT_2),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::Logistic { location, scale } => 1.0 / (1.0 + (-(x - location) / scale).exp()),
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, rate * x)
                }
            }
        }
    }

    /// Survival function `1 - F(x)`, accurate in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => ((upper - x) / (upper - lower)).clamp(0.0, 1.0),
            Self::Gaussian { mean, sd } => 0.5 * erfc((x - mean) / sd * FRAC_1_SQRT_2),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            Self::Logistic { location, scale } => 1.0 / (1.0 + ((x - location) / scale).exp()),
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, rate * x)
                }
            }
        }
    }

    /// `F^{-1}(u)` for `u` in `(0, 1)`; anything else is an error.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        Ok(match *self {
            Self::Uniform { lower, upper } => lower + u * (upper - lower),
            Self::Gaussian { mean, sd } => mean + sd * standard_normal_quantile(u),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Logistic { location, scale } => location + scale * (u / (1.0 - u)).ln(),
            Self::Gamma { .. } => self.bisect_quantile(u),
        })
    }

    fn bisect_quantile(&self, u: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = self.mean().max(1e-300);
        while self.cdf(hi) < u {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > GAMMA_QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Mean excess `mu(x) = E[(X - x)⁺] / (1 - F(x))`, zero where `F(x) = 1`.
    ///
    /// Closed forms for Uniform and Exponential; the other families integrate
    /// the conditional law of `X - x` numerically.
    pub fn mean_excess(&self, x: f64) -> Result<f64> {
        let (a_o, b_o) = self.support();
        if x >= b_o {
            return Ok(0.0);
        }
        if x <= a_o {
            return Ok(self.mean() - x);
        }
        match *self {
            Self::Uniform { upper, .. } => Ok(0.5 * (upper - x)),
            Self::Exponential { rate } => Ok(1.0 / rate),
            _ => {
                // integrand scaled by its maximum on [x, inf) to avoid underflow
                let peak = self.log_density(x.max(self.mode()));
                let g = |z: f64| (self.log_density(x + z) - peak).exp();
                let decay = match self.log_density_rderiv(x) {
                    s if s < 0.0 && s.is_finite() => (-1.0 / s).min(self.scale()),
                    _ => self.scale(),
                };
                let mass = integrate_to_infinity(g, 0.0, decay, MEAN_EXCESS_REL_TOL)?;
                let first = integrate_to_infinity(|z| z * g(z), 0.0, decay, MEAN_EXCESS_REL_TOL)?;
                Ok(first / mass)
            }
        }
    }

    /// Typical length scale of the law.
    fn scale(&self) -> f64 {
        match *self {
            Self::Uniform { lower, upper } => upper - lower,
            Self::Gaussian { sd, .. } => sd,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Logistic { scale, .. } => scale,
            Self::Gamma { shape, rate } => shape.sqrt() / rate,
        }
    }

    /// `n` unsorted draws by inversion, consuming uniforms from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.sample(rand::distributions::Open01);
                self.quantile(u).expect("Open01 draws lie in (0, 1)")
            })
            .collect()
    }

    /// `n >= 2` i.i.d. draws by inversion, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<SortedSample> {
        if n < 2 {
            return Err(Error::invalid(format!("sample size must be >= 2, got {n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SortedSample::new(&self.draw(n, &mut rng))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn standard_normal_quantile(u: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * u);
    // Newton polish on whichever tail keeps the residual well conditioned
    for _ in 0..2 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        let resid = if x > 0.0 {
            (1.0 - u) - 0.5 * erfc(x * FRAC_1_SQRT_2)
        } else {
            0.5 * erfc(-x * FRAC_1_SQRT_2) - u
        };
        let step = if x > 0.0 { -resid / pdf } else { resid / pdf };
        x -= step;
    }
    x
}

impl fmt::Display for ReferenceDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform { lower, upper } => write!(f, "uniform:{lower},{upper}"),
            Self::Gaussian { mean, sd } => write!(f, "gaussian:{mean},{sd}"),
            Self::Exponential { rate } => write!(f, "exponential:{rate}"),
            Self::Logistic { location, scale } => write!(f, "logistic:{location},{scale}"),
            Self::Gamma { shape, rate } => write!(f, "gamma:{shape},{rate}"),
        }
    }
}

/// Parses `name` or `name:p1,p2`, e.g. `uniform:0,1`, `gaussian`,
/// `exponential:2`, `logistic:0,1`, `gamma:2,1`. Omitted parameters take the
/// standard values.
impl FromStr for ReferenceDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let params: Vec<f64> = match rest {
            Some(r) => r
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad family parameter '{p}'")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let arity = |max: usize| {
            if params.len() > max {
                Err(Error::invalid(format!("{name} takes at most {max} parameters")))
            } else {
                Ok(())
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" | "unif" => {
                arity(2)?;
                Self::uniform(get(0, 0.0), get(1, 1.0))
            }
            "gaussian" | "normal" => {
                arity(2)?;
                Self::gaussian(get(0, 0.0), get(1, 1.0))
            }
            "exponential" | "exp" => {
                arity(1)?;
                Self::exponential(get(0, 1.0))
            }
            "logistic" => {
                arity(2)?;
                Self::logistic(get(0, 0.0), get(1, 1.0))
            }
            "gamma" => {
                arity(2)?;
                Self::gamma(get(0, 2.0), get(1, 1.0))
            }
            other => Err(Error::invalid(format!("unknown family '{other}'"))),
        }
    }
}
