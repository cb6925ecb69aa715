//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

// nodes and weights are kept as tabulated, beyond double precision
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

/// Floor on the absolute error target, so integrals that are exactly zero
/// terminate.
const ABS_FLOOR: f64 = 1e-300;

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Piece {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Integrates `f` over a finite interval to relative tolerance `rel_tol`.
fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut pieces = vec![kronrod(f, a, b)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Quadrature {
                rel_tol,
                estimate: total,
                error: err,
            });
        }
        if err <= (rel_tol * total.abs()).max(ABS_FLOOR) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                rel_tol,
                estimate: total,
                error: err,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval can no longer be split in floating point
            return Err(Error::Quadrature {
                rel_tol,
                estimate: total,
                error: err,
            });
        }
        pieces.push(kronrod(f, p.a, mid));
        pieces.push(kronrod(f, mid, p.b));
    }
}

/// `∫_a^b f(y) dy` to relative tolerance `rel_tol` (at least `1e-12`).
///
/// An infinite upper limit is mapped onto `[0, 1)` by `y = a + t/(1-t)`.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if b == f64::INFINITY {
        return integrate_to_infinity(f, a, 1.0, rel_tol);
    }
    check_args(a, b, rel_tol)?;
    integrate_finite(&f, a, b, rel_tol)
}

/// `∫_a^∞ f(y) dy` via `y = a + scale · t/(1-t)`; `scale` should be of the
/// order of the integrand's decay length.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, rel_tol: f64) -> Result<f64> {
    check_args(a, a + 1.0, rel_tol)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("substitution scale must be positive, got {scale}")));
    }
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let v = f(a + scale * t / u);
        if v == 0.0 {
            0.0
        } else {
            v * scale / (u * u)
        }
    };
    integrate_finite(&g, 0.0, 1.0, rel_tol)
}

fn check_args(a: f64, b: f64, rel_tol: f64) -> Result<()> {
    if !a.is_finite() || b.is_nan() || b < a {
        return Err(Error::invalid(format!("bad integration limits [{a}, {b}]")));
    }
    if !(rel_tol >= 1e-12) {
        return Err(Error::invalid(format!("rel_tol must be >= 1e-12, got {rel_tol}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant() {
        let v = adaptive_quadrature(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_tail() {
        let v = adaptive_quadrature(|x: f64| (-x).exp(), 0.0, f64::INFINITY, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        // K15 integrates degree-22 polynomials exactly on one interval
        let v = adaptive_quadrature(|x: f64| x.powi(10), -1.0, 2.0, 1e-12).unwrap();
        assert!((v - (2f64.powi(11) + 1.0) / 11.0).abs() < 1e-11);
    }

    #[test]
    fn peaked_integrand() {
        let v = adaptive_quadrature(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(adaptive_quadrature(|x| x, 1.0, 0.0, 1e-10).is_err());
        assert!(adaptive_quadrature(|x| x, 0.0, 1.0, 1e-14).is_err());
    }

    #[test]
    fn non_integrable_fails_explicitly() {
        let r = adaptive_quadrature(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
