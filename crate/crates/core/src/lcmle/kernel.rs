//! Integrals of `exp` over a segment on which the exponent is linear.
//!
//! Everything here is written in terms of the unit-interval moments
//! `m_k(d) = ∫₀¹ t^k e^{td} dt`, evaluated only for `d <= 0` so that no
//! intermediate overflows. Segments with increasing exponent are mirrored.

/// Below this `|d|` the moments come from their power series.
const SERIES_RADIUS: f64 = 1.0;

/// `[m_0(d), m_1(d), m_2(d)]` with `m_k(d) = ∫₀¹ t^k e^{td} dt`.
fn unit_moments(d: f64) -> [f64; 3] {
    if d.abs() <= SERIES_RADIUS {
        // m_k(d) = Σ_j d^j / (j! (j + k + 1))
        let mut out = [0.0; 3];
        let mut term = 1.0; // d^j / j!
        for j in 0..40 {
            let jf = j as f64;
            out[0] += term / (jf + 1.0);
            out[1] += term / (jf + 2.0);
            out[2] += term / (jf + 3.0);
            if term.abs() < 1e-18 {
                break;
            }
            term *= d / (jf + 1.0);
        }
        out
    } else {
        let e = d.exp();
        let d2 = d * d;
        [
            d.exp_m1() / d,
            (e * (d - 1.0) + 1.0) / d2,
            (e * (d2 - 2.0 * d + 2.0) - 2.0) / (d2 * d),
        ]
    }
}

/// `[∫₀¹ e^{(1-t)a+tb} dt, ∫₀¹ t e^{…} dt, ∫₀¹ t² e^{…} dt]` for finite `a`, `b`.
pub(crate) fn segment_moments(a: f64, b: f64) -> [f64; 3] {
    let d = b - a;
    if d <= 0.0 {
        let m = unit_moments(d);
        let s = a.exp();
        [s * m[0], s * m[1], s * m[2]]
    } else {
        // t = 1 - u turns the exponent into b - u d
        let m = unit_moments(-d);
        let s = b.exp();
        [s * m[0], s * (m[0] - m[1]), s * (m[0] - 2.0 * m[1] + m[2])]
    }
}

/// `len · ∫₀¹ exp((1-t)a + tb) dt`: the integral of `exp` of the linear
/// interpolant between values `a` and `b` over a segment of length `len`.
///
/// Stable for `a ≈ b` and for large `|b - a|`.
pub fn exp_linear_integral(a: f64, b: f64, len: f64) -> f64 {
    len * segment_moments(a, b)[0]
}

/// `len · ∫₀¹ t · exp((1-t)a + tb) dt`.
///
/// Multiplied by `len` once more this is the first moment about the left
/// endpoint of the segment.
pub fn exp_linear_first_moment(a: f64, b: f64, len: f64) -> f64 {
    len * segment_moments(a, b)[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn constant_integrand() {
        assert_eq!(exp_linear_integral(0.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn log_two_slope() {
        let v = exp_linear_integral(0.0, 2f64.ln(), 1.0);
        assert!(rel(v, 1.0 / 2f64.ln()) < 1e-14);
        let simp = simpson(|t| (t * 2f64.ln()).exp(), 2000);
        assert!(rel(v, simp) < 1e-12);
    }

    #[test]
    fn near_degenerate() {
        assert!((exp_linear_integral(0.0, 1e-14, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_match_simpson_across_regimes() {
        for &(a, b) in &[
            (0.0, -0.3),
            (1.0, 0.2),
            (-2.0, 3.5),
            (0.5, -20.0),
            (-1.0, 40.0),
            (3.0, 3.0 + 0.999),
            (3.0, 3.0 - 1.001),
        ] {
            let m = segment_moments(a, b);
            for (k, &mk) in m.iter().enumerate() {
                let f = |t: f64| t.powi(k as i32) * ((1.0 - t) * a + t * b).exp();
                let simp = simpson(f, 200_000);
                assert!(rel(mk, simp) < 1e-10, "a={a} b={b} k={k}: {mk} vs {simp}");
            }
        }
    }

    #[test]
    fn no_overflow_for_steep_segments() {
        let v = exp_linear_integral(0.0, -1e5, 1.0);
        assert!(rel(v, 1e-5) < 1e-12);
        let v = exp_linear_integral(-1e5, 0.0, 2.0);
        assert!(rel(v, 2e-5) < 1e-12);
    }

    #[test]
    fn series_and_closed_form_agree_at_switch() {
        let below = unit_moments(-SERIES_RADIUS);
        let above = unit_moments(-SERIES_RADIUS * (1.0 + 1e-12));
        for k in 0..3 {
            assert!(rel(below[k], above[k]) < 1e-11);
        }
    }
}
