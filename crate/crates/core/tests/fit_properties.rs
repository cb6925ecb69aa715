use proptest::prelude::*;

use logconcave::lcmle::{read_fit, write_fit};
use logconcave::oracle::{brute_force_mle, DEFAULT_RESOLUTION};
use logconcave::{certify, fit_mle, CertTolerances, ReferenceDensity, SolverConfig, SortedSample};

fn family(i: usize) -> ReferenceDensity {
    ["uniform:0,1", "gaussian:0,1", "exponential:1", "logistic:0,1", "gamma:2,1"][i % 5]
        .parse()
        .unwrap()
}

fn fit(sample: &SortedSample) -> logconcave::LogConcaveFit {
    fit_mle(sample, &SolverConfig::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_equivariance(fam in 0usize..5, n in 3usize..300, seed in 0u64..1_000_000,
                           scale in 1e-3f64..1e3, shift in -1e3f64..1e3) {
        let s = family(fam).sample(n, seed).unwrap();
        let moved: Vec<f64> = s.values().iter().flat_map(|&x| {
            // expand ties back out so both samples share weights
            let k = (s.weights()[s.values().partition_point(|&v| v < x)] * n as f64).round() as usize;
            std::iter::repeat_n(scale * x + shift, k)
        }).collect();
        let t = SortedSample::new(&moved).unwrap();
        let direct = fit(&t);
        let mapped = fit(&s).affine_image(scale, shift).unwrap();
        let (lo, hi) = (t.min(), t.max());
        for i in 0..=200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            let (a, b) = (direct.eval_phi(x), mapped.eval_phi(x));
            prop_assert!(a == b || (a - b).abs() <= 1e-6 * (1.0 + a.abs()), "x={} {} vs {}", x, a, b);
        }
    }

    #[test]
    fn fitted_mean_excess_is_monotone_and_one_lipschitz(fam in 0usize..5, n in 5usize..400, seed in 0u64..1_000_000) {
        let s = family(fam).sample(n, seed).unwrap();
        let f = fit(&s);
        let (lo, hi) = (f.lower(), f.upper());
        let xs: Vec<f64> = (0..=300).map(|i| lo + (hi - lo) * i as f64 / 300.0).collect();
        let mu: Vec<f64> = xs.iter().map(|&x| f.mean_excess(x)).collect();
        let scale = hi - lo;
        for k in 1..xs.len() {
            // non-increasing, and mu(x) + x non-decreasing
            prop_assert!(mu[k] <= mu[k - 1] + 1e-9 * scale);
            prop_assert!(mu[k] + xs[k] >= mu[k - 1] + xs[k - 1] - 1e-9 * scale);
        }
    }

    #[test]
    fn reference_mean_excess_is_monotone_and_one_lipschitz(fam in 0usize..5, a in -3.0f64..3.0, step in 0.01f64..2.0) {
        let d = family(fam);
        let (m0, m1) = (d.mean_excess(a).unwrap(), d.mean_excess(a + step).unwrap());
        prop_assert!(m1 <= m0 + 1e-9);
        prop_assert!(m1 + step >= m0 - 1e-9);
    }

    #[test]
    fn small_samples_match_brute_force(fam in 0usize..5, n in 2usize..6, seed in 0u64..1_000_000) {
        let s = family(fam).sample(n, seed).unwrap();
        let f = fit(&s);
        let o = brute_force_mle(&s, DEFAULT_RESOLUTION).unwrap();
        prop_assert!(f.log_likelihood(&s) >= o.log_likelihood - 1e-6);
        for &x in s.values() {
            prop_assert!((f.eval_phi(x) - o.eval(x)).abs() <= 1e-3);
        }
    }
}

#[test]
fn permutation_and_duplication_invariance() {
    let s = family(1).sample(80, 5).unwrap();
    let mut raw: Vec<f64> = s.values().to_vec();
    raw.reverse();
    let reversed = fit(&SortedSample::new(&raw).unwrap());
    assert_eq!(reversed, fit(&s));
    // duplicating every observation leaves the empirical law unchanged
    let doubled: Vec<f64> = raw.iter().chain(raw.iter()).copied().collect();
    let d = fit(&SortedSample::new(&doubled).unwrap());
    for &x in s.values() {
        assert!((d.eval_phi(x) - reversed.eval_phi(x)).abs() < 1e-8);
    }
}

#[test]
fn ties_are_certified() {
    let g = ReferenceDensity::standard_gaussian();
    let raw: Vec<f64> = g.sample(500, 9).unwrap().values().iter().map(|x| (x * 5.0).round() / 5.0).collect();
    let s = SortedSample::new(&raw).unwrap();
    let f = fit(&s);
    assert!(certify(&f, &s, &CertTolerances::default()).pass);
}

#[test]
fn serialized_fit_recertifies() {
    let s = family(4).sample(250, 12).unwrap();
    let f = fit(&s);
    let mut buf = Vec::new();
    write_fit(&f, &mut buf).unwrap();
    let back = read_fit(buf.as_slice()).unwrap();
    assert_eq!(back, f);
    assert!(certify(&back, &s, &CertTolerances::default()).pass);
}

#[test]
fn extreme_scales_converge() {
    let base = family(1).sample(200, 3).unwrap();
    for scale in [1e-9, 1e9] {
        let raw: Vec<f64> = base.values().iter().map(|x| scale * x + 5.0 * scale).collect();
        let s = SortedSample::new(&raw).unwrap();
        let f = fit(&s);
        assert!(f.norm_residual() < 1e-10);
    }
}

#[test]
fn large_sample_uniform_has_few_knots() {
    let s = ReferenceDensity::standard_uniform().sample(5000, 1).unwrap();
    let f = fit(&s);
    assert!(f.knots().len() < 100, "{} knots", f.knots().len());
}

#[test]
fn degenerate_inputs_are_rejected() {
    assert!(SortedSample::new(&[1.0]).is_err());
    assert!(SortedSample::new(&[2.0, 2.0, 2.0]).is_err());
    assert!(SortedSample::new(&[0.0, f64::NAN]).is_err());
}
