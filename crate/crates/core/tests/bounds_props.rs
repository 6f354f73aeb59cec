use proptest::prelude::*;

use matchcert::bounds::{
    bound_values, hypergeom_invert_lower, hypergeom_invert_upper, sample_sigma_hat, BoundMethod, Confidence, Side,
};

fn binary(s: u64, k: u64) -> Vec<f64> {
    (0..s).map(|j| if j < k { 1.0 } else { 0.0 }).collect()
}

fn method() -> impl Strategy<Value = BoundMethod> {
    prop::sample::select(BoundMethod::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bounds_bracket_the_estimate(
        (n, s, k) in (2u64..3000).prop_flat_map(|n| (Just(n), 1..=n.min(400)))
            .prop_flat_map(|(n, s)| (Just(n), Just(s), 0..=s)),
        delta in 0.001f64..0.5,
        m in method(),
    ) {
        let b = bound_values(n, 0.0, 1.0, binary(s, k), m, Confidence::new(delta).unwrap(), Side::Both).unwrap();
        prop_assert!(0.0 <= b.lower && b.lower <= b.estimate + 1e-12);
        prop_assert!(b.estimate <= b.upper + 1e-12 && b.upper <= 1.0);
    }

    #[test]
    fn lower_bound_grows_with_delta(
        (n, s, k) in (2u64..3000).prop_flat_map(|n| (Just(n), 1..=n.min(400)))
            .prop_flat_map(|(n, s)| (Just(n), Just(s), 0..=s)),
        d1 in 0.001f64..0.25,
        d2 in 0.001f64..0.25,
        m in method(),
    ) {
        let (lo_d, hi_d) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let at = |d: f64| bound_values(n, 0.0, 1.0, binary(s, k), m, Confidence::new(d).unwrap(), Side::Lower).unwrap().lower;
        prop_assert!(at(lo_d) <= at(hi_d) + 1e-12);
    }

    #[test]
    fn exact_inversions_monotone_in_successes(
        (n, s, k) in (2u64..2000).prop_flat_map(|n| (Just(n), 1..=n.min(300)))
            .prop_flat_map(|(n, s)| (Just(n), Just(s), 0..s)),
        delta in 0.001f64..0.3,
    ) {
        prop_assert!(hypergeom_invert_lower(n, s, k, delta).unwrap() <= hypergeom_invert_lower(n, s, k + 1, delta).unwrap());
        prop_assert!(hypergeom_invert_upper(n, s, k, delta).unwrap() <= hypergeom_invert_upper(n, s, k + 1, delta).unwrap());
    }

    #[test]
    fn sigma_hat_matches_second_moment_identity(values in prop::collection::vec(0.0f64..1.0, 1..300)) {
        let len = values.len() as f64;
        let mean = values.iter().sum::<f64>() / len;
        let second = values.iter().map(|v| v * v).sum::<f64>() / len;
        let want = (second - mean * mean).max(0.0).sqrt();
        let got = sample_sigma_hat(&values).unwrap();
        prop_assert!((got * got - want * want).abs() <= 1e-12, "{} vs {}", got, want);
    }
}
