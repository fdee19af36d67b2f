use proptest::prelude::*;
use rosenblatt_hurst::simulate::{fbm_path, RngStream};
use rosenblatt_hurst::{analytic, estimator, variation, Filter, HurstParam};

fn filter_strategy() -> impl Strategy<Value = Filter> {
    prop_oneof![
        (1usize..=8).prop_map(|l| Filter::finite_difference(l).unwrap()),
        (2usize..=8).prop_map(|p| Filter::daubechies(p).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negating_a_filter_changes_nothing(f in filter_strategy(), h in 0.51f64..0.99) {
        let g = f.negated();
        let hp = HurstParam::new(h).unwrap();
        prop_assert_eq!(analytic::c_of_h(&f, h), analytic::c_of_h(&g, h));
        prop_assert!((analytic::c2(&f, &hp) - analytic::c2(&g, &hp)).abs() <= 1e-12 * analytic::c2(&f, &hp));
    }

    #[test]
    fn inversion_recovers_h(f in filter_strategy(), h in 0.5001f64..0.9999, exp in 6u32..17) {
        let n = 1usize << exp;
        let s = 0.5 * analytic::c_of_h(&f, h) * (n as f64).powf(-2.0 * h);
        let r = estimator::estimate_from_s_n(s, n, &f).unwrap();
        prop_assert!((r.h_hat - h).abs() < 1e-9, "{} vs {}", r.h_hat, h);
    }

    #[test]
    fn s_n_scales_quadratically(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let f = Filter::finite_difference(2).unwrap();
        let p = fbm_path(0.7, 256, RngStream::new(seed, 0)).unwrap();
        let scaled: Vec<f64> = p.values.iter().map(|x| x * scale).collect();
        let a = variation::s_n(&p.values, &f).unwrap();
        let b = variation::s_n(&scaled, &f).unwrap();
        prop_assert!((b - scale * scale * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn filters_annihilate_low_degree_polynomials(f in filter_strategy(), c in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let deg = (c.len() - 1).min(f.order() - 1);
        let poly: Vec<f64> = (0..64)
            .map(|i| {
                let t = i as f64 / 64.0;
                c[..=deg].iter().rev().fold(0.0, |acc, a| acc * t + a)
            })
            .collect();
        let v = variation::filtered_series(&poly, &f).unwrap();
        prop_assert!(v.iter().all(|x| x.abs() < 1e-9), "{:?}", v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
}
