//! Property tests for the small invariants everything else leans on.

use hippa_core::{
    home_gradient, spectral_sigma, EnvelopeParams, ErrorSchedule, FnOracle, GaussianSampler,
    InnerBudgetSchedule, Point, ProxApproximation, SpectralConfig,
};
use proptest::prelude::*;

fn finite_coords(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn point_json_roundtrip_is_exact(coords in finite_coords(6)) {
        let p = Point::new(coords).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: Point = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&p, &back);
        for (a, b) in p.as_slice().iter().zip(back.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn envelope_params_accept_exactly_the_valid_region(p in 0.5f64..4.0, gamma in -1.0f64..3.0) {
        let made = EnvelopeParams::new(p, gamma);
        if p > 1.0 && gamma > 0.0 {
            prop_assert!(made.is_ok());
        } else {
            prop_assert!(made.is_err());
        }
    }

    #[test]
    fn gradient_magnitude_matches_residual_power(
        coords in finite_coords(4),
        p in prop::sample::select(vec![1.5f64, 2.0, 3.0]),
        gamma in 0.1f64..5.0,
    ) {
        let x = Point::new(coords).unwrap();
        let dim = x.dim();
        let f = FnOracle::new(dim, |_| 0.0, move |_| vec![0.0; dim]);
        let params = EnvelopeParams::new(p, gamma).unwrap();
        let prox = ProxApproximation::new(x.clone(), Point::zeros(dim), &f, &params, 0, 0.0)
            .unwrap();
        let g = home_gradient(&prox, &params);
        let r = x.norm();
        if r == 0.0 {
            prop_assert_eq!(g.norm(), 0.0);
        } else {
            let expected = r.powf(p - 1.0) / gamma;
            prop_assert!(
                (g.norm() - expected).abs() <= 1e-9 * (1.0 + expected),
                "magnitude {} vs expected {}", g.norm(), expected
            );
            // Direction is the residual direction: g·r = ‖g‖·‖r‖.
            let dot = g.dot(&x).unwrap();
            prop_assert!(
                (dot - g.norm() * r).abs() <= 1e-9 * (1.0 + dot.abs()),
                "gradient not parallel to residual"
            );
        }
    }

    #[test]
    fn spectral_sigma_lands_in_clamp(
        s in finite_coords(4),
        extra in finite_coords(4),
        residual in 0.0f64..10.0,
    ) {
        let dim = s.len().min(extra.len());
        let s = Point::new(s[..dim].to_vec()).unwrap();
        let y = Point::new(extra[..dim].to_vec()).unwrap();
        let cfg = SpectralConfig::default();
        let sigma = spectral_sigma(&s, &y, residual, &cfg);
        prop_assert!(sigma >= cfg.sigma_min && sigma <= cfg.sigma_max, "sigma {sigma}");
    }

    #[test]
    fn uniform_01_stays_in_half_open_interval(seed in any::<u64>()) {
        let mut rng = GaussianSampler::from_seed_stream(seed, 3);
        for _ in 0..64 {
            let u = rng.uniform_01();
            prop_assert!(u > 0.0 && u <= 1.0, "u = {u}");
        }
    }

    #[test]
    fn below_and_choose_stay_in_range(seed in any::<u64>(), n in 1usize..500, k in 0usize..500) {
        let mut rng = GaussianSampler::from_seed_stream(seed, 4);
        let k = k % (n + 1);
        for _ in 0..16 {
            prop_assert!(rng.below(n) < n);
        }
        let chosen = rng.choose_without_replacement(n, k);
        prop_assert_eq!(chosen.len(), k);
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), k, "duplicate indices drawn");
        prop_assert!(chosen.iter().all(|&i| i < n));
    }

    #[test]
    fn inner_budget_default_is_piecewise(k in 0usize..100) {
        let schedule = InnerBudgetSchedule::default();
        let expected = if k < 3 {
            50
        } else if k < 20 {
            300
        } else if k < 30 {
            500
        } else {
            800
        };
        prop_assert_eq!(schedule.at(k), expected);
    }

    #[test]
    fn error_schedule_tails_shrink_and_stay_nonnegative(k in 0usize..60) {
        let schedule = ErrorSchedule::default();
        prop_assert!(schedule.epsilon_at(k) > 0.0);
        prop_assert!(schedule.epsilon_at(k + 1) < schedule.epsilon_at(k));
        let tail = schedule.tail_sum(k);
        let next_tail = schedule.tail_sum(k + 1);
        prop_assert!(tail >= 0.0 && next_tail >= 0.0);
        prop_assert!(next_tail <= tail + 1e-15, "tail sums must decrease");
        prop_assert!(tail <= schedule.epsilon_bar() + 1e-12);
    }
}
