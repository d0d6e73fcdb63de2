use evtae::detect::{calibrate_threshold, consumer_score, decide};
use evtae::eval::roc_auc;
use evtae::nn::{causal_conv, ConvParams, Tensor1C};
use evtae::pipeline::{smooth, windowize, ScalerParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_preserves_length(
        cin in 1usize..4, cout in 1usize..4, k in 1usize..8, d in 1usize..5,
        len in 1usize..40, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ConvParams::init(&mut rng, cin, cout, k, d).unwrap();
        let y = causal_conv(&Tensor1C::zeros(cin, len), &params).unwrap();
        prop_assert_eq!(y.len(), len);
        prop_assert_eq!(y.channels(), cout);
    }

    #[test]
    fn auc_is_invariant_under_monotone_maps(
        scored in prop::collection::vec((0.0f64..50.0, any::<bool>()), 2..80),
    ) {
        let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let mut labels: Vec<bool> = scored.iter().map(|s| s.1).collect();
        labels[0] = true;
        labels[1] = false;
        let base = roc_auc(&scores, &labels).unwrap().auc;
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s + 7.0).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert!((roc_auc(&affine, &labels).unwrap().auc - base).abs() < 1e-12);
        prop_assert!((roc_auc(&cubed, &labels).unwrap().auc - base).abs() < 1e-12);
        // Flipping the score order mirrors the curve.
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&negated, &labels).unwrap().auc - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn consumer_score_is_order_free_and_monotone(
        mut windows in prop::collection::vec(0.0f64..10.0, 1..30),
        bump in 0.01f64..5.0,
        at in any::<prop::sample::Index>(),
    ) {
        let base = consumer_score(&windows).unwrap();
        prop_assert!(base >= 0.0);
        let mut reversed = windows.clone();
        reversed.reverse();
        prop_assert!((consumer_score(&reversed).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        let i = at.index(windows.len());
        windows[i] += bump;
        prop_assert!(consumer_score(&windows).unwrap() > base);
    }

    #[test]
    fn threshold_splits_the_validation_set(scores in prop::collection::vec(0.0f64..100.0, 1..50)) {
        let t = calibrate_threshold(&scores).unwrap();
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(t >= min - 1e-9 && t <= max + 1e-9);
        // Not every validation consumer can be flagged by the mean.
        prop_assert!(scores.iter().any(|s| !decide(*s, t)));
        prop_assert!(!decide(t, t));
    }

    #[test]
    fn scaled_values_stay_in_unit_interval(
        lo in -5.0f64..5.0, span in 0.1f64..10.0,
        values in prop::collection::vec(-20.0f64..20.0, 0..50),
    ) {
        let scaler = ScalerParams::new(lo, lo + span).unwrap();
        for v in scaler.apply(&values) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn windows_tile_a_prefix(values in prop::collection::vec(0.0f64..3.0, 8..200), width in 1usize..8) {
        let windows = windowize(&values, width).unwrap();
        prop_assert_eq!(windows.len(), values.len() / width);
        prop_assert_eq!(windows.concat(), values[..windows.len() * width].to_vec());
    }

    #[test]
    fn smoothing_keeps_energy_of_complete_pairs(values in prop::collection::vec(0.0f64..3.0, 2..100)) {
        let s = smooth(&values).unwrap();
        prop_assert_eq!(s.len(), values.len() / 2);
        let kept: f64 = values[..2 * s.len()].iter().sum();
        prop_assert!((s.iter().sum::<f64>() - kept).abs() < 1e-9);
    }
}
