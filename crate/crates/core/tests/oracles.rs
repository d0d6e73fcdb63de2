mod common;

use approx::assert_abs_diff_eq;
use common::*;
use evtae::eval::roc_auc;
use evtae::losses::{combined_loss, cosine_loss, hard_dtw, l2_loss, soft_dtw, LossWeights};
use evtae::nn::{causal_conv, ConvParams, Tensor1C};
use evtae::SequenceBatch;
use rand::Rng;

#[test]
fn soft_dtw_matches_path_enumeration() {
    let mut r = rng(11);
    for _ in 0..40 {
        let (n, m) = (r.gen_range(1..=5), r.gen_range(1..=5));
        let x = uniform(&mut r, n, -1.0, 1.0);
        let y = uniform(&mut r, m, -1.0, 1.0);
        for gamma in [0.1, 1.0, 3.0] {
            let got = soft_dtw(&x, &y, gamma).unwrap().value;
            assert_abs_diff_eq!(got, soft_dtw_brute(&x, &y, gamma), epsilon = 1e-10);
        }
    }
}

#[test]
fn hard_dtw_matches_classic_dp_and_enumeration() {
    let mut r = rng(12);
    for _ in 0..50 {
        let (n, m) = (r.gen_range(1..=6), r.gen_range(1..=6));
        let x = uniform(&mut r, n, 0.0, 1.0);
        let y = uniform(&mut r, m, 0.0, 1.0);
        let dp = dtw_dp(&x, &y);
        let best = all_path_costs(&x, &y)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(dp, best, epsilon = 1e-12);
        assert_abs_diff_eq!(hard_dtw(&x, &y).unwrap(), dp, epsilon = 1e-12);
    }
}

#[test]
fn soft_dtw_is_below_hard_dtw_and_symmetric() {
    let mut r = rng(13);
    for _ in 0..50 {
        let (n, m) = (r.gen_range(1..=12), r.gen_range(1..=12));
        let x = uniform(&mut r, n, 0.0, 1.0);
        let y = uniform(&mut r, m, 0.0, 1.0);
        let hard = dtw_dp(&x, &y);
        for gamma in [1e-3, 0.1, 1.0, 10.0] {
            let xy = soft_dtw(&x, &y, gamma).unwrap().value;
            let yx = soft_dtw(&y, &x, gamma).unwrap().value;
            assert!(
                xy <= hard + 1e-12,
                "soft {xy} above hard {hard} at gamma {gamma}"
            );
            assert_abs_diff_eq!(xy, yx, epsilon = 1e-10);
        }
    }
}

#[test]
fn soft_dtw_worked_examples() {
    assert_abs_diff_eq!(
        soft_dtw(&[0.0], &[1.0], 0.5).unwrap().value,
        1.0,
        epsilon = 1e-15
    );
    assert_eq!(
        soft_dtw(&[0.3, 0.7, 0.1], &[0.3, 0.7, 0.1], 0.0)
            .unwrap()
            .value,
        0.0
    );
    let v = soft_dtw(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap().value;
    assert_abs_diff_eq!(v, -(1.0 + 2.0 * (-1.0f64).exp()).ln(), epsilon = 1e-12);
    assert!(v < 0.0);
}

#[test]
fn soft_dtw_gradient_matches_brute_force_differences() {
    // Differentiate the enumeration oracle itself, independently of the DP.
    let mut r = rng(14);
    for _ in 0..20 {
        let (n, m) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let x = uniform(&mut r, n, 0.0, 1.0);
        let y = uniform(&mut r, m, 0.0, 1.0);
        let grad = soft_dtw(&x, &y, 0.5).unwrap().grad.unwrap();
        let err = fd_max_rel_err(|t| soft_dtw_brute(&x, t, 0.5), &y, &grad);
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn causal_conv_matches_definition() {
    let mut r = rng(15);
    for _ in 0..50 {
        let (cin, cout, k, d, len) = (
            r.gen_range(1..=3),
            r.gen_range(1..=3),
            r.gen_range(1..=5),
            r.gen_range(1..=4),
            r.gen_range(1..=20),
        );
        let kernel = uniform(&mut r, cout * cin * k, -1.0, 1.0);
        let bias = uniform(&mut r, cout, -1.0, 1.0);
        let params = ConvParams::from_kernel(cin, cout, k, d, &kernel, bias.clone()).unwrap();
        let x: Vec<Vec<f64>> = (0..cin).map(|_| uniform(&mut r, len, -1.0, 1.0)).collect();
        let got = causal_conv(&Tensor1C::from_vec(cin, len, x.concat()).unwrap(), &params).unwrap();
        let want = conv_reference(&x, &kernel, &bias, k, d);
        assert_eq!(got.len(), len);
        for (o, row) in want.iter().enumerate() {
            for (s, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(got.get(o, s), *v, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn combined_loss_is_the_sum_of_its_terms() {
    let mut r = rng(16);
    let rows = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..3).map(|_| uniform(r, 8, 0.0, 1.0)).collect()
    };
    let x = SequenceBatch::from_rows(&rows(&mut r)).unwrap();
    let y = SequenceBatch::from_rows(&rows(&mut r)).unwrap();
    let gamma = 0.7;
    let l2: f64 = x
        .rows()
        .zip(y.rows())
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / 3.0;
    let cos: f64 = x
        .rows()
        .zip(y.rows())
        .map(|(a, b)| 1.0 - dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt()))
        .sum::<f64>()
        / 3.0;
    let dtw: f64 = x
        .rows()
        .zip(y.rows())
        .map(|(a, b)| soft_dtw_brute(a, b, gamma))
        .sum::<f64>()
        / 3.0;

    assert_abs_diff_eq!(l2_loss(&x, &y).unwrap().value, l2, epsilon = 1e-12);
    assert_abs_diff_eq!(cosine_loss(&x, &y).unwrap().value, cos, epsilon = 1e-12);
    let all = combined_loss(&x, &y, &LossWeights::new(1.0, 1.0, 1.0).unwrap(), gamma).unwrap();
    assert_abs_diff_eq!(all.value, l2 + dtw + cos, epsilon = 1e-9);
    let weighted = combined_loss(&x, &y, &LossWeights::new(0.5, 2.0, 0.0).unwrap(), gamma).unwrap();
    assert_abs_diff_eq!(weighted.value, 0.5 * l2 + 2.0 * dtw, epsilon = 1e-9);
}

#[test]
fn auc_matches_mann_whitney_with_ties() {
    let mut r = rng(17);
    for _ in 0..200 {
        let n = r.gen_range(2..=60);
        let mut labels: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[n - 1] = false;
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..5) as f64).collect();
        let auc = roc_auc(&scores, &labels).unwrap().auc;
        assert_abs_diff_eq!(auc, mann_whitney_auc(&scores, &labels), epsilon = 1e-12);
    }
}

#[test]
fn roc_endpoints_and_monotonicity() {
    let scores = [0.9, 0.8, 0.8, 0.3, 0.1, 0.5];
    let labels = [true, false, true, false, false, true];
    let curve = roc_auc(&scores, &labels).unwrap();
    assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
    assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
    for w in curve.points.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    }
    assert_abs_diff_eq!(
        curve.auc,
        mann_whitney_auc(&scores, &labels),
        epsilon = 1e-15
    );
}
