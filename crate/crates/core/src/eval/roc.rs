use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false-positive rate, true-positive rate)` from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC by sweeping every distinct score as a threshold (higher score =
/// more likely positive), AUC by the trapezoidal rule. Equal scores form a
/// single step, so ties contribute half credit.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<RocCurve> {
    ensure!(
        scores.len() == positives.len(),
        Data,
        "{} scores but {} labels",
        scores.len(),
        positives.len()
    );
    ensure!(
        scores.iter().all(|s| !s.is_nan()),
        Numeric,
        "scores contain NaN"
    );
    let n_pos = positives.iter().filter(|p| **p).count();
    let n_neg = positives.len() - n_pos;
    ensure!(
        n_pos > 0 && n_neg > 0,
        Data,
        "ROC needs both classes ({n_pos} positive, {n_neg} negative)"
    );
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().expect("non-empty");
        let p = (fp as f64 / n_neg as f64, tp as f64 / n_pos as f64);
        auc += (p.0 - x0) * (p.1 + y0) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let r = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_auc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        let r = roc_auc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((r.auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(crate::Error::Data(_))
        ));
    }

    #[test]
    fn curve_is_monotone_and_anchored() {
        let r = roc_auc(
            &[0.3, 0.3, 0.9, 0.1, 0.5],
            &[false, true, true, false, false],
        )
        .unwrap();
        assert_eq!(r.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.points.last(), Some(&(1.0, 1.0)));
        for w in r.points.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }
}
