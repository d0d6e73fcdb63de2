use crate::error::{ensure, Error, Result};
use crate::pipeline::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Counts with EV as the positive class.
pub fn confusion(decisions: &[bool], labels: &[Label]) -> Result<Confusion> {
    ensure!(
        decisions.len() == labels.len(),
        Data,
        "{} decisions but {} labels",
        decisions.len(),
        labels.len()
    );
    let mut c = Confusion::default();
    for (d, l) in decisions.iter().zip(labels) {
        match (l, d) {
            (Label::Ev, true) => c.tp += 1,
            (Label::Ev, false) => c.fn_ += 1,
            (Label::NonEv, true) => c.fp += 1,
            (Label::NonEv, false) => c.tn += 1,
            (Label::Unknown, _) => {
                return Err(Error::Data(
                    "cannot score a consumer with an unknown label".into(),
                ))
            }
        }
    }
    Ok(c)
}

/// Precision, recall and F1; `None` where a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let denom = precision + recall;
    (denom > 0.0).then(|| 2.0 * precision * recall / denom)
}

pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => f1_score(p, r),
        _ => None,
    };
    Prf {
        precision,
        recall,
        f1,
    }
}
