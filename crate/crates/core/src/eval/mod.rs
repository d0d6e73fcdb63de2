//! Detection metrics and the end-to-end experiment harness.

mod experiment;
mod metrics;
mod roc;

use std::fmt::Write as _;
use std::io::Write;

pub use experiment::{
    run_ablation, run_experiment, split_consumers, train_and_calibrate, AblationRow, DataSplit,
    ExperimentConfig, ExperimentResult, SplitConfig, TrainedRun,
};
pub use metrics::{confusion, f1_score, prf, Confusion, Prf};
pub use roc::{roc_auc, RocCurve};

use crate::error::{Error, Result};
use crate::pipeline::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub prf: Prf,
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl EvalReport {
    /// Builds the report from per-consumer decisions, scores and labels.
    pub fn from_scores(decisions: &[bool], scores: &[f64], labels: &[Label]) -> Result<Self> {
        let confusion = confusion(decisions, labels)?;
        let positives: Vec<bool> = labels.iter().map(|l| *l == Label::Ev).collect();
        let roc = roc_auc(scores, &positives)?;
        Ok(Self {
            prf: prf(confusion.tp, confusion.fp, confusion.fn_),
            confusion,
            roc_points: roc.points,
            auc: roc.auc,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        let io = |e: std::io::Error| Error::io("<eval csv>", e);
        let c = &self.confusion;
        writeln!(w, "tp,fp,tn,fn,precision,recall,f1,auc").map_err(io)?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            fmt_opt(self.prf.precision),
            fmt_opt(self.prf.recall),
            fmt_opt(self.prf.f1),
            self.auc
        )
        .map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn write_roc_csv<W: Write>(&self, out: W) -> Result<()> {
        write_roc(&self.roc_points, out)
    }

    /// Human-readable table with percentages to two decimals.
    pub fn table(&self) -> String {
        let c = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>9}", "metric", "value");
        let _ = writeln!(s, "{:<10} {:>9}", "precision", pct(self.prf.precision));
        let _ = writeln!(s, "{:<10} {:>9}", "recall", pct(self.prf.recall));
        let _ = writeln!(s, "{:<10} {:>9}", "F1", pct(self.prf.f1));
        let _ = writeln!(s, "{:<10} {:>9}", "AUC", pct(Some(self.auc)));
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:>10} {:>10}", "", "pred EV", "pred non");
        let _ = writeln!(s, "{:<12} {:>10} {:>10}", "EV", c.tp, c.fn_);
        let _ = writeln!(s, "{:<12} {:>10} {:>10}", "non-EV", c.fp, c.tn);
        s
    }
}

pub fn write_roc<W: Write>(points: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    let io = |e: std::io::Error| Error::io("<roc csv>", e);
    writeln!(w, "fpr,tpr").map_err(io)?;
    for (x, y) in points {
        writeln!(w, "{x},{y}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

pub fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}", 100.0 * x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_uses_percentages() {
        let r = EvalReport::from_scores(
            &[true, false, true],
            &[0.9, 0.1, 0.5],
            &[Label::Ev, Label::NonEv, Label::NonEv],
        )
        .unwrap();
        let t = r.table();
        assert!(t.contains("50.00"), "{t}");
        assert!(t.contains("100.00"));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("tp,fp,tn,fn"));
    }

    #[test]
    fn undefined_metrics_are_explicit() {
        let r = EvalReport::from_scores(&[false, false], &[0.2, 0.1], &[Label::Ev, Label::NonEv])
            .unwrap();
        assert!(r.table().contains("undefined"));
    }
}
