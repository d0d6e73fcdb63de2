//! Anomaly scoring and the per-consumer EV decision.
//!
//! Each window gets a score `AS`, a consumer's total is `AT = sum AS^2`, and
//! the consumer is flagged when `AT` is strictly above a threshold
//! calibrated as the mean `AT` of validation (non-EV) consumers.

mod report;
mod scorer;

use std::sync::Arc;

use rayon::prelude::*;

pub use report::{read_report, write_report, write_window_scores, ReportRow};
pub use scorer::{
    window_score, ScorerRegistry, SquaredErrorScorer, TrainingLossScorer, WindowScorer,
};

use crate::error::{ensure, Error, Result};
use crate::model::TaeModel;
use crate::pipeline::{ConsumerSeries, Preprocessor, ScalerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub consumer_id: String,
    pub window_scores: Vec<f64>,
    pub total_score: f64,
    pub threshold: f64,
    pub decision: bool,
}

impl AnomalyReport {
    pub fn decision_code(&self) -> u8 {
        u8::from(self.decision)
    }
}

/// `AT = sum AS^2`.
pub fn consumer_score(window_scores: &[f64]) -> Result<f64> {
    ensure!(
        !window_scores.is_empty(),
        Data,
        "no window scores to aggregate"
    );
    Ok(window_scores.iter().map(|s| s * s).sum())
}

/// Mean of the validation consumers' `AT` values.
pub fn calibrate_threshold(validation_scores: &[f64]) -> Result<f64> {
    ensure!(
        !validation_scores.is_empty(),
        Data,
        "threshold calibration needs at least one validation consumer"
    );
    Ok(validation_scores.iter().sum::<f64>() / validation_scores.len() as f64)
}

/// EV detected iff `AT > threshold`; equality is non-EV.
pub fn decide(total_score: f64, threshold: f64) -> bool {
    total_score > threshold
}

/// A trained model bound to its preprocessing and a window scorer.
#[derive(Clone)]
pub struct Detector<'a> {
    model: &'a TaeModel,
    preprocessor: Preprocessor,
    scaler: ScalerParams,
    scorer: Arc<dyn WindowScorer>,
}

impl<'a> Detector<'a> {
    pub fn new(
        model: &'a TaeModel,
        preprocessor: Preprocessor,
        scaler: ScalerParams,
        scorer: Arc<dyn WindowScorer>,
    ) -> Result<Self> {
        ensure!(
            preprocessor.window_length == model.config.window_length,
            Config,
            "preprocessing window {} does not match the model window {}",
            preprocessor.window_length,
            model.config.window_length
        );
        Ok(Self {
            model,
            preprocessor,
            scaler,
            scorer,
        })
    }

    /// Uses the model's stored calibration and the squared-error scorer.
    pub fn from_calibrated(model: &'a TaeModel) -> Result<Self> {
        let cal = model
            .calibration
            .ok_or_else(|| Error::Config("model carries no calibration record".into()))?;
        Self::new(
            model,
            Preprocessor {
                window_length: model.config.window_length,
                smoothing: cal.smoothing,
            },
            cal.scaler,
            Arc::new(SquaredErrorScorer),
        )
    }

    pub fn with_scorer(mut self, scorer: Arc<dyn WindowScorer>) -> Self {
        self.scorer = scorer;
        self
    }

    /// Per-window scores of one consumer, in window order.
    pub fn window_scores(&self, series: &ConsumerSeries) -> Result<Vec<f64>> {
        let windows = self.preprocessor.transform(series, &self.scaler)?;
        ensure!(
            !windows.is_empty(),
            Data,
            "consumer {} yields no windows",
            series.consumer_id
        );
        let recon = self.model.forward(&windows, false, 0)?;
        windows
            .rows()
            .zip(recon.rows())
            .map(|(x, xhat)| self.scorer.score(x, xhat))
            .collect()
    }

    pub fn consumer_score(&self, series: &ConsumerSeries) -> Result<f64> {
        consumer_score(&self.window_scores(series)?)
    }

    /// Scores every window, accumulates `AT` and applies the threshold.
    pub fn classify(&self, series: &ConsumerSeries, threshold: f64) -> Result<AnomalyReport> {
        let window_scores = self.window_scores(series)?;
        let total_score = consumer_score(&window_scores)?;
        Ok(AnomalyReport {
            consumer_id: series.consumer_id.clone(),
            window_scores,
            total_score,
            threshold,
            decision: decide(total_score, threshold),
        })
    }

    /// Mean `AT` over `validation`.
    pub fn calibrate(&self, validation: &[&ConsumerSeries]) -> Result<f64> {
        let scores: Vec<f64> = validation
            .par_iter()
            .map(|s| self.consumer_score(s))
            .collect::<Result<_>>()?;
        calibrate_threshold(&scores)
    }

    /// Classifies consumers independently; output follows input order.
    pub fn classify_all(
        &self,
        series: &[&ConsumerSeries],
        threshold: f64,
    ) -> Result<Vec<AnomalyReport>> {
        series
            .par_iter()
            .map(|s| self.classify(s, threshold))
            .collect()
    }
}

/// Runs the decision procedure for one consumer with the squared-error score.
pub fn classify_consumer(
    series: &ConsumerSeries,
    model: &TaeModel,
    scaler: &ScalerParams,
    threshold: f64,
) -> Result<AnomalyReport> {
    let smoothing = model.calibration.map_or(true, |c| c.smoothing);
    Detector::new(
        model,
        Preprocessor {
            window_length: model.config.window_length,
            smoothing,
        },
        *scaler,
        Arc::new(SquaredErrorScorer),
    )?
    .classify(series, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consumer_score_examples() {
        assert_eq!(consumer_score(&[5.0, 2.0]).unwrap(), 29.0);
        assert_eq!(consumer_score(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            consumer_score(&[2.0, 5.0]).unwrap(),
            consumer_score(&[5.0, 2.0]).unwrap()
        );
        assert!(matches!(consumer_score(&[]), Err(Error::Data(_))));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(calibrate_threshold(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(calibrate_threshold(&[4.5]).unwrap(), 4.5);
        assert_eq!(calibrate_threshold(&[1.0, 2.0, 3.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(calibrate_threshold(&[]), Err(Error::Data(_))));
    }

    #[test]
    fn decision_is_strict() {
        assert!(!decide(2.0, 2.0));
        assert!(decide(2.0 + 1e-12, 2.0));
        assert!(!decide(0.0, 0.5));
    }
}
