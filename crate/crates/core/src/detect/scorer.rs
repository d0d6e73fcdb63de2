use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{ensure, Error, Result};
use crate::losses::SequenceLoss;
use crate::model::{build_loss, TaeConfig};

/// Per-window anomaly score between a window and its reconstruction.
pub trait WindowScorer: Send + Sync {
    fn name(&self) -> &'static str;
    fn score(&self, x: &[f64], xhat: &[f64]) -> Result<f64>;
}

/// `AS = sum_t (x_t - xhat_t)^2`.
pub fn window_score(x: &[f64], xhat: &[f64]) -> Result<f64> {
    ensure!(
        x.len() == xhat.len(),
        Shape,
        "window lengths differ: {} vs {}",
        x.len(),
        xhat.len()
    );
    Ok(x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredErrorScorer;

impl SquaredErrorScorer {
    pub const NAME: &'static str = "squared-error";
}

impl WindowScorer for SquaredErrorScorer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn score(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        window_score(x, xhat)
    }
}

/// Scores each window with the loss the model was trained with.
pub struct TrainingLossScorer {
    loss: Arc<dyn SequenceLoss>,
}

impl TrainingLossScorer {
    pub const NAME: &'static str = "training-loss";

    pub fn new(config: &TaeConfig) -> Result<Self> {
        Ok(Self {
            loss: Arc::new(build_loss(config)?),
        })
    }
}

impl WindowScorer for TrainingLossScorer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn score(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        self.loss.window_value(x, xhat)
    }
}

type ScorerFactory = fn(&TaeConfig) -> Result<Arc<dyn WindowScorer>>;

/// Name -> window scorer constructor.
#[derive(Clone)]
pub struct ScorerRegistry {
    factories: BTreeMap<&'static str, ScorerFactory>,
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: ScorerFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, name: &str, config: &TaeConfig) -> Result<Arc<dyn WindowScorer>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown scorer '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(config)
    }
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(SquaredErrorScorer::NAME, |_| {
            Ok(Arc::new(SquaredErrorScorer))
        });
        reg.register(TrainingLossScorer::NAME, |c| {
            Ok(Arc::new(TrainingLossScorer::new(c)?))
        });
        reg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_score_examples() {
        assert_eq!(window_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(window_score(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 5.0);
        let x = [0.3, 0.9, 0.1];
        let y = [0.1, 0.5, 0.4];
        let base = window_score(&x, &y).unwrap();
        let c = 3.0;
        let scaled: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b + c * (a - b)).collect();
        assert!((window_score(&scaled, &y).unwrap() - c * c * base).abs() < 1e-12);
        assert!(window_score(&x, &[0.0]).is_err());
    }

    #[test]
    fn registry_resolves_both_scorers() {
        let reg = ScorerRegistry::default();
        let cfg = TaeConfig::tiny();
        assert_eq!(
            reg.build("squared-error", &cfg).unwrap().name(),
            "squared-error"
        );
        let tl = reg.build("training-loss", &cfg).unwrap();
        // L2 training loss: the norm, i.e. sqrt of the squared error.
        assert!((tl.score(&[3.0, 0.0], &[0.0, 4.0]).unwrap() - 5.0).abs() < 1e-15);
        assert!(reg.build("attention", &cfg).is_err());
    }
}
