use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::losses::LossWeights;

/// Architecture and training hyperparameters of the temporal autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaeConfig {
    pub window_length: usize,
    pub kernel_size: usize,
    /// Encoder filter counts per residual block; the decoder uses them reversed.
    pub filters: Vec<usize>,
    pub dilations: Vec<usize>,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss_weights: LossWeights,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for TaeConfig {
    fn default() -> Self {
        Self {
            window_length: 168,
            kernel_size: 7,
            filters: vec![32, 16, 8],
            dilations: vec![1, 2, 4],
            dropout_rate: 0.1,
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            loss_weights: LossWeights::L2,
            gamma: 1.0,
            seed: 42,
        }
    }
}

impl TaeConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.window_length >= 2 && self.window_length % 2 == 0,
            Config,
            "window length must be a positive even number, got {}",
            self.window_length
        );
        ensure!(
            self.kernel_size >= 1,
            Config,
            "kernel size must be at least 1"
        );
        ensure!(
            !self.filters.is_empty() && self.filters.iter().all(|f| *f > 0),
            Config,
            "filters must be a non-empty list of positive counts"
        );
        ensure!(
            self.filters.len() == self.dilations.len(),
            Config,
            "{} filter counts but {} dilations",
            self.filters.len(),
            self.dilations.len()
        );
        ensure!(
            self.dilations[0] >= 1 && self.dilations.windows(2).all(|w| w[0] < w[1]),
            Config,
            "dilations must be positive and strictly increasing: {:?}",
            self.dilations
        );
        let max_d = *self.dilations.last().unwrap_or(&1);
        ensure!(
            (self.kernel_size - 1) * max_d < self.window_length,
            Config,
            "receptive span (k-1)*d = {} must be shorter than the window ({})",
            (self.kernel_size - 1) * max_d,
            self.window_length
        );
        ensure!(
            (0.0..1.0).contains(&self.dropout_rate),
            Config,
            "dropout rate {} is outside [0, 1)",
            self.dropout_rate
        );
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            Config,
            "learning rate must be positive"
        );
        ensure!(
            self.batch_size >= 1,
            Config,
            "batch size must be at least 1"
        );
        ensure!(
            self.gamma >= 0.0 && self.gamma.is_finite(),
            Config,
            "gamma must be finite and non-negative"
        );
        self.loss_weights.validate()?;
        ensure!(
            self.loss_weights.lambda2 == 0.0 || self.gamma > 0.0,
            Config,
            "a soft-DTW term needs gamma > 0"
        );
        Ok(())
    }

    pub fn decoder_filters(&self) -> Vec<usize> {
        self.filters.iter().rev().copied().collect()
    }

    pub fn latent_channels(&self) -> usize {
        *self.filters.last().expect("validated config has filters")
    }

    /// The small architecture used for full-model gradient checks.
    pub fn tiny() -> Self {
        Self {
            window_length: 16,
            kernel_size: 3,
            filters: vec![4, 2, 2],
            dilations: vec![1, 2, 4],
            dropout_rate: 0.0,
            ..Self::default()
        }
    }
}
