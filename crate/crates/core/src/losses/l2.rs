use super::{LossValue, SequenceLoss};
use crate::batch::SequenceBatch;
use crate::error::{ensure, Result};

/// Euclidean norm of the reconstruction error, averaged over the batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct L2Loss;

impl L2Loss {
    pub const NAME: &'static str = "l2";
}

impl SequenceLoss for L2Loss {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn window_value_grad(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        ensure!(
            x.len() == xhat.len(),
            Shape,
            "window lengths differ: {} vs {}",
            x.len(),
            xhat.len()
        );
        let norm = x
            .iter()
            .zip(xhat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // Subgradient zero at a perfect reconstruction.
        let grad = if norm > 0.0 {
            x.iter().zip(xhat).map(|(a, b)| (b - a) / norm).collect()
        } else {
            vec![0.0; x.len()]
        };
        Ok((norm, grad))
    }
}

pub fn l2_loss(x: &SequenceBatch, xhat: &SequenceBatch) -> Result<LossValue> {
    L2Loss.batch(x, xhat)
}
