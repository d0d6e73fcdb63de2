use super::{LossValue, SequenceLoss};
use crate::batch::SequenceBatch;
use crate::error::{ensure, Result};

/// `1 - cos(x, xhat)`, so that minimizing aligns the reconstruction with
/// the target. The raw similarity is available via [`cosine_similarity`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CosineLoss;

impl CosineLoss {
    pub const NAME: &'static str = "cosine";
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn similarity(x: &[f64], xhat: &[f64]) -> Result<(f64, f64, f64, f64)> {
    ensure!(
        x.len() == xhat.len(),
        Shape,
        "window lengths differ: {} vs {}",
        x.len(),
        xhat.len()
    );
    let nx = norm(x);
    let ny = norm(xhat);
    ensure!(
        nx > 0.0 && ny > 0.0,
        Numeric,
        "cosine similarity of a zero-norm sequence is undefined"
    );
    let dot: f64 = x.iter().zip(xhat).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny), dot, nx, ny))
}

impl SequenceLoss for CosineLoss {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn window_value_grad(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (sim, dot, nx, ny) = similarity(x, xhat)?;
        // d cos / d y = x / (|x||y|) - (x.y) y / (|x||y|^3)
        let grad = x
            .iter()
            .zip(xhat)
            .map(|(a, b)| -(a / (nx * ny) - dot * b / (nx * ny * ny * ny)))
            .collect();
        Ok((1.0 - sim, grad))
    }

    fn window_value(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        Ok(1.0 - similarity(x, xhat)?.0)
    }
}

/// Mean cosine similarity across the batch (the quantity that the loss
/// turns into `1 - similarity`).
pub fn cosine_similarity(x: &SequenceBatch, xhat: &SequenceBatch) -> Result<f64> {
    Ok(1.0 - CosineLoss.batch_value(x, xhat)?)
}

pub fn cosine_loss(x: &SequenceBatch, xhat: &SequenceBatch) -> Result<LossValue> {
    CosineLoss.batch(x, xhat)
}
