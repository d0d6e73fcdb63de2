use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{TaeConfig, TaeModel, TaeParams};
use crate::batch::SequenceBatch;
use crate::error::{ensure, Error, Result};
use crate::losses::{CombinedLoss, LossParams, SequenceLoss};
use crate::nn::{adam_step, derive_seed, AdamState, Tensor1C};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean mini-batch loss per epoch (training mode).
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch (inference mode, same loss function).
    pub val_loss: Vec<f64>,
    pub wall_time_seconds: f64,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

pub fn build_loss(config: &TaeConfig) -> Result<CombinedLoss> {
    CombinedLoss::new(
        &config.loss_weights,
        &LossParams {
            gamma: config.gamma,
        },
    )
}

/// Mean loss of the model's inference-mode reconstructions of `batch`.
pub fn evaluate_loss(
    model: &TaeModel,
    loss: &dyn SequenceLoss,
    batch: &SequenceBatch,
) -> Result<f64> {
    let recon = model.forward(batch, false, 0)?;
    let values: Vec<f64> = (0..batch.len())
        .into_par_iter()
        .map(|i| loss.window_value(batch.row(i), recon.row(i)))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Loss and summed parameter gradients for one mini-batch. Per-window work
/// runs in parallel; the reduction runs in row order.
fn batch_gradient(
    model: &TaeModel,
    loss: &dyn SequenceLoss,
    batch: &SequenceBatch,
    seed: u64,
) -> Result<(f64, TaeParams)> {
    let n = batch.len() as f64;
    let per_window: Vec<(f64, TaeParams)> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let x = batch.row(i);
            let cache = model.forward_cached(
                &Tensor1C::from_series(x),
                true,
                derive_seed(seed, i as u64),
            )?;
            let (value, grad) = loss.window_value_grad(x, cache.output().data())?;
            let upstream =
                Tensor1C::from_vec(1, x.len(), grad.into_iter().map(|g| g / n).collect())?;
            Ok((value, model.backward(&cache, &upstream)?))
        })
        .collect::<Result<_>>()?;
    let mut total = model.params.zeros_like();
    let mut value = 0.0;
    for (v, g) in &per_window {
        value += v;
        total.accumulate(g);
    }
    Ok((value / n, total))
}

/// Trains a fresh model on `train` (non-EV windows only) with Adam over
/// shuffled mini-batches. Everything is derived from `config.seed`.
pub fn train(
    train: &SequenceBatch,
    validation: Option<&SequenceBatch>,
    config: &TaeConfig,
) -> Result<(TaeModel, TrainReport)> {
    config.validate()?;
    ensure!(!train.is_empty(), Data, "training set is empty");
    ensure!(
        train.width() == config.window_length,
        Shape,
        "training windows have length {}, config expects {}",
        train.width(),
        config.window_length
    );
    let start = Instant::now();
    let loss = build_loss(config)?;
    let mut model = TaeModel::init(config)?;
    let mut adam = AdamState::new(model.params.parameter_count(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x5eed));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        wall_time_seconds: 0.0,
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let mb = train.select(chunk);
            let seed = derive_seed(derive_seed(config.seed, epoch as u64 + 1), step as u64);
            let (value, grads) = batch_gradient(&model, &loss, &mb, seed).map_err(|e| match e {
                Error::Numeric(_) => Error::Divergence {
                    epoch: epoch + 1,
                    loss: f64::NAN,
                },
                other => other,
            })?;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    loss: value,
                });
            }
            let mut flat = model.params.to_flat();
            adam_step(&mut flat, &grads.to_flat(), &mut adam)?;
            model.params.set_flat(&flat)?;
            epoch_loss += value;
            batches += 1;
        }
        let mean = epoch_loss / batches as f64;
        if !mean.is_finite() || !model.params.all_finite() {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss: mean,
            });
        }
        report.train_loss.push(mean);
        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            let v = evaluate_loss(&model, &loss, val)?;
            if !v.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    loss: v,
                });
            }
            report.val_loss.push(v);
        }
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok((model, report))
}
