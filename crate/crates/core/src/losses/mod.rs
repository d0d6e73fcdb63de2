//! Reconstruction losses and their weighted combination.
//!
//! Each loss is a [`SequenceLoss`] strategy that knows its per-window value
//! and gradient; batch losses are the mean over windows. Strategies are
//! looked up by name in a [`LossRegistry`].

mod combined;
mod cosine;
mod l2;
mod soft_dtw;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use combined::{combined_loss, CombinedLoss, LossWeights};
pub use cosine::{cosine_loss, cosine_similarity, CosineLoss};
pub use l2::{l2_loss, L2Loss};
pub use soft_dtw::{hard_dtw, soft_dtw, SdtwWorkspace, SoftDtwLoss, SoftDtwOutput};

use crate::batch::SequenceBatch;
use crate::error::{ensure, Error, Result};

/// Loss value with its gradient with respect to the reconstruction,
/// flattened like the batch it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A loss between one target window and its reconstruction.
pub trait SequenceLoss: Send + Sync {
    fn name(&self) -> &'static str;

    /// Value and gradient with respect to `xhat`.
    fn window_value_grad(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn window_value(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        Ok(self.window_value_grad(x, xhat)?.0)
    }

    /// Mean of the per-window losses, with the matching gradient.
    fn batch(&self, x: &SequenceBatch, xhat: &SequenceBatch) -> Result<LossValue> {
        x.ensure_same_shape(xhat)?;
        ensure!(!x.is_empty(), Shape, "loss over an empty batch");
        let n = x.len() as f64;
        let mut value = 0.0;
        let mut grad = Vec::with_capacity(x.data().len());
        for (a, b) in x.rows().zip(xhat.rows()) {
            let (v, g) = self.window_value_grad(a, b)?;
            value += v;
            grad.extend(g.into_iter().map(|gi| gi / n));
        }
        Ok(LossValue {
            value: value / n,
            grad,
        })
    }

    fn batch_value(&self, x: &SequenceBatch, xhat: &SequenceBatch) -> Result<f64> {
        x.ensure_same_shape(xhat)?;
        ensure!(!x.is_empty(), Shape, "loss over an empty batch");
        let mut total = 0.0;
        for (a, b) in x.rows().zip(xhat.rows()) {
            total += self.window_value(a, b)?;
        }
        Ok(total / x.len() as f64)
    }
}

/// Construction parameters shared by the registered losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    /// Soft-DTW smoothing.
    pub gamma: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self { gamma: 1.0 }
    }
}

type LossFactory = fn(&LossParams) -> Result<Arc<dyn SequenceLoss>>;

/// Name -> loss constructor.
#[derive(Clone)]
pub struct LossRegistry {
    factories: BTreeMap<&'static str, LossFactory>,
}

impl LossRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: LossFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn build(&self, name: &str, params: &LossParams) -> Result<Arc<dyn SequenceLoss>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown loss '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })?;
        factory(params)
    }
}

impl Default for LossRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(L2Loss::NAME, |_| Ok(Arc::new(L2Loss)));
        reg.register(SoftDtwLoss::NAME, |p| {
            Ok(Arc::new(SoftDtwLoss::new(p.gamma)?))
        });
        reg.register(CosineLoss::NAME, |_| Ok(Arc::new(CosineLoss)));
        reg
    }
}

impl std::fmt::Debug for LossRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_knows_all_losses() {
        let reg = LossRegistry::default();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["cosine", "dtw", "l2"]);
        let p = LossParams::default();
        for name in ["l2", "dtw", "cosine"] {
            assert_eq!(reg.build(name, &p).unwrap().name(), name);
        }
        assert!(matches!(reg.build("mse", &p), Err(Error::Config(_))));
        assert!(matches!(
            reg.build("dtw", &LossParams { gamma: 0.0 }),
            Err(Error::Config(_))
        ));
    }
}
