use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CosineLoss, L2Loss, LossParams, LossRegistry, LossValue, SequenceLoss, SoftDtwLoss};
use crate::batch::SequenceBatch;
use crate::error::{ensure, Result};

/// Weights of the reconstruction, soft-DTW and cosine terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl LossWeights {
    pub const L2: LossWeights = LossWeights::new_unchecked(1.0, 0.0, 0.0);
    pub const DTW: LossWeights = LossWeights::new_unchecked(0.0, 1.0, 0.0);
    pub const COSINE: LossWeights = LossWeights::new_unchecked(0.0, 0.0, 1.0);

    const fn new_unchecked(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            lambda3,
        }
    }

    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = Self::new_unchecked(lambda1, lambda2, lambda3);
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3];
        ensure!(
            all.iter().all(|l| *l >= 0.0 && l.is_finite()),
            Config,
            "loss weights must be finite and non-negative: {self}"
        );
        ensure!(
            all.iter().any(|l| *l > 0.0),
            Config,
            "at least one loss weight must be positive"
        );
        Ok(())
    }

    /// The four weight combinations of the loss ablation table.
    pub fn ablation_grid() -> Vec<LossWeights> {
        vec![
            Self::new_unchecked(1.0, 0.0, 1.0),
            Self::new_unchecked(1.0, 1.0, 0.0),
            Self::new_unchecked(0.0, 1.0, 1.0),
            Self::new_unchecked(1.0, 1.0, 1.0),
        ]
    }

    /// Registry names paired with their weights, in term order.
    pub fn terms(&self) -> [(&'static str, f64); 3] {
        [
            (L2Loss::NAME, self.lambda1),
            (SoftDtwLoss::NAME, self.lambda2),
            (CosineLoss::NAME, self.lambda3),
        ]
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::L2
    }
}

impl fmt::Display for LossWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lambda1={},lambda2={},lambda3={}",
            self.lambda1, self.lambda2, self.lambda3
        )
    }
}

impl std::str::FromStr for LossWeights {
    type Err = crate::Error;

    /// Parses `a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        ensure!(
            parts.len() == 3,
            Config,
            "expected three comma-separated weights, got '{s}'"
        );
        let mut vals = [0.0; 3];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p
                .parse()
                .map_err(|_| crate::Error::Config(format!("bad loss weight '{p}'")))?;
        }
        Self::new(vals[0], vals[1], vals[2])
    }
}

/// Weighted sum of registered losses. Zero-weight terms are never built,
/// so they cost nothing.
#[derive(Clone)]
pub struct CombinedLoss {
    terms: Vec<(f64, Arc<dyn SequenceLoss>)>,
}

impl CombinedLoss {
    pub fn new(weights: &LossWeights, params: &LossParams) -> Result<Self> {
        Self::from_registry(&LossRegistry::default(), weights, params)
    }

    pub fn from_registry(
        registry: &LossRegistry,
        weights: &LossWeights,
        params: &LossParams,
    ) -> Result<Self> {
        weights.validate()?;
        let mut terms = Vec::new();
        for (name, w) in weights.terms() {
            if w > 0.0 {
                terms.push((w, registry.build(name, params)?));
            }
        }
        Ok(Self { terms })
    }

    pub fn term_names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|(_, l)| l.name()).collect()
    }
}

impl fmt::Debug for CombinedLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.terms.iter().map(|(w, l)| (w, l.name())))
            .finish()
    }
}

impl SequenceLoss for CombinedLoss {
    fn name(&self) -> &'static str {
        "combined"
    }

    fn window_value_grad(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut value = 0.0;
        let mut grad = vec![0.0; xhat.len()];
        for (w, loss) in &self.terms {
            let (v, g) = loss.window_value_grad(x, xhat)?;
            value += w * v;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += w * b;
            }
        }
        Ok((value, grad))
    }

    fn window_value(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        let mut value = 0.0;
        for (w, loss) in &self.terms {
            value += w * loss.window_value(x, xhat)?;
        }
        Ok(value)
    }
}

/// `lambda1 * L_rec + lambda2 * L_dtw + lambda3 * L_cos`, each a batch mean.
pub fn combined_loss(
    x: &SequenceBatch,
    xhat: &SequenceBatch,
    weights: &LossWeights,
    gamma: f64,
) -> Result<LossValue> {
    CombinedLoss::new(weights, &LossParams { gamma })?.batch(x, xhat)
}
