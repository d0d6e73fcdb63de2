//! Parameter-free layers and their backward passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor1C;
use crate::error::{ensure, Result};

pub fn relu(input: &Tensor1C) -> Tensor1C {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes gradient where the forward output was positive.
pub fn relu_backward(output: &Tensor1C, upstream: &Tensor1C) -> Tensor1C {
    let mut grad = upstream.clone();
    for (g, y) in grad.data_mut().iter_mut().zip(output.data()) {
        if *y <= 0.0 {
            *g = 0.0;
        }
    }
    grad
}

/// Multiplicative mask produced by a dropout pass: 0 for dropped elements,
/// `1 / (1 - rate)` for survivors. `None` means the pass was an identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Option<Vec<f64>>);

impl DropoutMask {
    pub fn identity() -> Self {
        DropoutMask(None)
    }

    pub fn apply(&self, t: &Tensor1C) -> Tensor1C {
        match &self.0 {
            None => t.clone(),
            Some(mask) => {
                let mut out = t.clone();
                for (v, m) in out.data_mut().iter_mut().zip(mask) {
                    *v *= m;
                }
                out
            }
        }
    }
}

pub fn check_dropout_rate(rate: f64) -> Result<()> {
    ensure!(
        (0.0..1.0).contains(&rate),
        Config,
        "dropout rate {rate} is outside [0, 1)"
    );
    Ok(())
}

/// Inverted dropout. In inference mode, or with rate zero, the input is
/// returned unchanged.
pub fn dropout(
    input: &Tensor1C,
    rate: f64,
    seed: u64,
    training: bool,
) -> Result<(Tensor1C, DropoutMask)> {
    check_dropout_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), DropoutMask::identity()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.data().len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = DropoutMask(Some(mask));
    Ok((mask.apply(input), mask))
}

/// Mean of adjacent pairs; halves the length.
pub fn avg_pool2(input: &Tensor1C) -> Result<Tensor1C> {
    ensure!(
        input.len() % 2 == 0,
        Shape,
        "average pooling needs an even length, got {}",
        input.len()
    );
    let half = input.len() / 2;
    let mut out = Tensor1C::zeros(input.channels(), half);
    for c in 0..input.channels() {
        let x = input.channel(c);
        for (y, pair) in out.channel_mut(c).iter_mut().zip(x.chunks_exact(2)) {
            *y = 0.5 * (pair[0] + pair[1]);
        }
    }
    Ok(out)
}

pub fn avg_pool2_backward(upstream: &Tensor1C) -> Tensor1C {
    let mut grad = Tensor1C::zeros(upstream.channels(), upstream.len() * 2);
    for c in 0..upstream.channels() {
        let dy = upstream.channel(c);
        for (pair, g) in grad.channel_mut(c).chunks_exact_mut(2).zip(dy) {
            pair[0] = 0.5 * g;
            pair[1] = 0.5 * g;
        }
    }
    grad
}

/// Nearest-neighbour repetition; doubles the length.
pub fn upsample2(input: &Tensor1C) -> Tensor1C {
    let mut out = Tensor1C::zeros(input.channels(), input.len() * 2);
    for c in 0..input.channels() {
        let x = input.channel(c);
        for (pair, v) in out.channel_mut(c).chunks_exact_mut(2).zip(x) {
            pair[0] = *v;
            pair[1] = *v;
        }
    }
    out
}

pub fn upsample2_backward(upstream: &Tensor1C) -> Tensor1C {
    let mut grad = Tensor1C::zeros(upstream.channels(), upstream.len() / 2);
    for c in 0..upstream.channels() {
        let dy = upstream.channel(c);
        for (g, pair) in grad.channel_mut(c).iter_mut().zip(dy.chunks_exact(2)) {
            *g = pair[0] + pair[1];
        }
    }
    grad
}
