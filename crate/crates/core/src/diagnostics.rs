//! Finite-difference gradient suite over every differentiable component:
//! the causal convolution, pooling and upsampling, a residual block, each
//! loss, and a complete small autoencoder.
//!
//! Every instance is a scalar function `f(theta) = <r, layer(theta)>` with a
//! random probe vector `r`, checked with central differences. Instances that
//! sit within a step of a ReLU kink are redrawn, since the function is not
//! differentiable there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{CosineLoss, L2Loss, SequenceLoss, SoftDtwLoss};
use crate::model::{TaeConfig, TaeModel};
use crate::nn::{
    avg_pool2, avg_pool2_backward, causal_conv, causal_conv_backward, derive_seed, grad_check_with,
    upsample2, upsample2_backward, ConvParams, GradCheckOptions, ResidualBlock, Tensor1C,
};

/// Result of checking one component over several random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub component: String,
    pub tolerance: f64,
    pub instances: usize,
    pub max_relative_error: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

pub const LAYER_TOLERANCE: f64 = 1e-6;
pub const LOSS_TOLERANCE: f64 = 1e-5;
pub const MODEL_TOLERANCE: f64 = 1e-4;

/// Minimum distance of every ReLU input from zero before an instance is
/// accepted; a hundred times the difference step.
const KINK_MARGIN: f64 = 1e-3;
const MAX_REDRAWS: usize = 200;

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn flatten_conv(c: &ConvParams, out: &mut Vec<f64>) {
    for (_, t) in c.tensors() {
        out.extend_from_slice(t);
    }
}

fn unflatten_conv(c: &mut ConvParams, flat: &[f64]) -> usize {
    let mut at = 0;
    for (_, t) in c.tensors_mut() {
        let n = t.len();
        t.copy_from_slice(&flat[at..at + n]);
        at += n;
    }
    at
}

fn block_flat(b: &ResidualBlock) -> Vec<f64> {
    let mut out = Vec::new();
    for (_, c) in b.convs() {
        flatten_conv(c, &mut out);
    }
    out
}

fn set_block_flat(b: &mut ResidualBlock, flat: &[f64]) {
    let mut at = 0;
    for (_, c) in b.convs_mut() {
        at += unflatten_conv(c, &flat[at..]);
    }
}

fn options() -> GradCheckOptions {
    GradCheckOptions {
        step: 1e-5,
        max_probes: 48,
    }
}

/// Causal convolution, checked jointly over its input and `(g, v, bias)`.
fn conv_instance(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cin = rng.gen_range(1..4);
    let cout = rng.gen_range(1..4);
    let k = rng.gen_range(1..5);
    let d = rng.gen_range(1..4);
    let len = rng.gen_range(4..20);
    let params = ConvParams::init(&mut rng, cin, cout, k, d)?;
    let input = uniform(&mut rng, cin * len, -1.0, 1.0);
    let probe = uniform(&mut rng, cout * len, -1.0, 1.0);
    let n_in = input.len();
    let mut theta = input;
    flatten_conv(&params, &mut theta);
    let f = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
        let x = Tensor1C::from_vec(cin, len, t[..n_in].to_vec())?;
        let mut p = params.clone();
        unflatten_conv(&mut p, &t[n_in..]);
        let y = causal_conv(&x, &p)?;
        let up = Tensor1C::from_vec(cout, len, probe.clone())?;
        let (dx, gp) = causal_conv_backward(&x, &p, &up)?;
        let mut grad = dx.into_vec();
        flatten_conv(&gp, &mut grad);
        Ok((dot(y.data(), &probe), grad))
    };
    Ok(grad_check_with(f, &theta, seed, options())?.max_relative_error)
}

/// Average pooling followed by nearest upsampling.
fn pool_instance(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(1..4);
    let len = 2 * rng.gen_range(1..10);
    let x0 = uniform(&mut rng, c * len, -1.0, 1.0);
    let probe = uniform(&mut rng, c * len, -1.0, 1.0);
    let f = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
        let x = Tensor1C::from_vec(c, len, t.to_vec())?;
        let y = upsample2(&avg_pool2(&x)?);
        let up = Tensor1C::from_vec(c, len, probe.clone())?;
        let dx = avg_pool2_backward(&upsample2_backward(&up));
        Ok((dot(y.data(), &probe), dx.into_vec()))
    };
    Ok(grad_check_with(f, &x0, seed, options())?.max_relative_error)
}

/// Residual block with dropout active under a fixed mask seed.
fn block_instance(seed: u64) -> Result<f64> {
    for redraw in 0..MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, redraw as u64));
        let cin = rng.gen_range(1..4);
        let cout = rng.gen_range(1..4);
        let k = rng.gen_range(1..4);
        let d = rng.gen_range(1..3);
        let len = rng.gen_range(4..14);
        let rate = 0.2;
        let block = ResidualBlock::init(&mut rng, cin, cout, k, d)?;
        let input = uniform(&mut rng, cin * len, -1.0, 1.0);
        let probe = uniform(&mut rng, cout * len, -1.0, 1.0);
        let mask_seed = rng.gen();
        let x = Tensor1C::from_vec(cin, len, input.clone())?;
        if block
            .forward_cached(&x, rate, true, mask_seed)?
            .kink_margin()
            < KINK_MARGIN
        {
            continue;
        }
        let n_in = input.len();
        let mut theta = input;
        theta.extend(block_flat(&block));
        let f = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
            let x = Tensor1C::from_vec(cin, len, t[..n_in].to_vec())?;
            let mut b = block.clone();
            set_block_flat(&mut b, &t[n_in..]);
            let cache = b.forward_cached(&x, rate, true, mask_seed)?;
            let up = Tensor1C::from_vec(cout, len, probe.clone())?;
            let (dx, gb) = b.backward(&cache, &up)?;
            let mut grad = dx.into_vec();
            grad.extend(block_flat(&gb));
            Ok((dot(cache.output().data(), &probe), grad))
        };
        return Ok(grad_check_with(f, &theta, seed, options())?.max_relative_error);
    }
    Err(Error::Numeric(
        "could not draw a residual block away from ReLU kinks".into(),
    ))
}

/// A loss as a function of the reconstruction.
fn loss_instance(loss: &dyn SequenceLoss, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(2..16);
    let x = uniform(&mut rng, len, 0.0, 1.0);
    let xhat = uniform(&mut rng, len, 0.0, 1.0);
    let f = |t: &[f64]| loss.window_value_grad(&x, t);
    Ok(grad_check_with(f, &xhat, seed, options())?.max_relative_error)
}

/// The small autoencoder under an L2 reconstruction loss, with dropout on.
fn model_instance(seed: u64) -> Result<f64> {
    let loss = L2Loss;
    for redraw in 0..MAX_REDRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, redraw as u64));
        let config = TaeConfig {
            dropout_rate: 0.1,
            seed: rng.gen(),
            ..TaeConfig::tiny()
        };
        let model = TaeModel::init(&config)?;
        let x = uniform(&mut rng, config.window_length, 0.0, 1.0);
        let input = Tensor1C::from_series(&x);
        let mask_seed = rng.gen();
        if model.forward_cached(&input, true, mask_seed)?.kink_margin() < KINK_MARGIN {
            continue;
        }
        let theta = model.params.to_flat();
        let f = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
            let mut m = model.clone();
            m.params.set_flat(t)?;
            let cache = m.forward_cached(&input, true, mask_seed)?;
            let (value, dout) = loss.window_value_grad(&x, cache.output().data())?;
            let up = Tensor1C::from_series(&dout);
            Ok((value, m.backward(&cache, &up)?.to_flat()))
        };
        return Ok(grad_check_with(f, &theta, seed, options())?.max_relative_error);
    }
    Err(Error::Numeric(
        "could not draw a model instance away from ReLU kinks".into(),
    ))
}

fn entry<F>(
    component: &str,
    tolerance: f64,
    instances: usize,
    seed: u64,
    mut check: F,
) -> Result<SuiteEntry>
where
    F: FnMut(u64) -> Result<f64>,
{
    let stream = component
        .bytes()
        .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64));
    let mut worst = 0.0f64;
    for i in 0..instances {
        worst = worst.max(check(derive_seed(derive_seed(seed, stream), i as u64))?);
    }
    Ok(SuiteEntry {
        component: component.to_string(),
        tolerance,
        instances,
        max_relative_error: worst,
    })
}

/// Runs every component over `instances` random draws.
pub fn gradient_suite(instances: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let sdtw_sharp = SoftDtwLoss::new(0.1)?;
    let sdtw = SoftDtwLoss::new(1.0)?;
    Ok(vec![
        entry(
            "causal_conv",
            LAYER_TOLERANCE,
            instances,
            seed,
            conv_instance,
        )?,
        entry(
            "avg_pool2+upsample2",
            LAYER_TOLERANCE,
            instances,
            seed,
            pool_instance,
        )?,
        entry(
            "residual_block",
            LAYER_TOLERANCE,
            instances,
            seed,
            block_instance,
        )?,
        entry("loss.l2", LOSS_TOLERANCE, instances, seed, |s| {
            loss_instance(&L2Loss, s)
        })?,
        entry("loss.cosine", LOSS_TOLERANCE, instances, seed, |s| {
            loss_instance(&CosineLoss, s)
        })?,
        entry(
            "loss.dtw(gamma=0.1)",
            LOSS_TOLERANCE,
            instances,
            seed,
            |s| loss_instance(&sdtw_sharp, s),
        )?,
        entry("loss.dtw(gamma=1)", LOSS_TOLERANCE, instances, seed, |s| {
            loss_instance(&sdtw, s)
        })?,
        entry(
            "tae(tiny)",
            MODEL_TOLERANCE,
            instances,
            seed,
            model_instance,
        )?,
    ])
}
