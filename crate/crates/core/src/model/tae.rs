use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TaeConfig;
use crate::batch::SequenceBatch;
use crate::error::{ensure, Result};
use crate::nn::{
    avg_pool2, avg_pool2_backward, causal_conv, causal_conv_backward, derive_seed, upsample2,
    upsample2_backward, BlockCache, ConvParams, ResidualBlock, Tensor1C,
};
use crate::pipeline::ScalerParams;

pub const FORMAT_VERSION: u32 = 1;

/// Trainable parameters: encoder blocks, decoder blocks and the 1x1 output
/// projection. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct TaeParams {
    pub encoder: Vec<ResidualBlock>,
    pub decoder: Vec<ResidualBlock>,
    pub output: ConvParams,
}

/// Scaling and threshold fitted alongside a trained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub scaler: ScalerParams,
    /// Whether readings were pair-summed before scaling.
    pub smoothing: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaeModel {
    pub config: TaeConfig,
    pub params: TaeParams,
    pub calibration: Option<Calibration>,
    pub format_version: u32,
}

/// Everything the backward pass needs from one forward pass of one window.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    encoder: Vec<BlockCache>,
    decoder: Vec<BlockCache>,
    projection_input: Tensor1C,
    output: Tensor1C,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor1C {
        &self.output
    }

    /// Smallest distance of any ReLU input from the kink at zero.
    pub fn kink_margin(&self) -> f64 {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(BlockCache::kink_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

impl TaeParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.iter().map(ResidualBlock::zeros_like).collect(),
            decoder: self.decoder.iter().map(ResidualBlock::zeros_like).collect(),
            output: self.output.zeros_like(),
        }
    }

    pub fn accumulate(&mut self, other: &TaeParams) {
        for (a, b) in self.encoder.iter_mut().zip(&other.encoder) {
            a.accumulate(b);
        }
        for (a, b) in self.decoder.iter_mut().zip(&other.decoder) {
            a.accumulate(b);
        }
        self.output.accumulate(&other.output);
    }

    /// Every convolution with its qualified name, in serialization order.
    pub fn convs(&self) -> Vec<(String, &ConvParams)> {
        let mut out = Vec::new();
        for (part, blocks) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (i, block) in blocks.iter().enumerate() {
                for (name, conv) in block.convs() {
                    out.push((format!("{part}.{i}.{name}"), conv));
                }
            }
        }
        out.push(("output".to_string(), &self.output));
        out
    }

    pub fn convs_mut(&mut self) -> Vec<(String, &mut ConvParams)> {
        let mut out = Vec::new();
        for (part, blocks) in [
            ("encoder", &mut self.encoder),
            ("decoder", &mut self.decoder),
        ] {
            for (i, block) in blocks.iter_mut().enumerate() {
                for (name, conv) in block.convs_mut() {
                    out.push((format!("{part}.{i}.{name}"), conv));
                }
            }
        }
        out.push(("output".to_string(), &mut self.output));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.convs().iter().map(|(_, c)| c.parameter_count()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (_, conv) in self.convs() {
            for (_, t) in conv.tensors() {
                flat.extend_from_slice(t);
            }
        }
        flat
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        ensure!(
            flat.len() == self.parameter_count(),
            Shape,
            "{} values for {} parameters",
            flat.len(),
            self.parameter_count()
        );
        let mut offset = 0;
        for (_, conv) in self.convs_mut() {
            for (_, t) in conv.tensors_mut() {
                let n = t.len();
                t.copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.convs().iter().all(|(_, c)| {
            c.tensors()
                .iter()
                .all(|(_, t)| t.iter().all(|v| v.is_finite()))
        })
    }
}

impl TaeModel {
    /// Seeded initialization from `config.seed`.
    pub fn init(config: &TaeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x1417));
        let k = config.kernel_size;
        let mut encoder = Vec::with_capacity(config.filters.len());
        let mut channels = 1;
        for (&f, &d) in config.filters.iter().zip(&config.dilations) {
            encoder.push(ResidualBlock::init(&mut rng, channels, f, k, d)?);
            channels = f;
        }
        let mut decoder = Vec::with_capacity(config.filters.len());
        for (&f, &d) in config.decoder_filters().iter().zip(&config.dilations) {
            decoder.push(ResidualBlock::init(&mut rng, channels, f, k, d)?);
            channels = f;
        }
        let output = ConvParams::init(&mut rng, channels, 1, 1, 1)?;
        Ok(Self {
            config: config.clone(),
            params: TaeParams {
                encoder,
                decoder,
                output,
            },
            calibration: None,
            format_version: FORMAT_VERSION,
        })
    }

    /// A model with every magnitude and bias zero; its output is identically zero.
    pub fn zeroed(config: &TaeConfig) -> Result<Self> {
        let mut model = Self::init(config)?;
        for (_, conv) in model.params.convs_mut() {
            conv.g.fill(0.0);
            conv.bias.fill(0.0);
        }
        Ok(model)
    }

    fn check_window(&self, input: &Tensor1C) -> Result<()> {
        ensure!(
            input.channels() == 1 && input.len() == self.config.window_length,
            Shape,
            "model expects 1 x {} windows, got {} x {}",
            self.config.window_length,
            input.channels(),
            input.len()
        );
        Ok(())
    }

    /// Encoder: residual blocks followed by 2x average pooling.
    pub fn encode(&self, input: &Tensor1C, training: bool, seed: u64) -> Result<Tensor1C> {
        self.check_window(input)?;
        let mut h = input.clone();
        for (i, block) in self.params.encoder.iter().enumerate() {
            h = block.forward(
                &h,
                self.config.dropout_rate,
                training,
                derive_seed(seed, i as u64),
            )?;
        }
        avg_pool2(&h)
    }

    pub fn forward_cached(
        &self,
        input: &Tensor1C,
        training: bool,
        seed: u64,
    ) -> Result<ForwardCache> {
        self.check_window(input)?;
        let rate = self.config.dropout_rate;
        let mut h = input.clone();
        let mut encoder = Vec::with_capacity(self.params.encoder.len());
        for (i, block) in self.params.encoder.iter().enumerate() {
            let cache = block.forward_cached(&h, rate, training, derive_seed(seed, i as u64))?;
            h = cache.output().clone();
            encoder.push(cache);
        }
        let latent = avg_pool2(&h)?;
        h = upsample2(&latent);
        let offset = self.params.encoder.len() as u64;
        let mut decoder = Vec::with_capacity(self.params.decoder.len());
        for (i, block) in self.params.decoder.iter().enumerate() {
            let cache =
                block.forward_cached(&h, rate, training, derive_seed(seed, offset + i as u64))?;
            h = cache.output().clone();
            decoder.push(cache);
        }
        let output = causal_conv(&h, &self.params.output)?;
        Ok(ForwardCache {
            encoder,
            decoder,
            projection_input: h,
            output,
        })
    }

    pub fn forward_window(&self, input: &Tensor1C, training: bool, seed: u64) -> Result<Tensor1C> {
        Ok(self.forward_cached(input, training, seed)?.output)
    }

    /// Parameter gradients given `d loss / d output` for one window.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Tensor1C) -> Result<TaeParams> {
        cache.output.ensure_same_shape(upstream)?;
        let (mut grad, g_output) =
            causal_conv_backward(&cache.projection_input, &self.params.output, upstream)?;
        let mut decoder = Vec::with_capacity(self.params.decoder.len());
        for (block, bc) in self.params.decoder.iter().zip(&cache.decoder).rev() {
            let (g_in, g_block) = block.backward(bc, &grad)?;
            grad = g_in;
            decoder.push(g_block);
        }
        decoder.reverse();
        grad = avg_pool2_backward(&upsample2_backward(&grad));
        let mut encoder = Vec::with_capacity(self.params.encoder.len());
        for (block, bc) in self.params.encoder.iter().zip(&cache.encoder).rev() {
            let (g_in, g_block) = block.backward(bc, &grad)?;
            grad = g_in;
            encoder.push(g_block);
        }
        encoder.reverse();
        Ok(TaeParams {
            encoder,
            decoder,
            output: g_output,
        })
    }

    /// Reconstructs every window of `batch`. Row `i` uses dropout seed
    /// `derive_seed(seed, i)`; inference mode ignores the seed.
    pub fn forward(
        &self,
        batch: &SequenceBatch,
        training: bool,
        seed: u64,
    ) -> Result<SequenceBatch> {
        ensure!(
            batch.width() == self.config.window_length,
            Shape,
            "batch windows have length {}, model expects {}",
            batch.width(),
            self.config.window_length
        );
        let rows: Vec<Vec<f64>> = (0..batch.len())
            .into_par_iter()
            .map(|i| {
                let x = Tensor1C::from_series(batch.row(i));
                self.forward_window(&x, training, derive_seed(seed, i as u64))
                    .map(Tensor1C::into_vec)
            })
            .collect::<Result<_>>()?;
        batch.with_data(rows.concat())
    }
}
