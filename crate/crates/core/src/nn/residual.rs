use rand::Rng;

use super::conv::{causal_conv, causal_conv_backward, ConvParams};
use super::layers::{check_dropout_rate, dropout, relu, relu_backward, DropoutMask};
use super::{derive_seed, Tensor1C};
use crate::error::Result;

/// Temporal residual block: two (conv -> ReLU -> dropout) stages added to a
/// skip path, followed by a ReLU. The skip path is a 1x1 convolution when the
/// channel count changes and the identity otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub skip: Option<ConvParams>,
}

/// Intermediate values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Tensor1C,
    act1: Tensor1C,
    drop1: Tensor1C,
    mask1: DropoutMask,
    act2: Tensor1C,
    mask2: DropoutMask,
    output: Tensor1C,
    kink_margin: f64,
}

impl BlockCache {
    pub fn output(&self) -> &Tensor1C {
        &self.output
    }

    /// Smallest `|z|` over every ReLU input of the block. The block is
    /// differentiable wherever this is positive.
    pub fn kink_margin(&self) -> f64 {
        self.kink_margin
    }
}

fn min_abs(t: &Tensor1C) -> f64 {
    t.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

impl ResidualBlock {
    pub fn init<R: Rng>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
    ) -> Result<Self> {
        let conv1 = ConvParams::init(rng, in_channels, out_channels, kernel_size, dilation)?;
        let conv2 = ConvParams::init(rng, out_channels, out_channels, kernel_size, dilation)?;
        let skip = if in_channels != out_channels {
            Some(ConvParams::init(rng, in_channels, out_channels, 1, 1)?)
        } else {
            None
        };
        Ok(Self { conv1, conv2, skip })
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
            skip: self.skip.as_ref().map(ConvParams::zeros_like),
        }
    }

    pub fn accumulate(&mut self, other: &ResidualBlock) {
        self.conv1.accumulate(&other.conv1);
        self.conv2.accumulate(&other.conv2);
        if let (Some(a), Some(b)) = (self.skip.as_mut(), other.skip.as_ref()) {
            a.accumulate(b);
        }
    }

    /// Convolutions in a fixed order with their local names.
    pub fn convs(&self) -> Vec<(&'static str, &ConvParams)> {
        let mut out = vec![("conv1", &self.conv1), ("conv2", &self.conv2)];
        if let Some(s) = &self.skip {
            out.push(("skip", s));
        }
        out
    }

    pub fn convs_mut(&mut self) -> Vec<(&'static str, &mut ConvParams)> {
        let mut out = vec![("conv1", &mut self.conv1), ("conv2", &mut self.conv2)];
        if let Some(s) = &mut self.skip {
            out.push(("skip", s));
        }
        out
    }

    pub fn forward(
        &self,
        input: &Tensor1C,
        dropout_rate: f64,
        training: bool,
        seed: u64,
    ) -> Result<Tensor1C> {
        Ok(self
            .forward_cached(input, dropout_rate, training, seed)?
            .output)
    }

    /// `o = max(0, skip(x) + F(x))`.
    pub fn forward_cached(
        &self,
        input: &Tensor1C,
        dropout_rate: f64,
        training: bool,
        seed: u64,
    ) -> Result<BlockCache> {
        check_dropout_rate(dropout_rate)?;
        let pre1 = causal_conv(input, &self.conv1)?;
        let act1 = relu(&pre1);
        let (drop1, mask1) = dropout(&act1, dropout_rate, derive_seed(seed, 1), training)?;
        let pre2 = causal_conv(&drop1, &self.conv2)?;
        let act2 = relu(&pre2);
        let (drop2, mask2) = dropout(&act2, dropout_rate, derive_seed(seed, 2), training)?;
        let mut sum = match &self.skip {
            Some(skip) => causal_conv(input, skip)?,
            None => input.clone(),
        };
        sum.add_assign(&drop2)?;
        let kink_margin = min_abs(&pre1).min(min_abs(&pre2)).min(min_abs(&sum));
        let output = relu(&sum);
        Ok(BlockCache {
            input: input.clone(),
            act1,
            drop1,
            mask1,
            act2,
            mask2,
            output,
            kink_margin,
        })
    }

    /// Returns the input gradient and the parameter gradients (as a block of
    /// the same shape).
    pub fn backward(
        &self,
        cache: &BlockCache,
        upstream: &Tensor1C,
    ) -> Result<(Tensor1C, ResidualBlock)> {
        cache.output.ensure_same_shape(upstream)?;
        let d_sum = relu_backward(&cache.output, upstream);

        let d_act2 = relu_backward(&cache.act2, &cache.mask2.apply(&d_sum));
        let (d_drop1, g_conv2) = causal_conv_backward(&cache.drop1, &self.conv2, &d_act2)?;
        let d_act1 = relu_backward(&cache.act1, &cache.mask1.apply(&d_drop1));
        let (mut d_input, g_conv1) = causal_conv_backward(&cache.input, &self.conv1, &d_act1)?;

        let g_skip = match &self.skip {
            Some(skip) => {
                let (d_skip_in, g) = causal_conv_backward(&cache.input, skip, &d_sum)?;
                d_input.add_assign(&d_skip_in)?;
                Some(g)
            }
            None => {
                d_input.add_assign(&d_sum)?;
                None
            }
        };
        Ok((
            d_input,
            ResidualBlock {
                conv1: g_conv1,
                conv2: g_conv2,
                skip: g_skip,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_block(channels: usize) -> ResidualBlock {
        let zero = |cin| {
            ConvParams::from_kernel(
                cin,
                channels,
                3,
                1,
                &vec![0.0; cin * channels * 3],
                vec![0.0; channels],
            )
            .unwrap()
        };
        ResidualBlock {
            conv1: zero(channels),
            conv2: zero(channels),
            skip: None,
        }
    }

    #[test]
    fn zero_transformation_reduces_to_relu() {
        let block = zero_block(2);
        let x = Tensor1C::from_vec(2, 3, vec![-1.0, 0.5, 2.0, 3.0, -0.2, 0.0]).unwrap();
        let o = block.forward(&x, 0.1, false, 0).unwrap();
        assert_eq!(o, relu(&x));

        let nonneg = Tensor1C::from_vec(2, 3, vec![0.0, 0.5, 2.0, 3.0, 0.2, 1.0]).unwrap();
        assert_eq!(block.forward(&nonneg, 0.1, false, 0).unwrap(), nonneg);
    }

    #[test]
    fn output_length_matches_input() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let block = ResidualBlock::init(&mut rng, 1, 4, 3, 2).unwrap();
        assert!(block.skip.is_some());
        let x = Tensor1C::from_series(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let o = block.forward(&x, 0.0, false, 0).unwrap();
        assert_eq!((o.channels(), o.len()), (4, 5));
    }
}
