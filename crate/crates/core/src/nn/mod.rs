//! Minimal 1-D neural-network substrate: tensors, dilated causal convolution
//! with weight normalization, activations, dropout, pooling, Adam and a
//! finite-difference gradient checker.

mod adam;
mod conv;
mod gradcheck;
mod layers;
mod residual;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{causal_conv, causal_conv_backward, ConvParams};
pub use gradcheck::{
    grad_check, grad_check_with, relative_error, GradCheckOptions, GradCheckResult,
};
pub use layers::{
    avg_pool2, avg_pool2_backward, dropout, relu, relu_backward, upsample2, upsample2_backward,
    DropoutMask,
};
pub use residual::{BlockCache, ResidualBlock};
pub use tensor::Tensor1C;

/// SplitMix64 finalizer over `base ^ stream`; used to derive independent
/// seeds for sub-streams (layers, consumers, epochs).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
