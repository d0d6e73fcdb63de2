//! Dilated causal 1-D convolution with a weight-normalized kernel.
//!
//! The kernel of output channel `o` is `g[o] * v[o] / ||v[o]||`, and tap `j`
//! reads the input `j * dilation` steps in the past. Inputs before the start
//! of the sequence are treated as zero, so output length equals input length.

use rand::Rng;

use super::Tensor1C;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    in_channels: usize,
    out_channels: usize,
    kernel_size: usize,
    dilation: usize,
    /// Per-output-channel magnitude.
    pub g: Vec<f64>,
    /// Direction tensor, laid out `[out][in][tap]`.
    pub v: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
        g: Vec<f64>,
        v: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        ensure!(
            in_channels > 0 && out_channels > 0,
            Config,
            "convolution channel counts must be positive"
        );
        ensure!(kernel_size >= 1, Config, "kernel size must be at least 1");
        ensure!(dilation >= 1, Config, "dilation must be at least 1");
        ensure!(
            g.len() == out_channels
                && bias.len() == out_channels
                && v.len() == out_channels * in_channels * kernel_size,
            Shape,
            "parameter lengths do not match {out_channels}x{in_channels}x{kernel_size}"
        );
        let params = Self {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            g,
            v,
            bias,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks shapes, finiteness and the positive-direction-norm invariant.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.g.len() == self.out_channels
                && self.bias.len() == self.out_channels
                && self.v.len() == self.out_channels * self.row_len(),
            Shape,
            "parameter lengths do not match {}x{}x{}",
            self.out_channels,
            self.in_channels,
            self.kernel_size
        );
        ensure!(
            self.tensors()
                .iter()
                .all(|(_, t)| t.iter().all(|v| v.is_finite())),
            Numeric,
            "convolution parameters are not finite"
        );
        for o in 0..self.out_channels {
            ensure!(
                self.direction_norm(o) > 0.0,
                Numeric,
                "direction of output channel {o} has zero norm"
            );
        }
        Ok(())
    }

    /// Seeded initialization: kernel and bias uniform in `±sqrt(1/fan_in)`.
    /// Each direction row is stored at unit norm with the row norm in `g`,
    /// which keeps the reparameterization well conditioned.
    pub fn init<R: Rng>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
    ) -> Result<Self> {
        let fan_in = (in_channels * kernel_size) as f64;
        let bound = (1.0 / fan_in).sqrt();
        let row = in_channels * kernel_size;
        let mut g = Vec::with_capacity(out_channels);
        let mut v = Vec::with_capacity(out_channels * row);
        for _ in 0..out_channels {
            let w: Vec<f64> = (0..row).map(|_| rng.gen_range(-bound..bound)).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            g.push(norm);
            v.extend(w.iter().map(|x| x / norm));
        }
        let bias: Vec<f64> = (0..out_channels)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self::new(in_channels, out_channels, kernel_size, dilation, g, v, bias)
    }

    /// Kernel whose effective weights are exactly `kernel` (g = ||row||).
    /// Rows that are entirely zero get magnitude zero and a unit direction.
    pub fn from_kernel(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        dilation: usize,
        kernel: &[f64],
        bias: Vec<f64>,
    ) -> Result<Self> {
        let row = in_channels * kernel_size;
        ensure!(
            kernel.len() == out_channels * row,
            Shape,
            "kernel has {} values, expected {}",
            kernel.len(),
            out_channels * row
        );
        let mut g = Vec::with_capacity(out_channels);
        let mut v = Vec::with_capacity(kernel.len());
        for r in kernel.chunks(row) {
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                g.push(norm);
                v.extend_from_slice(r);
            } else {
                g.push(0.0);
                v.extend(std::iter::repeat(1.0).take(row));
            }
        }
        Self::new(in_channels, out_channels, kernel_size, dilation, g, v, bias)
    }

    /// Same shape, all-zero contents. Used as a gradient accumulator; the
    /// norm invariant does not apply to it.
    pub fn zeros_like(&self) -> Self {
        Self {
            g: vec![0.0; self.g.len()],
            v: vec![0.0; self.v.len()],
            bias: vec![0.0; self.bias.len()],
            ..*self
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    fn row_len(&self) -> usize {
        self.in_channels * self.kernel_size
    }

    fn direction_norm(&self, o: usize) -> f64 {
        let row = self.row_len();
        self.v[o * row..(o + 1) * row]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Effective kernel `g * v / ||v||`, laid out `[out][in][tap]`.
    pub fn effective_kernel(&self) -> Vec<f64> {
        let row = self.row_len();
        let mut w = Vec::with_capacity(self.v.len());
        for o in 0..self.out_channels {
            // Normalizing before scaling keeps a single-element direction at
            // exactly +-1, so `w` stays invariant to rescaling `v` bit for bit.
            let norm = self.direction_norm(o);
            let g = self.g[o];
            w.extend(
                self.v[o * row..(o + 1) * row]
                    .iter()
                    .map(|x| g * (x / norm)),
            );
        }
        w
    }

    /// Adds `other` into `self` elementwise. Shapes must agree.
    pub fn accumulate(&mut self, other: &ConvParams) {
        debug_assert_eq!(self.v.len(), other.v.len());
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a += b;
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.g.len() + self.v.len() + self.bias.len()
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 3] {
        [("g", &self.g), ("v", &self.v), ("bias", &self.bias)]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 3] {
        [
            ("g", &mut self.g),
            ("v", &mut self.v),
            ("bias", &mut self.bias),
        ]
    }

    pub fn shapes(&self) -> [Vec<usize>; 3] {
        [
            vec![self.out_channels],
            vec![self.out_channels, self.in_channels, self.kernel_size],
            vec![self.out_channels],
        ]
    }
}

/// `F(s) = bias + sum_j C(j) x(s - j*d)` per output channel, zero-padded on the left.
pub fn causal_conv(input: &Tensor1C, params: &ConvParams) -> Result<Tensor1C> {
    ensure!(
        input.channels() == params.in_channels,
        Shape,
        "convolution expects {} input channels, got {}",
        params.in_channels,
        input.channels()
    );
    ensure!(!input.is_empty(), Shape, "convolution input is empty");
    input.ensure_finite()?;

    let len = input.len();
    let k = params.kernel_size;
    let w = params.effective_kernel();
    let mut out = Tensor1C::zeros(params.out_channels, len);
    for o in 0..params.out_channels {
        let y = out.channel_mut(o);
        y.fill(params.bias[o]);
        for i in 0..params.in_channels {
            let x = input.channel(i);
            for j in 0..k {
                let shift = j * params.dilation;
                if shift >= len {
                    break;
                }
                let wv = w[(o * params.in_channels + i) * k + j];
                if wv == 0.0 {
                    continue;
                }
                for (ys, xs) in y[shift..].iter_mut().zip(&x[..len - shift]) {
                    *ys += wv * xs;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a causal convolution with respect to its input and its
/// `(g, v, bias)` parameters, given the upstream gradient of its output.
pub fn causal_conv_backward(
    input: &Tensor1C,
    params: &ConvParams,
    upstream: &Tensor1C,
) -> Result<(Tensor1C, ConvParams)> {
    ensure!(
        input.channels() == params.in_channels
            && upstream.channels() == params.out_channels
            && upstream.len() == input.len(),
        Shape,
        "backward shapes inconsistent: input {}x{}, upstream {}x{}, conv {}->{}",
        input.channels(),
        input.len(),
        upstream.channels(),
        upstream.len(),
        params.in_channels,
        params.out_channels
    );
    let len = input.len();
    let k = params.kernel_size;
    let cin = params.in_channels;
    let w = params.effective_kernel();
    let mut grad_in = Tensor1C::zeros(cin, len);
    let mut grad_w = vec![0.0; w.len()];
    let mut grads = params.zeros_like();

    for o in 0..params.out_channels {
        let dy = upstream.channel(o);
        grads.bias[o] = dy.iter().sum();
        for i in 0..cin {
            let x = input.channel(i);
            for j in 0..k {
                let shift = j * params.dilation;
                if shift >= len {
                    break;
                }
                let idx = (o * cin + i) * k + j;
                grad_w[idx] = dy[shift..]
                    .iter()
                    .zip(&x[..len - shift])
                    .map(|(a, b)| a * b)
                    .sum();
                let wv = w[idx];
                if wv != 0.0 {
                    let dx = grad_in.channel_mut(i);
                    for (dxs, dys) in dx[..len - shift].iter_mut().zip(&dy[shift..]) {
                        *dxs += wv * dys;
                    }
                }
            }
        }
    }

    // Chain rule through w = g * v / ||v||.
    let row = params.row_len();
    for o in 0..params.out_channels {
        let norm = params.direction_norm(o);
        let v = &params.v[o * row..(o + 1) * row];
        let gw = &grad_w[o * row..(o + 1) * row];
        let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let dg = gw.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>();
        grads.g[o] = dg;
        let scale = params.g[o] / norm;
        for ((dv, gwv), u) in grads.v[o * row..(o + 1) * row]
            .iter_mut()
            .zip(gw)
            .zip(&unit)
        {
            *dv = scale * (gwv - dg * u);
        }
    }
    Ok((grad_in, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(kernel: &[f64], dilation: usize) -> ConvParams {
        ConvParams::from_kernel(1, 1, kernel.len(), dilation, kernel, vec![0.0]).unwrap()
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let x = Tensor1C::from_series(&[0.5, -1.0, 2.0, 3.5]);
        for d in [1, 2, 5] {
            let y = causal_conv(&x, &single(&[1.0], d)).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn two_tap_examples() {
        let x = Tensor1C::from_series(&[1.0, 2.0, 3.0, 4.0]);
        let y = causal_conv(&x, &single(&[1.0, 1.0], 1)).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0, 5.0, 7.0]);

        let x = Tensor1C::from_series(&[1.0, 0.0, 0.0, 1.0]);
        let y = causal_conv(&x, &single(&[1.0, 1.0], 2)).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let conv = ConvParams::from_kernel(2, 1, 1, 1, &[1.0, 1.0], vec![0.0]).unwrap();
        let err = causal_conv(&Tensor1C::from_series(&[1.0]), &conv).unwrap_err();
        assert!(matches!(err, crate::Error::Shape(_)));
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let err =
            causal_conv(&Tensor1C::from_series(&[1.0, f64::NAN]), &single(&[1.0], 1)).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }

    #[test]
    fn zero_direction_is_rejected() {
        let err = ConvParams::new(1, 1, 2, 1, vec![1.0], vec![0.0, 0.0], vec![0.0]).unwrap_err();
        assert!(matches!(err, crate::Error::Numeric(_)));
    }

    #[test]
    fn effective_rows_have_norm_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut conv = ConvParams::init(&mut rng, 3, 4, 5, 2).unwrap();
        conv.g = vec![0.3, 1.7, 2.0, 0.01];
        let w = conv.effective_kernel();
        for (o, row) in w.chunks(15).enumerate() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - conv.g[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let conv = ConvParams::init(&mut rng, 2, 3, 3, 2).unwrap();
        let x = Tensor1C::from_vec(2, 6, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        let (gx, gp) = causal_conv_backward(&x, &conv, &Tensor1C::zeros(3, 6)).unwrap();
        assert!(gx.data().iter().all(|v| *v == 0.0));
        assert!(gp
            .tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn identity_kernel_backward_passes_gradient_through() {
        let x = Tensor1C::from_series(&[1.0, 2.0, 3.0]);
        let up = Tensor1C::from_series(&[0.1, -0.4, 0.7]);
        let (gx, _) = causal_conv_backward(&x, &single(&[1.0], 3), &up).unwrap();
        assert_eq!(gx, up);
    }
}
