use crate::error::{ensure, Result};

/// A single sequence with `channels` rows of `length` time steps, stored
/// channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1C {
    channels: usize,
    length: usize,
    data: Vec<f64>,
}

impl Tensor1C {
    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            data: vec![0.0; channels * length],
        }
    }

    pub fn from_vec(channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == channels * length,
            Shape,
            "{} values cannot fill {} channels x {} steps",
            data.len(),
            channels,
            length
        );
        Ok(Self {
            channels,
            length,
            data,
        })
    }

    /// Wraps a univariate series as a one-channel tensor.
    pub fn from_series(values: &[f64]) -> Self {
        Self {
            channels: 1,
            length: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.length..(c + 1) * self.length]
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> f64 {
        self.data[c * self.length + t]
    }

    pub fn ensure_finite(&self) -> Result<()> {
        ensure!(
            self.data.iter().all(|v| v.is_finite()),
            Numeric,
            "tensor contains non-finite values"
        );
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &Tensor1C) -> Result<()> {
        ensure!(
            self.channels == other.channels && self.length == other.length,
            Shape,
            "expected {}x{}, got {}x{}",
            self.channels,
            self.length,
            other.channels,
            other.length
        );
        Ok(())
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor1C) -> Result<()> {
        self.ensure_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}
