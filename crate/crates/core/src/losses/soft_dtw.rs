//! Soft dynamic time warping with squared-Euclidean cell cost.
//!
//! Forward: `R[i][j] = cost(i, j) + softmin_gamma(R[i-1][j-1], R[i-1][j], R[i][j-1])`
//! with `softmin_gamma(a) = -gamma * log(sum exp(-a / gamma))`, evaluated in
//! max-shifted log-sum-exp form. The backward recursion accumulates the
//! expected alignment matrix `E`, and `d value / d y_j = sum_i E[i][j] * 2 (y_j - x_i)`.
//! With `gamma = 0` the soft-min is a hard min and no gradient is defined.

use super::SequenceLoss;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftDtwOutput {
    pub value: f64,
    /// Gradient with respect to `y`; `None` for hard DTW.
    pub grad: Option<Vec<f64>>,
}

/// Reusable buffers for one soft-DTW evaluation at a time.
#[derive(Debug, Clone)]
pub struct SdtwWorkspace {
    gamma: f64,
    n: usize,
    m: usize,
    /// `n x m` pairwise squared distances.
    cost: Vec<f64>,
    /// `(n + 2) x (m + 2)` accumulated soft-min costs.
    dp_forward: Vec<f64>,
    /// `(n + 2) x (m + 2)` expected alignment.
    dp_backward: Vec<f64>,
}

impl SdtwWorkspace {
    pub fn new(gamma: f64) -> Result<Self> {
        ensure!(
            gamma >= 0.0 && gamma.is_finite(),
            Config,
            "soft-DTW smoothing must be a finite value >= 0, got {gamma}"
        );
        Ok(Self {
            gamma,
            n: 0,
            m: 0,
            cost: Vec::new(),
            dp_forward: Vec::new(),
            dp_backward: Vec::new(),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.m + 2) + j
    }

    fn softmin(&self, a: f64, b: f64, c: f64) -> f64 {
        let lo = a.min(b).min(c);
        if self.gamma == 0.0 || lo == f64::INFINITY {
            return lo;
        }
        let g = self.gamma;
        let s = (-(a - lo) / g).exp() + (-(b - lo) / g).exp() + (-(c - lo) / g).exp();
        lo - g * s.ln()
    }

    /// Fills the cost and forward matrices and returns the soft-DTW value.
    pub fn forward(&mut self, x: &[f64], y: &[f64]) -> Result<f64> {
        ensure!(
            !x.is_empty() && !y.is_empty(),
            Shape,
            "soft-DTW needs non-empty sequences ({} x {})",
            x.len(),
            y.len()
        );
        let (n, m) = (x.len(), y.len());
        self.n = n;
        self.m = m;
        self.cost.clear();
        for xi in x {
            self.cost.extend(y.iter().map(|yj| (xi - yj) * (xi - yj)));
        }
        let size = (n + 2) * (m + 2);
        self.dp_forward.clear();
        self.dp_forward.resize(size, f64::INFINITY);
        let origin = self.at(0, 0);
        self.dp_forward[origin] = 0.0;
        for i in 1..=n {
            for j in 1..=m {
                let r = self.softmin(
                    self.dp_forward[self.at(i - 1, j - 1)],
                    self.dp_forward[self.at(i - 1, j)],
                    self.dp_forward[self.at(i, j - 1)],
                );
                let idx = self.at(i, j);
                self.dp_forward[idx] = self.cost[(i - 1) * m + (j - 1)] + r;
            }
        }
        Ok(self.dp_forward[self.at(n, m)])
    }

    /// Expected alignment after [`forward`](Self::forward); `n x m`,
    /// row-major. Requires `gamma > 0`.
    pub fn alignment(&mut self) -> Result<Vec<f64>> {
        ensure!(
            self.gamma > 0.0,
            Config,
            "hard DTW (gamma = 0) has no gradient"
        );
        ensure!(
            self.n > 0,
            Shape,
            "alignment requested before a forward pass"
        );
        let (n, m, g) = (self.n, self.m, self.gamma);
        let cost_at = |i: usize, j: usize| -> f64 {
            if i > n || j > m {
                0.0
            } else {
                self.cost[(i - 1) * m + (j - 1)]
            }
        };
        let mut r = self.dp_forward.clone();
        for i in 0..=n + 1 {
            let idx = self.at(i, m + 1);
            r[idx] = f64::NEG_INFINITY;
        }
        for j in 0..=m + 1 {
            let idx = self.at(n + 1, j);
            r[idx] = f64::NEG_INFINITY;
        }
        let corner = self.at(n + 1, m + 1);
        r[corner] = r[self.at(n, m)];

        let size = (n + 2) * (m + 2);
        self.dp_backward.clear();
        self.dp_backward.resize(size, 0.0);
        self.dp_backward[corner] = 1.0;
        for i in (1..=n).rev() {
            for j in (1..=m).rev() {
                let here = r[self.at(i, j)];
                let down = ((r[self.at(i + 1, j)] - here - cost_at(i + 1, j)) / g).exp();
                let right = ((r[self.at(i, j + 1)] - here - cost_at(i, j + 1)) / g).exp();
                let diag = ((r[self.at(i + 1, j + 1)] - here - cost_at(i + 1, j + 1)) / g).exp();
                let e = self.dp_backward[self.at(i + 1, j)] * down
                    + self.dp_backward[self.at(i, j + 1)] * right
                    + self.dp_backward[self.at(i + 1, j + 1)] * diag;
                let idx = self.at(i, j);
                self.dp_backward[idx] = e;
            }
        }
        let mut out = Vec::with_capacity(n * m);
        for i in 1..=n {
            for j in 1..=m {
                out.push(self.dp_backward[self.at(i, j)]);
            }
        }
        Ok(out)
    }

    /// Gradient of the last forward value with respect to `y`.
    pub fn gradient(&mut self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            x.len() == self.n && y.len() == self.m,
            Shape,
            "gradient sequences do not match the last forward pass"
        );
        let e = self.alignment()?;
        let m = self.m;
        let mut grad = vec![0.0; m];
        for (i, xi) in x.iter().enumerate() {
            let row = &e[i * m..(i + 1) * m];
            for ((gj, yj), eij) in grad.iter_mut().zip(y).zip(row) {
                *gj += eij * 2.0 * (yj - xi);
            }
        }
        Ok(grad)
    }
}

/// Soft-DTW value of `(x, y)` and, for `gamma > 0`, its gradient in `y`.
pub fn soft_dtw(x: &[f64], y: &[f64], gamma: f64) -> Result<SoftDtwOutput> {
    let mut ws = SdtwWorkspace::new(gamma)?;
    let value = ws.forward(x, y)?;
    let grad = if gamma > 0.0 {
        Some(ws.gradient(x, y)?)
    } else {
        None
    };
    Ok(SoftDtwOutput { value, grad })
}

/// Classic DTW with squared-Euclidean cost.
pub fn hard_dtw(x: &[f64], y: &[f64]) -> Result<f64> {
    SdtwWorkspace::new(0.0)?.forward(x, y)
}

/// Soft-DTW as a training loss; requires `gamma > 0`.
#[derive(Debug, Clone, Copy)]
pub struct SoftDtwLoss {
    gamma: f64,
}

impl SoftDtwLoss {
    pub const NAME: &'static str = "dtw";

    pub fn new(gamma: f64) -> Result<Self> {
        ensure!(
            gamma > 0.0 && gamma.is_finite(),
            Config,
            "soft-DTW training loss needs gamma > 0, got {gamma}"
        );
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl SequenceLoss for SoftDtwLoss {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn window_value_grad(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut ws = SdtwWorkspace::new(self.gamma)?;
        let value = ws.forward(x, xhat)?;
        Ok((value, ws.gradient(x, xhat)?))
    }

    fn window_value(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        SdtwWorkspace::new(self.gamma)?.forward(x, xhat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences_have_zero_hard_dtw() {
        let x = [0.3, 1.2, -0.7, 2.0];
        assert_eq!(soft_dtw(&x, &x, 0.0).unwrap().value, 0.0);
        assert!(soft_dtw(&x, &x, 0.0).unwrap().grad.is_none());
    }

    #[test]
    fn single_cell() {
        for gamma in [0.0, 0.01, 1.0, 10.0] {
            assert_eq!(soft_dtw(&[0.0], &[1.0], gamma).unwrap().value, 1.0);
        }
    }

    #[test]
    fn two_by_two_worked_example() {
        let v = soft_dtw(&[1.0, 2.0], &[1.0, 2.0], 1.0).unwrap().value;
        let expected = -(1.0 + 2.0 * (-1.0f64).exp()).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!(v < 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            soft_dtw(&[], &[1.0], 1.0),
            Err(crate::Error::Shape(_))
        ));
        assert!(matches!(
            soft_dtw(&[1.0], &[1.0], -1.0),
            Err(crate::Error::Config(_))
        ));
    }
}
