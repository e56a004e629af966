//! Individual layer kinds. Activations are `batch × width` matrices, one
//! sample per row.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// `y = x·Wᵀ + b`, with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    /// Absent when batch normalisation follows; its shift makes a bias redundant.
    pub bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl DenseLayer {
    /// Glorot-uniform weights in `[-L, L]`, `L = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot(fan_in: usize, fan_out: usize, with_bias: bool, rng: &mut Rng) -> Self {
        let limit = glorot_limit(fan_in, fan_out);
        let data = (0..fan_in * fan_out)
            .map(|_| limit * (2.0 * rng.unit() - 1.0))
            .collect();
        Self {
            weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized buffer"),
            bias: with_bias.then(|| vec![0.0; fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul_transposed(&self.weights)?;
        if let Some(b) = &self.bias {
            for i in 0..y.rows() {
                for (v, bj) in y.row_mut(i).iter_mut().zip(b) {
                    *v += bj;
                }
            }
        }
        Ok(y)
    }

    /// Returns `(∂L/∂x, parameter gradients)` given the layer input and `∂L/∂y`.
    pub fn backward(&self, input: &Matrix, grad_out: &Matrix) -> Result<(Matrix, DenseGrads)> {
        let grad_in = grad_out.matmul(&self.weights)?;
        let grad_w = grad_out.transposed_matmul(input)?;
        let grad_b = self.bias.as_ref().map(|_| column_sums(grad_out));
        Ok((
            grad_in,
            DenseGrads {
                weights: grad_w,
                bias: grad_b,
            },
        ))
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight kept on the old running statistic at each update.
    pub momentum: f64,
    pub epsilon: f64,
}

/// Batch quantities the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(width: usize, momentum: f64, epsilon: f64) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum,
            epsilon,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    /// Normalises with batch statistics (population variance) and folds them
    /// into the running estimates.
    pub fn forward_train(&mut self, x: &Matrix) -> (Matrix, BatchNormCache) {
        let stats = x.column_stats();
        let inv_std: Vec<f64> = stats
            .stds
            .iter()
            .map(|s| 1.0 / (s * s + self.epsilon).sqrt())
            .collect();
        let mut normalized = x.clone();
        let mut y = x.clone();
        for i in 0..x.rows() {
            let row = normalized.row_mut(i);
            for j in 0..row.len() {
                row[j] = (row[j] - stats.means[j]) * inv_std[j];
            }
            let out = y.row_mut(i);
            for j in 0..out.len() {
                out[j] = self.gamma[j] * row[j] + self.beta[j];
            }
        }
        let m = self.momentum;
        for j in 0..self.width() {
            self.running_mean[j] = m * self.running_mean[j] + (1.0 - m) * stats.means[j];
            self.running_var[j] =
                m * self.running_var[j] + (1.0 - m) * stats.stds[j] * stats.stds[j];
        }
        (y, BatchNormCache { normalized, inv_std })
    }

    pub fn forward_infer(&self, x: &Matrix) -> Matrix {
        let scale: Vec<f64> = self
            .running_var
            .iter()
            .zip(&self.gamma)
            .map(|(v, g)| g / (v + self.epsilon).sqrt())
            .collect();
        let mut y = x.clone();
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            for j in 0..row.len() {
                row[j] = (row[j] - self.running_mean[j]) * scale[j] + self.beta[j];
            }
        }
        y
    }

    pub fn backward(&self, cache: &BatchNormCache, grad_out: &Matrix) -> (Matrix, BatchNormGrads) {
        let (n, w) = grad_out.shape();
        let xhat = &cache.normalized;
        let mut d_gamma = vec![0.0; w];
        let mut d_beta = vec![0.0; w];
        let mut sum_dxhat = vec![0.0; w];
        let mut sum_dxhat_xhat = vec![0.0; w];
        for i in 0..n {
            let g = grad_out.row(i);
            let xh = xhat.row(i);
            for j in 0..w {
                d_gamma[j] += g[j] * xh[j];
                d_beta[j] += g[j];
                let dxh = g[j] * self.gamma[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * xh[j];
            }
        }
        let nf = n as f64;
        let mut grad_in = Matrix::zeros(n, w);
        for i in 0..n {
            let g = grad_out.row(i);
            let xh = xhat.row(i);
            let out = grad_in.row_mut(i);
            for j in 0..w {
                let dxh = g[j] * self.gamma[j];
                out[j] = cache.inv_std[j] / nf
                    * (nf * dxh - sum_dxhat[j] - xh[j] * sum_dxhat_xhat[j]);
            }
        }
        (
            grad_in,
            BatchNormGrads {
                gamma: d_gamma,
                beta: d_beta,
            },
        )
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` at train time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutLayer {
    pub rate: f64,
}

impl DropoutLayer {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Spec(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate })
    }

    /// One multiplier per element: `0` for dropped units, `1/(1-rate)` for kept.
    pub fn sample_mask(&self, len: usize, rng: &mut Rng) -> Vec<f64> {
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        (0..len)
            .map(|_| if rng.unit() < keep { scale } else { 0.0 })
            .collect()
    }

    pub fn apply_mask(x: &Matrix, mask: &[f64]) -> Result<Matrix> {
        if mask.len() != x.as_slice().len() {
            return Err(Error::State(format!(
                "dropout mask of length {} does not fit a {:?} activation",
                mask.len(),
                x.shape()
            )));
        }
        let mut y = x.clone();
        for (v, m) in y.as_mut_slice().iter_mut().zip(mask) {
            *v *= m;
        }
        Ok(y)
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Gradient through relu given the pre-activation; zero wherever it was `<= 0`.
pub fn relu_backward(pre: &Matrix, grad_out: &Matrix) -> Matrix {
    let mut g = grad_out.clone();
    for (v, &p) in g.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= 0.0 {
            *v = 0.0;
        }
    }
    g
}

pub fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (acc, v) in s.iter_mut().zip(row) {
            *acc += v;
        }
    }
    s
}
