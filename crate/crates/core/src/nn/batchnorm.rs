//! Batch normalization over rows (every time frame of every batch element).

use super::tensor::Tensor2;
use super::NnError;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Tensor2,
    pub beta: Tensor2,
    pub running_mean: Tensor2,
    pub running_var: Tensor2,
}

/// What the backward pass and the running-statistics update need.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Tensor2,
    pub inv_std: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub mode: BnMode,
}

impl BatchNormParams {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Tensor2::filled(1, features, 1.0),
            beta: Tensor2::zeros(1, features),
            running_mean: Tensor2::zeros(1, features),
            running_var: Tensor2::filled(1, features, 1.0),
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.cols()
    }

    pub fn forward(&self, x: &Tensor2, mode: BnMode) -> Result<(Tensor2, BnCache), NnError> {
        let k = self.features();
        if x.cols() != k {
            return Err(NnError::DimensionMismatch(format!(
                "batch norm over {k} features got {} columns",
                x.cols()
            )));
        }
        let n = x.rows();
        let (mean, var) = match mode {
            BnMode::Train => {
                if n < 2 {
                    return Err(NnError::BatchTooSmall(n));
                }
                let mut mean = vec![0.0; k];
                for r in 0..n {
                    mean.iter_mut().zip(x.row(r)).for_each(|(m, v)| *m += v);
                }
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; k];
                for r in 0..n {
                    for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n as f64);
                (mean, var)
            }
            BnMode::Infer => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut x_hat = Tensor2::zeros(n, k);
        let mut y = Tensor2::zeros(n, k);
        let (g, b) = (self.gamma.data(), self.beta.data());
        for r in 0..n {
            let xr = x.row(r);
            let xh = x_hat.row_mut(r);
            for j in 0..k {
                xh[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let yr = y.row_mut(r);
            for j in 0..k {
                yr[j] = g[j] * xh[j] + b[j];
            }
        }
        Ok((
            y,
            BnCache {
                x_hat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                mode,
            },
        ))
    }

    /// Gradient w.r.t. the input; `gamma`/`beta` gradients accumulate into `grad`.
    pub fn backward(&self, cache: &BnCache, dy: &Tensor2, grad: &mut BatchNormParams) -> Tensor2 {
        let (n, k) = dy.shape();
        let mut sum_dy = vec![0.0; k];
        let mut sum_dy_xh = vec![0.0; k];
        for r in 0..n {
            for j in 0..k {
                let d = dy.get(r, j);
                sum_dy[j] += d;
                sum_dy_xh[j] += d * cache.x_hat.get(r, j);
            }
        }
        grad.gamma
            .data_mut()
            .iter_mut()
            .zip(&sum_dy_xh)
            .for_each(|(g, s)| *g += s);
        grad.beta
            .data_mut()
            .iter_mut()
            .zip(&sum_dy)
            .for_each(|(g, s)| *g += s);

        let gamma = self.gamma.data();
        let mut dx = Tensor2::zeros(n, k);
        match cache.mode {
            BnMode::Train => {
                let nf = n as f64;
                for r in 0..n {
                    let out = dx.row_mut(r);
                    for j in 0..k {
                        out[j] = gamma[j] * cache.inv_std[j] / nf
                            * (nf * dy.get(r, j) - sum_dy[j] - cache.x_hat.get(r, j) * sum_dy_xh[j]);
                    }
                }
            }
            BnMode::Infer => {
                for r in 0..n {
                    let out = dx.row_mut(r);
                    for j in 0..k {
                        out[j] = gamma[j] * cache.inv_std[j] * dy.get(r, j);
                    }
                }
            }
        }
        dx
    }

    /// Fold one training batch's statistics into the running estimates.
    pub fn update_running(&mut self, cache: &BnCache) {
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(&cache.batch_mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(&cache.batch_var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v;
        }
    }
}

/// Functional form used by the examples and tests.
pub fn batch_norm(
    x: &Tensor2,
    params: &mut BatchNormParams,
    mode: BnMode,
) -> Result<Tensor2, NnError> {
    let (y, cache) = params.forward(x, mode)?;
    if mode == BnMode::Train {
        params.update_running(&cache);
    }
    Ok(y)
}
