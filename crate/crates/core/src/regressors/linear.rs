use super::gradient::{self, GradientModel};
use super::TrainingConfig;
use crate::dataset::Dataset;
use crate::error::Result;

/// Affine model; parameters are `[w_0, .., w_{d-1}, bias]`.
pub(crate) struct Linear {
    pub(crate) dim: usize,
}

impl GradientModel for Linear {
    fn n_params(&self) -> usize {
        self.dim + 1
    }

    fn predict_one(&self, params: &[f64], x: &[f64]) -> f64 {
        predict(params, x)
    }

    fn accumulate(&self, params: &[f64], x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
        let r = predict(params, x) - y;
        let d = 2.0 * r;
        for (g, xi) in grad[..self.dim].iter_mut().zip(x) {
            *g += d * xi;
        }
        grad[self.dim] += d;
        r * r
    }
}

#[inline]
pub(crate) fn predict(params: &[f64], x: &[f64]) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[0]
}

/// Full-batch gradient descent from zero weights.
pub(crate) fn fit(train: &Dataset, cfg: &TrainingConfig) -> Result<Vec<Vec<f64>>> {
    let model = Linear { dim: train.dim() };
    gradient::train(&model, vec![0.0; model.n_params()], train, cfg)
}
