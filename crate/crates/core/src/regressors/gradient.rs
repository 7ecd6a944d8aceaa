//! Shared epoch loop for the gradient-trained models.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::optim::Optimizer;
use super::TrainingConfig;
use crate::dataset::Dataset;
use crate::error::{Result, TriageError};
use crate::seed;

/// Rows per parallel work unit. Partial sums are combined in chunk order so the
/// result does not depend on the thread count.
const CHUNK: usize = 512;

pub(crate) trait GradientModel: Sync {
    fn n_params(&self) -> usize;

    fn predict_one(&self, params: &[f64], x: &[f64]) -> f64;

    /// Adds d(y_hat - y)^2 / d(params) into `grad` and returns (y_hat - y)^2.
    fn accumulate(&self, params: &[f64], x: &[f64], y: f64, grad: &mut [f64]) -> f64;
}

/// Mean squared error over `rows` and its gradient.
pub(crate) fn loss_and_gradient<M: GradientModel>(
    model: &M,
    params: &[f64],
    ds: &Dataset,
    rows: &[usize],
) -> (f64, Vec<f64>) {
    let p = model.n_params();
    let partials: Vec<(f64, Vec<f64>)> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; p];
            let mut loss = 0.0;
            for &i in chunk {
                loss += model.accumulate(params, ds.row(i), ds.targets()[i], &mut g);
            }
            (loss, g)
        })
        .collect();
    let mut grad = vec![0.0; p];
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

pub(crate) fn mse<M: GradientModel>(model: &M, params: &[f64], ds: &Dataset, rows: &[usize]) -> f64 {
    let partials: Vec<f64> = rows
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&i| {
                    let r = model.predict_one(params, ds.row(i)) - ds.targets()[i];
                    r * r
                })
                .sum()
        })
        .collect();
    partials.iter().sum::<f64>() / rows.len() as f64
}

/// Runs the configured number of epochs and returns the parameter snapshot
/// taken at every checkpoint.
pub(crate) fn train<M: GradientModel>(
    model: &M,
    init: Vec<f64>,
    train: &Dataset,
    cfg: &TrainingConfig,
) -> Result<Vec<Vec<f64>>> {
    let n = train.len();
    let (fit_rows, val_rows) = match cfg.early_stop_patience {
        Some(_) if n >= 10 => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut seed::rng(seed::derive(cfg.seed, "early-stop")));
            let n_val = (n as f64 * 0.1).round().max(1.0) as usize;
            let val = idx[..n_val].to_vec();
            let mut fit = idx[n_val..].to_vec();
            fit.sort_unstable();
            (fit, val)
        }
        _ => ((0..n).collect(), Vec::new()),
    };

    let mut params = init;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, params.len());
    let mut batch_rng = seed::rng(seed::derive(cfg.seed, "batches"));
    let mut order = fit_rows.clone();
    let stride = cfg.checkpoint_stride.max(1);
    let mut snapshots = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        match cfg.batch_size {
            Some(b) if b < order.len() => {
                order.shuffle(&mut batch_rng);
                for batch in order.chunks(b) {
                    let (loss, grad) = loss_and_gradient(model, &params, train, batch);
                    if !loss.is_finite() {
                        return Err(TriageError::Divergence { epoch: epoch + 1, what: "loss" });
                    }
                    opt.step(&mut params, &grad);
                }
            }
            _ => {
                let (loss, grad) = loss_and_gradient(model, &params, train, &fit_rows);
                if !loss.is_finite() {
                    return Err(TriageError::Divergence { epoch: epoch + 1, what: "loss" });
                }
                opt.step(&mut params, &grad);
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(TriageError::Divergence { epoch: epoch + 1, what: "parameter" });
        }
        if (epoch + 1) % stride == 0 {
            snapshots.push(params.clone());
        }
        if let Some(patience) = cfg.early_stop_patience {
            if !val_rows.is_empty() {
                let val = mse(model, &params, train, &val_rows);
                if val < best_val {
                    best_val = val;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience && snapshots.len() >= 2 {
                        log::debug!("early stop after epoch {}", epoch + 1);
                        break;
                    }
                }
            }
        }
    }
    if snapshots.len() < 2 {
        return Err(TriageError::invalid(format!(
            "training produced {} checkpoints; at least 2 are required",
            snapshots.len()
        )));
    }
    Ok(snapshots)
}
