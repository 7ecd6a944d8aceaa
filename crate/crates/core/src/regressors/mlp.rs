//! Fully connected network with rectifier hidden layers and a linear output.
//!
//! Parameters live in one flat vector; for each layer the weight matrix
//! (row-major, `out x in`) is followed by its bias vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gradient::{self, GradientModel};
use super::TrainingConfig;
use crate::dataset::Dataset;
use crate::error::{Result, TriageError};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct Layout {
    /// `[d, h_1, .., h_k, 1]`
    pub(crate) sizes: Vec<usize>,
}

impl Layout {
    pub(crate) fn new(dim: usize, hidden: &[usize]) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(TriageError::invalid("hidden layer sizes must be non-empty and positive"));
        }
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Ok(Layout { sizes })
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes.windows(2).map(|w| (w[0], w[1]))
    }

    pub(crate) fn n_params(&self) -> usize {
        self.layers().map(|(i, o)| o * i + o).sum()
    }

    pub(crate) fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed::derive(seed, "mlp-init"));
        let mut p = Vec::with_capacity(self.n_params());
        for (fan_in, out) in self.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(out * fan_in + out) {
                p.push(rng.random_range(-bound..bound));
            }
        }
        p
    }

    /// Forward pass keeping every layer's post-activation output.
    fn forward(&self, params: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.sizes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, (fan_in, out)) in self.layers().enumerate() {
            let w = &params[off..off + out * fan_in];
            let b = &params[off + out * fan_in..off + out * fan_in + out];
            off += out * fan_in + out;
            let prev = &acts[l];
            let mut z: Vec<f64> = (0..out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>() + b[o]
                })
                .collect();
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub(crate) fn predict(&self, params: &[f64], x: &[f64]) -> f64 {
        self.forward(params, x).last().expect("output layer")[0]
    }
}

impl GradientModel for Layout {
    fn n_params(&self) -> usize {
        Layout::n_params(self)
    }

    fn predict_one(&self, params: &[f64], x: &[f64]) -> f64 {
        self.predict(params, x)
    }

    fn accumulate(&self, params: &[f64], x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
        let acts = self.forward(params, x);
        let n_layers = self.sizes.len() - 1;
        let r = acts[n_layers][0] - y;

        let offsets: Vec<usize> = self
            .layers()
            .scan(0, |off, (i, o)| {
                let start = *off;
                *off += o * i + o;
                Some(start)
            })
            .collect();

        let mut delta = vec![2.0 * r];
        for l in (0..n_layers).rev() {
            let (fan_in, out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let prev = &acts[l];
            for o in 0..out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[off + o * fan_in..off + (o + 1) * fan_in];
                for (g, a) in gw.iter_mut().zip(prev) {
                    *g += d * a;
                }
                grad[off + out * fan_in + o] += d;
            }
            if l > 0 {
                let w = &params[off..off + out * fan_in];
                delta = (0..fan_in)
                    .map(|i| {
                        // rectifier derivative, taken as 0 at the kink
                        if prev[i] <= 0.0 {
                            0.0
                        } else {
                            (0..out).map(|o| w[o * fan_in + i] * delta[o]).sum()
                        }
                    })
                    .collect();
            }
        }
        r * r
    }
}

pub(crate) fn fit(train: &Dataset, cfg: &TrainingConfig) -> Result<(Layout, Vec<Vec<f64>>)> {
    let layout = Layout::new(train.dim(), &cfg.hidden_sizes)?;
    let init = layout.init(cfg.seed);
    let snaps = gradient::train(&layout, init, train, cfg)?;
    Ok((layout, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::regressors::gradient::loss_and_gradient;

    /// Central finite differences of the mean squared error.
    fn numeric_gradient(layout: &Layout, params: &[f64], ds: &Dataset, h: f64) -> Vec<f64> {
        let rows: Vec<usize> = (0..ds.len()).collect();
        let loss = |p: &[f64]| -> f64 {
            rows.iter()
                .map(|&i| {
                    let r = layout.predict(p, ds.row(i)) - ds.targets()[i];
                    r * r
                })
                .sum::<f64>()
                / rows.len() as f64
        };
        (0..params.len())
            .map(|k| {
                let mut up = params.to_vec();
                let mut dn = params.to_vec();
                up[k] += h;
                dn[k] -= h;
                (loss(&up) - loss(&dn)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let x = Matrix::from_rows(&[
            vec![0.3, -1.2, 0.8],
            vec![-0.5, 0.4, 1.1],
            vec![1.5, 0.2, -0.7],
            vec![-1.1, -0.9, 0.05],
            vec![0.7, 1.3, -1.4],
        ])
        .unwrap();
        let ds = Dataset::from_parts(x, vec![0.2, -0.4, 1.0, 0.5, -1.3]).unwrap();
        let layout = Layout::new(3, &[4, 3]).unwrap();
        let params = layout.init(17);
        let rows: Vec<usize> = (0..5).collect();
        let (_, analytic) = loss_and_gradient(&layout, &params, &ds, &rows);
        let numeric = numeric_gradient(&layout, &params, &ds, 1e-5);
        for (k, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel < 1e-4 || (a - n).abs() < 1e-9, "param {k}: {a} vs {n}");
        }
    }

    #[test]
    fn rejects_empty_hidden_layers() {
        assert!(Layout::new(2, &[]).is_err());
        assert!(Layout::new(2, &[3, 0]).is_err());
    }

    #[test]
    fn parameter_count() {
        // 2->3: 9, 3->1: 4
        assert_eq!(Layout::new(2, &[3]).unwrap().n_params(), 13);
    }
}
