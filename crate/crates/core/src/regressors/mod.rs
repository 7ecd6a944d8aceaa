//! Regressors that keep a parameter snapshot at every training checkpoint.
//!
//! Three families are supported: an affine model trained by gradient descent,
//! gradient-boosted regression trees (each boosting stage is a checkpoint), and
//! a rectifier feed-forward network. All of them are deterministic given the
//! training data and [`TrainingConfig`].

mod gbdt;
mod gradient;
mod linear;
mod mlp;
mod optim;
mod snapshot;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gbdt::{Node, Tree};
pub use optim::OptimizerKind;
pub use snapshot::{load_run, save_run, SNAPSHOT_FORMAT_VERSION};

use crate::dataset::Dataset;
use crate::error::{Result, TriageError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    LinearSgd,
    Gbdt,
    FeedForward,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LinearSgd => "linear",
            ModelKind::Gbdt => "gbdt",
            ModelKind::FeedForward => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::LinearSgd),
            "gbdt" => Ok(ModelKind::Gbdt),
            "mlp" => Ok(ModelKind::FeedForward),
            other => Err(TriageError::invalid(format!(
                "unknown model '{other}' (expected linear, gbdt or mlp)"
            ))),
        }
    }
}

/// Training hyperparameters. `epochs` is the number of boosting stages for
/// [`ModelKind::Gbdt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub kind: ModelKind,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Hidden widths of the feed-forward network.
    pub hidden_sizes: Vec<usize>,
    pub optimizer: OptimizerKind,
    /// Mini-batch size; `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Keep one checkpoint every `checkpoint_stride` epochs/stages.
    pub checkpoint_stride: usize,
    /// Stop after this many epochs without improvement on a 10% held-out
    /// slice of the training rows.
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
}

impl TrainingConfig {
    pub fn linear(epochs: usize, learning_rate: f64, seed: u64) -> Self {
        TrainingConfig {
            kind: ModelKind::LinearSgd,
            epochs,
            learning_rate,
            optimizer: OptimizerKind::Sgd,
            ..TrainingConfig::default_for(ModelKind::LinearSgd, seed)
        }
    }

    pub fn gbdt(stages: usize, learning_rate: f64, max_depth: usize, seed: u64) -> Self {
        TrainingConfig {
            epochs: stages,
            learning_rate,
            max_depth,
            ..TrainingConfig::default_for(ModelKind::Gbdt, seed)
        }
    }

    pub fn feedforward(hidden_sizes: Vec<usize>, epochs: usize, learning_rate: f64, seed: u64) -> Self {
        TrainingConfig {
            hidden_sizes,
            epochs,
            learning_rate,
            ..TrainingConfig::default_for(ModelKind::FeedForward, seed)
        }
    }

    /// Desk-scale defaults per model family.
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        let (epochs, learning_rate, optimizer) = match kind {
            ModelKind::LinearSgd => (50, 0.1, OptimizerKind::Sgd),
            ModelKind::Gbdt => (80, 0.2, OptimizerKind::Sgd),
            ModelKind::FeedForward => (50, 0.01, OptimizerKind::Adam),
        };
        TrainingConfig {
            kind,
            epochs,
            learning_rate,
            hidden_sizes: vec![32, 16],
            optimizer,
            batch_size: None,
            max_depth: 7,
            min_samples_leaf: 10,
            checkpoint_stride: 1,
            early_stop_patience: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainingConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 2 {
            return Err(TriageError::invalid("at least 2 epochs/stages are required"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TriageError::invalid("learning rate must be positive"));
        }
        if self.checkpoint_stride == 0 || self.epochs / self.checkpoint_stride < 2 {
            return Err(TriageError::invalid(
                "checkpoint stride must leave at least 2 checkpoints",
            ));
        }
        if self.batch_size == Some(0) {
            return Err(TriageError::invalid("batch size must be positive"));
        }
        match self.kind {
            ModelKind::Gbdt if self.max_depth == 0 => {
                Err(TriageError::invalid("GBDT max depth must be >= 1"))
            }
            ModelKind::FeedForward if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) => {
                Err(TriageError::invalid("hidden layer sizes must be non-empty and positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Snapshots {
    Linear(Vec<Vec<f64>>),
    Gbdt {
        base: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
        /// Number of trees in use at each checkpoint.
        stages: Vec<usize>,
    },
    FeedForward {
        layout: mlp::Layout,
        params: Vec<Vec<f64>>,
    },
}

/// A trained regressor that can predict with any of its checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointedRun {
    config: TrainingConfig,
    dim: usize,
    snapshots: Snapshots,
}

impl CheckpointedRun {
    pub fn model_kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of checkpoints `E`.
    pub fn checkpoints(&self) -> usize {
        match &self.snapshots {
            Snapshots::Linear(s) => s.len(),
            Snapshots::Gbdt { stages, .. } => stages.len(),
            Snapshots::FeedForward { params, .. } => params.len(),
        }
    }

    /// Copy that keeps only checkpoints `1..=e`.
    pub fn truncated(&self, e: usize) -> Result<CheckpointedRun> {
        self.check_index(e)?;
        let snapshots = match &self.snapshots {
            Snapshots::Linear(s) => Snapshots::Linear(s[..e].to_vec()),
            Snapshots::Gbdt {
                base,
                learning_rate,
                trees,
                stages,
            } => Snapshots::Gbdt {
                base: *base,
                learning_rate: *learning_rate,
                trees: trees[..stages[e - 1]].to_vec(),
                stages: stages[..e].to_vec(),
            },
            Snapshots::FeedForward { layout, params } => Snapshots::FeedForward {
                layout: layout.clone(),
                params: params[..e].to_vec(),
            },
        };
        Ok(CheckpointedRun {
            config: self.config.clone(),
            dim: self.dim,
            snapshots,
        })
    }

    fn check_index(&self, e: usize) -> Result<()> {
        if e == 0 || e > self.checkpoints() {
            return Err(TriageError::CheckpointOutOfRange {
                index: e,
                count: self.checkpoints(),
            });
        }
        Ok(())
    }

    /// Prediction of checkpoint `e` (1-based) for a single row.
    pub fn predict_row(&self, e: usize, x: &[f64]) -> Result<f64> {
        self.check_index(e)?;
        if x.len() != self.dim {
            return Err(TriageError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(e, x))
    }

    fn predict_unchecked(&self, e: usize, x: &[f64]) -> f64 {
        match &self.snapshots {
            Snapshots::Linear(s) => linear::predict(&s[e - 1], x),
            Snapshots::Gbdt {
                base,
                learning_rate,
                trees,
                stages,
            } => {
                let sum: f64 = trees[..stages[e - 1]].iter().map(|t| t.predict(x)).sum();
                base + learning_rate * sum
            }
            Snapshots::FeedForward { layout, params } => layout.predict(&params[e - 1], x),
        }
    }

    /// Predictions of checkpoint `e` (1-based) for every row of `x`.
    pub fn predict(&self, e: usize, x: &Matrix) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        self.check_index(e)?;
        if x.cols() != self.dim {
            return Err(TriageError::DimensionMismatch {
                expected: self.dim,
                got: x.cols(),
            });
        }
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_unchecked(e, x.row(i)))
            .collect())
    }

    /// Predictions of the final checkpoint.
    pub fn predict_final(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.predict(self.checkpoints(), x)
    }
}

fn check_train(train: &Dataset, cfg: &TrainingConfig, kind: ModelKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(TriageError::invalid(format!(
            "config is for {} but {} was requested",
            cfg.kind, kind
        )));
    }
    cfg.validate()?;
    if train.is_empty() {
        return Err(TriageError::Empty("training set"));
    }
    Ok(())
}

/// Full-batch gradient descent on squared error; one checkpoint per epoch.
pub fn fit_linear_sgd(train: &Dataset, cfg: &TrainingConfig) -> Result<CheckpointedRun> {
    check_train(train, cfg, ModelKind::LinearSgd)?;
    Ok(CheckpointedRun {
        config: cfg.clone(),
        dim: train.dim(),
        snapshots: Snapshots::Linear(linear::fit(train, cfg)?),
    })
}

/// Gradient boosting; checkpoint `e` is the base mean plus the first `e`
/// shrunken trees.
pub fn fit_gbdt(train: &Dataset, cfg: &TrainingConfig) -> Result<CheckpointedRun> {
    check_train(train, cfg, ModelKind::Gbdt)?;
    let (base, trees) = gbdt::fit(
        train,
        cfg.epochs,
        cfg.learning_rate,
        cfg.max_depth,
        cfg.min_samples_leaf,
    )?;
    let stride = cfg.checkpoint_stride;
    let stages = (1..=trees.len()).filter(|s| s % stride == 0).collect();
    Ok(CheckpointedRun {
        config: cfg.clone(),
        dim: train.dim(),
        snapshots: Snapshots::Gbdt {
            base,
            learning_rate: cfg.learning_rate,
            trees,
            stages,
        },
    })
}

/// Rectifier network trained with manual backpropagation; one checkpoint per
/// epoch.
pub fn fit_feedforward(train: &Dataset, cfg: &TrainingConfig) -> Result<CheckpointedRun> {
    check_train(train, cfg, ModelKind::FeedForward)?;
    let (layout, params) = mlp::fit(train, cfg)?;
    Ok(CheckpointedRun {
        config: cfg.clone(),
        dim: train.dim(),
        snapshots: Snapshots::FeedForward { layout, params },
    })
}

/// Dispatches on `cfg.kind`.
pub fn fit(train: &Dataset, cfg: &TrainingConfig) -> Result<CheckpointedRun> {
    match cfg.kind {
        ModelKind::LinearSgd => fit_linear_sgd(train, cfg),
        ModelKind::Gbdt => fit_gbdt(train, cfg),
        ModelKind::FeedForward => fit_feedforward(train, cfg),
    }
}

fn check_dim(run: &CheckpointedRun, ds: &Dataset) -> Result<()> {
    if run.dim() != ds.dim() {
        return Err(TriageError::DimensionMismatch {
            expected: run.dim(),
            got: ds.dim(),
        });
    }
    Ok(())
}

/// Signed residuals `y - f(x)` of the final checkpoint.
pub fn final_residuals(run: &CheckpointedRun, ds: &Dataset) -> Result<Vec<f64>> {
    check_dim(run, ds)?;
    let pred = run.predict_final(ds.features())?;
    Ok(ds.targets().iter().zip(pred).map(|(y, p)| y - p).collect())
}

/// Per-sample squared error at every checkpoint, `n x E`.
pub fn loss_trajectory(run: &CheckpointedRun, ds: &Dataset) -> Result<Matrix> {
    check_dim(run, ds)?;
    let e_count = run.checkpoints();
    let mut out = Matrix::zeros(ds.len(), e_count);
    for e in 1..=e_count {
        let pred = run.predict(e, ds.features())?;
        for (i, p) in pred.into_iter().enumerate() {
            let r = ds.targets()[i] - p;
            out.set(i, e - 1, r * r);
        }
    }
    Ok(out)
}

/// Direct access to the feed-forward network as a function of a flat
/// parameter vector.
#[derive(Debug, Clone)]
pub struct FeedForwardNet {
    layout: mlp::Layout,
}

impl FeedForwardNet {
    pub fn new(dim: usize, hidden_sizes: &[usize]) -> Result<Self> {
        Ok(FeedForwardNet {
            layout: mlp::Layout::new(dim, hidden_sizes)?,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params()
    }

    /// The initial parameters `fit` would start from with this seed.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        self.layout.init(seed)
    }

    pub fn predict(&self, params: &[f64], x: &[f64]) -> Result<f64> {
        self.check(params, x.len())?;
        Ok(self.layout.predict(params, x))
    }

    /// Mean squared error over `ds` and its analytic gradient.
    pub fn loss_and_gradient(&self, params: &[f64], ds: &Dataset) -> Result<(f64, Vec<f64>)> {
        self.check(params, ds.dim())?;
        let rows: Vec<usize> = (0..ds.len()).collect();
        Ok(gradient::loss_and_gradient(&self.layout, params, ds, &rows))
    }

    fn check(&self, params: &[f64], dim: usize) -> Result<()> {
        if dim != self.layout.sizes[0] {
            return Err(TriageError::DimensionMismatch {
                expected: self.layout.sizes[0],
                got: dim,
            });
        }
        if params.len() != self.n_params() {
            return Err(TriageError::DimensionMismatch {
                expected: self.n_params(),
                got: params.len(),
            });
        }
        Ok(())
    }
}

/// Architecture/optimizer variants of a feed-forward network used to check
/// that scores do not hinge on one particular model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVariantGrid {
    pub variants: Vec<TrainingConfig>,
}

impl ModelVariantGrid {
    /// Cross product of depth (total layers, output included), successive
    /// width shrink factor, and optimizer. Each optimizer gets its own learning
    /// rate so the variants train to comparable loss.
    pub fn new(
        base: &TrainingConfig,
        first_width: usize,
        depths: &[usize],
        shrink: &[f64],
        optimizers: &[(OptimizerKind, f64)],
    ) -> Result<Self> {
        let mut variants = Vec::new();
        for &depth in depths {
            if depth < 2 {
                return Err(TriageError::invalid("network depth must be >= 2 layers"));
            }
            for &factor in shrink {
                let hidden: Vec<usize> = (0..depth - 1)
                    .map(|l| ((first_width as f64) * factor.powi(l as i32)).round().max(1.0) as usize)
                    .collect();
                for &(optimizer, learning_rate) in optimizers {
                    variants.push(TrainingConfig {
                        kind: ModelKind::FeedForward,
                        hidden_sizes: hidden.clone(),
                        optimizer,
                        learning_rate,
                        ..base.clone()
                    });
                }
            }
        }
        if variants.len() < 2 {
            return Err(TriageError::invalid("a variant grid needs at least 2 variants"));
        }
        Ok(ModelVariantGrid { variants })
    }

    /// Depth {3, 4, 5}, width halving {1/2, 1/4}, plain vs adaptive-moment steps.
    pub fn standard(base: &TrainingConfig, first_width: usize, sgd_lr: f64, adam_lr: f64) -> Self {
        ModelVariantGrid::new(
            base,
            first_width,
            &[3, 4, 5],
            &[0.5, 0.25],
            &[(OptimizerKind::Sgd, sgd_lr), (OptimizerKind::Adam, adam_lr)],
        )
        .expect("standard grid is non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_linear_synthetic;

    fn leafy(cfg: TrainingConfig) -> TrainingConfig {
        TrainingConfig {
            min_samples_leaf: 1,
            ..cfg
        }
    }

    fn line(n: usize, slope: f64) -> Dataset {
        // x on a symmetric grid so the standardized feature has mean 0
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64])
            .collect();
        let y = rows.iter().map(|r| slope * r[0]).collect();
        Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    /// Ordinary least squares via the normal equations (Gauss-Jordan on the
    /// augmented system, intercept included).
    fn ols(ds: &Dataset) -> Vec<f64> {
        let d = ds.dim() + 1;
        let mut a = vec![vec![0.0; d + 1]; d];
        for i in 0..ds.len() {
            let mut x = ds.row(i).to_vec();
            x.push(1.0);
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += x[r] * x[c];
                }
                a[r][d] += x[r] * ds.targets()[i];
            }
        }
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let div = a[col][col];
            for c in 0..=d {
                a[col][c] /= div;
            }
            for r in 0..d {
                if r != col {
                    let f = a[r][col];
                    for c in 0..=d {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        a.iter().map(|row| row[d]).collect()
    }

    #[test]
    fn linear_converges_to_slope() {
        let ds = line(50, 2.0);
        let w_ols = ols(&ds);
        let run = fit_linear_sgd(&ds, &TrainingConfig::linear(200, 0.1, 1)).unwrap();
        let w = run.predict_row(200, &[1.0]).unwrap() - run.predict_row(200, &[0.0]).unwrap();
        assert!((w - w_ols[0]).abs() < 1e-3);
        assert!((w - 2.0).abs() < 1e-3);
    }

    #[test]
    fn linear_matches_ols_on_full_rank_data() {
        let raw = generate_linear_synthetic(300, &[1.5, -2.0, 0.7], 0.0, 4).unwrap();
        let p = crate::dataset::standardize_fit(&raw).unwrap();
        let ds = crate::dataset::standardize_apply(&raw, &p).unwrap();
        let w_ols = ols(&ds);
        let run = fit_linear_sgd(&ds, &TrainingConfig::linear(2000, 0.2, 1)).unwrap();
        let e = run.checkpoints();
        let b = run.predict_row(e, &[0.0, 0.0, 0.0]).unwrap();
        for j in 0..3 {
            let mut x = [0.0; 3];
            x[j] = 1.0;
            let w = run.predict_row(e, &x).unwrap() - b;
            assert!((w - w_ols[j]).abs() < 1e-3, "w{j}={w} ols={}", w_ols[j]);
        }
        assert!((b - w_ols[3]).abs() < 1e-3);
    }

    #[test]
    fn single_epoch_is_rejected() {
        let ds = line(10, 1.0);
        assert!(fit_linear_sgd(&ds, &TrainingConfig::linear(1, 0.1, 1)).is_err());
        assert!(fit_gbdt(&ds, &TrainingConfig::gbdt(1, 0.1, 3, 1)).is_err());
    }

    #[test]
    fn linear_prediction_is_affine() {
        let ds = line(20, 3.0);
        let run = fit_linear_sgd(&ds, &TrainingConfig::linear(5, 0.1, 1)).unwrap();
        let c = run.predict_row(5, &[0.0]).unwrap();
        let a = run.predict_row(5, &[0.7]).unwrap() - c;
        let b = run.predict_row(5, &[1.4]).unwrap() - c;
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn fits_are_deterministic() {
        let ds = generate_linear_synthetic(200, &[1.0, -1.0], 0.2, 9).unwrap();
        for cfg in [
            TrainingConfig::linear(10, 0.1, 3),
            TrainingConfig::gbdt(10, 0.3, 3, 3),
            TrainingConfig::feedforward(vec![8, 4], 10, 0.01, 3),
        ] {
            assert_eq!(fit(&ds, &cfg).unwrap(), fit(&ds, &cfg).unwrap());
        }
    }

    #[test]
    fn gbdt_zero_residual_stage_leaves_predictions_unchanged() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let ds = Dataset::from_parts(x.clone(), vec![1.0, 1.0, 5.0, 5.0]).unwrap();
        let run = fit_gbdt(&ds, &leafy(TrainingConfig::gbdt(2, 1.0, 2, 0))).unwrap();
        assert_eq!(run.predict(1, &x).unwrap(), run.predict(2, &x).unwrap());
        assert_eq!(run.predict(1, &x).unwrap(), ds.targets());
    }

    #[test]
    fn gbdt_first_checkpoint_is_base_plus_one_tree() {
        let ds = generate_linear_synthetic(100, &[2.0, 1.0], 0.1, 2).unwrap();
        let lr = 0.3;
        let run = fit_gbdt(&ds, &TrainingConfig::gbdt(5, lr, 2, 0)).unwrap();
        let mean = ds.targets().iter().sum::<f64>() / ds.len() as f64;
        let resid: Vec<f64> = ds.targets().iter().map(|y| y - mean).collect();
        let tree = gbdt::fit_tree(&ds, &resid, 2, 1);
        for i in 0..ds.len() {
            let expect = mean + lr * tree.predict(ds.row(i));
            assert_eq!(run.predict_row(1, ds.row(i)).unwrap(), expect);
        }
    }

    #[test]
    fn gbdt_tiny_learning_rate_starts_at_mean() {
        let ds = generate_linear_synthetic(50, &[2.0], 0.1, 2).unwrap();
        let run = fit_gbdt(&ds, &TrainingConfig::gbdt(2, 1e-12, 3, 0)).unwrap();
        let mean = ds.targets().iter().sum::<f64>() / ds.len() as f64;
        for p in run.predict(1, ds.features()).unwrap() {
            assert!((p - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_checks_index_and_dimension() {
        let ds = line(10, 1.0);
        let run = fit_linear_sgd(&ds, &TrainingConfig::linear(3, 0.1, 1)).unwrap();
        assert!(matches!(
            run.predict(0, ds.features()),
            Err(TriageError::CheckpointOutOfRange { .. })
        ));
        assert!(matches!(
            run.predict(4, ds.features()),
            Err(TriageError::CheckpointOutOfRange { .. })
        ));
        let wide = Matrix::zeros(2, 3);
        assert!(matches!(
            run.predict(1, &wide),
            Err(TriageError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn last_checkpoint_is_the_final_model() {
        let ds = generate_linear_synthetic(60, &[1.0, 2.0], 0.1, 8).unwrap();
        let run = fit_gbdt(&ds, &TrainingConfig::gbdt(7, 0.2, 2, 0)).unwrap();
        assert_eq!(
            run.predict(7, ds.features()).unwrap(),
            run.predict_final(ds.features()).unwrap()
        );
    }

    #[test]
    fn truncation_does_not_change_earlier_checkpoints() {
        let ds = generate_linear_synthetic(80, &[1.0, -2.0], 0.3, 5).unwrap();
        for cfg in [
            TrainingConfig::linear(8, 0.1, 3),
            TrainingConfig::gbdt(8, 0.3, 3, 3),
            TrainingConfig::feedforward(vec![6], 8, 0.01, 3),
        ] {
            let run = fit(&ds, &cfg).unwrap();
            for e in 1..=run.checkpoints() {
                let t = run.truncated(e).unwrap();
                assert_eq!(t.checkpoints(), e);
                assert_eq!(t.predict(e, ds.features()).unwrap(), run.predict(e, ds.features()).unwrap());
            }
        }
    }

    #[test]
    fn checkpoint_stride_thins_checkpoints() {
        let ds = generate_linear_synthetic(50, &[1.0], 0.1, 1).unwrap();
        let mut cfg = TrainingConfig::gbdt(10, 0.3, 2, 0);
        cfg.checkpoint_stride = 5;
        let run = fit_gbdt(&ds, &cfg).unwrap();
        assert_eq!(run.checkpoints(), 2);
        let full = fit_gbdt(&ds, &TrainingConfig::gbdt(10, 0.3, 2, 0)).unwrap();
        assert_eq!(run.predict(1, ds.features()).unwrap(), full.predict(5, ds.features()).unwrap());
        let mut lin = TrainingConfig::linear(10, 0.1, 0);
        lin.checkpoint_stride = 3;
        assert_eq!(fit_linear_sgd(&ds, &lin).unwrap().checkpoints(), 3);
    }

    #[test]
    fn feedforward_fits_noiseless_linear_data() {
        let ds = line(40, 1.5);
        let mut cfg = TrainingConfig::feedforward(vec![1], 500, 0.05, 11);
        cfg.optimizer = OptimizerKind::Adam;
        let run = fit_feedforward(&ds, &cfg).unwrap();
        let r = final_residuals(&run, &ds).unwrap();
        let mse = r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64;
        assert!(mse < 1e-2, "mse {mse}");
    }

    #[test]
    fn early_stopping_truncates_checkpoints() {
        let ds = generate_linear_synthetic(200, &[1.0, 1.0], 1.0, 3).unwrap();
        let mut cfg = TrainingConfig::feedforward(vec![16], 400, 0.05, 1);
        cfg.early_stop_patience = Some(3);
        let run = fit_feedforward(&ds, &cfg).unwrap();
        assert!(run.checkpoints() >= 2 && run.checkpoints() < 400);
    }

    #[test]
    fn divergence_reports_epoch() {
        let ds = line(20, 100.0);
        let cfg = TrainingConfig::linear(500, 50.0, 0);
        match fit_linear_sgd(&ds, &cfg) {
            Err(TriageError::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn residuals_of_mean_model() {
        // Any single-leaf model predicts the mean; targets [0, 2] give [-1, 1].
        let x = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let ds = Dataset::from_parts(x, vec![0.0, 2.0]).unwrap();
        let run = fit_gbdt(&ds, &TrainingConfig::gbdt(2, 0.5, 1, 0)).unwrap();
        assert_eq!(final_residuals(&run, &ds).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn perfect_fit_has_zero_residuals_and_losses() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let ds = Dataset::from_parts(x, vec![1.0, 1.0, 5.0, 5.0]).unwrap();
        let run = fit_gbdt(&ds, &leafy(TrainingConfig::gbdt(3, 1.0, 2, 0))).unwrap();
        assert!(final_residuals(&run, &ds).unwrap().iter().all(|&r| r == 0.0));
        let lt = loss_trajectory(&run, &ds).unwrap();
        assert_eq!((lt.rows(), lt.cols()), (4, 3));
        assert!(lt.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn loss_trajectory_matches_recomputation() {
        let ds = generate_linear_synthetic(30, &[1.0, 0.5], 0.3, 2).unwrap();
        let run = fit(&ds, &TrainingConfig::feedforward(vec![4], 6, 0.02, 2)).unwrap();
        let lt = loss_trajectory(&run, &ds).unwrap();
        assert_eq!((lt.rows(), lt.cols()), (30, 6));
        for e in 1..=6 {
            for i in 0..ds.len() {
                let r = ds.targets()[i] - run.predict_row(e, ds.row(i)).unwrap();
                assert_eq!(lt.get(i, e - 1), r * r);
            }
        }
    }

    #[test]
    fn standard_grid_has_twelve_variants() {
        let base = TrainingConfig::default_for(ModelKind::FeedForward, 0);
        let grid = ModelVariantGrid::standard(&base, 64, 0.05, 0.01);
        assert_eq!(grid.variants.len(), 12);
        assert!(grid.variants.iter().any(|v| v.hidden_sizes == vec![64, 32, 16, 8]));
        assert!(grid.variants.iter().any(|v| v.hidden_sizes == vec![64, 16]));
    }
}
