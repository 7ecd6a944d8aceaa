//! Split conformal predictive system.
//!
//! A calibration set yields conformity scores `alpha_i = (y_i - f(x_i)) / sigma(x_i)`
//! where `sigma` is the mean absolute calibration residual of the `k` nearest
//! calibration points. For a new input the candidate labels
//! `S_(i) = f(x) + alpha_(i) * sigma(x)` define a randomized predictive
//! distribution `Q(y, tau)` that is a step function in `y` with `q + 1` levels.

mod knn;

use std::sync::Arc;

pub use knn::KnnIndex;

use crate::dataset::Dataset;
use crate::error::{Result, TriageError};

/// Default neighbour count of the residual normalizer.
pub const DEFAULT_K: usize = 10;
/// Default lower bound on `sigma(x)`, in standardized target units.
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

/// Normalized signed residual `(y - f_x) / sigma_x`.
pub fn conformity(y: f64, f_x: f64, sigma_x: f64) -> Result<f64> {
    if !(sigma_x > 0.0) {
        return Err(TriageError::invalid(format!("sigma must be positive, got {sigma_x}")));
    }
    Ok((y - f_x) / sigma_x)
}

/// Options shared by every calibrator fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalConfig {
    pub k: usize,
    pub sigma_floor: f64,
    /// Score each calibration point with `sigma` computed from its neighbours
    /// excluding itself, the same way an unseen point is scored.
    pub leave_one_out: bool,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        ConformalConfig {
            k: DEFAULT_K,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            leave_one_out: true,
        }
    }
}

impl ConformalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(TriageError::invalid("k must be >= 1"));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(TriageError::invalid("sigma floor must be positive"));
        }
        Ok(())
    }
}

/// kNN estimate of the residual magnitude around `x`.
#[derive(Debug, Clone)]
pub struct SigmaEstimator {
    k: usize,
    index: Arc<KnnIndex>,
    abs_residuals: Vec<f64>,
    floor: f64,
}

impl SigmaEstimator {
    /// `k` is clipped to the number of calibration points.
    pub fn new(index: Arc<KnnIndex>, abs_residuals: Vec<f64>, k: usize, floor: f64) -> Result<Self> {
        if abs_residuals.len() != index.len() {
            return Err(TriageError::DimensionMismatch {
                expected: index.len(),
                got: abs_residuals.len(),
            });
        }
        if abs_residuals.is_empty() {
            return Err(TriageError::Empty("calibration set"));
        }
        if k == 0 {
            return Err(TriageError::invalid("k must be >= 1"));
        }
        if !(floor > 0.0) {
            return Err(TriageError::invalid("sigma floor must be positive"));
        }
        Ok(SigmaEstimator {
            k: k.min(abs_residuals.len()),
            index,
            abs_residuals,
            floor,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn index(&self) -> &Arc<KnnIndex> {
        &self.index
    }

    pub fn abs_residuals(&self) -> &[f64] {
        &self.abs_residuals
    }

    /// Floored mean of the residuals at `neighbors`.
    pub fn sigma_from_neighbors(&self, neighbors: &[usize]) -> f64 {
        if neighbors.is_empty() {
            return self.floor;
        }
        let mean =
            neighbors.iter().map(|&i| self.abs_residuals[i]).sum::<f64>() / neighbors.len() as f64;
        mean.max(self.floor)
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        self.sigma_from_neighbors(&self.index.nearest(x, self.k, None))
    }

    /// `sigma` at calibration point `i` computed without point `i`.
    pub fn sigma_leave_one_out(&self, i: usize) -> f64 {
        if self.index.len() < 2 {
            return self.sigma(self.index.points().row(i));
        }
        let k = self.k.min(self.index.len() - 1);
        self.sigma_from_neighbors(&self.index.nearest(self.index.points().row(i), k, Some(i)))
    }
}

fn abs_residuals(cal: &Dataset, cal_predictions: &[f64]) -> Result<Vec<f64>> {
    if cal_predictions.len() != cal.len() {
        return Err(TriageError::DimensionMismatch {
            expected: cal.len(),
            got: cal_predictions.len(),
        });
    }
    if cal_predictions.iter().any(|p| !p.is_finite()) {
        return Err(TriageError::NonFinite("calibration prediction"));
    }
    Ok(cal
        .targets()
        .iter()
        .zip(cal_predictions)
        .map(|(y, p)| (y - p).abs())
        .collect())
}

/// Fits the kNN residual normalizer on the calibration set.
pub fn fit_sigma(cal: &Dataset, cal_predictions: &[f64], k: usize, sigma_floor: f64) -> Result<SigmaEstimator> {
    let res = abs_residuals(cal, cal_predictions)?;
    let index = Arc::new(KnnIndex::new(cal.features().clone()));
    SigmaEstimator::new(index, res, k, sigma_floor)
}

/// Sorted conformity scores of a calibration set plus the normalizer that
/// produced them.
#[derive(Debug, Clone)]
pub struct ConformalCalibrator {
    sorted_alphas: Vec<f64>,
    /// `prefix[i] = alpha_(1) + .. + alpha_(i)`
    prefix: Vec<f64>,
    /// `sum_{i,j} |alpha_i - alpha_j|`
    pair_spread: f64,
    sigma: Option<SigmaEstimator>,
    checkpoint: Option<usize>,
}

impl ConformalCalibrator {
    /// Calibrator from raw conformity scores (sorted here, stably).
    pub fn from_alphas(mut alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(TriageError::Empty("calibration set"));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(TriageError::NonFinite("conformity score"));
        }
        alphas.sort_by(f64::total_cmp);
        let q = alphas.len();
        let mut prefix = Vec::with_capacity(q + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &a in &alphas {
            acc += a;
            prefix.push(acc);
        }
        let pair_spread = 2.0
            * alphas
                .iter()
                .enumerate()
                .map(|(i, a)| (2.0 * (i as f64 + 1.0) - q as f64 - 1.0) * a)
                .sum::<f64>();
        Ok(ConformalCalibrator {
            sorted_alphas: alphas,
            prefix,
            pair_spread,
            sigma: None,
            checkpoint: None,
        })
    }

    /// Calibrator from signed residuals and the `sigma` at each calibration point.
    pub fn from_residuals(residuals: &[f64], sigmas: &[f64]) -> Result<Self> {
        if residuals.len() != sigmas.len() {
            return Err(TriageError::DimensionMismatch {
                expected: residuals.len(),
                got: sigmas.len(),
            });
        }
        let alphas = residuals
            .iter()
            .zip(sigmas)
            .map(|(&r, &s)| conformity(r, 0.0, s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_alphas(alphas)
    }

    /// Calibrator whose scores use a pre-built normalizer.
    pub fn with_sigma(cal: &Dataset, cal_predictions: &[f64], sigma: SigmaEstimator, leave_one_out: bool) -> Result<Self> {
        if sigma.index().len() != cal.len() {
            return Err(TriageError::DimensionMismatch {
                expected: cal.len(),
                got: sigma.index().len(),
            });
        }
        let residuals: Vec<f64> = cal
            .targets()
            .iter()
            .zip(cal_predictions)
            .map(|(y, p)| y - p)
            .collect();
        let sigmas: Vec<f64> = (0..cal.len())
            .map(|i| {
                if leave_one_out {
                    sigma.sigma_leave_one_out(i)
                } else {
                    sigma.sigma(cal.row(i))
                }
            })
            .collect();
        let mut c = Self::from_residuals(&residuals, &sigmas)?;
        c.sigma = Some(sigma);
        Ok(c)
    }

    pub fn with_checkpoint(mut self, e: usize) -> Self {
        self.checkpoint = Some(e);
        self
    }

    pub fn checkpoint(&self) -> Option<usize> {
        self.checkpoint
    }

    pub fn sorted_alphas(&self) -> &[f64] {
        &self.sorted_alphas
    }

    /// Number of calibration points `q`.
    pub fn q(&self) -> usize {
        self.sorted_alphas.len()
    }

    pub fn sigma_estimator(&self) -> Option<&SigmaEstimator> {
        self.sigma.as_ref()
    }

    /// `sigma(x)` from the attached normalizer.
    pub fn sigma(&self, x: &[f64]) -> Result<f64> {
        self.sigma
            .as_ref()
            .map(|s| s.sigma(x))
            .ok_or_else(|| TriageError::invalid("calibrator has no sigma estimator"))
    }

    /// Number of candidate labels strictly below `y` and equal to `y`.
    fn rank(&self, f_x: f64, sigma_x: f64, y: f64) -> (usize, usize) {
        // S_(i) is non-decreasing in alpha_(i) because rounding is monotone.
        let s = |a: f64| f_x + a * sigma_x;
        let below = self.sorted_alphas.partition_point(|&a| s(a) < y);
        let upto = self.sorted_alphas.partition_point(|&a| s(a) <= y);
        (below, upto - below)
    }
}

/// Fits sigma on the calibration set, scores every calibration point and
/// sorts the scores.
pub fn fit_calibrator(cal: &Dataset, cal_predictions: &[f64], cfg: &ConformalConfig) -> Result<ConformalCalibrator> {
    cfg.validate()?;
    let sigma = fit_sigma(cal, cal_predictions, cfg.k, cfg.sigma_floor)?;
    ConformalCalibrator::with_sigma(cal, cal_predictions, sigma, cfg.leave_one_out)
}

/// Randomization policy for the tie-breaking parameter `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Fixed(f64),
    /// Independent `U[0, 1]` draw per (point, checkpoint), derived from the seed.
    SeededUniform(u64),
}

impl Default for Tau {
    fn default() -> Self {
        Tau::Fixed(0.5)
    }
}

impl Tau {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Tau::Fixed(v) if !(0.0..=1.0).contains(&v) => {
                Err(TriageError::invalid(format!("tau must lie in [0, 1], got {v}")))
            }
            _ => Ok(()),
        }
    }

    /// Value used for point `point` at checkpoint `checkpoint`.
    pub fn value(&self, point: usize, checkpoint: usize) -> f64 {
        match *self {
            Tau::Fixed(v) => v,
            Tau::SeededUniform(seed) => {
                let label = format!("tau/{checkpoint}/{point}");
                let bits = crate::seed::derive(seed, &label) >> 11;
                bits as f64 / (1u64 << 53) as f64
            }
        }
    }
}

/// `Q(y_star, tau)`: the predictive distribution at `y_star`.
///
/// With `c` candidate labels strictly below `y_star` and `t` equal to it this
/// is `(c + (t + 1) * tau) / (q + 1)`, which covers both the open-interval case
/// (`t = 0`) and the tie case.
pub fn cpd_eval(c: &ConformalCalibrator, f_x: f64, sigma_x: f64, y_star: f64, tau: f64) -> f64 {
    let (below, ties) = c.rank(f_x, sigma_x, y_star);
    (below as f64 + (ties as f64 + 1.0) * tau) / (c.q() as f64 + 1.0)
}

/// CPD evaluated at the sample's own label. Values near 1 mean the model
/// predicts below the label (under-estimation), near 0 above it.
pub fn triage_score(c: &ConformalCalibrator, y_true: f64, f_x: f64, sigma_x: f64, tau: f64) -> f64 {
    cpd_eval(c, f_x, sigma_x, y_true, tau)
}

/// `f_x + alpha_(j) * sigma_x` with `j = ceil(level * (q + 1))` clipped to `[1, q]`.
pub fn cpd_quantile(c: &ConformalCalibrator, f_x: f64, sigma_x: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(TriageError::invalid(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let q = c.q();
    let j = ((level * (q as f64 + 1.0)).ceil() as usize).clamp(1, q);
    Ok(f_x + c.sorted_alphas[j - 1] * sigma_x)
}

/// CRPS of the ensemble `{S_(1), .., S_(q)}` against `y_true` in energy form:
/// `mean |S_i - y| - sum_{i,j} |S_i - S_j| / (2 q^2)`.
pub fn crps(c: &ConformalCalibrator, f_x: f64, sigma_x: f64, y_true: f64) -> f64 {
    let q = c.q();
    let qf = q as f64;
    let (below, _) = c.rank(f_x, sigma_x, y_true);
    let sum_below = below as f64 * f_x + sigma_x * c.prefix[below];
    let sum_above = (q - below) as f64 * f_x + sigma_x * (c.prefix[q] - c.prefix[below]);
    let abs_dev = (below as f64 * y_true - sum_below) + (sum_above - (q - below) as f64 * y_true);
    let value = abs_dev / qf - sigma_x * c.pair_spread / (2.0 * qf * qf);
    value.max(0.0)
}
