//! Validity and consistency diagnostics: PIT uniformity, calibration curves,
//! interval coverage, mean CRPS and rank correlation between scorers.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::conformal::{cpd_quantile, crps, triage_score, ConformalCalibrator, Tau};
use crate::dataset::Dataset;
use crate::error::{Result, TriageError};
use crate::io::CsvWriter;

/// Point predictions and `sigma` for a batch of inputs, sharing one calibrator.
#[derive(Debug, Clone)]
pub struct CpdBatch<'a> {
    calibrator: &'a ConformalCalibrator,
    point: Vec<f64>,
    sigma: Vec<f64>,
}

impl<'a> CpdBatch<'a> {
    /// `sigma` is taken from the calibrator's normalizer at each row of `test`.
    pub fn new(calibrator: &'a ConformalCalibrator, predictions: Vec<f64>, test: &Dataset) -> Result<Self> {
        if predictions.len() != test.len() {
            return Err(TriageError::DimensionMismatch {
                expected: test.len(),
                got: predictions.len(),
            });
        }
        let est = calibrator
            .sigma_estimator()
            .ok_or_else(|| TriageError::invalid("calibrator has no sigma estimator"))?;
        if est.index().dim() != test.dim() {
            return Err(TriageError::DimensionMismatch {
                expected: est.index().dim(),
                got: test.dim(),
            });
        }
        let sigma = (0..test.len()).into_par_iter().map(|i| est.sigma(test.row(i))).collect();
        Ok(CpdBatch {
            calibrator,
            point: predictions,
            sigma,
        })
    }

    pub fn from_parts(calibrator: &'a ConformalCalibrator, point: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if point.len() != sigma.len() {
            return Err(TriageError::DimensionMismatch {
                expected: point.len(),
                got: sigma.len(),
            });
        }
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(TriageError::invalid("sigma must be positive"));
        }
        Ok(CpdBatch {
            calibrator,
            point,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.point.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point.is_empty()
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(TriageError::DimensionMismatch {
                expected: self.len(),
                got: y.len(),
            });
        }
        if y.is_empty() {
            return Err(TriageError::Empty("test set"));
        }
        Ok(())
    }
}

/// CPD value at each held-out label with an independent seeded `tau` per point.
pub fn pit_values(batch: &CpdBatch<'_>, y: &[f64], tau_seed: u64) -> Result<Vec<f64>> {
    batch.check(y)?;
    let tau = Tau::SeededUniform(tau_seed);
    Ok((0..y.len())
        .into_par_iter()
        .map(|i| triage_score(batch.calibrator, y[i], batch.point[i], batch.sigma[i], tau.value(i, 0)))
        .collect())
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `values`
/// and `U[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(TriageError::Empty("KS input"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    pub bin_edges: Vec<f64>,
    /// Upper bin edges `1/B, .., 1`.
    pub nominal: Vec<f64>,
    /// Fraction of PIT values `<=` each nominal level.
    pub empirical: Vec<f64>,
    pub max_abs_deviation: f64,
}

impl CalibrationCurve {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = CsvWriter::create(path, &["nominal", "empirical"])?;
        for (n, e) in self.nominal.iter().zip(&self.empirical) {
            w.row(&[n.to_string(), e.to_string()])?;
        }
        w.finish()
    }
}

/// Default number of calibration-curve bins.
pub const DEFAULT_BINS: usize = 20;

/// Empirical CDF of the PIT values at `bins` equispaced levels.
pub fn calibration_curve(pits: &[f64], bins: usize) -> Result<CalibrationCurve> {
    if pits.is_empty() {
        return Err(TriageError::Empty("PIT values"));
    }
    if bins < 2 {
        return Err(TriageError::invalid("need at least 2 bins"));
    }
    let mut sorted = pits.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|j| j as f64 / bins as f64).collect();
    let nominal = bin_edges[1..].to_vec();
    let empirical: Vec<f64> = nominal
        .iter()
        .map(|&level| sorted.partition_point(|&p| p <= level) as f64 / n)
        .collect();
    let max_abs_deviation = nominal
        .iter()
        .zip(&empirical)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationCurve {
        bin_edges,
        nominal,
        empirical,
        max_abs_deviation,
    })
}

/// Fraction of labels inside `[quantile(lower), quantile(upper)]`.
pub fn coverage(batch: &CpdBatch<'_>, y: &[f64], lower: f64, upper: f64) -> Result<f64> {
    batch.check(y)?;
    if !(0.0 < lower && lower < upper && upper < 1.0) {
        return Err(TriageError::invalid(format!(
            "need 0 < lower < upper < 1, got {lower}, {upper}"
        )));
    }
    let mut hits = 0usize;
    for i in 0..y.len() {
        let lo = cpd_quantile(batch.calibrator, batch.point[i], batch.sigma[i], lower)?;
        let hi = cpd_quantile(batch.calibrator, batch.point[i], batch.sigma[i], upper)?;
        if lo <= y[i] && y[i] <= hi {
            hits += 1;
        }
    }
    Ok(hits as f64 / y.len() as f64)
}

/// Mean CRPS over the batch, summed in index order.
pub fn crps_mean(batch: &CpdBatch<'_>, y: &[f64]) -> Result<f64> {
    batch.check(y)?;
    let per: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| crps(batch.calibrator, batch.point[i], batch.sigma[i], y[i]))
        .collect();
    Ok(per.iter().sum::<f64>() / y.len() as f64)
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation. `Ok(None)` when either input has constant ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(TriageError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(TriageError::invalid("spearman needs at least 2 points"));
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMatrix {
    pub labels: Vec<String>,
    /// Pairwise Spearman; `NaN` marks an undefined correlation.
    pub rho: Vec<Vec<f64>>,
    /// Mean over defined off-diagonal entries.
    pub mean_off_diagonal: f64,
}

impl ConsistencyMatrix {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = vec!["label"];
        header.extend(self.labels.iter().map(String::as_str));
        let mut w = CsvWriter::create(path, &header)?;
        for (l, row) in self.labels.iter().zip(&self.rho) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.row(&rec)?;
        }
        w.finish()
    }
}

pub fn consistency_matrix(score_sets: &[Vec<f64>], labels: &[String]) -> Result<ConsistencyMatrix> {
    if score_sets.len() < 2 {
        return Err(TriageError::invalid("need at least 2 score sets"));
    }
    if labels.len() != score_sets.len() {
        return Err(TriageError::DimensionMismatch {
            expected: score_sets.len(),
            got: labels.len(),
        });
    }
    let m = score_sets.len();
    let mut rho = vec![vec![1.0; m]; m];
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..m {
        for j in i + 1..m {
            let r = spearman(&score_sets[i], &score_sets[j])?.unwrap_or(f64::NAN);
            rho[i][j] = r;
            rho[j][i] = r;
            if r.is_finite() {
                sum += 2.0 * r;
                count += 2;
            }
        }
    }
    Ok(ConsistencyMatrix {
        labels: labels.to_vec(),
        rho,
        mean_off_diagonal: if count > 0 { sum / count as f64 } else { f64::NAN },
    })
}

/// Headline validity metrics of one calibrated model on held-out data.
#[derive(Debug, Clone, PartialEq)]
pub struct ValiditySummary {
    pub n_test: usize,
    pub q: usize,
    pub ks_statistic: f64,
    pub calibration_max_deviation: f64,
    pub coverage: f64,
    pub coverage_levels: (f64, f64),
    pub mean_crps: f64,
}

impl ValiditySummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_test: {}", self.n_test);
        let _ = writeln!(s, "q: {}", self.q);
        let _ = writeln!(s, "ks_statistic: {}", self.ks_statistic);
        let _ = writeln!(s, "calibration_max_deviation: {}", self.calibration_max_deviation);
        let _ = writeln!(s, "coverage_lower: {}", self.coverage_levels.0);
        let _ = writeln!(s, "coverage_upper: {}", self.coverage_levels.1);
        let _ = writeln!(s, "coverage: {}", self.coverage);
        let _ = writeln!(s, "mean_crps: {}", self.mean_crps);
        s
    }
}

/// PIT, calibration curve, central-interval coverage and CRPS in one pass.
pub fn validity(
    batch: &CpdBatch<'_>,
    y: &[f64],
    tau_seed: u64,
    bins: usize,
    levels: (f64, f64),
) -> Result<(ValiditySummary, CalibrationCurve, Vec<f64>)> {
    let pits = pit_values(batch, y, tau_seed)?;
    let curve = calibration_curve(&pits, bins)?;
    let summary = ValiditySummary {
        n_test: y.len(),
        q: batch.calibrator.q(),
        ks_statistic: ks_uniform(&pits)?,
        calibration_max_deviation: curve.max_abs_deviation,
        coverage: coverage(batch, y, levels.0, levels.1)?,
        coverage_levels: levels,
        mean_crps: crps_mean(batch, y)?,
    };
    Ok((summary, curve, pits))
}
