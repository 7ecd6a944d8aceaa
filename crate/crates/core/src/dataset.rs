//! Tabular regression datasets: CSV I/O, seeded splits, standardization and
//! synthetic generation/contamination.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TriageError};
use crate::matrix::Matrix;
use crate::seed;

/// Name of the optional identifier column recognised by [`load_csv`].
pub const ID_COLUMN: &str = "id";

/// Feature matrix, targets, and row/column metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    targets: Vec<f64>,
    feature_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shapes and finiteness.
    pub fn new(
        features: Matrix,
        targets: Vec<f64>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if features.cols() == 0 {
            return Err(TriageError::NoFeatureColumns);
        }
        if features.rows() == 0 {
            return Err(TriageError::Empty("dataset has no rows"));
        }
        if targets.len() != features.rows() {
            return Err(TriageError::DimensionMismatch {
                expected: features.rows(),
                got: targets.len(),
            });
        }
        if sample_ids.len() != features.rows() {
            return Err(TriageError::DimensionMismatch {
                expected: features.rows(),
                got: sample_ids.len(),
            });
        }
        if feature_names.len() != features.cols() {
            return Err(TriageError::DimensionMismatch {
                expected: features.cols(),
                got: feature_names.len(),
            });
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(TriageError::NonFinite("feature value"));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(TriageError::NonFinite("target value"));
        }
        Ok(Dataset {
            features,
            targets,
            feature_names,
            sample_ids,
        })
    }

    /// Dataset with default names (`x0`, `x1`, ...) and ids (`0`, `1`, ...).
    pub fn from_parts(features: Matrix, targets: Vec<f64>) -> Result<Self> {
        let names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        let ids = (0..features.rows()).map(|i| i.to_string()).collect();
        Dataset::new(features, targets, names, ids)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// Rows whose sample id is in `ids`, in dataset order.
    pub fn subset_by_ids(&self, ids: &HashSet<String>) -> Dataset {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| ids.contains(&self.sample_ids[i]))
            .collect();
        self.subset(&idx)
    }

    /// Columns `idx`, in that order.
    pub fn select_features(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(TriageError::NoFeatureColumns);
        }
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.dim()) {
            return Err(TriageError::invalid(format!("feature index {bad} out of range")));
        }
        Ok(Dataset {
            features: self.features.select_columns(idx),
            targets: self.targets.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            sample_ids: self.sample_ids.clone(),
        })
    }

    /// Same rows and features with replaced targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            targets,
            self.feature_names.clone(),
            self.sample_ids.clone(),
        )
    }

    /// Row-wise concatenation. Sample ids of `other` are kept as-is.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(TriageError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let features = Matrix::from_vec(self.len() + other.len(), self.dim(), data)?;
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        let mut ids = self.sample_ids.clone();
        ids.extend(other.sample_ids.iter().cloned());
        Dataset::new(features, targets, self.feature_names.clone(), ids)
    }

    /// Prefixes every sample id, e.g. to keep ids unique across a union.
    pub fn with_id_prefix(&self, prefix: &str) -> Dataset {
        let mut out = self.clone();
        for id in &mut out.sample_ids {
            *id = format!("{prefix}{id}");
        }
        out
    }
}

/// Reads a headered CSV. All non-target columns (except an optional `id`
/// column) become features, in header order.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TriageError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| TriageError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| TriageError::MissingColumn(target_column.to_string()))?;
    let id_idx = header
        .iter()
        .position(|h| h == ID_COLUMN)
        .filter(|&i| i != target_idx);
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != target_idx && Some(i) != id_idx)
        .collect();
    if feature_idx.is_empty() {
        return Err(TriageError::NoFeatureColumns);
    }

    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut ids = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TriageError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(TriageError::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let cell = |col: usize| -> Result<f64> {
            let raw = &record[col];
            let v: f64 = raw.parse().map_err(|_| TriageError::Parse {
                row,
                column: header[col].clone(),
                message: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(TriageError::Parse {
                    row,
                    column: header[col].clone(),
                    message: format!("'{raw}' is not finite"),
                });
            }
            Ok(v)
        };
        for &j in &feature_idx {
            data.push(cell(j)?);
        }
        targets.push(cell(target_idx)?);
        ids.push(match id_idx {
            Some(i) => record[i].to_string(),
            None => row.to_string(),
        });
    }
    if targets.is_empty() {
        return Err(TriageError::Empty("CSV has no data rows"));
    }
    let features = Matrix::from_vec(targets.len(), feature_idx.len(), data)?;
    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    Dataset::new(features, targets, names, ids)
}

/// Writes `id`, the features, then `target_name`. Reals use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(ID_COLUMN);
    for name in &ds.feature_names {
        out.push(',');
        out.push_str(name);
    }
    out.push(',');
    out.push_str(target_name);
    out.push('\n');
    for i in 0..ds.len() {
        out.push_str(&ds.sample_ids[i]);
        for v in ds.row(i) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push(',');
        out.push_str(&ds.targets[i].to_string());
        out.push('\n');
    }
    let mut f = File::create(path).map_err(|e| TriageError::io(path, e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| TriageError::io(path, e))
}

/// Train/calibration/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub cal_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, cal: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            cal_fraction: cal,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_fraction, self.cal_fraction, self.test_fraction];
        if fr.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(TriageError::invalid("split fractions must lie in (0, 1)"));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(TriageError::invalid("split fractions must sum to 1"));
        }
        Ok(())
    }
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    idx
}

/// Seeded disjoint partition into (train, calibration, test). Calibration and
/// test sizes are `round(fraction * n)`; the remainder goes to train. Rows keep
/// their original relative order within each part.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let n = ds.len();
    let n_cal = (spec.cal_fraction * n as f64).round() as usize;
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    if n_cal == 0 || n_test == 0 || n_cal + n_test >= n {
        return Err(TriageError::invalid(format!(
            "split of {n} rows leaves an empty part"
        )));
    }
    let n_train = n - n_cal - n_test;
    let perm = shuffled_indices(n, spec.seed);
    let mut parts = [
        perm[..n_train].to_vec(),
        perm[n_train..n_train + n_cal].to_vec(),
        perm[n_train + n_cal..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok((ds.subset(&parts[0]), ds.subset(&parts[1]), ds.subset(&parts[2])))
}

/// Seeded two-way split; the second part has `round(second_fraction * n)` rows.
pub fn split_pair(ds: &Dataset, second_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(second_fraction > 0.0 && second_fraction < 1.0) {
        return Err(TriageError::invalid("split fraction must lie in (0, 1)"));
    }
    let n = ds.len();
    let n_second = (second_fraction * n as f64).round() as usize;
    if n_second == 0 || n_second >= n {
        return Err(TriageError::invalid(format!(
            "split of {n} rows leaves an empty part"
        )));
    }
    let perm = shuffled_indices(n, seed);
    let mut first = perm[..n - n_second].to_vec();
    let mut second = perm[n - n_second..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((ds.subset(&first), ds.subset(&second)))
}

/// Per-feature z-score and target min-max parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationParams {
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl StandardizationParams {
    /// Divisor of the target transform (1 for a constant target).
    pub fn target_scale(&self) -> f64 {
        let r = self.target_max - self.target_min;
        if r > 0.0 {
            r
        } else {
            1.0
        }
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.target_min) / self.target_scale()
    }

    pub fn invert_target(&self, y: f64) -> f64 {
        y * self.target_scale() + self.target_min
    }

    fn check_dim(&self, ds: &Dataset) -> Result<()> {
        if ds.dim() != self.feature_means.len() {
            return Err(TriageError::DimensionMismatch {
                expected: self.feature_means.len(),
                got: ds.dim(),
            });
        }
        Ok(())
    }

    fn map(&self, ds: &Dataset, fx: impl Fn(f64, usize) -> f64, fy: impl Fn(f64) -> f64) -> Result<Dataset> {
        self.check_dim(ds)?;
        let mut features = ds.features.clone();
        for i in 0..features.rows() {
            for (j, v) in features.row_mut(i).iter_mut().enumerate() {
                *v = fx(*v, j);
            }
        }
        Ok(Dataset {
            features,
            targets: ds.targets.iter().map(|&y| fy(y)).collect(),
            feature_names: ds.feature_names.clone(),
            sample_ids: ds.sample_ids.clone(),
        })
    }

    /// Inverse of [`standardize_apply`].
    pub fn invert(&self, ds: &Dataset) -> Result<Dataset> {
        self.map(
            ds,
            |v, j| v * self.feature_stds[j] + self.feature_means[j],
            |y| self.invert_target(y),
        )
    }
}

/// Fits standardization on the training rows only.
pub fn standardize_fit(train: &Dataset) -> Result<StandardizationParams> {
    if train.len() < 2 {
        return Err(TriageError::invalid("standardization needs at least 2 rows"));
    }
    let n = train.len() as f64;
    let d = train.dim();
    let mut means = vec![0.0; d];
    for row in train.features.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut vars = vec![0.0; d];
    for row in train.features.iter_rows() {
        for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = vars
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let (target_min, target_max) = train
        .targets
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    Ok(StandardizationParams {
        feature_means: means,
        feature_stds: stds,
        target_min,
        target_max,
    })
}

/// Z-scores features and maps targets to `(y - min) / (max - min)`.
pub fn standardize_apply(ds: &Dataset, p: &StandardizationParams) -> Result<Dataset> {
    p.map(
        ds,
        |v, j| (v - p.feature_means[j]) / p.feature_stds[j],
        |y| p.transform_target(y),
    )
}

/// Huber-style response contamination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    /// Fraction of rows to corrupt, in `[0, 0.5)`.
    pub epsilon: f64,
    /// Shift size in multiples of the clean target standard deviation.
    pub shift_magnitude: f64,
    pub sign: ShiftSign,
    pub seed: u64,
}

/// Direction of the additive contamination shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftSign {
    /// Independent fair coin per corrupted row.
    #[default]
    Random,
    Positive,
    Negative,
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, shift_magnitude: f64, seed: u64) -> Self {
        ContaminationSpec {
            epsilon,
            shift_magnitude,
            sign: ShiftSign::Random,
            seed,
        }
    }
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Shifts a seeded `floor(epsilon * n)`-subset of targets by
/// `±shift_magnitude * std(targets)`. Returns the new dataset and the mask of
/// shifted rows.
pub fn contaminate(ds: &Dataset, spec: &ContaminationSpec) -> Result<(Dataset, Vec<bool>)> {
    if !(0.0..0.5).contains(&spec.epsilon) {
        return Err(TriageError::invalid("contamination epsilon must lie in [0, 0.5)"));
    }
    let n = ds.len();
    let count = (spec.epsilon * n as f64).floor() as usize;
    let mut mask = vec![false; n];
    if count == 0 {
        return Ok((ds.clone(), mask));
    }
    let shift = spec.shift_magnitude * population_std(&ds.targets);
    let mut rng = seed::rng(spec.seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut targets = ds.targets.clone();
    for i in chosen {
        let sign = match spec.sign {
            ShiftSign::Random => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            ShiftSign::Positive => 1.0,
            ShiftSign::Negative => -1.0,
        };
        targets[i] += sign * shift;
        mask[i] = true;
    }
    Ok((ds.with_targets(targets)?, mask))
}

/// `y = X beta + N(0, noise_std^2)` with `X ~ U[0, 1]^d`.
pub fn generate_linear_synthetic(
    n: usize,
    coefficients: &[f64],
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    let d = coefficients.len();
    if n == 0 || d == 0 {
        return Err(TriageError::invalid("synthetic data needs n >= 1 and d >= 1"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(TriageError::invalid("noise_std must be finite and >= 0"));
    }
    let mut rng = seed::rng(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..n {
        let mut y = 0.0;
        for &b in coefficients {
            let x: f64 = rng.random();
            y += b * x;
            data.push(x);
        }
        y += noise_std * normal.sample(&mut rng);
        targets.push(y);
    }
    Dataset::from_parts(Matrix::from_vec(n, d, data)?, targets)
}
