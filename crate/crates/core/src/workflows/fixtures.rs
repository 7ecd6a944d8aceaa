//! Synthetic train/cal/test fixtures for the workflows and their tests.

use rand::Rng;

use crate::dataset::{
    contaminate, generate_linear_synthetic, standardize_apply, standardize_fit, ContaminationSpec, Dataset,
    ShiftSign, StandardizationParams,
};
use crate::error::{Result, TriageError};
use crate::seed;

/// Standardized splits (parameters fitted on `train`) plus a mask over
/// `train` marking corrupted or shifted rows.
#[derive(Debug, Clone)]
pub struct FixtureData {
    pub train: Dataset,
    pub cal: Dataset,
    pub test: Dataset,
    pub mask: Vec<bool>,
    pub params: StandardizationParams,
}

fn finish(train: Dataset, cal: Dataset, test: Dataset, mask: Vec<bool>) -> Result<FixtureData> {
    let params = standardize_fit(&train)?;
    Ok(FixtureData {
        train: standardize_apply(&train, &params)?,
        cal: standardize_apply(&cal.with_id_prefix("cal-"), &params)?,
        test: standardize_apply(&test.with_id_prefix("test-"), &params)?,
        mask,
        params,
    })
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

/// Independent draws of `y = X beta + noise` for train, calibration and test.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFixture {
    pub coefficients: Vec<f64>,
    pub noise_std: f64,
    pub n_train: usize,
    pub n_cal: usize,
    pub n_test: usize,
}

impl LinearFixture {
    pub fn new(coefficients: Vec<f64>, noise_std: f64, n_train: usize, n_cal: usize, n_test: usize) -> Self {
        LinearFixture {
            coefficients,
            noise_std,
            n_train,
            n_cal,
            n_test,
        }
    }

    fn raw(&self, master: u64) -> Result<(Dataset, Dataset, Dataset)> {
        let gen = |n, label| generate_linear_synthetic(n, &self.coefficients, self.noise_std, seed::derive(master, label));
        Ok((
            gen(self.n_train, "fixture/train")?,
            gen(self.n_cal, "fixture/cal")?,
            gen(self.n_test, "fixture/test")?,
        ))
    }

    pub fn clean(&self, master: u64) -> Result<FixtureData> {
        let (train, cal, test) = self.raw(master)?;
        let n = train.len();
        finish(train, cal, test, vec![false; n])
    }

    /// Shifts `floor(epsilon * n_train)` training targets by
    /// `shift_noise_stds` noise standard deviations. Calibration and test
    /// data stay clean. The clean draws do not depend on `epsilon`.
    pub fn contaminated(&self, epsilon: f64, shift_noise_stds: f64, sign: ShiftSign, master: u64) -> Result<FixtureData> {
        let (train, cal, test) = self.raw(master)?;
        let target_std = population_std(train.targets());
        if target_std == 0.0 {
            return Err(TriageError::invalid("constant targets cannot be contaminated"));
        }
        let spec = ContaminationSpec {
            epsilon,
            shift_magnitude: shift_noise_stds * self.noise_std / target_std,
            sign,
            seed: seed::derive(master, "fixture/contaminate"),
        };
        let (train, mask) = contaminate(&train, &spec)?;
        finish(train, cal, test, mask)
    }
}

/// Deployment shift: in the source training data a random `shifted_fraction`
/// of the subgroup `x[feature] > threshold` has its target moved up by
/// `shift_noise_stds` noise standard deviations. The target domain
/// (calibration and test) has no shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFixture {
    pub base: LinearFixture,
    pub feature: usize,
    pub threshold: f64,
    pub shifted_fraction: f64,
    pub shift_noise_stds: f64,
}

impl ShiftFixture {
    pub fn generate(&self, master: u64) -> Result<FixtureData> {
        if self.feature >= self.base.coefficients.len() {
            return Err(TriageError::invalid("shift feature index out of range"));
        }
        if !(0.0..=1.0).contains(&self.shifted_fraction) {
            return Err(TriageError::invalid("shifted fraction must lie in [0, 1]"));
        }
        let (train, cal, test) = self.base.raw(master)?;
        let mut rng = seed::rng(seed::derive(master, "fixture/shift"));
        let delta = self.shift_noise_stds * self.base.noise_std;
        let mut mask = vec![false; train.len()];
        let mut targets = train.targets().to_vec();
        for i in 0..train.len() {
            let hit = rng.random_bool(self.shifted_fraction);
            if train.row(i)[self.feature] > self.threshold && hit {
                targets[i] += delta;
                mask[i] = true;
            }
        }
        let train = train.with_targets(targets)?;
        finish(train, cal, test, mask)
    }
}
