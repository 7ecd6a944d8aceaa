use crate::characterize::{retention_rate, GroupProportions};
use crate::dataset::{split_pair, standardize_apply, standardize_fit, Dataset};
use crate::error::{Result, TriageError};
use crate::seed;

use super::{evaluate, run_pipeline, PipelineConfig};

/// Share of each candidate held out to calibrate its own scores.
pub const SELF_CALIBRATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub label: String,
    pub retention_rate: f64,
    /// Train-on-candidate, test-on-real MAE in original target units.
    pub test_mae: f64,
    pub n_samples: usize,
}

/// Ranks candidate datasets by retention rate (descending, ties by label).
/// Each candidate is split with the same seed into train and calibration
/// parts, standardized on its own train part, and characterized.
pub fn compare_datasets(
    candidates: &[(String, Dataset)],
    real_test: &Dataset,
    cfg: &PipelineConfig,
    master: u64,
) -> Result<Vec<CandidateResult>> {
    if candidates.len() < 2 {
        return Err(TriageError::invalid("need at least 2 candidate datasets"));
    }
    for (label, ds) in candidates {
        if ds.feature_names() != real_test.feature_names() {
            return Err(TriageError::invalid(format!(
                "candidate '{label}' has columns {:?}, test data has {:?}",
                ds.feature_names(),
                real_test.feature_names()
            )));
        }
    }
    let split_seed = seed::derive(master, "compare/split");
    let mut out = Vec::with_capacity(candidates.len());
    for (label, ds) in candidates {
        let (train, cal) = split_pair(ds, SELF_CALIBRATION_FRACTION, split_seed)?;
        let params = standardize_fit(&train)?;
        let train = standardize_apply(&train, &params)?;
        let cal = standardize_apply(&cal, &params)?;
        let test = standardize_apply(real_test, &params)?;
        let c = run_pipeline(&train, &cal, cfg)?;
        let metrics = evaluate(&c.run, train.len(), &test, Some(&params))?;
        out.push(CandidateResult {
            label: label.clone(),
            retention_rate: retention_rate(&c.report),
            test_mae: metrics.mae_original,
            n_samples: ds.len(),
        });
    }
    out.sort_by(|a, b| {
        b.retention_rate
            .total_cmp(&a.retention_rate)
            .then_with(|| a.label.cmp(&b.label))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionStep {
    pub n_features: usize,
    pub added_feature: String,
    pub proportions: GroupProportions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionCurve {
    /// Features from weakest to strongest absolute correlation with the target.
    pub feature_order: Vec<String>,
    pub abs_correlations: Vec<f64>,
    pub steps: Vec<AcquisitionStep>,
}

fn abs_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).abs()
    }
}

/// Adds features one at a time, weakest first, and records the group
/// proportions of a full characterization at each step.
pub fn feature_acquisition_curve(ds: &Dataset, cfg: &PipelineConfig, master: u64) -> Result<AcquisitionCurve> {
    let d = ds.dim();
    if d < 2 {
        return Err(TriageError::invalid("feature acquisition needs at least 2 features"));
    }
    let corr: Vec<f64> = (0..d)
        .map(|j| abs_pearson(&ds.features().column(j), ds.targets()))
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| corr[a].total_cmp(&corr[b]));

    let (train, cal) = split_pair(ds, SELF_CALIBRATION_FRACTION, seed::derive(master, "acquire/split"))?;
    let params = standardize_fit(&train)?;
    let train = standardize_apply(&train, &params)?;
    let cal = standardize_apply(&cal, &params)?;
    let mut steps = Vec::with_capacity(d);
    for m in 1..=d {
        let cols = &order[..m];
        let c = run_pipeline(&train.select_features(cols)?, &cal.select_features(cols)?, cfg)?;
        steps.push(AcquisitionStep {
            n_features: m,
            added_feature: ds.feature_names()[order[m - 1]].clone(),
            proportions: c.report.proportions,
        });
    }
    Ok(AcquisitionCurve {
        feature_order: order.iter().map(|&j| ds.feature_names()[j].clone()).collect(),
        abs_correlations: order.iter().map(|&j| corr[j]).collect(),
        steps,
    })
}
