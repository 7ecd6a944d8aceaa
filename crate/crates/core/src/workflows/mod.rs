//! End-to-end use cases built on scoring and characterization: filtering,
//! sculpting toward a target domain, dataset selection, feature acquisition
//! and the contamination benchmark.

use std::collections::HashSet;

use crate::characterize::{assign_groups, CharacterizationConfig, CharacterizationReport};
use crate::dataset::{Dataset, StandardizationParams};
use crate::dynamics::{score_all, summarize, ScoreTrajectory, ScoringConfig, TrajectoryStats};
use crate::error::{Result, TriageError};
use crate::regressors::{fit, CheckpointedRun, ModelKind, TrainingConfig};

mod filter;
pub mod fixtures;
mod huber;
mod sculpt;
mod selection;

pub use filter::{fine_grained_filter, FilterResult};
pub use huber::{huber_experiment, HuberConfig, HuberReport, HuberRow};
pub use sculpt::{sculpt, SculptResult};
pub use selection::{
    compare_datasets, feature_acquisition_curve, AcquisitionCurve, AcquisitionStep, CandidateResult,
    SELF_CALIBRATION_FRACTION,
};

/// Everything needed to go from (train, cal) to a characterization report.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub training: TrainingConfig,
    pub scoring: ScoringConfig,
    pub characterization: CharacterizationConfig,
}

impl PipelineConfig {
    pub fn new(training: TrainingConfig) -> Self {
        PipelineConfig {
            training,
            scoring: ScoringConfig::default(),
            characterization: CharacterizationConfig::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PipelineConfig {
            training: self.training.with_seed(seed),
            ..self.clone()
        }
    }
}

impl Default for PipelineConfig {
    /// Boosted trees, the default regressor of the workflows.
    fn default() -> Self {
        PipelineConfig::new(TrainingConfig::default_for(ModelKind::Gbdt, 0))
    }
}

/// Output of one pass of the pipeline.
#[derive(Debug, Clone)]
pub struct Characterization {
    pub run: CheckpointedRun,
    pub trajectories: Vec<ScoreTrajectory>,
    pub stats: Vec<TrajectoryStats>,
    pub report: CharacterizationReport,
}

/// Train on `train`, score every training sample against `cal` at every
/// checkpoint, and assign groups.
pub fn run_pipeline(train: &Dataset, cal: &Dataset, cfg: &PipelineConfig) -> Result<Characterization> {
    let run = fit(train, &cfg.training)?;
    let trajectories = score_all(&run, train, cal, &cfg.scoring)?;
    let stats = summarize(&trajectories)?;
    let report = assign_groups(&stats, &cfg.characterization)?;
    log::info!(
        "characterized {} samples: UE {:.3} OE {:.3} WE {:.3}",
        report.len(),
        report.proportions.under,
        report.proportions.over,
        report.proportions.well
    );
    Ok(Characterization {
        run,
        trajectories,
        stats,
        report,
    })
}

/// Test-set errors of a model, in standardized and in original target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub n_train: usize,
    pub mse: f64,
    pub mae: f64,
    pub mse_original: f64,
    pub mae_original: f64,
}

/// Final-checkpoint errors of `run` on `test`. `params` maps errors back to
/// original target units; without it both unit systems coincide.
pub fn evaluate(
    run: &CheckpointedRun,
    n_train: usize,
    test: &Dataset,
    params: Option<&StandardizationParams>,
) -> Result<EvalMetrics> {
    if test.is_empty() {
        return Err(TriageError::Empty("test set"));
    }
    let pred = run.predict_final(test.features())?;
    let n = test.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (y, p) in test.targets().iter().zip(&pred) {
        se += (y - p) * (y - p);
        ae += (y - p).abs();
    }
    if !(se.is_finite() && ae.is_finite()) {
        return Err(TriageError::NonFinite("test error"));
    }
    let scale = params.map_or(1.0, StandardizationParams::target_scale);
    Ok(EvalMetrics {
        n_train,
        mse: se / n,
        mae: ae / n,
        mse_original: se / n * scale * scale,
        mae_original: ae / n * scale,
    })
}

/// Fits a fresh regressor on the rows of `train` whose ids are in `ids` and
/// evaluates it on `test`.
pub fn retrain_and_eval(
    ids: &HashSet<String>,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainingConfig,
    params: Option<&StandardizationParams>,
) -> Result<EvalMetrics> {
    let subset = train.subset_by_ids(ids);
    if subset.is_empty() {
        return Err(TriageError::Empty("training subset"));
    }
    let run = fit(&subset, cfg)?;
    evaluate(&run, subset.len(), test, params)
}

fn check_aligned(report: &CharacterizationReport, train: &Dataset) -> Result<()> {
    if report.len() != train.len() {
        return Err(TriageError::DimensionMismatch {
            expected: train.len(),
            got: report.len(),
        });
    }
    if report
        .records
        .iter()
        .zip(train.sample_ids())
        .any(|(r, id)| &r.sample_id != id)
    {
        return Err(TriageError::invalid("report and training set list different samples"));
    }
    Ok(())
}

fn id_set(ids: &[String]) -> HashSet<String> {
    ids.iter().cloned().collect()
}
