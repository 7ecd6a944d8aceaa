use super::{evaluate, id_set, retrain_and_eval, run_pipeline, EvalMetrics, PipelineConfig};
use crate::characterize::{CharacterizationReport, Group};
use crate::dataset::{Dataset, StandardizationParams};
use crate::error::{Result, TriageError};
use crate::regressors::fit;

#[derive(Debug, Clone, PartialEq)]
pub struct SculptResult {
    /// Well-estimated training samples.
    pub kept_ids: Vec<String>,
    /// Under- and over-estimated training samples.
    pub removed_ids: Vec<String>,
    pub cal_size: usize,
    /// Retrained on the kept samples.
    pub sculpted: EvalMetrics,
    pub full: EvalMetrics,
    pub cal_only: EvalMetrics,
    /// Training set plus target-domain calibration set.
    pub union: EvalMetrics,
    /// Retrained on the removed samples; `None` if nothing was removed.
    pub removed: Option<EvalMetrics>,
    pub report: CharacterizationReport,
}

/// Characterizes `train` against a small calibration set from the target
/// domain, keeps the well-estimated samples and compares the retrained model
/// with the usual alternatives.
pub fn sculpt(
    train: &Dataset,
    cal_target: &Dataset,
    test: &Dataset,
    cfg: &PipelineConfig,
    params: Option<&StandardizationParams>,
) -> Result<SculptResult> {
    for ds in [cal_target, test] {
        if ds.feature_names() != train.feature_names() {
            return Err(TriageError::invalid("train, calibration and test sets have different columns"));
        }
    }
    let c = run_pipeline(train, cal_target, cfg)?;
    let kept_ids = c.report.ids_in(Group::WellEstimated);
    if kept_ids.is_empty() {
        return Err(TriageError::Empty("well-estimated group"));
    }
    let removed_ids: Vec<String> = c
        .report
        .records
        .iter()
        .filter(|r| r.group != Group::WellEstimated)
        .map(|r| r.sample_id.clone())
        .collect();
    let training = &cfg.training;
    let sculpted = retrain_and_eval(&id_set(&kept_ids), train, test, training, params)?;
    let removed = if removed_ids.is_empty() {
        None
    } else {
        Some(retrain_and_eval(&id_set(&removed_ids), train, test, training, params)?)
    };
    let full = evaluate(&c.run, train.len(), test, params)?;
    let cal_only = evaluate(&fit(cal_target, training)?, cal_target.len(), test, params)?;
    let union_set = train.concat(&cal_target.with_id_prefix("target-"))?;
    let union = evaluate(&fit(&union_set, training)?, union_set.len(), test, params)?;
    Ok(SculptResult {
        kept_ids,
        removed_ids,
        cal_size: cal_target.len(),
        sculpted,
        full,
        cal_only,
        union,
        removed,
        report: c.report,
    })
}
