use std::collections::HashSet;

use super::{check_aligned, evaluate, EvalMetrics};
use crate::characterize::{CharacterizationReport, Group};
use crate::dataset::{Dataset, StandardizationParams};
use crate::error::{Result, TriageError};
use crate::regressors::{fit, TrainingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub proportion: f64,
    /// The `round(p * n)` lowest-scoring samples, in training order.
    pub baseline_ids: Vec<String>,
    /// Well-estimated members of the baseline set, in training order.
    pub retained_ids: Vec<String>,
    pub baseline: EvalMetrics,
    /// `None` when no baseline sample is well-estimated.
    pub triage: Option<EvalMetrics>,
}

/// Keeps the `p` fraction of samples with the lowest `baseline_scores`
/// (ascending difficulty), then the well-estimated samples among those, and
/// retrains on each set.
pub fn fine_grained_filter(
    baseline_scores: &[f64],
    report: &CharacterizationReport,
    p: f64,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainingConfig,
    params: Option<&StandardizationParams>,
) -> Result<FilterResult> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(TriageError::invalid(format!("proportion must lie in (0, 1], got {p}")));
    }
    if baseline_scores.len() != train.len() {
        return Err(TriageError::DimensionMismatch {
            expected: train.len(),
            got: baseline_scores.len(),
        });
    }
    if baseline_scores.iter().any(|s| !s.is_finite()) {
        return Err(TriageError::NonFinite("baseline score"));
    }
    check_aligned(report, train)?;
    let n = train.len();
    let keep = ((p * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| baseline_scores[a].total_cmp(&baseline_scores[b]));
    let mut base_idx = order[..keep].to_vec();
    base_idx.sort_unstable();
    let triage_idx: Vec<usize> = base_idx
        .iter()
        .copied()
        .filter(|&i| report.records[i].group == Group::WellEstimated)
        .collect();

    let ids = |idx: &[usize]| idx.iter().map(|&i| train.sample_ids()[i].clone()).collect::<Vec<_>>();
    let base_set = train.subset(&base_idx);
    let baseline = evaluate(&fit(&base_set, cfg)?, base_set.len(), test, params)?;
    let triage = if triage_idx.is_empty() {
        log::warn!("no well-estimated sample among the {keep} kept at p={p}; TRIAGE set not retrained");
        None
    } else {
        let set = train.subset(&triage_idx);
        Some(evaluate(&fit(&set, cfg)?, set.len(), test, params)?)
    };
    debug_assert!({
        let b: HashSet<usize> = base_idx.iter().copied().collect();
        triage_idx.iter().all(|i| b.contains(i))
    });
    Ok(FilterResult {
        proportion: p,
        baseline_ids: ids(&base_idx),
        retained_ids: ids(&triage_idx),
        baseline,
        triage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::{assign_groups, CharacterizationConfig};
    use crate::dataset::generate_linear_synthetic;
    use crate::dynamics::TrajectoryStats;

    fn fixture() -> (Dataset, Dataset, CharacterizationReport) {
        let train = generate_linear_synthetic(40, &[1.0, 1.0], 0.1, 3).unwrap();
        let test = generate_linear_synthetic(20, &[1.0, 1.0], 0.1, 4).unwrap();
        let stats: Vec<TrajectoryStats> = train
            .sample_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| TrajectoryStats {
                sample_id: id.clone(),
                confidence: (i as f64 * 0.37) % 1.0,
                variability: (i as f64 * 0.11) % 0.3,
            })
            .collect();
        let report = assign_groups(&stats, &CharacterizationConfig::default()).unwrap();
        (train, test, report)
    }

    #[test]
    fn full_proportion_keeps_everything() {
        let (train, test, report) = fixture();
        let scores: Vec<f64> = (0..train.len()).map(|i| i as f64).collect();
        let cfg = TrainingConfig::linear(10, 0.1, 0);
        let r = fine_grained_filter(&scores, &report, 1.0, &train, &test, &cfg, None).unwrap();
        assert_eq!(r.baseline_ids, train.sample_ids());
        assert_eq!(r.retained_ids, report.ids_in(Group::WellEstimated));
    }

    #[test]
    fn triage_set_is_a_subset_of_the_baseline_set() {
        let (train, test, report) = fixture();
        let scores: Vec<f64> = (0..train.len()).map(|i| ((i * 7) % 13) as f64).collect();
        let cfg = TrainingConfig::linear(10, 0.1, 0);
        for p in [0.1, 0.35, 0.6, 0.9] {
            let r = fine_grained_filter(&scores, &report, p, &train, &test, &cfg, None).unwrap();
            let base: HashSet<&String> = r.baseline_ids.iter().collect();
            assert!(r.retained_ids.iter().all(|id| base.contains(id)));
            assert_eq!(r.baseline_ids.len(), (p * 40.0_f64).round() as usize);
        }
        assert!(fine_grained_filter(&scores, &report, 0.0, &train, &test, &cfg, None).is_err());
    }
}
