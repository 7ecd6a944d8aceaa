use std::path::Path;

use super::fixtures::LinearFixture;
use super::{evaluate, run_pipeline, PipelineConfig};
use crate::characterize::Group;
use crate::dataset::ShiftSign;
use crate::error::{Result, TriageError};
use crate::io::CsvWriter;
use crate::regressors::{final_residuals, fit};

#[derive(Debug, Clone, PartialEq)]
pub struct HuberConfig {
    /// Strictly increasing contamination levels in `[0, 0.4]`.
    pub epsilons: Vec<f64>,
    pub fixture: LinearFixture,
    /// Shift of each corrupted target, in noise standard deviations.
    pub shift_noise_stds: f64,
    pub sign: ShiftSign,
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

impl Default for HuberConfig {
    fn default() -> Self {
        HuberConfig {
            epsilons: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            fixture: LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, 1000, 2000),
            shift_noise_stds: 5.0,
            sign: ShiftSign::Positive,
            pipeline: PipelineConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuberRow {
    pub epsilon: f64,
    pub n_contaminated: usize,
    pub n_flagged: usize,
    pub mse_unfiltered: f64,
    /// Trained after dropping the `floor(epsilon * n)` largest |residuals|.
    pub mse_residual: f64,
    /// Trained on the well-estimated group only.
    pub mse_triage: Option<f64>,
    /// Share of flagged samples that are contaminated.
    pub precision: Option<f64>,
    /// Share of contaminated samples that are flagged.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuberReport {
    pub rows: Vec<HuberRow>,
}

impl HuberReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut w = CsvWriter::create(
            path,
            &[
                "epsilon",
                "n_contaminated",
                "n_flagged",
                "mse_unfiltered",
                "mse_residual",
                "mse_triage",
                "precision",
                "recall",
            ],
        )?;
        for r in &self.rows {
            w.row(&[
                r.epsilon.to_string(),
                r.n_contaminated.to_string(),
                r.n_flagged.to_string(),
                r.mse_unfiltered.to_string(),
                r.mse_residual.to_string(),
                opt(r.mse_triage),
                opt(r.precision),
                opt(r.recall),
            ])?;
        }
        w.finish()
    }
}

/// For each contamination level: corrupt the training targets, characterize,
/// and compare clean-test MSE without filtering, with the residual filter and
/// with the well-estimated group.
pub fn huber_experiment(cfg: &HuberConfig) -> Result<HuberReport> {
    if cfg.epsilons.is_empty() {
        return Err(TriageError::Empty("contamination grid"));
    }
    if cfg.epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TriageError::invalid("contamination grid must be strictly increasing"));
    }
    if cfg.epsilons.iter().any(|e| !(0.0..=0.4).contains(e)) {
        return Err(TriageError::invalid("contamination levels must lie in [0, 0.4]"));
    }
    let training = &cfg.pipeline.training;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        let data = cfg.fixture.contaminated(eps, cfg.shift_noise_stds, cfg.sign, cfg.seed)?;
        let n = data.train.len();
        let c = run_pipeline(&data.train, &data.cal, &cfg.pipeline)?;
        let unfiltered = evaluate(&c.run, n, &data.test, None)?;

        let residuals = final_residuals(&c.run, &data.train)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| residuals[b].abs().total_cmp(&residuals[a].abs()));
        let drop = ((eps * n as f64).floor() as usize).min(n - 1);
        let mut keep = order[drop..].to_vec();
        keep.sort_unstable();
        let kept = data.train.subset(&keep);
        let residual = evaluate(&fit(&kept, training)?, kept.len(), &data.test, None)?;

        let groups = c.report.groups();
        let we: Vec<usize> = (0..n).filter(|&i| groups[i] == Group::WellEstimated).collect();
        let triage = if we.is_empty() {
            None
        } else {
            let set = data.train.subset(&we);
            Some(evaluate(&fit(&set, training)?, set.len(), &data.test, None)?.mse)
        };

        let n_contaminated = data.mask.iter().filter(|m| **m).count();
        let n_flagged = n - we.len();
        let hits = (0..n)
            .filter(|&i| data.mask[i] && groups[i] != Group::WellEstimated)
            .count();
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        log::info!("epsilon {eps}: {hits}/{n_contaminated} contaminated samples flagged");
        rows.push(HuberRow {
            epsilon: eps,
            n_contaminated,
            n_flagged,
            mse_unfiltered: unfiltered.mse,
            mse_residual: residual.mse,
            mse_triage: triage,
            precision: ratio(hits, n_flagged),
            recall: ratio(hits, n_contaminated),
        });
    }
    Ok(HuberReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regressors::TrainingConfig;

    #[test]
    fn grid_validation() {
        let mut cfg = HuberConfig::default();
        cfg.epsilons = vec![0.1, 0.1];
        assert!(huber_experiment(&cfg).is_err());
        cfg.epsilons = vec![0.5];
        assert!(huber_experiment(&cfg).is_err());
        cfg.epsilons = vec![];
        assert!(huber_experiment(&cfg).is_err());
    }

    #[test]
    fn one_row_per_level() {
        let cfg = HuberConfig {
            epsilons: vec![0.0, 0.1, 0.2],
            fixture: LinearFixture::new(vec![1.0, 2.0], 0.3, 150, 60, 60),
            pipeline: PipelineConfig::new(TrainingConfig::gbdt(6, 0.3, 2, 0)),
            ..Default::default()
        };
        let r = huber_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[0].n_contaminated, 0);
        assert_eq!(r.rows[0].recall, None);
        assert_eq!(r.rows[2].n_contaminated, 30);
    }
}
