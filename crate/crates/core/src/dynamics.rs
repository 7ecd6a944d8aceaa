//! Score trajectories over training checkpoints.
//!
//! At every checkpoint the conformal calibrator is refit from that
//! checkpoint's calibration residuals, and each training sample is scored
//! with the checkpoint's prediction and `sigma`. The neighbour structure of
//! the normalizer depends only on features, so neighbour lists are computed
//! once and reused across checkpoints.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::conformal::{triage_score, ConformalCalibrator, ConformalConfig, KnnIndex, SigmaEstimator, Tau};
use crate::dataset::Dataset;
use crate::error::{Result, TriageError};
use crate::io::CsvWriter;
use crate::regressors::CheckpointedRun;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoringConfig {
    pub conformal: ConformalConfig,
    pub tau: Tau,
    /// Leading checkpoints left out of every trajectory.
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTrajectory {
    pub sample_id: String,
    /// One score per retained checkpoint, in checkpoint order.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub sample_id: String,
    pub confidence: f64,
    pub variability: f64,
}

/// Neighbour lists against a fixed calibration feature matrix.
struct Neighborhoods {
    index: Arc<KnnIndex>,
    k: usize,
    /// Leave-one-out (or self-inclusive) neighbours of each calibration point.
    cal: Vec<Vec<usize>>,
}

impl Neighborhoods {
    fn new(cal: &Dataset, cfg: &ConformalConfig) -> Self {
        let index = Arc::new(KnnIndex::new(cal.features().clone()));
        let q = cal.len();
        let k = cfg.k.min(q);
        let cal_nbrs = (0..q)
            .into_par_iter()
            .map(|i| {
                if cfg.leave_one_out && q >= 2 {
                    index.nearest(cal.row(i), k.min(q - 1), Some(i))
                } else {
                    index.nearest(cal.row(i), k, None)
                }
            })
            .collect();
        Neighborhoods {
            index,
            k,
            cal: cal_nbrs,
        }
    }

    fn query(&self, ds: &Dataset) -> Vec<Vec<usize>> {
        (0..ds.len())
            .into_par_iter()
            .map(|i| self.index.nearest(ds.row(i), self.k, None))
            .collect()
    }

    /// Calibrator and normalizer for checkpoint `e`.
    fn calibrate(
        &self,
        run: &CheckpointedRun,
        e: usize,
        cal: &Dataset,
        cfg: &ConformalConfig,
    ) -> Result<(ConformalCalibrator, SigmaEstimator)> {
        let pred = run.predict(e, cal.features())?;
        if pred.iter().any(|p| !p.is_finite()) {
            return Err(TriageError::NonFinite("calibration prediction"));
        }
        let residuals: Vec<f64> = cal.targets().iter().zip(&pred).map(|(y, p)| y - p).collect();
        let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        let sigma = SigmaEstimator::new(Arc::clone(&self.index), abs, cfg.k, cfg.sigma_floor)?;
        let sigmas: Vec<f64> = self.cal.iter().map(|n| sigma.sigma_from_neighbors(n)).collect();
        let calibrator = ConformalCalibrator::from_residuals(&residuals, &sigmas)?.with_checkpoint(e);
        Ok((calibrator, sigma))
    }
}

fn check_inputs(run: &CheckpointedRun, train: &Dataset, cal: &Dataset) -> Result<()> {
    for ds in [train, cal] {
        if ds.dim() != run.dim() {
            return Err(TriageError::DimensionMismatch {
                expected: run.dim(),
                got: ds.dim(),
            });
        }
    }
    Ok(())
}

fn score_rows(
    run: &CheckpointedRun,
    e: usize,
    ds: &Dataset,
    nbrs: &[Vec<usize>],
    calibrator: &ConformalCalibrator,
    sigma: &SigmaEstimator,
    tau: &Tau,
) -> Result<Vec<f64>> {
    let pred = run.predict(e, ds.features())?;
    Ok((0..ds.len())
        .into_par_iter()
        .map(|i| {
            let s = sigma.sigma_from_neighbors(&nbrs[i]);
            triage_score(calibrator, ds.targets()[i], pred[i], s, tau.value(i, e))
        })
        .collect())
}

/// Scores every training sample at every checkpoint after `burn_in`.
pub fn score_all(
    run: &CheckpointedRun,
    train: &Dataset,
    cal: &Dataset,
    cfg: &ScoringConfig,
) -> Result<Vec<ScoreTrajectory>> {
    check_inputs(run, train, cal)?;
    cfg.conformal.validate()?;
    cfg.tau.validate()?;
    let e_total = run.checkpoints();
    if cfg.burn_in + 2 > e_total {
        return Err(TriageError::invalid(format!(
            "burn-in {} leaves fewer than 2 of {e_total} checkpoints",
            cfg.burn_in
        )));
    }
    let hoods = Neighborhoods::new(cal, &cfg.conformal);
    let train_nbrs = hoods.query(train);

    let mut trajectories: Vec<ScoreTrajectory> = train
        .sample_ids()
        .iter()
        .map(|id| ScoreTrajectory {
            sample_id: id.clone(),
            scores: Vec::with_capacity(e_total - cfg.burn_in),
        })
        .collect();
    for e in cfg.burn_in + 1..=e_total {
        let (calibrator, sigma) = hoods.calibrate(run, e, cal, &cfg.conformal)?;
        let scores = score_rows(run, e, train, &train_nbrs, &calibrator, &sigma, &cfg.tau)?;
        for (t, s) in trajectories.iter_mut().zip(scores) {
            t.scores.push(s);
        }
        log::debug!("checkpoint {e}/{e_total} scored");
    }
    Ok(trajectories)
}

/// Scores of `eval` at a single checkpoint, calibrated on `cal`.
pub fn score_at_checkpoint(
    run: &CheckpointedRun,
    e: usize,
    eval: &Dataset,
    cal: &Dataset,
    cfg: &ScoringConfig,
) -> Result<Vec<f64>> {
    check_inputs(run, eval, cal)?;
    cfg.conformal.validate()?;
    cfg.tau.validate()?;
    let hoods = Neighborhoods::new(cal, &cfg.conformal);
    let (calibrator, sigma) = hoods.calibrate(run, e, cal, &cfg.conformal)?;
    score_rows(run, e, eval, &hoods.query(eval), &calibrator, &sigma, &cfg.tau)
}

/// Calibrator for checkpoint `e` (the final one if `None`).
pub fn calibrate_at(
    run: &CheckpointedRun,
    e: Option<usize>,
    cal: &Dataset,
    cfg: &ConformalConfig,
) -> Result<ConformalCalibrator> {
    if cal.dim() != run.dim() {
        return Err(TriageError::DimensionMismatch {
            expected: run.dim(),
            got: cal.dim(),
        });
    }
    cfg.validate()?;
    let e = e.unwrap_or(run.checkpoints());
    let pred = run.predict(e, cal.features())?;
    let c = crate::conformal::fit_calibrator(cal, &pred, cfg)?;
    Ok(c.with_checkpoint(e))
}

/// Mean score over the trajectory.
pub fn confidence(traj: &ScoreTrajectory) -> Result<f64> {
    if traj.scores.is_empty() {
        return Err(TriageError::Empty("trajectory"));
    }
    Ok(traj.scores.iter().sum::<f64>() / traj.scores.len() as f64)
}

/// Population standard deviation of the trajectory.
pub fn variability(traj: &ScoreTrajectory) -> Result<f64> {
    let c = confidence(traj)?;
    let n = traj.scores.len() as f64;
    Ok((traj.scores.iter().map(|s| (s - c) * (s - c)).sum::<f64>() / n).sqrt())
}

pub fn summarize(trajs: &[ScoreTrajectory]) -> Result<Vec<TrajectoryStats>> {
    let Some(first) = trajs.first() else {
        return Ok(Vec::new());
    };
    let len = first.scores.len();
    trajs
        .iter()
        .map(|t| {
            if t.scores.len() != len {
                return Err(TriageError::DimensionMismatch {
                    expected: len,
                    got: t.scores.len(),
                });
            }
            Ok(TrajectoryStats {
                sample_id: t.sample_id.clone(),
                confidence: confidence(t)?,
                variability: variability(t)?,
            })
        })
        .collect()
}

/// Long-format CSV: `sample_id,e,score` with `e` counted from the first
/// retained checkpoint (`burn_in + 1`).
pub fn write_trajectories_csv(trajs: &[ScoreTrajectory], burn_in: usize, path: impl AsRef<Path>) -> Result<()> {
    let mut w = CsvWriter::create(path, &["sample_id", "e", "score"])?;
    for t in trajs {
        for (j, s) in t.scores.iter().enumerate() {
            w.row(&[t.sample_id.clone(), (burn_in + j + 1).to_string(), s.to_string()])?;
        }
    }
    w.finish()
}
