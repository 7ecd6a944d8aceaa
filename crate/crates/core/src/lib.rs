//! Regression data characterization with conformal predictive distributions.
//!
//! Every training sample is scored at each checkpoint of an iteratively
//! trained regressor: the score is the conformal predictive distribution,
//! calibrated on a held-out set, evaluated at the sample's own label. The mean
//! (confidence) and standard deviation (variability) of that trajectory sort
//! samples into under-, over- and well-estimated groups, which then drive
//! filtering, sculpting, dataset comparison and feature-acquisition workflows.
//!
//! ```no_run
//! use triage::prelude::*;
//!
//! let raw = generate_linear_synthetic(1_000, &[1.0, 2.0, -1.0], 0.5, 7).unwrap();
//! let (train, cal, _test) = split(&raw, &SplitSpec::new(0.6, 0.2, 0.2, 7).unwrap()).unwrap();
//! let params = standardize_fit(&train).unwrap();
//! let train = standardize_apply(&train, &params).unwrap();
//! let cal = standardize_apply(&cal, &params).unwrap();
//!
//! let run = fit(&train, &TrainingConfig::default_for(ModelKind::FeedForward, 7)).unwrap();
//! let trajectories = score_all(&run, &train, &cal, &ScoringConfig::default()).unwrap();
//! let report = assign_groups(&summarize(&trajectories).unwrap(), &CharacterizationConfig::default()).unwrap();
//! println!("retention rate {:.3}", retention_rate(&report));
//! ```

pub mod characterize;
pub mod cli;
pub mod conformal;
pub mod dataset;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod regressors;
pub mod seed;
pub mod workflows;

mod io;

pub use error::{Result, TriageError};

pub mod prelude {
    pub use crate::characterize::{
        assign_groups, retention_rate, threshold_sweep, CharacterizationConfig, CharacterizationReport,
        Group,
    };
    pub use crate::conformal::{
        cpd_eval, cpd_quantile, crps, fit_calibrator, triage_score, ConformalCalibrator, ConformalConfig,
        Tau,
    };
    pub use crate::dataset::{
        contaminate, generate_linear_synthetic, load_csv, split, standardize_apply, standardize_fit,
        write_csv, ContaminationSpec, Dataset, SplitSpec,
    };
    pub use crate::dynamics::{confidence, score_all, summarize, variability, ScoreTrajectory, ScoringConfig, TrajectoryStats};
    pub use crate::error::{Result, TriageError};
    pub use crate::matrix::Matrix;
    pub use crate::regressors::{fit, CheckpointedRun, ModelKind, OptimizerKind, TrainingConfig};
}
