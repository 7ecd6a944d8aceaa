//! Check that the predictive distributions are calibrated on held-out data
//! and compare the confidence rankings of two different regressors.

use triage::diagnostics::{consistency_matrix, validity, CpdBatch, DEFAULT_BINS};
use triage::dynamics::calibrate_at;
use triage::prelude::*;
use triage::workflows::fixtures::LinearFixture;
use triage::workflows::{run_pipeline, PipelineConfig};

fn main() -> triage::Result<()> {
    let data = LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, 1000, 2000).clean(42)?;

    let cfg = PipelineConfig::default();
    let run = fit(&data.train, &cfg.training)?;
    let calibrator = calibrate_at(&run, None, &data.cal, &cfg.scoring.conformal)?;
    let batch = CpdBatch::new(&calibrator, run.predict_final(data.test.features())?, &data.test)?;
    let (summary, _curve, _pits) = validity(&batch, data.test.targets(), 7, DEFAULT_BINS, (0.05, 0.95))?;
    print!("{}", summary.to_text());

    let linear = PipelineConfig::new(TrainingConfig::linear(100, 0.1, 42));
    let a = run_pipeline(&data.train, &data.cal, &cfg)?;
    let b = run_pipeline(&data.train, &data.cal, &linear)?;
    let confidences = |c: &triage::workflows::Characterization| c.stats.iter().map(|s| s.confidence).collect::<Vec<_>>();
    let m = consistency_matrix(&[confidences(&a), confidences(&b)], &["gbdt".into(), "linear".into()])?;
    println!("spearman(gbdt, linear) = {:.3}", m.mean_off_diagonal);
    Ok(())
}
