//! Keep the easiest fraction of the training set by final residual, then
//! keep only its well-estimated members, and compare test error.

use triage::dataset::ShiftSign;
use triage::regressors::final_residuals;
use triage::workflows::fixtures::LinearFixture;
use triage::workflows::{fine_grained_filter, run_pipeline, PipelineConfig};

fn main() -> triage::Result<()> {
    let data = LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, 1000, 2000)
        .contaminated(0.1, 5.0, ShiftSign::Positive, 42)?;
    let cfg = PipelineConfig::default();
    let c = run_pipeline(&data.train, &data.cal, &cfg)?;
    let residuals: Vec<f64> = final_residuals(&c.run, &data.train)?.iter().map(|r| r.abs()).collect();

    println!("   p  n_base  mse_base   n_triage  mse_triage");
    for p in [0.6, 0.8, 1.0] {
        let r = fine_grained_filter(&residuals, &c.report, p, &data.train, &data.test, &cfg.training, Some(&data.params))?;
        let t = r.triage.expect("well-estimated samples present");
        println!(
            "{p:>4}  {:>6}  {:.6}  {:>8}  {:.6}",
            r.baseline_ids.len(),
            r.baseline.mse,
            r.retained_ids.len(),
            t.mse
        );
    }
    Ok(())
}
