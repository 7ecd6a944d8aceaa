//! Add features from weakest to strongest and watch the well-estimated
//! proportion grow.

use triage::dataset::generate_linear_synthetic;
use triage::workflows::{feature_acquisition_curve, PipelineConfig};

fn main() -> triage::Result<()> {
    let data = generate_linear_synthetic(2000, &[0.1, 1.0, 5.0], 0.1, 42)?;
    let curve = feature_acquisition_curve(&data, &PipelineConfig::default(), 42)?;
    for (step, corr) in curve.steps.iter().zip(&curve.abs_correlations) {
        println!(
            "{} feature(s), added {} (|r| = {corr:.2}): WE {:.3}",
            step.n_features, step.added_feature, step.proportions.well
        );
    }
    Ok(())
}
