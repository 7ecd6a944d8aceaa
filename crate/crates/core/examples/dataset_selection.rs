//! Rank two candidate training sets by retention rate: a clean one and a
//! copy with a fifth of its labels corrupted.

use triage::dataset::{contaminate, generate_linear_synthetic, ContaminationSpec};
use triage::workflows::{compare_datasets, PipelineConfig};

fn main() -> triage::Result<()> {
    let coefs = [1.0, 2.0, -1.5, 0.5, 3.0];
    let clean = generate_linear_synthetic(2000, &coefs, 0.5, 1)?;
    let twin = generate_linear_synthetic(2000, &coefs, 0.5, 2)?;
    let (dirty, _) = contaminate(&twin, &ContaminationSpec::new(0.2, 1.0, 3))?;
    let real = generate_linear_synthetic(2000, &coefs, 0.5, 4)?;

    let candidates = vec![("clean".to_string(), clean), ("contaminated".to_string(), dirty)];
    for c in compare_datasets(&candidates, &real, &PipelineConfig::default(), 42)? {
        println!("{:<13} retention {:.3}  test MAE {:.4}", c.label, c.retention_rate, c.test_mae);
    }
    Ok(())
}
