//! Sweep the contamination level and compare no filtering, dropping the
//! largest residuals, and training on the well-estimated group only.

use triage::workflows::{huber_experiment, HuberConfig};

fn main() -> triage::Result<()> {
    let cfg = HuberConfig {
        epsilons: vec![0.0, 0.1, 0.2],
        ..HuberConfig::default()
    };
    let report = huber_experiment(&cfg)?;
    println!("epsilon  none      residual  triage    recall");
    for r in &report.rows {
        println!(
            "{:<7}  {:.5}  {:.5}  {:.5}  {}",
            r.epsilon,
            r.mse_unfiltered,
            r.mse_residual,
            r.mse_triage.unwrap_or(f64::NAN),
            r.recall.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}
