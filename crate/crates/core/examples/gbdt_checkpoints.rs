//! Every boosting stage of a GBDT is a checkpoint. Watch the training loss
//! fall and a single sample's TRIAGE score settle as stages accumulate.

use triage::conformal::Tau;
use triage::dataset::split_pair;
use triage::dynamics::{score_all, ScoringConfig};
use triage::prelude::*;
use triage::regressors::loss_trajectory;

fn main() -> triage::Result<()> {
    let raw = generate_linear_synthetic(1200, &[1.0, 2.0, -1.5], 0.4, 5)?;
    let (train, cal) = split_pair(&raw, 0.3, 5)?;

    let cfg = TrainingConfig::gbdt(20, 0.2, 4, 5);
    let run = fit(&train, &cfg)?;
    let losses = loss_trajectory(&run, &train)?;
    let scoring = ScoringConfig {
        tau: Tau::Fixed(0.5),
        ..ScoringConfig::default()
    };
    let trajectories = score_all(&run, &train, &cal, &scoring)?;

    println!("stage  mean loss  score(sample 0)");
    for e in 0..run.checkpoints() {
        let mean = (0..train.len()).map(|i| losses.get(i, e)).sum::<f64>() / train.len() as f64;
        println!("{:>5}  {mean:>9.4}  {:.3}", e + 1, trajectories[0].scores[e]);
    }
    Ok(())
}
