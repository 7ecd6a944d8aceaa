//! A conformal predictive distribution built by hand from calibration
//! residuals: evaluate it, read off quantiles and score it with CRPS.

use triage::prelude::*;

fn main() -> triage::Result<()> {
    let raw = generate_linear_synthetic(1500, &[2.0, -1.0], 0.3, 11)?;
    let (train, cal, test) = split(&raw, &SplitSpec::new(0.6, 0.2, 0.2, 11)?)?;

    let run = fit(&train, &TrainingConfig::linear(200, 0.1, 11))?;
    let cal_pred = run.predict_final(cal.features())?;
    let calibrator = fit_calibrator(&cal, &cal_pred, &ConformalConfig::default())?;
    println!("calibration set size q = {}", calibrator.q());

    let x = test.row(0);
    let f_x = run.predict_final(test.features())?[0];
    let sigma = calibrator.sigma(x)?;
    let y = test.targets()[0];
    println!("prediction {f_x:.3}, normalizer {sigma:.3}, label {y:.3}");

    for level in [0.05, 0.5, 0.95] {
        println!("  {level:>4} quantile: {:.3}", cpd_quantile(&calibrator, f_x, sigma, level)?);
    }
    println!("  Q(label) = {:.3}", triage_score(&calibrator, y, f_x, sigma, 0.5));
    println!("  CRPS     = {:.4}", crps(&calibrator, f_x, sigma, y));

    Ok(())
}
