//! A subgroup of the training data has shifted targets. A small calibration
//! set from the target domain is enough to find and drop it.

use triage::workflows::fixtures::{LinearFixture, ShiftFixture};
use triage::workflows::{sculpt, PipelineConfig};

fn main() -> triage::Result<()> {
    for q in [10, 50, 200] {
        let fixture = ShiftFixture {
            base: LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, q, 2000),
            feature: 0,
            threshold: 0.5,
            shifted_fraction: 0.5,
            shift_noise_stds: 4.0,
        };
        let data = fixture.generate(42)?;
        let r = sculpt(&data.train, &data.cal, &data.test, &PipelineConfig::default(), None)?;
        println!(
            "cal size {q:>3}: kept {:>4}  mse sculpted {:.5}  full {:.5}  cal-only {:.5}",
            r.kept_ids.len(),
            r.sculpted.mse,
            r.full.mse,
            r.cal_only.mse
        );
    }
    Ok(())
}
