//! Score every training sample of a contaminated linear dataset and split it
//! into under-, over- and well-estimated groups.
//!
//! Writes the report CSV and characteristic curve to the system temp dir.

use triage::characterize::characteristic_curve_export;
use triage::dataset::ShiftSign;
use triage::prelude::*;
use triage::workflows::fixtures::LinearFixture;
use triage::workflows::{run_pipeline, PipelineConfig};

fn main() -> triage::Result<()> {
    let fixture = LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, 1000, 500);
    let data = fixture.contaminated(0.1, 5.0, ShiftSign::Positive, 42)?;

    let c = run_pipeline(&data.train, &data.cal, &PipelineConfig::default())?;
    print!("{}", c.report.summary());

    // how many of the corrupted labels ended up outside the well-estimated group
    let flagged = c
        .report
        .records
        .iter()
        .zip(&data.mask)
        .filter(|(r, &dirty)| dirty && r.group != Group::WellEstimated)
        .count();
    let dirty = data.mask.iter().filter(|&&m| m).count();
    println!("contaminated samples flagged: {flagged}/{dirty}");

    let stem = std::env::temp_dir().join("triage-characterization");
    characteristic_curve_export(&c.report, &stem)?;
    println!("curve written to {}.svg", stem.display());
    Ok(())
}
