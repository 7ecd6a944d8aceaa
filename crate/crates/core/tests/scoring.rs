use std::collections::HashSet;

use triage::dataset::ShiftSign;
use triage::dynamics::{score_all, summarize, ScoringConfig};
use triage::prelude::*;
use triage::workflows::fixtures::{LinearFixture, ShiftFixture};
use triage::workflows::{fine_grained_filter, huber_experiment, run_pipeline, sculpt, HuberConfig, PipelineConfig};

fn small_fixture(seed: u64) -> triage::workflows::fixtures::FixtureData {
    LinearFixture::new(vec![1.0, -2.0, 0.5], 0.3, 300, 120, 100).clean(seed).unwrap()
}

#[test]
fn scores_and_variabilities_stay_in_range() {
    let f = small_fixture(3);
    for cfg in [
        TrainingConfig::linear(30, 0.2, 3),
        TrainingConfig::gbdt(15, 0.3, 3, 3),
        TrainingConfig::feedforward(vec![8], 20, 0.01, 3),
    ] {
        let run = fit(&f.train, &cfg).unwrap();
        let trajs = score_all(&run, &f.train, &f.cal, &ScoringConfig::default()).unwrap();
        for t in &trajs {
            assert!(t.scores.iter().all(|s| (0.0..=1.0).contains(s)));
        }
        for s in summarize(&trajs).unwrap() {
            assert!((0.0..=0.5).contains(&s.variability), "{}", s.variability);
        }
    }
}

#[test]
fn scoring_is_deterministic() {
    let f = small_fixture(4);
    let run = fit(&f.train, &TrainingConfig::gbdt(10, 0.3, 3, 4)).unwrap();
    let a = score_all(&run, &f.train, &f.cal, &ScoringConfig::default()).unwrap();
    let b = score_all(&run, &f.train, &f.cal, &ScoringConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn later_checkpoints_do_not_leak_into_earlier_scores() {
    let f = small_fixture(5);
    let run = fit(&f.train, &TrainingConfig::gbdt(12, 0.3, 3, 5)).unwrap();
    let full = score_all(&run, &f.train, &f.cal, &ScoringConfig::default()).unwrap();
    let cut = score_all(&run.truncated(6).unwrap(), &f.train, &f.cal, &ScoringConfig::default()).unwrap();
    for (a, b) in full.iter().zip(&cut) {
        assert_eq!(&a.scores[..6], &b.scores[..]);
    }
}

#[test]
fn burn_in_drops_leading_checkpoints() {
    let f = small_fixture(6);
    let run = fit(&f.train, &TrainingConfig::gbdt(10, 0.3, 3, 6)).unwrap();
    let all = score_all(&run, &f.train, &f.cal, &ScoringConfig::default()).unwrap();
    let cfg = ScoringConfig {
        burn_in: 4,
        ..ScoringConfig::default()
    };
    let late = score_all(&run, &f.train, &f.cal, &cfg).unwrap();
    assert_eq!(&all[0].scores[4..], &late[0].scores[..]);
}

#[test]
fn contaminated_samples_leave_the_confident_middle() {
    let f = LinearFixture::new(vec![1.0, 2.0, -1.5, 0.5, 3.0], 0.5, 2000, 1000, 10)
        .contaminated(0.1, 5.0, ShiftSign::Positive, 42)
        .unwrap();
    let c = run_pipeline(&f.train, &f.cal, &PipelineConfig::default()).unwrap();
    let dirty: Vec<_> = c.stats.iter().zip(&f.mask).filter(|(_, &m)| m).map(|(s, _)| s).collect();
    let outside = dirty.iter().filter(|s| !(0.25..=0.75).contains(&s.confidence)).count();
    assert!(outside as f64 >= 0.9 * dirty.len() as f64, "{outside}/{}", dirty.len());
}

#[test]
fn filter_keeps_a_subset_of_the_baseline() {
    let f = small_fixture(7);
    let cfg = PipelineConfig::new(TrainingConfig::gbdt(10, 0.3, 3, 7));
    let c = run_pipeline(&f.train, &f.cal, &cfg).unwrap();
    let scores: Vec<f64> = (0..f.train.len()).map(|i| ((i * 31) % 17) as f64).collect();
    for p in [0.3, 0.7, 1.0] {
        let r = fine_grained_filter(&scores, &c.report, p, &f.train, &f.test, &cfg.training, None).unwrap();
        let base: HashSet<_> = r.baseline_ids.iter().collect();
        assert!(r.retained_ids.iter().all(|id| base.contains(id)));
    }
}

#[test]
fn sculpt_splits_the_training_set() {
    let fixture = ShiftFixture {
        base: LinearFixture::new(vec![1.0, 2.0, -1.5], 0.5, 400, 50, 100),
        feature: 0,
        threshold: 0.5,
        shifted_fraction: 0.5,
        shift_noise_stds: 4.0,
    };
    let f = fixture.generate(8).unwrap();
    let cfg = PipelineConfig::new(TrainingConfig::gbdt(15, 0.3, 3, 8));
    let r = sculpt(&f.train, &f.cal, &f.test, &cfg, None).unwrap();
    assert_eq!(r.kept_ids.len() + r.removed_ids.len(), f.train.len());
    let kept: HashSet<_> = r.kept_ids.iter().collect();
    assert!(r.removed_ids.iter().all(|id| !kept.contains(id)));
}

#[test]
fn clean_huber_fixture_flags_few_samples() {
    let cfg = HuberConfig {
        epsilons: vec![0.0],
        ..HuberConfig::default()
    };
    let report = huber_experiment(&cfg).unwrap();
    let row = &report.rows[0];
    assert_eq!(row.n_contaminated, 0);
    assert!((row.n_flagged as f64) < 0.15 * cfg.fixture.n_train as f64, "{}", row.n_flagged);
}

#[test]
fn workflows_are_deterministic() {
    let f = small_fixture(9);
    let cfg = PipelineConfig::new(TrainingConfig::feedforward(vec![8], 15, 0.01, 9));
    let a = run_pipeline(&f.train, &f.cal, &cfg).unwrap();
    let b = run_pipeline(&f.train, &f.cal, &cfg).unwrap();
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.report.records, b.report.records);
}

#[test]
fn shifted_test_data_breaks_uniformity() {
    use triage::diagnostics::{ks_uniform, pit_values, CpdBatch};
    use triage::dynamics::calibrate_at;

    let f = LinearFixture::new(vec![1.0, 2.0, -1.5], 0.3, 1000, 500, 1000).clean(10).unwrap();
    let run = fit(&f.train, &TrainingConfig::gbdt(30, 0.2, 4, 10)).unwrap();
    let cal = calibrate_at(&run, None, &f.cal, &ScoringConfig::default().conformal).unwrap();
    let t = f.test.targets();
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let sd = (t.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / t.len() as f64).sqrt();
    let shifted = f.test.with_targets(t.iter().map(|y| y + 2.0 * sd).collect()).unwrap();
    let batch = CpdBatch::new(&cal, run.predict_final(shifted.features()).unwrap(), &shifted).unwrap();
    let ks = ks_uniform(&pit_values(&batch, shifted.targets(), 1).unwrap()).unwrap();
    assert!(ks > 0.1, "{ks}");
}
