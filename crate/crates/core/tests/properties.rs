use std::collections::HashSet;

use proptest::prelude::*;
use triage::characterize::{assign_groups, CharacterizationConfig, Group};
use triage::conformal::{cpd_eval, ConformalCalibrator};
use triage::dataset::{
    contaminate, load_csv, split, standardize_apply, standardize_fit, write_csv, ContaminationSpec, Dataset,
    SplitSpec,
};
use triage::diagnostics::spearman;
use triage::dynamics::TrajectoryStats;
use triage::matrix::Matrix;
use triage::regressors::{fit, TrainingConfig};

fn dataset(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> Dataset {
    Dataset::from_parts(Matrix::from_rows(&rows).unwrap(), targets).unwrap()
}

fn arb_dataset(max_n: usize, dim: usize) -> impl Strategy<Value = Dataset> {
    (5..max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-100.0..100.0f64, dim), n),
            prop::collection::vec(-50.0..50.0f64, n),
        )
            .prop_map(|(rows, y)| dataset(rows, y))
    })
}

fn stats(cv: &[(f64, f64)]) -> Vec<TrajectoryStats> {
    cv.iter()
        .enumerate()
        .map(|(i, &(c, v))| TrajectoryStats {
            sample_id: i.to_string(),
            confidence: c,
            variability: v,
        })
        .collect()
}

fn arb_stats() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..=1.0f64, 0.0..=0.5f64), 1..80)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_an_exhaustive_disjoint_partition(
        n in 10usize..400,
        cal in 0.05..0.4f64,
        test in 0.05..0.4f64,
        seed in any::<u64>(),
    ) {
        let ds = dataset((0..n).map(|i| vec![i as f64]).collect(), vec![0.0; n]);
        let spec = SplitSpec::new(1.0 - cal - test, cal, test, seed).unwrap();
        if let Ok((a, b, c)) = split(&ds, &spec) {
            prop_assert_eq!(a.len() + b.len() + c.len(), n);
            let mut seen = HashSet::new();
            for id in a.sample_ids().iter().chain(b.sample_ids()).chain(c.sample_ids()) {
                prop_assert!(seen.insert(id.clone()));
            }
        }
    }

    #[test]
    fn standardize_round_trip(ds in arb_dataset(60, 3)) {
        let p = standardize_fit(&ds).unwrap();
        let back = p.invert(&standardize_apply(&ds, &p).unwrap()).unwrap();
        for i in 0..ds.len() {
            for (a, b) in ds.row(i).iter().zip(back.row(i)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((ds.targets()[i] - back.targets()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn contamination_touches_exactly_floor_eps_n(ds in arb_dataset(200, 2), eps in 0.0..0.5f64, seed in any::<u64>()) {
        let (out, mask) = contaminate(&ds, &ContaminationSpec::new(eps, 1.0, seed)).unwrap();
        let expected = (eps * ds.len() as f64).floor() as usize;
        prop_assert_eq!(mask.iter().filter(|&&m| m).count(), expected);
        prop_assert_eq!(out.features(), ds.features());
        for ((a, b), m) in ds.targets().iter().zip(out.targets()).zip(&mask) {
            prop_assert_eq!(a != b, *m);
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact(ds in arb_dataset(40, 3)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&ds, &path, "y").unwrap();
        let again = load_csv(&path, "y").unwrap();
        prop_assert_eq!(again.features(), ds.features());
        prop_assert_eq!(again.targets(), ds.targets());
        prop_assert_eq!(again.sample_ids(), ds.sample_ids());
    }

    #[test]
    fn cpd_is_monotone_and_bounded(
        alphas in prop::collection::vec(-3.0..3.0f64, 1..40),
        f in -5.0..5.0f64,
        sigma in 0.01..3.0f64,
        tau in 0.0..=1.0f64,
        mut grid in prop::collection::vec(-15.0..15.0f64, 2..30),
    ) {
        let c = ConformalCalibrator::from_alphas(alphas).unwrap();
        let q = c.q() as f64;
        grid.sort_by(f64::total_cmp);
        let mut last = f64::NEG_INFINITY;
        for &y in &grid {
            let v = cpd_eval(&c, f, sigma, y, tau);
            prop_assert!(v >= last);
            prop_assert!(v >= tau / (q + 1.0) && v <= (q + tau) / (q + 1.0));
            last = v;
        }
    }

    #[test]
    fn cpd_is_translation_equivariant(
        alphas in prop::collection::vec(-24i32..24, 1..30),
        f in -40i32..40,
        y in -80i32..80,
        shift in -400i32..400,
        sigma_pow in -2i32..3,
        tau in 0.0..=1.0f64,
    ) {
        // dyadic inputs keep every sum exact, so ties survive the shift
        let eighth = |v: i32| v as f64 / 8.0;
        let c = ConformalCalibrator::from_alphas(alphas.iter().map(|&a| eighth(a)).collect()).unwrap();
        let sigma = 2f64.powi(sigma_pow);
        let before = cpd_eval(&c, eighth(f), sigma, eighth(y), tau);
        let after = cpd_eval(&c, eighth(f + shift), sigma, eighth(y + shift), tau);
        prop_assert_eq!(before, after);
    }

    #[test]
    fn gbdt_training_mse_never_increases(
        ds in arb_dataset(80, 2),
        lr in 0.05..=1.0f64,
        depth in 1usize..5,
    ) {
        let cfg = TrainingConfig { min_samples_leaf: 1, ..TrainingConfig::gbdt(8, lr, depth, 1) };
        let run = fit(&ds, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for e in 1..=run.checkpoints() {
            let pred = run.predict(e, ds.features()).unwrap();
            let mse = pred.iter().zip(ds.targets()).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ds.len() as f64;
            prop_assert!(mse <= last * (1.0 + 1e-12) + 1e-12, "stage {}: {} > {}", e, mse, last);
            last = mse;
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 3..60),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let ta: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        let tb: Vec<f64> = b.iter().map(|x| x * x * x - 7.0).collect();
        let base = spearman(&a, &b).unwrap();
        let moved = spearman(&ta, &tb).unwrap();
        match (base, moved) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (x, y) => prop_assert_eq!(x, y),
        }
    }

    #[test]
    fn groups_partition_the_samples(cv in arb_stats(), pct in 0.0..=100.0f64) {
        let cfg = CharacterizationConfig { variability_percentile: pct, ..CharacterizationConfig::default() };
        let r = assign_groups(&stats(&cv), &cfg).unwrap();
        let total: usize = Group::ALL.iter().map(|g| r.count(*g)).sum();
        prop_assert_eq!(total, cv.len());
        let sum = r.proportions.under + r.proportions.over + r.proportions.well;
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaling_variability_keeps_groups(cv in arb_stats(), scale in 0.01..100.0f64) {
        let cfg = CharacterizationConfig::default();
        let scaled: Vec<(f64, f64)> = cv.iter().map(|&(c, v)| (c, v * scale)).collect();
        let a = assign_groups(&stats(&cv), &cfg).unwrap();
        let b = assign_groups(&stats(&scaled), &cfg).unwrap();
        // exact ties with the cutoff can flip under rounding; compare away from it
        for ((ra, rb), &(_, v)) in a.records.iter().zip(&b.records).zip(&cv) {
            if (v - a.variability_cutoff).abs() > 1e-9 * (1.0 + v) {
                prop_assert_eq!(ra.group, rb.group);
            }
        }
    }

    #[test]
    fn raising_c_up_only_shrinks_under_estimated(cv in arb_stats(), lo in 0.5..0.9f64, step in 0.0..0.1f64) {
        let base = CharacterizationConfig { c_up: lo, ..CharacterizationConfig::default() };
        let raised = CharacterizationConfig { c_up: lo + step, ..base };
        let a = assign_groups(&stats(&cv), &base).unwrap();
        let b = assign_groups(&stats(&cv), &raised).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            if rb.group == Group::UnderEstimated {
                prop_assert_eq!(ra.group, Group::UnderEstimated);
            }
        }
    }
}
