use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use triage::dataset::{generate_linear_synthetic, write_csv};

const BIN: &str = env!("CARGO_BIN_EXE_triage");

fn triage(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn data_file(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let ds = generate_linear_synthetic(n, &[1.0, 2.0, -1.5], 0.3, seed).unwrap();
    let path = dir.join(name);
    write_csv(&ds, &path, "y").unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn characterize_writes_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 400, 1);
    let out = dir.path().join("out");
    let o = triage(&["characterize", "--data", s(&data), "--epochs", "10", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files_in(&out),
        ["characterization.csv", "characterization.svg", "scores.csv", "summary.txt"]
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("WE"), "{stdout}");
}

#[test]
fn missing_target_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 50, 1);
    let o = triage(&["characterize", "--data", s(&data), "--target", "price", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("price"), "{err}");
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(triage(&["characterize", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(triage(&["characterize", "--k", "many"]).status.code(), Some(1));
    assert_eq!(triage(&["characterize"]).status.code(), Some(1));
    assert_eq!(triage(&["--help"]).status.code(), Some(0));
    for sub in ["characterize", "filter", "sculpt", "compare", "acquire", "diagnose", "huber"] {
        let o = triage(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let help = String::from_utf8_lossy(&o.stdout);
        for flag in ["--data", "--target", "--model", "--epochs", "--k", "--sigma-floor", "--tau", "--c-up", "--c-low", "--v-percentile", "--seed", "--out"] {
            assert!(help.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(help.contains("[default: 0.75]"));
    }
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 200, 2);
    let o = triage(&[
        "characterize", "--data", s(&data), "--model", "linear", "--lr", "1e9", "--out", s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn busy_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 100, 3);
    let out = dir.path().join("o");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".triage.lock"), "").unwrap();
    let o = triage(&["characterize", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("in use"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 300, 4);
    let conf = dir.path().join("run.conf");
    fs::write(&conf, format!("# shared settings\ndata = {}\nepochs = 6\nc-up = 0.9\n", s(&data))).unwrap();
    let out = dir.path().join("o");
    let o = triage(&["characterize", "--config", s(&conf), "--c-up", "0.8", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("c_up: 0.8"), "{summary}");
    assert!(summary.contains("checkpoints: 6"), "{summary}");

    fs::write(&conf, "epoch = 6\n").unwrap();
    let o = triage(&["characterize", "--config", s(&conf), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn huber_reports_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = triage(&[
        "huber", "--epsilons", "0,0.1,0.2", "--n", "300", "--n-cal", "150", "--n-test", "150", "--epochs", "20",
        "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("huber.csv")), 3);
}

#[test]
fn compare_ranks_every_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let a = data_file(dir.path(), "a.csv", 300, 5);
    let b = data_file(dir.path(), "b.csv", 300, 6);
    let test = data_file(dir.path(), "test.csv", 200, 7);
    let out = dir.path().join("o");
    let o = triage(&[
        "compare",
        "--candidate",
        &format!("first={}", s(&a)),
        "--candidate",
        &format!("second={}", s(&b)),
        "--test-data",
        s(&test),
        "--epochs",
        "10",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("ranking.csv")), 2);
}

#[test]
fn diagnose_summary_has_the_validity_fields() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 600, 8);
    let out = dir.path().join("o");
    let o = triage(&["diagnose", "--data", s(&data), "--epochs", "20", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for field in ["coverage:", "ks_statistic:", "mean_crps:"] {
        assert!(summary.contains(field), "{summary}");
    }
}

#[test]
fn filter_sculpt_and_acquire_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_file(dir.path(), "train.csv", 500, 9);
    let cal = data_file(dir.path(), "cal.csv", 100, 10);
    let test = data_file(dir.path(), "test.csv", 100, 11);
    let runs: [(&str, Vec<&str>, &str); 3] = [
        ("filter", vec!["--data", s(&data), "--proportions", "0.5,1.0"], "filter.csv"),
        ("sculpt", vec!["--data", s(&data), "--cal-data", s(&cal), "--test-data", s(&test)], "sculpt.csv"),
        ("acquire", vec!["--data", s(&data)], "acquisition.csv"),
    ];
    for (sub, extra, file) in runs {
        let out = dir.path().join(sub);
        let mut args = vec![sub, "--epochs", "10", "--out", s(&out)];
        args.extend(extra);
        let o = triage(&args);
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join(file).exists(), "{sub}");
        assert!(!out.join(".triage.lock").exists());
    }
}
