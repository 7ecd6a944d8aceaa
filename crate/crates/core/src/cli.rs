//! The `triage` command-line interface.
//!
//! Every option can also be set in a flat `key = value` file passed with
//! `--config`; keys are the long flag names without the leading dashes and
//! flags on the command line win. All randomness is derived from `--seed`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::characterize::{characteristic_curve_export, CharacterizationConfig, Group};
use crate::conformal::{ConformalConfig, Tau, DEFAULT_K, DEFAULT_SIGMA_FLOOR};
use crate::dataset::{
    load_csv, split, split_pair, standardize_apply, standardize_fit, Dataset, ShiftSign, SplitSpec,
    StandardizationParams,
};
use crate::diagnostics::{validity, CpdBatch, DEFAULT_BINS};
use crate::dynamics::{calibrate_at, write_trajectories_csv, ScoringConfig};
use crate::error::{Result, TriageError};
use crate::io::{write_text, CsvWriter};
use crate::regressors::{final_residuals, loss_trajectory, ModelKind, TrainingConfig};
use crate::seed;
use crate::workflows::fixtures::LinearFixture;
use crate::workflows::{
    compare_datasets, feature_acquisition_curve, fine_grained_filter, huber_experiment, run_pipeline, sculpt,
    EvalMetrics, HuberConfig, PipelineConfig,
};

const LOCK_FILE: &str = ".triage.lock";

#[derive(Debug, Parser)]
#[command(name = "triage", version, about = "Characterize regression training data with conformal predictive distributions")]
#[command(after_help = "Set TRIAGE_LOG=error|info|debug for diagnostics on stderr.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score and group every training sample; writes scores, report, curve and summary.
    Characterize(CharacterizeArgs),
    /// Compare a difficulty-ranked subset with its well-estimated part.
    Filter(FilterArgs),
    /// Keep the samples that are well-estimated against a target-domain calibration set.
    Sculpt(SculptArgs),
    /// Rank candidate datasets by retention rate.
    Compare(CompareArgs),
    /// Group proportions as features are added, weakest first.
    Acquire(AcquireArgs),
    /// Calibration curve, coverage and CRPS on held-out data.
    Diagnose(DiagnoseArgs),
    /// Synthetic contamination benchmark.
    Huber(HuberArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key = value file with defaults for any option
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Training data CSV
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Name of the target column [default: y]
    #[arg(long)]
    pub target: Option<String>,
    /// Calibration data CSV [default: 20% split of --data]
    #[arg(long, value_name = "FILE")]
    pub cal_data: Option<PathBuf>,
    /// Test data CSV [default: 20% split of --data]
    #[arg(long, value_name = "FILE")]
    pub test_data: Option<PathBuf>,
    /// Regressor: linear, gbdt or mlp [default: gbdt]
    #[arg(long)]
    pub model: Option<String>,
    /// Epochs, or boosting stages for gbdt [default: 50; 80 for gbdt]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate [default: 0.1 linear, 0.2 gbdt, 0.01 mlp]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer widths for mlp, comma separated [default: 32,16]
    #[arg(long)]
    pub hidden: Option<String>,
    /// Tree depth for gbdt [default: 7]
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Neighbours used by the residual normalizer [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Lower bound on the residual normalizer [default: 1e-6]
    #[arg(long)]
    pub sigma_floor: Option<f64>,
    /// Tie-breaking policy: fixed:<v> or uniform [default: fixed:0.5]
    #[arg(long)]
    pub tau: Option<String>,
    /// Leading checkpoints left out of trajectories [default: 0]
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Upper confidence threshold [default: 0.75]
    #[arg(long)]
    pub c_up: Option<f64>,
    /// Lower confidence threshold [default: 0.25]
    #[arg(long)]
    pub c_low: Option<f64>,
    /// Variability percentile used as cutoff [default: 50]
    #[arg(long)]
    pub v_percentile: Option<f64>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: triage-out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Proportions of the easiest samples to keep, comma separated [default: 0.6,0.8,1.0]
    #[arg(long)]
    pub proportions: Option<String>,
    /// Difficulty ranking: residual (final |residual|) or loss (mean loss over checkpoints) [default: residual]
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Args)]
pub struct SculptArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Candidate dataset as label=path; repeat for each candidate
    #[arg(long = "candidate", value_name = "LABEL=FILE")]
    pub candidates: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AcquireArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Calibration-curve bins [default: 20]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Lower quantile level of the coverage interval [default: 0.05]
    #[arg(long)]
    pub lower: Option<f64>,
    /// Upper quantile level of the coverage interval [default: 0.95]
    #[arg(long)]
    pub upper: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HuberArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Contamination levels, comma separated [default: 0,0.05,0.1,0.2,0.3]
    #[arg(long)]
    pub epsilons: Option<String>,
    /// Training samples [default: 2000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Calibration samples [default: 1000]
    #[arg(long)]
    pub n_cal: Option<usize>,
    /// Test samples [default: 2000]
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Coefficients of the linear model, comma separated [default: 1,2,-1.5,0.5,3]
    #[arg(long)]
    pub coefficients: Option<String>,
    /// Noise standard deviation [default: 0.5]
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Shift of corrupted targets in noise standard deviations [default: 5]
    #[arg(long)]
    pub shift: Option<f64>,
    /// Shift direction: positive, negative or random [default: positive]
    #[arg(long)]
    pub sign: Option<String>,
}

/// Option values from `--config`.
#[derive(Debug, Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "data", "target", "cal-data", "test-data", "model", "epochs", "lr", "hidden", "max-depth", "k",
    "sigma-floor", "tau", "burn-in", "c-up", "c-low", "v-percentile", "seed", "out", "proportions",
    "baseline", "candidate", "bins", "lower", "upper", "epsilons", "n", "n-cal", "n-test",
    "coefficients", "noise-std", "shift", "sign",
];

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path).map_err(|e| TriageError::io(path, e))?;
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| TriageError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected key = value", no + 1),
            })?;
            let key = key.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(TriageError::Format {
                    path: path.to_path_buf(),
                    message: format!("line {}: unknown key '{key}'", no + 1),
                });
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| TriageError::invalid(format!("config value '{v}' is not valid for '{key}'")))
            })
            .transpose()
    }
}

/// Resolved options: flag, else config file, else default.
struct Resolver {
    file: ConfigFile,
}

impl Resolver {
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}

fn parse_list<T: FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| TriageError::invalid(format!("'{s}' is not a valid {what}")))
        })
        .collect()
}

fn parse_tau(text: &str, master: u64) -> Result<Tau> {
    let tau = if text == "uniform" {
        Tau::SeededUniform(seed::derive(master, "tau"))
    } else if let Some(v) = text.strip_prefix("fixed:") {
        Tau::Fixed(
            v.parse()
                .map_err(|_| TriageError::invalid(format!("'{v}' is not a valid tau value")))?,
        )
    } else {
        return Err(TriageError::invalid(format!("tau must be fixed:<v> or uniform, got '{text}'")));
    };
    tau.validate()?;
    Ok(tau)
}

/// Everything shared by the subcommands, after defaults are applied.
struct Settings {
    data: Option<PathBuf>,
    target: String,
    cal_data: Option<PathBuf>,
    test_data: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    pipeline: PipelineConfig,
}

fn settings(common: &CommonArgs, r: &Resolver) -> Result<Settings> {
    let master: u64 = r.or(common.seed, "seed", 0)?;
    let kind: ModelKind = r.or(common.model.clone(), "model", "gbdt".to_string())?.parse()?;
    let mut training = TrainingConfig::default_for(kind, seed::derive(master, "model"));
    training.epochs = r.or(common.epochs, "epochs", training.epochs)?;
    training.learning_rate = r.or(common.lr, "lr", training.learning_rate)?;
    training.max_depth = r.or(common.max_depth, "max-depth", training.max_depth)?;
    if let Some(h) = r.pick(common.hidden.clone(), "hidden")? {
        training.hidden_sizes = parse_list(&h, "layer width")?;
    }
    training.validate()?;
    let conformal = ConformalConfig {
        k: r.or(common.k, "k", DEFAULT_K)?,
        sigma_floor: r.or(common.sigma_floor, "sigma-floor", DEFAULT_SIGMA_FLOOR)?,
        ..ConformalConfig::default()
    };
    conformal.validate()?;
    let scoring = ScoringConfig {
        conformal,
        tau: parse_tau(&r.or(common.tau.clone(), "tau", "fixed:0.5".to_string())?, master)?,
        burn_in: r.or(common.burn_in, "burn-in", 0)?,
    };
    let defaults = CharacterizationConfig::default();
    let characterization = CharacterizationConfig {
        c_up: r.or(common.c_up, "c-up", defaults.c_up)?,
        c_low: r.or(common.c_low, "c-low", defaults.c_low)?,
        variability_percentile: r.or(common.v_percentile, "v-percentile", defaults.variability_percentile)?,
    };
    characterization.validate()?;
    Ok(Settings {
        data: r.pick(common.data.clone(), "data")?,
        target: r.or(common.target.clone(), "target", "y".to_string())?,
        cal_data: r.pick(common.cal_data.clone(), "cal-data")?,
        test_data: r.pick(common.test_data.clone(), "test-data")?,
        seed: master,
        out: r.or(common.out.clone(), "out", PathBuf::from("triage-out"))?,
        pipeline: PipelineConfig {
            training,
            scoring,
            characterization,
        },
    })
}

/// Holds the output-directory lock for the lifetime of a command.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| TriageError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(File { .. }) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(TriageError::invalid(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(TriageError::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Train, calibration and optional test sets standardized on the train part.
struct Prepared {
    train: Dataset,
    cal: Dataset,
    test: Option<Dataset>,
    params: StandardizationParams,
}

fn require_data(s: &Settings) -> Result<&Path> {
    s.data
        .as_deref()
        .ok_or_else(|| TriageError::invalid("--data is required"))
}

fn load_named(path: &Path, target: &str) -> Result<Dataset> {
    log::info!("loading {}", path.display());
    load_csv(path, target)
}

fn prepare(s: &Settings, need_test: bool) -> Result<Prepared> {
    let data = load_named(require_data(s)?, &s.target)?;
    let cal = s.cal_data.as_deref().map(|p| load_named(p, &s.target)).transpose()?;
    let test = s.test_data.as_deref().map(|p| load_named(p, &s.target)).transpose()?;
    let split_seed = seed::derive(s.seed, "split");
    let (train, cal, test) = match (cal, test) {
        (Some(c), Some(t)) => (data, c, Some(t)),
        (Some(c), None) if !need_test => (data, c, None),
        (Some(c), None) => {
            let (tr, te) = split_pair(&data, 0.2, split_seed)?;
            (tr, c, Some(te))
        }
        (None, Some(t)) => {
            let (tr, c) = split_pair(&data, 0.2, split_seed)?;
            (tr, c, Some(t))
        }
        (None, None) if need_test => {
            let (tr, c, te) = split(&data, &SplitSpec::new(0.6, 0.2, 0.2, split_seed)?)?;
            (tr, c, Some(te))
        }
        (None, None) => {
            let (tr, c) = split_pair(&data, 0.2, split_seed)?;
            (tr, c, None)
        }
    };
    for other in std::iter::once(&cal).chain(test.as_ref()) {
        if other.feature_names() != train.feature_names() {
            return Err(TriageError::invalid(format!(
                "column mismatch: training data has {:?}, got {:?}",
                train.feature_names(),
                other.feature_names()
            )));
        }
    }
    let params = standardize_fit(&train)?;
    Ok(Prepared {
        train: standardize_apply(&train, &params)?,
        cal: standardize_apply(&cal, &params)?,
        test: test.map(|t| standardize_apply(&t, &params)).transpose()?,
        params,
    })
}

/// Plain-text table with left-aligned columns.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    line(width.iter().map(|w| &"----------------------------------------"[..(*w).min(40)]).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn metrics_row(name: &str, m: &EvalMetrics) -> Vec<String> {
    vec![name.to_string(), m.n_train.to_string(), f6(m.mse), f6(m.mae), f6(m.mse_original), f6(m.mae_original)]
}

const METRICS_HEADER: [&str; 6] = ["model", "n_train", "mse", "mae", "mse_original", "mae_original"];

fn write_metrics_csv(path: &Path, rows: &[(&str, &EvalMetrics)]) -> Result<()> {
    let mut w = CsvWriter::create(path, &METRICS_HEADER)?;
    for (name, m) in rows {
        w.row(&[
            name.to_string(),
            m.n_train.to_string(),
            m.mse.to_string(),
            m.mae.to_string(),
            m.mse_original.to_string(),
            m.mae_original.to_string(),
        ])?;
    }
    w.finish()
}

fn cmd_characterize(args: &CharacterizeArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let p = prepare(&s, false)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let c = run_pipeline(&p.train, &p.cal, &s.pipeline)?;
    write_trajectories_csv(&c.trajectories, s.pipeline.scoring.burn_in, s.out.join("scores.csv"))?;
    characteristic_curve_export(&c.report, s.out.join("characterization"))?;
    let mut summary = c.report.summary();
    let _ = writeln!(summary, "model: {}", s.pipeline.training.kind);
    let _ = writeln!(summary, "checkpoints: {}", c.run.checkpoints());
    let _ = writeln!(summary, "calibration_size: {}", p.cal.len());
    write_text(s.out.join("summary.txt"), &summary)?;
    let rows: Vec<Vec<String>> = Group::ALL
        .iter()
        .map(|g| {
            let n = c.report.count(*g);
            vec![g.to_string(), n.to_string(), f4(n as f64 / c.report.len() as f64)]
        })
        .collect();
    Ok(table(&["group", "count", "proportion"], &rows))
}

fn cmd_filter(args: &FilterArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let ps: Vec<f64> = parse_list(&r.or(args.proportions.clone(), "proportions", "0.6,0.8,1.0".to_string())?, "proportion")?;
    let baseline = r.or(args.baseline.clone(), "baseline", "residual".to_string())?;
    let p = prepare(&s, true)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let test = p.test.as_ref().expect("prepared with a test set");
    let c = run_pipeline(&p.train, &p.cal, &s.pipeline)?;
    let scores: Vec<f64> = match baseline.as_str() {
        "residual" => final_residuals(&c.run, &p.train)?.iter().map(|r| r.abs()).collect(),
        "loss" => {
            let lt = loss_trajectory(&c.run, &p.train)?;
            lt.iter_rows().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect()
        }
        other => return Err(TriageError::invalid(format!("unknown baseline '{other}'"))),
    };
    let mut w = CsvWriter::create(
        s.out.join("filter.csv"),
        &["proportion", "n_baseline", "n_triage", "mse_baseline", "mse_triage", "mae_baseline", "mae_triage"],
    )?;
    let mut ids = CsvWriter::create(s.out.join("retained.csv"), &["proportion", "sample_id", "in_triage"])?;
    let mut rows = Vec::new();
    for &prop in &ps {
        let f = fine_grained_filter(&scores, &c.report, prop, &p.train, test, &s.pipeline.training, Some(&p.params))?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        w.row(&[
            prop.to_string(),
            f.baseline_ids.len().to_string(),
            f.retained_ids.len().to_string(),
            f.baseline.mse.to_string(),
            opt(f.triage.map(|m| m.mse)),
            f.baseline.mae.to_string(),
            opt(f.triage.map(|m| m.mae)),
        ])?;
        let kept: HashSet<&String> = f.retained_ids.iter().collect();
        for id in &f.baseline_ids {
            ids.row(&[prop.to_string(), id.clone(), kept.contains(id).to_string()])?;
        }
        rows.push(vec![
            prop.to_string(),
            f.baseline_ids.len().to_string(),
            f.retained_ids.len().to_string(),
            f6(f.baseline.mse),
            f.triage.map_or("-".to_string(), |m| f6(m.mse)),
        ]);
    }
    w.finish()?;
    ids.finish()?;
    let out = table(&["p", "n_baseline", "n_triage", "mse_baseline", "mse_triage"], &rows);
    write_text(s.out.join("summary.txt"), &format!("baseline: {baseline}\n{out}"))?;
    Ok(out)
}

fn cmd_sculpt(args: &SculptArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    if s.cal_data.is_none() || s.test_data.is_none() {
        return Err(TriageError::invalid("sculpt needs --cal-data (target domain) and --test-data"));
    }
    let p = prepare(&s, true)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let test = p.test.as_ref().expect("prepared with a test set");
    let res = sculpt(&p.train, &p.cal, test, &s.pipeline, Some(&p.params))?;
    res.report.write_csv(s.out.join("groups.csv"))?;
    let mut named: Vec<(&str, &EvalMetrics)> = vec![
        ("sculpted", &res.sculpted),
        ("full", &res.full),
        ("cal_only", &res.cal_only),
        ("union", &res.union),
    ];
    if let Some(m) = &res.removed {
        named.push(("removed", m));
    }
    write_metrics_csv(&s.out.join("sculpt.csv"), &named)?;
    let rows: Vec<Vec<String>> = named.iter().map(|(n, m)| metrics_row(n, m)).collect();
    let mut out = format!(
        "kept {} of {} training samples, calibration size {}\n",
        res.kept_ids.len(),
        p.train.len(),
        res.cal_size
    );
    out.push_str(&table(&METRICS_HEADER, &rows));
    write_text(s.out.join("summary.txt"), &out)?;
    Ok(out)
}

fn cmd_compare(args: &CompareArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let mut specs = args.candidates.clone();
    if specs.is_empty() {
        if let Some(list) = r.file.values.get("candidate") {
            specs = list.split(',').map(|x| x.trim().to_string()).collect();
        }
    }
    let test_path = s
        .test_data
        .clone()
        .ok_or_else(|| TriageError::invalid("compare needs --test-data (real data)"))?;
    let mut candidates = Vec::new();
    for spec in &specs {
        let (label, path) = spec
            .split_once('=')
            .ok_or_else(|| TriageError::invalid(format!("candidate '{spec}' is not label=path")))?;
        candidates.push((label.to_string(), load_named(Path::new(path), &s.target)?));
    }
    let test = load_named(&test_path, &s.target)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let ranking = compare_datasets(&candidates, &test, &s.pipeline, s.seed)?;
    let mut w = CsvWriter::create(s.out.join("ranking.csv"), &["rank", "label", "retention_rate", "test_mae", "n_samples"])?;
    let mut rows = Vec::new();
    for (i, c) in ranking.iter().enumerate() {
        w.row(&[
            (i + 1).to_string(),
            c.label.clone(),
            c.retention_rate.to_string(),
            c.test_mae.to_string(),
            c.n_samples.to_string(),
        ])?;
        rows.push(vec![(i + 1).to_string(), c.label.clone(), f4(c.retention_rate), f6(c.test_mae)]);
    }
    w.finish()?;
    let out = table(&["rank", "label", "retention", "test_mae"], &rows);
    write_text(s.out.join("summary.txt"), &out)?;
    Ok(out)
}

fn cmd_acquire(args: &AcquireArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let data = load_named(require_data(&s)?, &s.target)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let curve = feature_acquisition_curve(&data, &s.pipeline, s.seed)?;
    let mut w = CsvWriter::create(
        s.out.join("acquisition.csv"),
        &["n_features", "added_feature", "abs_correlation", "UE", "OE", "WE"],
    )?;
    let mut rows = Vec::new();
    for (step, corr) in curve.steps.iter().zip(&curve.abs_correlations) {
        let p = step.proportions;
        w.row(&[
            step.n_features.to_string(),
            step.added_feature.clone(),
            corr.to_string(),
            p.under.to_string(),
            p.over.to_string(),
            p.well.to_string(),
        ])?;
        rows.push(vec![
            step.n_features.to_string(),
            step.added_feature.clone(),
            f4(p.under),
            f4(p.over),
            f4(p.well),
        ]);
    }
    w.finish()?;
    let out = table(&["features", "added", "UE", "OE", "WE"], &rows);
    write_text(s.out.join("summary.txt"), &out)?;
    Ok(out)
}

fn cmd_diagnose(args: &DiagnoseArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let bins = r.or(args.bins, "bins", DEFAULT_BINS)?;
    let lower = r.or(args.lower, "lower", 0.05)?;
    let upper = r.or(args.upper, "upper", 0.95)?;
    let p = prepare(&s, true)?;
    let _lock = OutputLock::acquire(&s.out)?;
    let test = p.test.as_ref().expect("prepared with a test set");
    let run = crate::regressors::fit(&p.train, &s.pipeline.training)?;
    let calibrator = calibrate_at(&run, None, &p.cal, &s.pipeline.scoring.conformal)?;
    let batch = CpdBatch::new(&calibrator, run.predict_final(test.features())?, test)?;
    let (summary, curve, pits) = validity(&batch, test.targets(), seed::derive(s.seed, "pit"), bins, (lower, upper))?;
    curve.write_csv(s.out.join("calibration_curve.csv"))?;
    let mut w = CsvWriter::create(s.out.join("pit.csv"), &["sample_id", "pit"])?;
    for (id, v) in test.sample_ids().iter().zip(&pits) {
        w.row(&[id.clone(), v.to_string()])?;
    }
    w.finish()?;
    let text = summary.to_text();
    write_text(s.out.join("summary.txt"), &text)?;
    let rows = vec![
        vec!["ks_statistic".to_string(), f4(summary.ks_statistic)],
        vec!["calibration_max_deviation".to_string(), f4(summary.calibration_max_deviation)],
        vec![format!("coverage [{lower}, {upper}]"), f4(summary.coverage)],
        vec!["mean_crps".to_string(), f6(summary.mean_crps)],
    ];
    Ok(table(&["metric", "value"], &rows))
}

fn cmd_huber(args: &HuberArgs, r: &Resolver) -> Result<String> {
    let s = settings(&args.common, r)?;
    let defaults = HuberConfig::default();
    let epsilons = match r.pick(args.epsilons.clone(), "epsilons")? {
        Some(t) => parse_list(&t, "contamination level")?,
        None => defaults.epsilons.clone(),
    };
    let coefficients = match r.pick(args.coefficients.clone(), "coefficients")? {
        Some(t) => parse_list(&t, "coefficient")?,
        None => defaults.fixture.coefficients.clone(),
    };
    let sign = match r.or(args.sign.clone(), "sign", "positive".to_string())?.as_str() {
        "positive" => ShiftSign::Positive,
        "negative" => ShiftSign::Negative,
        "random" => ShiftSign::Random,
        other => return Err(TriageError::invalid(format!("unknown shift sign '{other}'"))),
    };
    let cfg = HuberConfig {
        epsilons,
        fixture: LinearFixture::new(
            coefficients,
            r.or(args.noise_std, "noise-std", defaults.fixture.noise_std)?,
            r.or(args.n, "n", defaults.fixture.n_train)?,
            r.or(args.n_cal, "n-cal", defaults.fixture.n_cal)?,
            r.or(args.n_test, "n-test", defaults.fixture.n_test)?,
        ),
        shift_noise_stds: r.or(args.shift, "shift", defaults.shift_noise_stds)?,
        sign,
        pipeline: s.pipeline.clone(),
        seed: s.seed,
    };
    let _lock = OutputLock::acquire(&s.out)?;
    let report = huber_experiment(&cfg)?;
    report.write_csv(s.out.join("huber.csv"))?;
    let opt = |v: Option<f64>, f: fn(f64) -> String| v.map_or("-".to_string(), f);
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.epsilon.to_string(),
                f6(row.mse_unfiltered),
                f6(row.mse_residual),
                opt(row.mse_triage, f6),
                opt(row.precision, f4),
                opt(row.recall, f4),
            ]
        })
        .collect();
    let out = table(&["epsilon", "mse_none", "mse_residual", "mse_triage", "precision", "recall"], &rows);
    write_text(s.out.join("summary.txt"), &out)?;
    Ok(out)
}

/// Runs a parsed command and returns its summary table.
pub fn run(cli: &Cli) -> Result<String> {
    let common = match &cli.command {
        Command::Characterize(a) => &a.common,
        Command::Filter(a) => &a.common,
        Command::Sculpt(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::Acquire(a) => &a.common,
        Command::Diagnose(a) => &a.common,
        Command::Huber(a) => &a.common,
    };
    let r = Resolver {
        file: ConfigFile::load(common.config.as_deref())?,
    };
    match &cli.command {
        Command::Characterize(a) => cmd_characterize(a, &r),
        Command::Filter(a) => cmd_filter(a, &r),
        Command::Sculpt(a) => cmd_sculpt(a, &r),
        Command::Compare(a) => cmd_compare(a, &r),
        Command::Acquire(a) => cmd_acquire(a, &r),
        Command::Diagnose(a) => cmd_diagnose(a, &r),
        Command::Huber(a) => cmd_huber(a, &r),
    }
}

/// Exit code for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(e: &TriageError) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRIAGE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_parsing() {
        assert_eq!(parse_tau("fixed:0.25", 0).unwrap(), Tau::Fixed(0.25));
        assert!(matches!(parse_tau("uniform", 3).unwrap(), Tau::SeededUniform(_)));
        assert!(parse_tau("fixed:2", 0).is_err());
        assert!(parse_tau("sometimes", 0).is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# defaults\nk = 7\nc_up = 0.8\nmodel = linear\n").unwrap();
        let r = Resolver {
            file: ConfigFile::load(Some(&path)).unwrap(),
        };
        let common = CommonArgs {
            k: Some(3),
            ..Default::default()
        };
        let s = settings(&common, &r).unwrap();
        assert_eq!(s.pipeline.scoring.conformal.k, 3);
        assert_eq!(s.pipeline.characterization.c_up, 0.8);
        assert_eq!(s.pipeline.training.kind, ModelKind::LinearSgd);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "learning-rate = 0.1\n").unwrap();
        assert!(ConfigFile::load(Some(&path)).is_err());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputLock::acquire(dir.path()).unwrap();
        assert!(OutputLock::acquire(dir.path()).is_err());
        drop(first);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn help_mentions_every_default() {
        use clap::CommandFactory;
        let cmd = Cli::command();
        for sub in cmd.get_subcommands() {
            for arg in sub.get_arguments() {
                let id = arg.get_id().as_str();
                if ["config", "data", "candidates", "help"].contains(&id) {
                    continue;
                }
                let help = arg.get_help().map(|h| h.to_string()).unwrap_or_default();
                assert!(help.contains("[default:"), "{} --{id} lacks a documented default", sub.get_name());
            }
        }
    }
}
