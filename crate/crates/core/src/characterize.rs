//! Group assignment from (confidence, variability) and report output.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::TrajectoryStats;
use crate::error::{Result, TriageError};
use crate::io::{write_text, CsvWriter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    UnderEstimated,
    OverEstimated,
    WellEstimated,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::UnderEstimated, Group::OverEstimated, Group::WellEstimated];

    pub fn short(&self) -> &'static str {
        match self {
            Group::UnderEstimated => "UE",
            Group::OverEstimated => "OE",
            Group::WellEstimated => "WE",
        }
    }

    fn color(&self) -> &'static str {
        match self {
            Group::UnderEstimated => "#d62728",
            Group::OverEstimated => "#1f77b4",
            Group::WellEstimated => "#7f7f7f",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Group {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UE" => Ok(Group::UnderEstimated),
            "OE" => Ok(Group::OverEstimated),
            "WE" => Ok(Group::WellEstimated),
            other => Err(TriageError::invalid(format!("unknown group '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationConfig {
    pub c_up: f64,
    pub c_low: f64,
    /// Percentile of the variability distribution used as cutoff, in `[0, 100]`.
    pub variability_percentile: f64,
}

impl Default for CharacterizationConfig {
    fn default() -> Self {
        CharacterizationConfig {
            c_up: 0.75,
            c_low: 0.25,
            variability_percentile: 50.0,
        }
    }
}

impl CharacterizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.c_low && self.c_low < self.c_up && self.c_up <= 1.0) {
            return Err(TriageError::invalid(format!(
                "need 0 <= c_low < c_up <= 1, got c_low={} c_up={}",
                self.c_low, self.c_up
            )));
        }
        if !(0.0..=100.0).contains(&self.variability_percentile) {
            return Err(TriageError::invalid("variability percentile must lie in [0, 100]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub confidence: f64,
    pub variability: f64,
    pub group: Group,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupProportions {
    pub under: f64,
    pub over: f64,
    pub well: f64,
}

impl GroupProportions {
    fn of(groups: impl Iterator<Item = Group>) -> Self {
        let (mut u, mut o, mut w) = (0usize, 0usize, 0usize);
        for g in groups {
            match g {
                Group::UnderEstimated => u += 1,
                Group::OverEstimated => o += 1,
                Group::WellEstimated => w += 1,
            }
        }
        let n = (u + o + w).max(1) as f64;
        GroupProportions {
            under: u as f64 / n,
            over: o as f64 / n,
            well: w as f64 / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationReport {
    pub records: Vec<SampleRecord>,
    pub proportions: GroupProportions,
    pub config: CharacterizationConfig,
    pub variability_cutoff: f64,
}

impl CharacterizationReport {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids_in(&self, group: Group) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.sample_id.clone())
            .collect()
    }

    pub fn count(&self, group: Group) -> usize {
        self.records.iter().filter(|r| r.group == group).count()
    }

    pub fn groups(&self) -> Vec<Group> {
        self.records.iter().map(|r| r.group).collect()
    }

    /// CSV with columns `sample_id,confidence,variability,group`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = CsvWriter::create(path, &["sample_id", "confidence", "variability", "group"])?;
        for r in &self.records {
            w.row(&[
                r.sample_id.clone(),
                r.confidence.to_string(),
                r.variability.to_string(),
                r.group.to_string(),
            ])?;
        }
        w.finish()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "samples: {}", self.records.len());
        let _ = writeln!(s, "c_up: {}", c.c_up);
        let _ = writeln!(s, "c_low: {}", c.c_low);
        let _ = writeln!(s, "variability_percentile: {}", c.variability_percentile);
        let _ = writeln!(s, "variability_cutoff: {}", self.variability_cutoff);
        let _ = writeln!(s, "proportion_UE: {}", self.proportions.under);
        let _ = writeln!(s, "proportion_OE: {}", self.proportions.over);
        let _ = writeln!(s, "proportion_WE: {}", self.proportions.well);
        let _ = writeln!(s, "retention_rate: {}", retention_rate(self));
        s
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path, &self.summary())
    }
}

/// Reads back a report CSV written by [`CharacterizationReport::write_csv`].
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| TriageError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TriageError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let num = |j: usize, name: &str| -> Result<f64> {
            rec[j].parse().map_err(|_| TriageError::Parse {
                row,
                column: name.to_string(),
                message: format!("'{}' is not a number", &rec[j]),
            })
        };
        out.push(SampleRecord {
            sample_id: rec[0].to_string(),
            confidence: num(1, "confidence")?,
            variability: num(2, "variability")?,
            group: rec[3].parse()?,
        });
    }
    Ok(out)
}

/// Percentile with linear interpolation between order statistics. The 100th
/// percentile is `+inf`, so a strict `<` comparison against it admits every
/// sample.
pub fn percentile(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(TriageError::Empty("percentile input"));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(TriageError::invalid("percentile must lie in [0, 100]"));
    }
    if pct == 100.0 {
        return Ok(f64::INFINITY);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    Ok(v[lo] + frac * (v[hi] - v[lo]))
}

fn group_of(c: f64, v: f64, cutoff: f64, cfg: &CharacterizationConfig) -> Group {
    if c >= cfg.c_up && v < cutoff {
        Group::UnderEstimated
    } else if c <= cfg.c_low && v < cutoff {
        Group::OverEstimated
    } else {
        Group::WellEstimated
    }
}

/// Thresholds confidence at `c_up`/`c_low` among samples whose variability is
/// below the configured percentile; everything else is well-estimated.
pub fn assign_groups(stats: &[TrajectoryStats], cfg: &CharacterizationConfig) -> Result<CharacterizationReport> {
    if stats.is_empty() {
        return Err(TriageError::Empty("trajectory statistics"));
    }
    cfg.validate()?;
    let vs: Vec<f64> = stats.iter().map(|s| s.variability).collect();
    let cutoff = percentile(&vs, cfg.variability_percentile)?;
    let records: Vec<SampleRecord> = stats
        .iter()
        .map(|s| SampleRecord {
            sample_id: s.sample_id.clone(),
            confidence: s.confidence,
            variability: s.variability,
            group: group_of(s.confidence, s.variability, cutoff, cfg),
        })
        .collect();
    let proportions = GroupProportions::of(records.iter().map(|r| r.group));
    Ok(CharacterizationReport {
        records,
        proportions,
        config: *cfg,
        variability_cutoff: cutoff,
    })
}

/// Well-estimated proportion for symmetric thresholds `(thresh, 1 - thresh)`.
pub fn threshold_sweep(stats: &[TrajectoryStats], grid: &[f64], variability_percentile: f64) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(TriageError::Empty("threshold grid"));
    }
    if let Some(bad) = grid.iter().find(|&&t| !(t > 0.0 && t < 0.5)) {
        return Err(TriageError::invalid(format!("threshold {bad} outside (0, 0.5)")));
    }
    grid.iter()
        .map(|&t| {
            let cfg = CharacterizationConfig {
                c_up: 1.0 - t,
                c_low: t,
                variability_percentile,
            };
            Ok((t, assign_groups(stats, &cfg)?.proportions.well))
        })
        .collect()
}

/// Fraction of samples characterized as well-estimated.
pub fn retention_rate(report: &CharacterizationReport) -> f64 {
    if report.records.is_empty() {
        return 0.0;
    }
    report.count(Group::WellEstimated) as f64 / report.records.len() as f64
}

const SVG_W: f64 = 480.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
/// Axis ranges of the characteristic curve: variability, then confidence.
pub const CURVE_V_RANGE: (f64, f64) = (0.0, 0.5);
pub const CURVE_C_RANGE: (f64, f64) = (0.0, 1.0);

fn render_svg(report: &CharacterizationReport) -> String {
    let pw = SVG_W - 2.0 * MARGIN;
    let ph = SVG_H - 2.0 * MARGIN;
    let sx = |v: f64| MARGIN + (v - CURVE_V_RANGE.0) / (CURVE_V_RANGE.1 - CURVE_V_RANGE.0) * pw;
    let sy = |c: f64| SVG_H - MARGIN - (c - CURVE_C_RANGE.0) / (CURVE_C_RANGE.1 - CURVE_C_RANGE.0) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}" data-x-range="{} {}" data-y-range="{} {}">"#,
        CURVE_V_RANGE.0, CURVE_V_RANGE.1, CURVE_C_RANGE.0, CURVE_C_RANGE.1
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#,
        x0 = sx(0.0),
        x1 = sx(0.5),
        y0 = sy(0.0),
        y1 = sy(1.0)
    );
    for t in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{t}</text>"#,
            sx(t),
            sy(0.0) + 15.0
        );
    }
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{t}</text>"#,
            sx(0.0) - 5.0,
            sy(t) + 3.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">variability</text>"#,
        MARGIN + pw / 2.0,
        SVG_H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">confidence</text>"#,
        MARGIN + ph / 2.0,
        MARGIN + ph / 2.0
    );
    for (k, g) in Group::ALL.iter().enumerate() {
        let y = MARGIN - 30.0 + 10.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{y:.1}" width="8" height="8" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="9">{}</text>"#,
            SVG_W - MARGIN - 40.0,
            g.color(),
            SVG_W - MARGIN - 28.0,
            y + 8.0,
            g.short()
        );
    }
    for r in &report.records {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.6" class="{}"/>"#,
            sx(r.variability.clamp(CURVE_V_RANGE.0, CURVE_V_RANGE.1)),
            sy(r.confidence.clamp(CURVE_C_RANGE.0, CURVE_C_RANGE.1)),
            r.group.color(),
            r.group.short()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.svg` (scatter of variability vs confidence, coloured by
/// group) and `<stem>.csv` (the plotted points). Returns both paths.
pub fn characteristic_curve_export(report: &CharacterizationReport, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let stem = stem.as_ref();
    let svg = stem.with_extension("svg");
    let csv = stem.with_extension("csv");
    write_text(&svg, &render_svg(report))?;
    report.write_csv(&csv)?;
    Ok((svg, csv))
}
