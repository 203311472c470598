//! Presentation artifacts: representative profiles, member counts and
//! monthly population histograms per cluster, emitted as JSON, CSV and a
//! static SVG grid.
//!
//! The SVG has one row per cluster. Each row holds one profile panel per
//! variable (member days as light traces, the representative as a heavy
//! black trace) followed by a 12-bar monthly histogram.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::clustering::{medoid, ClusterModel, Method};
use crate::dtw::DistanceMatrix;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, HOURS};
use crate::util::{self, sig6};

pub const MONTHS: usize = 12;

const MONTH_LETTERS: [&str; MONTHS] = ["J", "F", "M", "A", "M", "J", "J", "A", "S", "O", "N", "D"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    /// Element-wise mean of the members.
    #[default]
    Centroid,
    /// The member with the smallest total DTW distance to the others.
    Medoid,
}

impl FromStr for Representative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "centroid" => Ok(Representative::Centroid),
            "medoid" => Ok(Representative::Medoid),
            other => Err(Error::arg(format!(
                "unknown representative '{other}' (expected centroid or medoid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub representative: Representative,
    /// Report profiles in data units when the dataset is normalized.
    pub denormalize: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            representative: Representative::Centroid,
            denormalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub n_days: usize,
    pub variables: Vec<String>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// Days per calendar month, pooled across years.
    pub month_totals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// 1-based cluster id.
    pub id: usize,
    pub members: usize,
    /// Set when the representative is a medoid.
    pub medoid_date: Option<NaiveDate>,
    /// Representative trace per variable, 24 values each.
    pub representative: Vec<Vec<f64>>,
    /// Member traces per variable: `member_profiles[v][j]` is member `j`.
    pub member_profiles: Vec<Vec<Vec<f64>>>,
    /// Member counts per calendar month, January first.
    pub histogram: Vec<usize>,
    pub dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub method: Method,
    pub k: usize,
    pub representative: Representative,
    /// Whether profile values are in data units.
    pub denormalized: bool,
    pub seasonal_coherence: f64,
    pub dataset: DatasetInfo,
    pub clusters: Vec<ClusterSummary>,
}

fn check_model(model: &ClusterModel, ds: &Dataset) -> Result<()> {
    if model.n() != ds.len() {
        return Err(Error::arg(format!(
            "model covers {} days but the dataset has {}",
            model.n(),
            ds.len()
        )));
    }
    Ok(())
}

fn month_index(date: NaiveDate) -> usize {
    date.month0() as usize
}

/// Per-cluster member counts by calendar month (index 0 is January).
pub fn monthly_histogram(model: &ClusterModel, ds: &Dataset) -> Result<Vec<[usize; MONTHS]>> {
    check_model(model, ds)?;
    let mut bins = vec![[0usize; MONTHS]; model.k()];
    for (day, &c) in ds.days.iter().zip(&model.assignments) {
        bins[c][month_index(day.date)] += 1;
    }
    Ok(bins)
}

/// Share of calendar months (pooled across years) whose most popular
/// cluster holds more than 2/3 of that month's days. Months without days
/// are left out of the denominator.
pub fn seasonal_coherence(model: &ClusterModel, ds: &Dataset) -> Result<f64> {
    let bins = monthly_histogram(model, ds)?;
    let mut present = 0usize;
    let mut coherent = 0usize;
    for month in 0..MONTHS {
        let total: usize = bins.iter().map(|b| b[month]).sum();
        if total == 0 {
            continue;
        }
        present += 1;
        let top = bins.iter().map(|b| b[month]).max().unwrap_or(0);
        // top / total > 2/3 without rounding
        if 3 * top > 2 * total {
            coherent += 1;
        }
    }
    if present == 0 {
        return Err(Error::Data("dataset has no days".into()));
    }
    Ok(coherent as f64 / present as f64)
}

/// Assembles the report. `dm` is only needed for medoid representatives.
pub fn build_report(
    model: &ClusterModel,
    ds: &Dataset,
    dm: Option<&DistanceMatrix>,
    opts: &ReportOptions,
) -> Result<ScenarioReport> {
    check_model(model, ds)?;
    if ds.is_empty() {
        return Err(Error::Data("dataset has no days".into()));
    }
    if let Some(dm) = dm {
        dm.check_matches(ds)?;
    }
    let m = ds.n_vars();
    let scale = |v: usize, x: f64| {
        if opts.denormalize {
            ds.denormalize_value(v, x)
        } else {
            x
        }
    };
    let hist = monthly_histogram(model, ds)?;
    let mut clusters = Vec::with_capacity(model.k());
    for (k, members) in model.memberships.iter().enumerate() {
        let (flat, medoid_date) = match opts.representative {
            Representative::Centroid => (model.centroids[k].clone(), None),
            Representative::Medoid => {
                let dm = dm.ok_or_else(|| {
                    Error::arg("medoid representatives need a distance matrix")
                })?;
                let i = medoid(dm, members)?;
                (ds.days[i].as_flat().to_vec(), Some(ds.days[i].date))
            }
        };
        let representative = (0..m)
            .map(|v| {
                flat[v * HOURS..(v + 1) * HOURS]
                    .iter()
                    .map(|&x| scale(v, x))
                    .collect()
            })
            .collect();
        let member_profiles = (0..m)
            .map(|v| {
                members
                    .iter()
                    .map(|&i| ds.days[i].column(v).iter().map(|&x| scale(v, x)).collect())
                    .collect()
            })
            .collect();
        clusters.push(ClusterSummary {
            id: k + 1,
            members: members.len(),
            medoid_date,
            representative,
            member_profiles,
            histogram: hist[k].to_vec(),
            dates: members.iter().map(|&i| ds.days[i].date).collect(),
        });
    }
    let mut month_totals = vec![0; MONTHS];
    for day in &ds.days {
        month_totals[month_index(day.date)] += 1;
    }
    Ok(ScenarioReport {
        method: model.method,
        k: model.k(),
        representative: opts.representative,
        denormalized: opts.denormalize && ds.is_normalized(),
        seasonal_coherence: seasonal_coherence(model, ds)?,
        dataset: DatasetInfo {
            n_days: ds.len(),
            variables: ds.variable_names.clone(),
            first_date: ds.days[0].date,
            last_date: ds.days[ds.len() - 1].date,
            month_totals,
        },
        clusters,
    })
}

impl ScenarioReport {
    /// Checks both histogram conservation identities and the member counts.
    pub fn check_conservation(&self) -> Result<()> {
        let members: usize = self.clusters.iter().map(|c| c.members).sum();
        if members != self.dataset.n_days {
            return Err(Error::Data(format!(
                "{members} members for {} days",
                self.dataset.n_days
            )));
        }
        for c in &self.clusters {
            let binned: usize = c.histogram.iter().sum();
            if binned != c.members || c.dates.len() != c.members {
                return Err(Error::Data(format!(
                    "cluster {}: {} members, {binned} binned, {} dates",
                    c.id,
                    c.members,
                    c.dates.len()
                )));
            }
        }
        for month in 0..MONTHS {
            let binned: usize = self.clusters.iter().map(|c| c.histogram[month]).sum();
            if binned != self.dataset.month_totals[month] {
                return Err(Error::Data(format!(
                    "month {}: {binned} binned, {} days",
                    month + 1,
                    self.dataset.month_totals[month]
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.json`, `report.csv` and `report.svg` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        util::write_file(&dir.join("report.json"), emit_json(self)?)?;
        util::write_file(&dir.join("report.csv"), emit_csv(self))?;
        util::write_file(&dir.join("report.svg"), emit_svg(self))
    }
}

pub fn emit_json(report: &ScenarioReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// One row per cluster-month (`histogram`) and per cluster-variable-hour
/// (`profile`).
pub fn emit_csv(report: &ScenarioReport) -> String {
    let mut out = String::from("row,cluster,members,month,variable,hour,value\n");
    for c in &report.clusters {
        for (month, count) in c.histogram.iter().enumerate() {
            let _ = writeln!(out, "histogram,{},{},{},,,{count}", c.id, c.members, month + 1);
        }
        for (v, trace) in c.representative.iter().enumerate() {
            let name = csv_field(&report.dataset.variables[v]);
            for (h, x) in trace.iter().enumerate() {
                let _ = writeln!(out, "profile,{},{},,{name},{h},{}", c.id, c.members, sig6(*x));
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

// SVG geometry, in px
const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 130.0;
const GAP: f64 = 16.0;
const MARGIN: f64 = 20.0;
const HEADER: f64 = 18.0;
const PLOT_PAD: f64 = 6.0;
const TITLE_H: f64 = 28.0;

/// Fixed two-decimal coordinates keep the output byte-stable.
fn px(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn value_range(report: &ScenarioReport, v: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in &report.clusters {
        for x in c.representative[v]
            .iter()
            .chain(c.member_profiles[v].iter().flatten())
        {
            lo = lo.min(*x);
            hi = hi.max(*x);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn polyline(out: &mut String, trace: &[f64], range: (f64, f64), style: &str) {
    let inner_w = PANEL_W - 2.0 * PLOT_PAD;
    let inner_h = PANEL_H - HEADER - 2.0 * PLOT_PAD;
    let step = inner_w / (HOURS - 1) as f64;
    let points: Vec<String> = trace
        .iter()
        .enumerate()
        .map(|(h, &x)| {
            let t = (x - range.0) / (range.1 - range.0);
            let y = HEADER + PLOT_PAD + (1.0 - t) * inner_h;
            format!("{},{}", px(PLOT_PAD + h as f64 * step), px(y))
        })
        .collect();
    let _ = writeln!(out, "<polyline points=\"{}\" {style}/>", points.join(" "));
}

fn panel_frame(out: &mut String, class: &str, x: f64, y: f64, header: &str) {
    let _ = writeln!(
        out,
        "<g class=\"{class}\" transform=\"translate({},{})\">",
        px(x),
        px(y)
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" style=\"fill:#ffffff;stroke:#999999;stroke-width:1\"/>",
        px(PANEL_W),
        px(PANEL_H)
    );
    let _ = writeln!(
        out,
        "<text x=\"6\" y=\"13\" style=\"font-family:sans-serif;font-size:11px;fill:#222222\">{}</text>",
        xml_escape(header)
    );
}

/// Static small-multiple grid: one row per cluster.
pub fn emit_svg(report: &ScenarioReport) -> String {
    let m = report.dataset.variables.len();
    let cols = m + 1;
    let width = 2.0 * MARGIN + cols as f64 * PANEL_W + (cols - 1) as f64 * GAP;
    let rows = report.clusters.len();
    let height = 2.0 * MARGIN
        + TITLE_H
        + rows as f64 * PANEL_H
        + rows.saturating_sub(1) as f64 * GAP;
    let ranges: Vec<(f64, f64)> = (0..m).map(|v| value_range(report, v)).collect();
    let max_count = report
        .clusters
        .iter()
        .flat_map(|c| c.histogram.iter().copied())
        .max()
        .unwrap_or(0)
        .max(1);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">",
        px(width),
        px(height)
    );
    let _ = writeln!(
        out,
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" style=\"fill:#ffffff\"/>",
        px(width),
        px(height)
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" style=\"font-family:sans-serif;font-size:14px;fill:#000000\">{} K={} ({} days, {} to {})</text>",
        px(MARGIN),
        px(MARGIN + 12.0),
        report.method,
        report.k,
        report.dataset.n_days,
        report.dataset.first_date,
        report.dataset.last_date
    );

    let member_style = "style=\"fill:none;stroke:#9bb7d4;stroke-width:0.6;stroke-opacity:0.5\"";
    let rep_style = "style=\"fill:none;stroke:#000000;stroke-width:2\"";
    for (r, c) in report.clusters.iter().enumerate() {
        let y = MARGIN + TITLE_H + r as f64 * (PANEL_H + GAP);
        for v in 0..m {
            let x = MARGIN + v as f64 * (PANEL_W + GAP);
            let header = format!(
                "Cluster {} (n={}) {}",
                c.id, c.members, report.dataset.variables[v]
            );
            panel_frame(&mut out, "profile-panel", x, y, &header);
            for trace in &c.member_profiles[v] {
                polyline(&mut out, trace, ranges[v], member_style);
            }
            polyline(&mut out, &c.representative[v], ranges[v], rep_style);
            out.push_str("</g>\n");
        }

        let x = MARGIN + m as f64 * (PANEL_W + GAP);
        let header = format!("Cluster {} (n={}) months", c.id, c.members);
        panel_frame(&mut out, "histogram-panel", x, y, &header);
        let inner_w = PANEL_W - 2.0 * PLOT_PAD;
        let inner_h = PANEL_H - HEADER - 2.0 * PLOT_PAD - 10.0;
        let slot = inner_w / MONTHS as f64;
        let base = HEADER + PLOT_PAD + inner_h;
        for (b, &count) in c.histogram.iter().enumerate() {
            let h = inner_h * count as f64 / max_count as f64;
            let bx = PLOT_PAD + b as f64 * slot;
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" style=\"fill:#4a6f96\"><title>{}: {count}</title></rect>",
                px(bx + 1.0),
                px(base - h),
                px(slot - 2.0),
                px(h),
                b + 1
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" style=\"font-family:sans-serif;font-size:8px;fill:#555555;text-anchor:middle\">{}</text>",
                px(bx + slot / 2.0),
                px(base + 9.0),
                MONTH_LETTERS[b]
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}
