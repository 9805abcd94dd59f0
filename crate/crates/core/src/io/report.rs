use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{EvalReport, PrCurve, ScoreDistribution, SweepTable};
use crate::model::FrequencyGroup;
use crate::ranking::RankingPolicy;
use crate::toy::ToyOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// Canonical, lossless.
    Json,
    Csv,
    /// Aligned text table, values in AP points.
    #[default]
    Table,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "text" | "table-text" => Ok(ReportFormat::Table),
            other => Err(Error::InvalidConfig(format!(
                "format must be json, csv or table, got {other:?}"
            ))),
        }
    }
}

/// Baseline and gamed policies evaluated on the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameComparison {
    pub baseline: EvalReport,
    pub gamed: EvalReport,
}

impl GameComparison {
    pub fn delta(&self) -> Option<f64> {
        Some(self.gamed.ap? - self.baseline.ap?)
    }
}

fn points(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.1}", 100.0 * v))
}

fn raw(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn limit(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Pads every column to its widest cell; first column left aligned.
fn align(rows: &[Vec<String>]) -> String {
    let n = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

const AP_COLUMNS: [&str; 4] = ["AP", "AP_r", "AP_c", "AP_f"];
const POOL_COLUMNS: [&str; 4] = ["AP^Pool", "AP^Pool_r", "AP^Pool_c", "AP^Pool_f"];

fn ap_cells(report: &EvalReport) -> Vec<String> {
    let mut cells = vec![points(report.ap)];
    cells.extend(FrequencyGroup::KNOWN.iter().map(|g| points(report.group_ap(*g))));
    cells
}

fn pool_cells(report: &EvalReport) -> Vec<String> {
    match &report.pooled {
        Some(p) => {
            let mut cells = vec![points(p.ap)];
            cells.extend(FrequencyGroup::KNOWN.iter().map(|g| points(p.groups.get(*g))));
            cells
        }
        None => vec!["-".to_string(); 4],
    }
}

fn describe(report: &EvalReport) -> String {
    let t = &report.config.iou_thresholds;
    let iou = match t.as_slice() {
        [single] => format!("{single}"),
        [first, .., last] => format!("{first}:{last} ({} thresholds)", t.len()),
        [] => String::new(),
    };
    format!(
        "policy: {}  iou: {}  interp: {}",
        report.config.ranking_policy, iou, report.config.interpolation
    )
}

fn csv_rows(report: &EvalReport, prefix: &str, out: &mut String) {
    let mut row = |metric: &str, group: &str, v: Option<f64>| {
        let _ = writeln!(out, "{prefix}{metric},{group},{}", raw(v));
    };
    row("AP", "all", report.ap);
    for g in FrequencyGroup::KNOWN {
        row("AP", g.suffix(), report.group_ap(g));
    }
    for (t, v) in report.config.iou_thresholds.iter().zip(&report.ap_per_threshold) {
        row(&format!("AP@{t}"), "all", *v);
    }
    if let Some(p) = &report.pooled {
        row("AP_pool", "all", p.ap);
        for g in FrequencyGroup::KNOWN {
            row("AP_pool", g.suffix(), p.groups.get(g));
        }
    }
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => {
            let mut out = String::from("metric,group,value\n");
            csv_rows(report, "", &mut out);
            out
        }
        ReportFormat::Table => {
            let mut header: Vec<String> = AP_COLUMNS.iter().map(|s| s.to_string()).collect();
            let mut cells = ap_cells(report);
            if report.pooled.is_some() {
                header.extend(POOL_COLUMNS.iter().map(|s| s.to_string()));
                cells.extend(pool_cells(report));
            }
            let mut out = describe(report);
            out.push('\n');
            out.push_str(&align(&[header, cells]));
            for flag in &report.flags {
                let _ = writeln!(out, "note: {flag}");
            }
            out
        }
    }
}

pub fn render_sweep(table: &SweepTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(table),
        ReportFormat::Csv => {
            let mut out = format!("{},metric,group,value\n", table.axis);
            for row in &table.rows {
                csv_rows(&row.report, &format!("{},", limit(row.limit)), &mut out);
            }
            out
        }
        ReportFormat::Table => {
            let pooled = table.rows.iter().any(|r| r.report.pooled.is_some());
            let mut header = vec![table.axis.header().to_string()];
            header.extend(AP_COLUMNS.iter().map(|s| s.to_string()));
            if pooled {
                header.extend(POOL_COLUMNS.iter().map(|s| s.to_string()));
            }
            let mut rows = vec![header];
            for row in &table.rows {
                let mut cells = vec![limit(row.limit)];
                cells.extend(ap_cells(&row.report));
                if pooled {
                    cells.extend(pool_cells(&row.report));
                }
                rows.push(cells);
            }
            align(&rows)
        }
    }
}

fn policy_cells(p: &RankingPolicy) -> [String; 2] {
    let class = p
        .max_dets_per_class
        .map_or_else(|| "inf".to_string(), |v| v.to_string());
    [class, limit(p.max_dets_per_image)]
}

pub fn render_game(cmp: &GameComparison, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(cmp),
        ReportFormat::Csv => {
            let mut out = String::from("dets/class,dets/im,metric,group,value\n");
            for r in [&cmp.baseline, &cmp.gamed] {
                let [c, i] = policy_cells(&r.config.ranking_policy);
                csv_rows(r, &format!("{c},{i},"), &mut out);
            }
            out
        }
        ReportFormat::Table => {
            let mut header = vec!["dets/class".to_string(), "dets/im".to_string()];
            header.extend(AP_COLUMNS.iter().map(|s| s.to_string()));
            let mut rows = vec![header];
            for (i, r) in [&cmp.baseline, &cmp.gamed].into_iter().enumerate() {
                let mut cells = policy_cells(&r.config.ranking_policy).to_vec();
                for (k, cell) in ap_cells(r).into_iter().enumerate() {
                    let delta = if i == 1 {
                        let pick = |rep: &EvalReport| match k {
                            0 => rep.ap,
                            _ => rep.group_ap(FrequencyGroup::KNOWN[k - 1]),
                        };
                        pick(r)
                            .zip(pick(&cmp.baseline))
                            .map(|(a, b)| format!(" ({:+.1})", 100.0 * (a - b)))
                            .unwrap_or_default()
                    } else {
                        String::new()
                    };
                    cells.push(format!("{cell}{delta}"));
                }
                rows.push(cells);
            }
            align(&rows)
        }
    }
}

pub fn render_distribution(dist: &ScoreDistribution, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => to_json(dist),
        ReportFormat::Csv => {
            let mut out = String::from("group,bin_low,bin_high,count\n");
            for g in &dist.groups {
                for (b, n) in g.histogram.iter().enumerate() {
                    let lo = b as f64 / dist.bins as f64;
                    let hi = (b + 1) as f64 / dist.bins as f64;
                    let _ = writeln!(out, "{},{lo},{hi},{n}", g.group);
                }
            }
            out
        }
        ReportFormat::Table => {
            let mut rows = vec![vec![
                "group".to_string(),
                "count".to_string(),
                "mean".to_string(),
                "mean/frequent".to_string(),
            ]];
            for g in &dist.groups {
                let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                rows.push(vec![
                    g.group.to_string(),
                    g.count.to_string(),
                    fmt(g.mean),
                    fmt(g.normalized_mean),
                ]);
            }
            let mut out = align(&rows);
            for w in &dist.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
            out
        }
    }
}

/// Both toy scenarios and their expectation for each policy, plus the
/// expected-AP change of every policy relative to the first.
pub fn render_toy(outcomes: &[ToyOutcome], format: ReportFormat) -> String {
    let f3 = |v: f64| format!("{v:.3}");
    let mut rows: Vec<Vec<String>> = Vec::new();
    for o in outcomes {
        let [c, i] = policy_cells(&o.policy);
        for (k, s) in o.scenarios.iter().enumerate() {
            rows.push(vec![
                c.clone(),
                i.clone(),
                (k + 1).to_string(),
                f3(s.probability),
                f3(s.ap),
                f3(s.ap_a),
                f3(s.ap_b),
            ]);
        }
        rows.push(vec![
            c,
            i,
            "expected".to_string(),
            String::new(),
            f3(o.expected_ap),
            f3(o.expected_ap_a),
            f3(o.expected_ap_b),
        ]);
    }
    match format {
        ReportFormat::Json => to_json(&outcomes),
        ReportFormat::Csv => {
            let mut out = String::from("dets/class,dets/im,scenario,probability,ap,ap_a,ap_b\n");
            for r in rows {
                out.push_str(&r.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Table => {
            let header = ["dets/class", "dets/im", "scenario", "p", "AP", "AP_A", "AP_B"];
            let mut table = vec![header.iter().map(|h| h.to_string()).collect()];
            table.extend(rows);
            let mut out = align(&table);
            if let Some(first) = outcomes.first() {
                for o in &outcomes[1..] {
                    let _ = writeln!(
                        out,
                        "expected AP {} -> {} ({:+.3})",
                        f3(first.expected_ap),
                        f3(o.expected_ap),
                        o.expected_ap - first.expected_ap
                    );
                }
            }
            out
        }
    }
}

/// PR curves as point series: raw and interpolated precision per rank.
pub fn render_curves_csv(curves: &[(String, &PrCurve)]) -> String {
    let mut out = String::from("curve,rank,recall,precision,interpolated_precision\n");
    for (label, curve) in curves {
        for (k, (p, env)) in curve.points().iter().zip(curve.envelope()).enumerate() {
            let _ = writeln!(out, "{label},{},{},{},{}", k + 1, p.recall, p.precision, env);
        }
    }
    out
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}
