//! Text and tab-delimited rendering of ranking, grouped and comparison reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GroupedReport, OracleSummary};
use crate::error::{Error, Result};
use crate::metrics::{MetricsSummary, COLUMN_NAMES};
use crate::tta::RankingReport;

pub const DECIMALS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Tsv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" | "table" => Ok(Self::Text),
            "tsv" | "delimited" => Ok(Self::Tsv),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

/// Adaptive strategy against a set of fixed baselines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `(strategy name, summary)`; the adaptive entry is not included.
    pub fixed: Vec<(String, MetricsSummary)>,
    pub adaptive: MetricsSummary,
}

impl ComparisonReport {
    /// Best fixed value of each metric column (taken per column).
    pub fn best_fixed(&self) -> [f64; 6] {
        let mut best = [f64::NEG_INFINITY; 6];
        for (_, s) in &self.fixed {
            for (b, v) in best.iter_mut().zip(s.columns()) {
                *b = b.max(v);
            }
        }
        best
    }

    /// `(adaptive − best_fixed) / best_fixed` per column; NaN when the best is 0.
    pub fn improve_beta(&self) -> [f64; 6] {
        let best = self.best_fixed();
        let a = self.adaptive.columns();
        std::array::from_fn(|i| {
            if best[i] > 0.0 {
                (a[i] - best[i]) / best[i]
            } else {
                f64::NAN
            }
        })
    }

    /// Relative change over the `identity` baseline, if present.
    pub fn improve_alpha(&self) -> Option<[f64; 6]> {
        let base = self.fixed.iter().find(|(n, _)| n == "identity")?.1.columns();
        let a = self.adaptive.columns();
        Some(std::array::from_fn(|i| {
            if base[i] > 0.0 {
                (a[i] - base[i]) / base[i]
            } else {
                f64::NAN
            }
        }))
    }
}

pub enum Report<'a> {
    Ranking(&'a RankingReport),
    /// One row per strategy.
    Summary(&'a [(String, MetricsSummary)]),
    Grouped(&'a GroupedReport, Option<&'a OracleSummary>),
    Comparison(&'a ComparisonReport),
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(keys: &[&str], with_metrics: bool) -> Self {
        let mut header: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
        if with_metrics {
            header.push("users".into());
            header.extend(COLUMN_NAMES.iter().map(|s| s.to_string()));
        }
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn push_summary(&mut self, keys: &[&str], s: &MetricsSummary) {
        let mut row: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
        row.push(s.users.to_string());
        if s.users == 0 {
            row.extend(std::iter::repeat(String::new()).take(6));
        } else {
            row.extend(s.columns().iter().map(|v| fmt_value(*v)));
        }
        self.rows.push(row);
    }

    fn push_relative(&mut self, keys: &[&str], values: &[f64; 6]) {
        let mut row: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
        row.push(String::new());
        row.extend(values.iter().map(|v| {
            if v.is_finite() {
                format!("{:+.2}%", v * 100.0)
            } else {
                String::new()
            }
        }));
        self.rows.push(row);
    }

    fn render(&self, format: ReportFormat, out: &mut String) {
        match format {
            ReportFormat::Tsv => {
                writeln!(out, "{}", self.header.join("\t")).unwrap();
                for r in &self.rows {
                    writeln!(out, "{}", r.join("\t")).unwrap();
                }
            }
            ReportFormat::Text => {
                let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
                for r in &self.rows {
                    for (w, c) in widths.iter_mut().zip(r) {
                        *w = (*w).max(c.len());
                    }
                }
                let line = |cells: &[String], out: &mut String| {
                    let parts: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .enumerate()
                        .map(|(i, (c, w))| {
                            if i == 0 {
                                format!("{c:<w$}")
                            } else {
                                format!("{c:>w$}")
                            }
                        })
                        .collect();
                    writeln!(out, "{}", parts.join("  ").trim_end()).unwrap();
                };
                line(&self.header, out);
                let rule: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
                writeln!(out, "{}", "-".repeat(rule)).unwrap();
                for r in &self.rows {
                    line(r, out);
                }
            }
        }
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.DECIMALS$}")
}

pub fn render(report: &Report<'_>, format: ReportFormat) -> String {
    let mut out = String::new();
    match report {
        Report::Ranking(r) => {
            let mut users = Table::new(&["user_id", "action", "rank"], false);
            for row in &r.rows {
                users
                    .rows
                    .push(vec![row.user_id.clone(), row.action.name().into(), row.rank.to_string()]);
            }
            users.render(format, &mut out);
            out.push('\n');
            let mut summary = Table::new(&["strategy"], true);
            summary.push_summary(&[&r.strategy], &r.summary);
            summary.render(format, &mut out);
        }
        Report::Summary(rows) => {
            let mut t = Table::new(&["strategy"], true);
            for (name, s) in rows.iter() {
                t.push_summary(&[name], s);
            }
            t.render(format, &mut out);
        }
        Report::Grouped(g, oracle) => {
            let mut t = Table::new(&["group", "action", "best"], true);
            for (gi, name) in g.group_names.iter().enumerate() {
                for (ai, a) in g.actions.iter().enumerate() {
                    let best = if g.best[gi] == Some(*a) { "*" } else { "" };
                    t.push_summary(&[name, a.label(), best], &g.cells[gi][ai]);
                }
            }
            let overall_best = g.best_fixed().ok().map(|(a, _)| a);
            for (ai, a) in g.actions.iter().enumerate() {
                let best = if overall_best == Some(*a) { "*" } else { "" };
                t.push_summary(&["overall", a.label(), best], &g.overall[ai]);
            }
            if let Some(o) = oracle {
                t.push_summary(&["overall", "Oracle", ""], &o.summary);
            }
            t.render(format, &mut out);
            if let Some(o) = oracle {
                out.push('\n');
                let mut c = Table::new(&["group", "oracle_choice", "selection"], false);
                for (name, choice) in g.group_names.iter().zip(&o.choices) {
                    c.rows.push(vec![
                        name.clone(),
                        choice.map(|a| a.label().to_string()).unwrap_or_default(),
                        o.selection.to_string(),
                    ]);
                }
                c.render(format, &mut out);
            }
        }
        Report::Comparison(c) => {
            let mut t = Table::new(&["strategy"], true);
            for (name, s) in &c.fixed {
                t.push_summary(&[name], s);
            }
            t.push_summary(&["adaptive"], &c.adaptive);
            if let Some(alpha) = c.improve_alpha() {
                t.push_relative(&["improve_alpha"], &alpha);
            }
            t.push_relative(&["improve_beta"], &c.improve_beta());
            t.render(format, &mut out);
        }
    }
    out
}

pub fn emit_report(report: &Report<'_>, path: &Path, format: ReportFormat) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, render(report, format)).map_err(|e| Error::io(path, e))
}

/// Writes `user_id<TAB>cluster` lines.
pub fn export_clusters(path: &Path, user_ids: &[String], assignment: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (u, c) in user_ids.iter().zip(assignment) {
        writeln!(out, "{u}\t{c}").unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
