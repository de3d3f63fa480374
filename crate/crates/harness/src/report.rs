//! Report rendering: aligned text tables or pretty JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dentist_core::metrics::{CategoryAccuracy, ChairReport, PopeReport, PopeSetting};
use serde::{Deserialize, Serialize};

use crate::baseline::BaselineReport;
use crate::config::RunMode;
use crate::error::{io_error, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "report", rename_all = "snake_case")]
pub enum Report {
    Chair(ChairReport),
    Pope(PopeReport),
    PopeBySetting(BTreeMap<PopeSetting, PopeReport>),
    Category(CategoryAccuracy),
    Baseline(BaselineReport),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Table,
    Json,
}

pub const POPE_COLUMNS: [&str; 5] = ["Accuracy", "Precision", "Recall", "F1 Score", "Yes (%)"];
pub const CHAIR_COLUMNS: [&str; 2] = ["Cs", "Ci"];

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Renders rows under `header`, numbers right-aligned; a `labelled` table's
/// first column is left-aligned.
fn table(header: &[&str], rows: &[Vec<String>], labelled: bool) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if labelled && c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths
        .iter()
        .enumerate()
        .map(|(c, w)| {
            if labelled && c == 0 {
                "-".repeat(w + 2)
            } else {
                format!("{}:", "-".repeat(w + 1))
            }
        })
        .collect();
    out += &format!("|{}|\n", rule.join("|"));
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn pope_row(label: String, r: &PopeReport) -> Vec<String> {
    vec![
        label,
        pct(r.accuracy),
        pct(r.precision),
        pct(r.recall),
        pct(r.f1),
        pct(r.yes_rate),
    ]
}

fn with_label<'a>(first: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    std::iter::once(first).chain(rest.iter().copied()).collect()
}

fn category_table(c: &CategoryAccuracy) -> String {
    let mut rows: Vec<Vec<String>> = c
        .per_category
        .iter()
        .map(|(k, s)| vec![k.clone(), s.correct.to_string(), s.total.to_string(), pct(s.accuracy)])
        .collect();
    rows.push(vec![
        "overall".into(),
        c.correct.to_string(),
        c.total.to_string(),
        pct(c.overall),
    ]);
    table(&["Category", "Correct", "Total", "Accuracy (%)"], &rows, true)
}

pub fn render_table(report: &Report) -> String {
    match report {
        Report::Chair(r) => table(&CHAIR_COLUMNS, &[vec![pct(r.chair_s), pct(r.chair_i)]], false),
        Report::Pope(r) => {
            let mut row = pope_row(String::new(), r);
            row.remove(0);
            table(&POPE_COLUMNS, &[row], false)
        }
        Report::PopeBySetting(by) => {
            let rows: Vec<Vec<String>> = by.iter().map(|(s, r)| pope_row(s.to_string(), r)).collect();
            table(&with_label("Setting", &POPE_COLUMNS), &rows, true)
        }
        Report::Category(c) => category_table(c),
        Report::Baseline(b) => {
            let mode = match b.mode {
                RunMode::DirectRejection => "direct rejection",
                RunMode::RepeatedCorrection => "repeated correction",
                RunMode::Correct => "correct",
            };
            let mut out = String::new();
            let _ = writeln!(out, "mode: {mode}, repeats: {}, oracle: {:?}", b.repeats, b.oracle);
            let _ = writeln!(
                out,
                "samples: {}, scored: {}, correct: {}, accuracy: {}%, errored: {}, loop errors: {}",
                b.samples,
                b.scored,
                b.correct,
                pct(b.accuracy),
                b.errored,
                b.loop_errors
            );
            out += "\n";
            out += &category_table(&b.by_category);
            if let Some(p) = &b.pope {
                out += "\n";
                out += &render_table(&Report::Pope(p.clone()));
            }
            out
        }
    }
}

pub fn render_report(report: &Report, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    }
}

pub fn write_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    std::fs::write(path, render_report(report, format)).map_err(io_error(path))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let source = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&source).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
