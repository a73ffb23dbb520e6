use std::fmt::Write as _;
use std::str::FromStr;

use super::runner::{CellStatus, ResultRow};
use crate::error::{Error, Result};
use crate::evalkit::format_estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Records,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "records" | "jsonl" => Ok(ReportFormat::Records),
            _ => Err(Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "plan",
    "axis",
    "axis_value",
    "mode",
    "repeat",
    "seed",
    "status",
    "mu_tx",
    "ci_low",
    "ci_high",
    "train_size",
    "wall_clock_s",
    "error",
];

fn check_single_plan(rows: &[ResultRow]) -> Result<()> {
    if let Some(first) = rows.first() {
        if let Some(other) = rows.iter().find(|r| r.plan != first.plan || r.axis != first.axis) {
            return Err(Error::Aggregation(format!(
                "rows from plans {:?} and {:?} cannot share a report",
                first.plan, other.plan
            )));
        }
    }
    Ok(())
}

/// Renders rows of one plan. Tables put axis values down the side and modes
/// across, averaging repeats; a cell with any failed repeat shows "—".
pub fn emit_report(rows: &[ResultRow], format: ReportFormat) -> Result<String> {
    check_single_plan(rows)?;
    match format {
        ReportFormat::Table => Ok(table(rows)),
        ReportFormat::Csv => to_csv(rows),
        ReportFormat::Records => {
            let mut s = String::new();
            for r in rows {
                s.push_str(&serde_json::to_string(r)?);
                s.push('\n');
            }
            Ok(s)
        }
    }
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn table(rows: &[ResultRow]) -> String {
    let label = rows.first().map_or("value", |r| r.axis.as_str());
    let values = first_seen(rows.iter().map(|r| r.axis_value.as_str()));
    let modes = first_seen(rows.iter().map(|r| r.mode.as_str()));
    let mut grid: Vec<Vec<String>> = Vec::with_capacity(values.len());
    for v in &values {
        let line = modes
            .iter()
            .map(|m| {
                let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.axis_value == *v && r.mode == *m).collect();
                if cell.is_empty() {
                    return String::new();
                }
                if cell.iter().any(|r| r.status == CellStatus::Failed) {
                    return "—".into();
                }
                let n = cell.len() as f64;
                let mean = cell.iter().filter_map(|r| r.mu_tx).sum::<f64>() / n;
                let half = cell.iter().filter_map(|r| Some((r.ci_high? - r.ci_low?) / 2.0)).sum::<f64>() / n;
                format_estimate(mean, half)
            })
            .collect();
        grid.push(line);
    }
    let first_w = values.iter().map(|v| v.chars().count()).max().unwrap_or(0).max(label.len());
    let widths: Vec<usize> = modes
        .iter()
        .enumerate()
        .map(|(j, m)| grid.iter().map(|g| g[j].chars().count()).max().unwrap_or(0).max(m.len()))
        .collect();
    let mut s = String::new();
    let pad = |s: &mut String, text: &str, w: usize| {
        let _ = write!(s, "  {text}{}", " ".repeat(w - text.chars().count()));
    };
    let _ = write!(s, "{label:<first_w$}");
    for (m, w) in modes.iter().zip(&widths) {
        pad(&mut s, m, *w);
    }
    s.push('\n');
    for (v, line) in values.iter().zip(&grid) {
        let _ = write!(s, "{v:<first_w$}");
        for (c, w) in line.iter().zip(&widths) {
            pad(&mut s, c, *w);
        }
        s.push('\n');
    }
    s.lines().map(|l| format!("{}\n", l.trim_end())).collect()
}

fn to_csv(rows: &[ResultRow]) -> Result<String> {
    let csv_err = |e: csv::Error| Error::format(e.to_string());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::format(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::format(format!("unexpected csv header {header:?}")));
    }
    r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>().map_err(|e| Error::format(e.to_string()))
}

pub fn parse_records(text: &str) -> Result<Vec<ResultRow>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
}
