//! CSV layouts of per-run metrics, aggregates, and sweep summaries.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::SchemeId;
use crate::error::{Error, Result};
use crate::fl::RoundMetrics;

use super::stats::{AggregateRow, Interval};

/// One line of a per-run metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub round: usize,
    pub channel_uses: usize,
    pub gap: f64,
    pub accuracy: f64,
    #[serde(rename = "worst_H")]
    pub worst_h: f64,
    pub scheme: SchemeId,
    pub drop: usize,
    pub realization: usize,
}

impl RunRow {
    pub fn from_metrics(m: &RoundMetrics, scheme: SchemeId, drop: usize, realization: usize) -> Self {
        Self {
            round: m.round,
            channel_uses: m.channel_uses,
            gap: m.gap,
            accuracy: m.accuracy,
            worst_h: m.worst_h,
            scheme,
            drop,
            realization,
        }
    }
}

pub fn run_file_name(scheme: SchemeId, drop: usize, realization: usize) -> String {
    format!("{}_d{drop}_r{realization}.csv", scheme.name())
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_run_file(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_run_file(path: &Path) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect()
}

/// Reads every `*.csv` in `dir`, in file-name order.
pub fn read_run_dir(dir: &Path) -> Result<Vec<RunRow>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "csv"));
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("no run files in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in files {
        rows.extend(read_run_file(&f)?);
    }
    Ok(rows)
}

pub const AGGREGATE_COLUMNS: [&str; 13] = [
    "scheme",
    "round",
    "channel_uses",
    "n_runs",
    "gap_mean",
    "gap_lo",
    "gap_hi",
    "accuracy_mean",
    "accuracy_lo",
    "accuracy_hi",
    "worst_H_mean",
    "worst_H_lo",
    "worst_H_hi",
];

fn interval_fields(iv: &Interval) -> [String; 3] {
    [iv.mean.to_string(), iv.lo.to_string(), iv.hi.to_string()]
}

fn aggregate_fields(row: &AggregateRow) -> Vec<String> {
    let mut out = vec![
        row.scheme.name().to_string(),
        row.round.to_string(),
        row.channel_uses.to_string(),
        row.n_runs.to_string(),
    ];
    out.extend(interval_fields(&row.gap));
    out.extend(interval_fields(&row.accuracy));
    out.extend(interval_fields(&row.worst_h));
    out
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(AGGREGATE_COLUMNS)?;
    for row in rows {
        w.write_record(aggregate_fields(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Looks up required columns by name; the error names the first missing one.
struct Columns(Vec<usize>);

impl Columns {
    fn locate(headers: &csv::StringRecord, wanted: &[&str], path: &Path) -> Result<Self> {
        wanted
            .iter()
            .map(|name| {
                headers.iter().position(|h| h == *name).ok_or_else(|| {
                    Error::Config(format!("{}: missing column `{name}`", path.display()))
                })
            })
            .collect::<Result<_>>()
            .map(Self)
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, i: usize) -> &'r str {
        rec.get(self.0[i]).unwrap_or("")
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, column: &str, line: u64, path: &Path) -> Result<T> {
    s.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{}: line {line}: cannot parse `{s}` in column `{column}`",
            path.display()
        ))
    })
}

fn read_with_columns<T>(
    path: &Path,
    wanted: &[&str],
    mut build: impl FnMut(&dyn Fn(usize) -> Result<String>) -> Result<T>,
) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = Columns::locate(r.headers()?, wanted, path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| Ok(cols.get(&rec, i).to_string());
        out.push(build(&field)?);
    }
    Ok(out)
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut line = 1u64;
    read_with_columns(path, &AGGREGATE_COLUMNS, |field| {
        line += 1;
        let num = |i: usize| -> Result<f64> { parse_field(&field(i)?, AGGREGATE_COLUMNS[i], line, path) };
        let iv = |base: usize| -> Result<Interval> {
            Ok(Interval {
                mean: num(base)?,
                lo: num(base + 1)?,
                hi: num(base + 2)?,
            })
        };
        Ok(AggregateRow {
            scheme: parse_field(&field(0)?, "scheme", line, path)?,
            round: parse_field(&field(1)?, "round", line, path)?,
            channel_uses: parse_field(&field(2)?, "channel_uses", line, path)?,
            n_runs: parse_field(&field(3)?, "n_runs", line, path)?,
            gap: iv(4)?,
            accuracy: iv(7)?,
            worst_h: iv(10)?,
        })
    })
}

/// Final-round statistics of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub stats: AggregateRow,
}

pub const SWEEP_PREFIX: [&str; 2] = ["param", "value"];

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<&str> = SWEEP_PREFIX.iter().chain(AGGREGATE_COLUMNS.iter()).copied().collect();
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.param.clone(), row.value.to_string()];
        rec.extend(aggregate_fields(&row.stats));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let wanted: Vec<&str> = SWEEP_PREFIX.iter().chain(AGGREGATE_COLUMNS.iter()).copied().collect();
    let mut line = 1u64;
    read_with_columns(path, &wanted, |field| {
        line += 1;
        let num = |i: usize| -> Result<f64> { parse_field(&field(i)?, wanted[i], line, path) };
        let iv = |base: usize| -> Result<Interval> {
            Ok(Interval {
                mean: num(base)?,
                lo: num(base + 1)?,
                hi: num(base + 2)?,
            })
        };
        Ok(SweepRow {
            param: field(0)?,
            value: num(1)?,
            stats: AggregateRow {
                scheme: parse_field(&field(2)?, "scheme", line, path)?,
                round: parse_field(&field(3)?, "round", line, path)?,
                channel_uses: parse_field(&field(4)?, "channel_uses", line, path)?,
                n_runs: parse_field(&field(5)?, "n_runs", line, path)?,
                gap: iv(6)?,
                accuracy: iv(9)?,
                worst_h: iv(12)?,
            },
        })
    })
}

/// True if the CSV header has the sweep layout.
pub fn is_sweep_file(path: &Path) -> Result<bool> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.headers()?.iter().any(|h| h == "param"))
}
