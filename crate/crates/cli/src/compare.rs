//! `fedhdc compare`: rounds and uplink traffic needed to reach a reference
//! run's best accuracy.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use crate::run::RECORDS_HEADER;

/// The columns of records.csv that comparison needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRow {
    pub round: usize,
    pub accuracy: f64,
    pub cum_uplink_bytes: u64,
}

pub fn read_records(dir: &Path) -> anyhow::Result<Vec<RoundRow>> {
    let path = dir.join("records.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    parse_records(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_records(text: &str) -> anyhow::Result<Vec<RoundRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RECORDS_HEADER => {}
        _ => bail!("line 1: expected header {RECORDS_HEADER:?}"),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            bail!("line {}: expected 7 fields, found {}", i + 1, fields.len());
        }
        let bad = |what: &str| format!("line {}: bad {what}", i + 1);
        rows.push(RoundRow {
            round: fields[0].parse().with_context(|| bad("round"))?,
            accuracy: fields[2].parse().with_context(|| bad("accuracy"))?,
            cum_uplink_bytes: fields[4].parse().with_context(|| bad("cum_uplink_bytes"))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub max_accuracy: f64,
    /// First round at or above the target, or `None` if never reached.
    pub rounds_to_target: Option<usize>,
    /// Display form: the round, or "G+" when the target is never reached.
    pub rounds_label: String,
    /// Cumulative uplink at the target round (all rounds if never reached).
    pub uplink_bytes: u64,
    pub uplink_mb_label: String,
    pub uplink_delta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub reference: String,
    pub target_accuracy: f64,
    pub runs: Vec<ComparisonRow>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn max_accuracy(rows: &[RoundRow]) -> f64 {
    rows.iter().map(|r| r.accuracy).fold(0.0, f64::max)
}

/// Megabytes (10^6 bytes) without trailing zeros.
pub fn format_mb(bytes: u64) -> String {
    trim_decimal(bytes as f64 / 1e6, 3)
}

/// Signed percentage change, rounded to one decimal: "-55%", "+2.5%", "0%".
pub fn format_delta(value: u64, reference: u64) -> String {
    if reference == 0 {
        return if value == 0 { "0%".into() } else { "n/a".into() };
    }
    let pct = 100.0 * (value as f64 - reference as f64) / reference as f64;
    let rounded = (pct * 10.0).round() / 10.0;
    if rounded == 0.0 {
        "0%".into()
    } else if rounded > 0.0 {
        format!("+{}%", trim_decimal(rounded, 1))
    } else {
        format!("{}%", trim_decimal(rounded, 1))
    }
}

fn trim_decimal(v: f64, places: usize) -> String {
    let s = format!("{v:.places$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn compare(runs: &[(String, Vec<RoundRow>)], reference: &(String, Vec<RoundRow>)) -> anyhow::Result<Comparison> {
    let target = max_accuracy(&reference.1);
    let reach = |rows: &[RoundRow]| rows.iter().find(|r| r.accuracy >= target).copied();
    let Some(ref_hit) = reach(&reference.1) else {
        bail!("reference run {} has no records", reference.0);
    };
    let rows = runs
        .iter()
        .map(|(name, rows)| {
            let total = rows.last().map_or(0, |r| r.cum_uplink_bytes);
            let (rounds, uplink, rounds_label, suffix) = match reach(rows) {
                Some(hit) => (Some(hit.round), hit.cum_uplink_bytes, hit.round.to_string(), ""),
                None => (None, total, format!("{}+", rows.len()), "+"),
            };
            ComparisonRow {
                run: name.clone(),
                max_accuracy: max_accuracy(rows),
                rounds_to_target: rounds,
                rounds_label,
                uplink_bytes: uplink,
                uplink_mb_label: format!("{}{suffix}", format_mb(uplink)),
                uplink_delta: format!(
                    "{}{}",
                    if suffix.is_empty() { "" } else { ">=" },
                    format_delta(uplink, ref_hit.cum_uplink_bytes)
                ),
            }
        })
        .collect();
    Ok(Comparison {
        reference: reference.0.clone(),
        target_accuracy: target,
        runs: rows,
    })
}

pub fn compare_dirs(dirs: &[PathBuf], reference: &Path) -> anyhow::Result<Comparison> {
    let load = |d: &Path| -> anyhow::Result<(String, Vec<RoundRow>)> { Ok((run_name(d), read_records(d)?)) };
    let runs = dirs.iter().map(|d| load(d)).collect::<anyhow::Result<Vec<_>>>()?;
    compare(&runs, &load(reference)?)
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,max_accuracy,rounds_to_target,uplink_mb,uplink_delta\n");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{:.4},{},{},{}",
                r.run, r.max_accuracy, r.rounds_label, r.uplink_mb_label, r.uplink_delta
            );
        }
        s
    }
}
