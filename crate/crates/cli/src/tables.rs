//! CSV artifacts. Headers are fixed; readers reject files whose header
//! differs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use kvmeta::analysis::{CdfPoint, HitRateCdf, ReuseTimeline, RunsTestReport, SeqFractionRow};
use kvmeta::bench::{
    IntervalRow, IntervalStats, LatencyLog, LatencyRecord, NormalizedCell, OpKind, Outcome,
};

pub const HIT_RATE_CDF_HEADER: [&str; 2] = ["hit_rate", "cum_fraction"];
pub const SEQ_FRACTION_HEADER: [&str; 3] = ["request_index", "arrival_ms", "fraction"];
pub const RUNS_TEST_HEADER: [&str; 5] = ["key_or_request", "p_value", "n1", "n2", "runs"];
pub const REUSE_TIMELINE_HEADER: [&str; 2] = ["bucket_s", "block_id"];
pub const LATENCY_LOG_HEADER: [&str; 4] = ["op_kind", "issue_ms", "latency_ns", "outcome"];
pub const INTERVAL_STATS_HEADER: [&str; 5] =
    ["interval_index", "op_kind", "count", "p50_ns", "p99_ns"];
pub const NORMALIZED_HEADER: [&str; 3] = ["interval_index", "op_kind", "ratio"];

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error())?.flush()?;
    Ok(())
}

fn write_rows<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn write_hit_rate_cdf(path: &Path, cdf: &HitRateCdf) -> Result<()> {
    write_rows(
        path,
        HIT_RATE_CDF_HEADER,
        cdf.points
            .iter()
            .map(|p| [p.hit_rate.to_string(), p.cum_fraction.to_string()]),
    )
}

pub fn write_seq_fraction(path: &Path, rows: &[SeqFractionRow]) -> Result<()> {
    write_rows(
        path,
        SEQ_FRACTION_HEADER,
        rows.iter().map(|r| {
            [
                r.request_index.to_string(),
                r.arrival_ms.to_string(),
                r.fraction.to_string(),
            ]
        }),
    )
}

pub fn write_runs_test(path: &Path, report: &RunsTestReport) -> Result<()> {
    write_rows(
        path,
        RUNS_TEST_HEADER,
        report.per_key.iter().map(|(k, e)| {
            [
                k.to_string(),
                e.p_value.to_string(),
                e.n1.to_string(),
                e.n2.to_string(),
                e.runs.to_string(),
            ]
        }),
    )
}

pub fn write_reuse_timeline(path: &Path, timeline: &ReuseTimeline) -> Result<()> {
    write_rows(
        path,
        REUSE_TIMELINE_HEADER,
        timeline
            .points
            .iter()
            .map(|p| [p.bucket_s.to_string(), p.block_id.to_string()]),
    )
}

/// Error outcomes are written as `error:<class>`.
pub fn outcome_cell(o: &Outcome) -> String {
    match o {
        Outcome::Error(class) => format!("error:{class}"),
        other => other.label().to_string(),
    }
}

fn parse_outcome(s: &str) -> Result<Outcome> {
    Ok(match s {
        "ok" => Outcome::Ok,
        "miss" => Outcome::Miss,
        "error" => Outcome::Error("unknown".into()),
        other => match other.strip_prefix("error:") {
            Some(class) => Outcome::Error(class.to_string()),
            None => bail!("unknown outcome `{other}`"),
        },
    })
}

pub fn write_latency_log(path: &Path, log: &LatencyLog) -> Result<()> {
    write_rows(
        path,
        LATENCY_LOG_HEADER,
        log.records.iter().map(|r| {
            [
                r.kind.as_str().to_string(),
                r.issue_ms.to_string(),
                r.latency_ns.to_string(),
                outcome_cell(&r.outcome),
            ]
        }),
    )
}

pub fn write_interval_stats(path: &Path, stats: &IntervalStats) -> Result<()> {
    write_rows(
        path,
        INTERVAL_STATS_HEADER,
        stats.rows.iter().map(|r| {
            [
                r.interval_index.to_string(),
                r.op_kind.as_str().to_string(),
                r.count.to_string(),
                r.p50_ns.to_string(),
                r.p99_ns.to_string(),
            ]
        }),
    )
}

/// Undefined ratios (zero baseline) are written as an empty cell.
pub fn write_normalized(path: &Path, cells: &[NormalizedCell]) -> Result<()> {
    write_rows(
        path,
        NORMALIZED_HEADER,
        cells.iter().map(|c| {
            [
                c.interval_index.to_string(),
                c.op_kind.as_str().to_string(),
                c.ratio.map(|r| r.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        bail!(
            "{}: header `{}` does not match `{}`",
            path.display(),
            got.join(","),
            header.join(",")
        );
    }
    r.records()
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|e| {
        let line = rec.position().map_or(0, |p| p.line());
        anyhow::anyhow!("{} line {line}: bad field `{raw}`: {e}", path.display())
    })
}

pub fn read_interval_stats(path: &Path) -> Result<IntervalStats> {
    let mut rows = Vec::new();
    for rec in read_rows(path, &INTERVAL_STATS_HEADER)? {
        rows.push(IntervalRow {
            interval_index: field(&rec, 0, path)?,
            op_kind: field::<OpKind>(&rec, 1, path)?,
            count: field(&rec, 2, path)?,
            p50_ns: field(&rec, 3, path)?,
            p99_ns: field(&rec, 4, path)?,
        });
    }
    rows.sort_by_key(|r| (r.interval_index, r.op_kind));
    Ok(IntervalStats {
        rows,
        errors: BTreeMap::new(),
    })
}

/// Reads a latency log; `op_index` is the row position.
pub fn read_latency_log(path: &Path) -> Result<LatencyLog> {
    let mut records = Vec::new();
    for (i, rec) in read_rows(path, &LATENCY_LOG_HEADER)?
        .into_iter()
        .enumerate()
    {
        records.push(LatencyRecord {
            op_index: i,
            kind: field::<OpKind>(&rec, 0, path)?,
            issue_ms: field(&rec, 1, path)?,
            latency_ns: field(&rec, 2, path)?,
            outcome: parse_outcome(rec.get(3).unwrap_or(""))?,
            lag_ns: 0,
            items: 0,
        });
    }
    Ok(LatencyLog { records })
}

pub fn read_hit_rate_cdf(path: &Path) -> Result<HitRateCdf> {
    let mut points = Vec::new();
    for rec in read_rows(path, &HIT_RATE_CDF_HEADER)? {
        points.push(CdfPoint {
            hit_rate: field(&rec, 0, path)?,
            cum_fraction: field(&rec, 1, path)?,
        });
    }
    Ok(HitRateCdf { points })
}

/// Writes a pretty JSON document with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
