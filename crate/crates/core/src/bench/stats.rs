use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compile::OpKind;
use super::replay::LatencyLog;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("percentile of an empty sample")]
    EmptySample,
    #[error("quantile {0} outside (0, 1]")]
    BadQuantile(f64),
    #[error("no (interval, op_kind) cells shared with the baseline")]
    NoSharedCells,
}

/// Nearest-rank percentile: the element at 1-based rank `ceil(q·n)` of the
/// ascending sample.
pub fn percentile(samples: &[u64], q: f64) -> Result<u64, StatsError> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    percentile_sorted(&sorted, q)
}

pub fn percentile_sorted(sorted: &[u64], q: f64) -> Result<u64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(StatsError::BadQuantile(q));
    }
    let n = sorted.len();
    // guard against q·n landing a hair above an integer
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub interval_index: u64,
    pub op_kind: OpKind,
    pub count: usize,
    pub p50_ns: u64,
    pub p99_ns: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalStats {
    /// Sorted by (interval_index, op_kind); empty cells omitted.
    pub rows: Vec<IntervalRow>,
    /// Error records per cell, excluded from the percentiles.
    pub errors: BTreeMap<(u64, OpKind), usize>,
}

impl IntervalStats {
    pub fn cell(&self, interval_index: u64, kind: OpKind) -> Option<&IntervalRow> {
        self.rows
            .iter()
            .find(|r| r.interval_index == interval_index && r.op_kind == kind)
    }

    pub fn total_errors(&self) -> usize {
        self.errors.values().sum()
    }
}

/// Per-interval p50/p99 per op kind over half-open windows of `interval_s`
/// seconds of issue time, after dropping everything issued in the first
/// `warmup_s` seconds.
///
/// # Panics
/// If `interval_s` is zero.
pub fn interval_stats(log: &LatencyLog, interval_s: u64, warmup_s: u64) -> IntervalStats {
    assert!(interval_s > 0, "interval_s must be positive");
    let width_ms = interval_s * 1000;
    let warmup_ms = warmup_s.saturating_mul(1000);
    let mut cells: BTreeMap<(u64, OpKind), Vec<u64>> = BTreeMap::new();
    let mut errors: BTreeMap<(u64, OpKind), usize> = BTreeMap::new();
    for r in log.records.iter().filter(|r| r.issue_ms >= warmup_ms) {
        let cell = (r.issue_ms / width_ms, r.kind);
        if r.outcome.is_error() {
            *errors.entry(cell).or_default() += 1;
        } else {
            cells.entry(cell).or_default().push(r.latency_ns);
        }
    }
    let rows = cells
        .into_iter()
        .map(|((interval_index, op_kind), mut lat)| {
            lat.sort_unstable();
            IntervalRow {
                interval_index,
                op_kind,
                count: lat.len(),
                p50_ns: percentile_sorted(&lat, 0.50).expect("cell is non-empty"),
                p99_ns: percentile_sorted(&lat, 0.99).expect("cell is non-empty"),
            }
        })
        .collect();
    IntervalStats { rows, errors }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCell {
    pub interval_index: u64,
    pub op_kind: OpKind,
    /// `None` when the baseline p99 is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedReport {
    pub cells: Vec<NormalizedCell>,
    /// Mean ratio over the defined cells of each op kind.
    pub mean_ratio: BTreeMap<OpKind, f64>,
    pub undefined_cells: usize,
}

/// p99 of `stats` over p99 of `baseline`, cell by cell, over the cells both
/// contain.
pub fn normalize(
    stats: &IntervalStats,
    baseline: &IntervalStats,
) -> Result<NormalizedReport, StatsError> {
    let base: BTreeMap<(u64, OpKind), u64> = baseline
        .rows
        .iter()
        .map(|r| ((r.interval_index, r.op_kind), r.p99_ns))
        .collect();
    let mut cells = Vec::new();
    let mut sums: BTreeMap<OpKind, (f64, usize)> = BTreeMap::new();
    let mut undefined_cells = 0;
    for row in &stats.rows {
        let Some(&b) = base.get(&(row.interval_index, row.op_kind)) else {
            continue;
        };
        let ratio = (b > 0).then(|| row.p99_ns as f64 / b as f64);
        match ratio {
            Some(x) => {
                let e = sums.entry(row.op_kind).or_default();
                e.0 += x;
                e.1 += 1;
            }
            None => undefined_cells += 1,
        }
        cells.push(NormalizedCell {
            interval_index: row.interval_index,
            op_kind: row.op_kind,
            ratio,
        });
    }
    if cells.is_empty() {
        return Err(StatsError::NoSharedCells);
    }
    let mean_ratio = sums
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect();
    Ok(NormalizedReport {
        cells,
        mean_ratio,
        undefined_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::replay::{LatencyRecord, Outcome};

    fn rec(kind: OpKind, issue_ms: u64, latency_ns: u64, outcome: Outcome) -> LatencyRecord {
        LatencyRecord {
            op_index: 0,
            kind,
            issue_ms,
            latency_ns,
            outcome,
            lag_ns: 0,
            items: 1,
        }
    }

    #[test]
    fn nearest_rank_examples() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.99).unwrap(), 99);
        assert_eq!(percentile(&v, 0.5).unwrap(), 50);
        assert_eq!(percentile(&v, 1.0).unwrap(), 100);
        assert_eq!(percentile(&v, 0.001).unwrap(), 1);
        assert_eq!(percentile(&[42], 0.3).unwrap(), 42);
        assert_eq!(percentile(&[42], 1.0).unwrap(), 42);
        assert_eq!(percentile(&[5, 1, 3], 1.0).unwrap(), 5);
        assert_eq!(percentile(&[], 0.5), Err(StatsError::EmptySample));
        assert!(percentile(&[1], 0.0).is_err());
        assert!(percentile(&[1], 1.5).is_err());
    }

    #[test]
    fn rank_rounding_at_exact_products() {
        // 0.29·100 is 28.999999999999996 in f64; rank must still be 29
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.29).unwrap(), 29);
        // 0.07·100 is 7.000000000000001 in f64; rank must be 7
        assert_eq!(percentile(&v, 0.07).unwrap(), 7);
    }

    #[test]
    fn warmup_drops_everything() {
        let log = LatencyLog {
            records: vec![rec(OpKind::PointGet, 10, 5, Outcome::Ok)],
        };
        assert!(interval_stats(&log, 60, 600).rows.is_empty());
    }

    #[test]
    fn single_interval_p99() {
        let log = LatencyLog {
            records: (1..=100)
                .map(|ns| rec(OpKind::PointGet, 0, ns, Outcome::Ok))
                .collect(),
        };
        let st = interval_stats(&log, 60, 0);
        assert_eq!(
            st.rows,
            vec![IntervalRow {
                interval_index: 0,
                op_kind: OpKind::PointGet,
                count: 100,
                p50_ns: 50,
                p99_ns: 99,
            }]
        );
    }

    #[test]
    fn errors_counted_apart() {
        let log = LatencyLog {
            records: vec![
                rec(OpKind::RangeScan, 61_000, 7, Outcome::Ok),
                rec(
                    OpKind::RangeScan,
                    61_500,
                    1_000_000,
                    Outcome::Error("timeout".into()),
                ),
                rec(OpKind::RangeScan, 62_000, 9, Outcome::Miss),
                rec(
                    OpKind::PointGet,
                    5_000,
                    3,
                    Outcome::Error("transport".into()),
                ),
            ],
        };
        let st = interval_stats(&log, 60, 0);
        assert_eq!(st.rows.len(), 1);
        assert_eq!(st.rows[0].interval_index, 1);
        assert_eq!(st.rows[0].count, 2);
        assert_eq!(st.rows[0].p99_ns, 9);
        assert_eq!(st.errors[&(1, OpKind::RangeScan)], 1);
        assert_eq!(st.errors[&(0, OpKind::PointGet)], 1);
        assert_eq!(st.total_errors(), 2);
    }

    fn stats(rows: &[(u64, OpKind, u64)]) -> IntervalStats {
        IntervalStats {
            rows: rows
                .iter()
                .map(|&(i, k, p99)| IntervalRow {
                    interval_index: i,
                    op_kind: k,
                    count: 1,
                    p50_ns: p99,
                    p99_ns: p99,
                })
                .collect(),
            errors: BTreeMap::new(),
        }
    }

    #[test]
    fn self_normalization_is_identity() {
        let s = stats(&[
            (10, OpKind::PointGet, 800),
            (10, OpKind::RangeScan, 1200),
            (11, OpKind::PointGet, 900),
        ]);
        let n = normalize(&s, &s).unwrap();
        assert!(n.cells.iter().all(|c| c.ratio == Some(1.0)));
        assert!(n.mean_ratio.values().all(|&m| m == 1.0));
    }

    #[test]
    fn halved_latency_normalizes_to_half() {
        let base = stats(&[(10, OpKind::PointGet, 800), (11, OpKind::PointGet, 1000)]);
        let half = stats(&[(10, OpKind::PointGet, 400), (11, OpKind::PointGet, 500)]);
        let n = normalize(&half, &base).unwrap();
        assert_eq!(n.mean_ratio[&OpKind::PointGet], 0.5);
        assert!(n.cells.iter().all(|c| c.ratio == Some(0.5)));
    }

    #[test]
    fn disjoint_and_zero_baselines() {
        let a = stats(&[(1, OpKind::PointGet, 10)]);
        let b = stats(&[(2, OpKind::PointGet, 10)]);
        assert_eq!(normalize(&a, &b), Err(StatsError::NoSharedCells));
        let zero = stats(&[(1, OpKind::PointGet, 0)]);
        let n = normalize(&a, &zero).unwrap();
        assert_eq!(n.cells[0].ratio, None);
        assert_eq!(n.undefined_cells, 1);
    }
}
