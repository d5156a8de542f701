//! Workload characterization of prefix-prefill traces: block hit rates,
//! sequential-run structure and randomness of non-sequential accesses.


use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{BlockId, Trace};

pub use runs_test::{
    normal_cdf, runs_test, stat_from_counts, two_sided_p, RunsTestStat, MIN_RUNS_TEST_LEN,
};

/// p-values above this are read as "consistent with randomness".
pub const RANDOMNESS_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("undefined hit rate: request has no blocks")]
    UndefinedHitRate,
    #[error("undefined sequential fraction: request has no blocks")]
    UndefinedSequentialFraction,
    #[error("trace has no non-empty requests")]
    NoNonEmptyRequests,
    #[error("degenerate sequence: {0}")]
    Degenerate(String),
}

/// Blocks produced by fully processed earlier requests.
#[derive(Debug, Default, Clone)]
pub struct SeenSet {
    members: HashSet<BlockId>,
}

impl SeenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Publishes all of a request's blocks at once.
    pub fn absorb(&mut self, ids: &[BlockId]) {
        self.members.extend(ids.iter().copied());
    }
}

/// Fraction of a request's distinct blocks already in `seen`.
pub fn request_hit_rate(ids: &[BlockId], seen: &SeenSet) -> Result<f64, AnalysisError> {
    if ids.is_empty() {
        return Err(AnalysisError::UndefinedHitRate);
    }
    let distinct: HashSet<BlockId> = ids.iter().copied().collect();
    let hits = distinct.iter().filter(|id| seen.contains(**id)).count();
    Ok(hits as f64 / distinct.len() as f64)
}

/// Hit rate of every non-empty request, in trace order, as
/// `(request_index, hit_rate)`.
pub fn per_request_hit_rates(trace: &Trace) -> Vec<(usize, f64)> {
    let mut seen = SeenSet::new();
    let mut out = Vec::with_capacity(trace.len());
    for (i, req) in trace.requests.iter().enumerate() {
        if let Ok(h) = request_hit_rate(&req.block_ids, &seen) {
            out.push((i, h));
        }
        seen.absorb(&req.block_ids);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub hit_rate: f64,
    pub cum_fraction: f64,
}

/// Empirical CDF of per-request hit rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRateCdf {
    pub points: Vec<CdfPoint>,
}

impl HitRateCdf {
    /// Builds the empirical CDF of a sample of values in [0, 1].
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points: Vec<CdfPoint> = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            let cum = (i + 1) as f64 / n;
            match points.last_mut() {
                Some(p) if p.hit_rate == v => p.cum_fraction = cum,
                _ => points.push(CdfPoint {
                    hit_rate: v,
                    cum_fraction: cum,
                }),
            }
        }
        if let Some(last) = points.last_mut() {
            last.cum_fraction = 1.0;
        }
        Some(HitRateCdf { points })
    }

    /// Fraction of samples at or below `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.hit_rate <= x)
            .last()
            .map_or(0.0, |p| p.cum_fraction)
    }

    /// Fraction of samples strictly above `x`.
    pub fn fraction_above(&self, x: f64) -> f64 {
        1.0 - self.at(x)
    }
}

pub fn hit_rate_cdf(trace: &Trace) -> Result<HitRateCdf, AnalysisError> {
    let rates: Vec<f64> = per_request_hit_rates(trace)
        .into_iter()
        .map(|(_, h)| h)
        .collect();
    HitRateCdf::from_samples(&rates).ok_or(AnalysisError::NoNonEmptyRequests)
}

/// A maximal positional stretch of ids that each exceed their predecessor
/// by exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub start_id: BlockId,
    pub length: usize,
}

impl Run {
    pub fn is_sequential(&self) -> bool {
        self.length >= 2
    }

    /// One past the last id of the run.
    pub fn end_id(&self) -> u64 {
        self.start_id.0 + self.length as u64
    }
}

pub fn segment_runs(ids: &[BlockId]) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    let mut prev: Option<u64> = None;
    for &id in ids {
        match (prev, runs.last_mut()) {
            (Some(p), Some(run)) if p.checked_add(1) == Some(id.0) => run.length += 1,
            _ => runs.push(Run {
                start_id: id,
                length: 1,
            }),
        }
        prev = Some(id.0);
    }
    runs
}

/// Share of a request's blocks that sit in runs of length two or more.
pub fn sequential_fraction(ids: &[BlockId]) -> Result<f64, AnalysisError> {
    if ids.is_empty() {
        return Err(AnalysisError::UndefinedSequentialFraction);
    }
    let seq: usize = segment_runs(ids)
        .iter()
        .filter(|r| r.is_sequential())
        .map(|r| r.length)
        .sum();
    Ok(seq as f64 / ids.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeqFractionRow {
    pub request_index: usize,
    pub arrival_ms: u64,
    pub fraction: f64,
}

pub fn per_request_sequential_fraction(trace: &Trace) -> Vec<SeqFractionRow> {
    trace
        .requests
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            sequential_fraction(&r.block_ids)
                .ok()
                .map(|fraction| SeqFractionRow {
                    request_index: i,
                    arrival_ms: r.arrival_ms,
                    fraction,
                })
        })
        .collect()
}

/// Mean sequential fraction over the non-empty requests.
pub fn mean_sequential_fraction(trace: &Trace) -> Option<f64> {
    let rows = per_request_sequential_fraction(trace);
    if rows.is_empty() {
        return None;
    }
    Some(rows.iter().map(|r| r.fraction).sum::<f64>() / rows.len() as f64)
}

/// How the binary sequence for the randomness test is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RandomnessMode {
    /// Per block id: the gaps (in request ordinals) between its successive
    /// non-sequential accesses, dichotomized about the median gap.
    #[default]
    PerKeyGaps,
    /// Per request: its non-sequential ids dichotomized about their median.
    PerRequestMedian,
}

impl RandomnessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RandomnessMode::PerKeyGaps => "per_key_gaps",
            RandomnessMode::PerRequestMedian => "per_request_median",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunsTestEntry {
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsTestReport {
    pub mode: RandomnessMode,
    /// Keyed by block id (per-key mode) or request index (per-request mode).
    pub per_key: BTreeMap<u64, RunsTestEntry>,
    /// `None` when nothing was testable.
    pub fraction_random: Option<f64>,
    pub tested: usize,
    pub skipped: usize,
}

/// Runs tests over the non-sequential (singleton-run) accesses of a trace.
pub fn nonseq_randomness_report(
    trace: &Trace,
    min_occurrences: usize,
    mode: RandomnessMode,
) -> RunsTestReport {
    // (request ordinal, id) for every position in a run of length 1
    let mut singles: Vec<Vec<u64>> = Vec::with_capacity(trace.len());
    for req in &trace.requests {
        let ids = segment_runs(&req.block_ids)
            .into_iter()
            .filter(|r| !r.is_sequential())
            .map(|r| r.start_id.0)
            .collect();
        singles.push(ids);
    }

    let candidates: Vec<(u64, Vec<f64>)> = match mode {
        RandomnessMode::PerKeyGaps => {
            let mut ordinals: HashMap<u64, Vec<usize>> = HashMap::new();
            for (ord, ids) in singles.iter().enumerate() {
                for &id in ids {
                    ordinals.entry(id).or_default().push(ord);
                }
            }
            let mut keyed: Vec<(u64, Vec<f64>)> = ordinals
                .into_iter()
                .map(|(id, ords)| {
                    if ords.len() < min_occurrences {
                        return (id, Vec::new());
                    }
                    let gaps = ords.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
                    (id, gaps)
                })
                .collect();
            keyed.sort_by_key(|(id, _)| *id);
            keyed
        }
        RandomnessMode::PerRequestMedian => singles
            .iter()
            .enumerate()
            .filter(|(_, ids)| !ids.is_empty())
            .map(|(ord, ids)| {
                let values = if ids.len() < min_occurrences {
                    Vec::new()
                } else {
                    ids.iter().map(|&v| v as f64).collect()
                };
                (ord as u64, values)
            })
            .collect(),
    };

    let mut per_key = BTreeMap::new();
    let mut skipped = 0usize;
    for (key, values) in candidates {
        let stat = dichotomize_about_median(&values).and_then(|seq| runs_test(&seq).ok());
        match stat {
            Some(st) => {
                per_key.insert(
                    key,
                    RunsTestEntry {
                        p_value: st.p_value,
                        n1: st.n1,
                        n2: st.n2,
                        runs: st.runs,
                    },
                );
            }
            None => skipped += 1,
        }
    }

    let tested = per_key.len();
    let fraction_random = (tested > 0).then(|| {
        per_key
            .values()
            .filter(|e| e.p_value > RANDOMNESS_ALPHA)
            .count() as f64
            / tested as f64
    });
    RunsTestReport {
        mode,
        per_key,
        fraction_random,
        tested,
        skipped,
    }
}

/// Above-median → `true`, below → `false`, ties dropped.
fn dichotomize_about_median(values: &[f64]) -> Option<Vec<bool>> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Some(
        values
            .iter()
            .filter(|&&v| v != median)
            .map(|&v| v > median)
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub bucket_s: u64,
    pub block_id: u64,
}

/// One point per block access, bucketed by arrival time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReuseTimeline {
    pub points: Vec<TimelinePoint>,
}

/// # Panics
/// If `bucket_seconds` is zero.
pub fn reuse_timeline(trace: &Trace, bucket_seconds: u64) -> ReuseTimeline {
    assert!(bucket_seconds > 0, "bucket_seconds must be positive");
    let width = 1000 * bucket_seconds;
    let points = trace
        .requests
        .iter()
        .flat_map(|r| {
            let bucket = r.arrival_ms / width;
            r.block_ids.iter().map(move |id| TimelinePoint {
                bucket_s: bucket,
                block_id: id.0,
            })
        })
        .collect();
    ReuseTimeline { points }
}
