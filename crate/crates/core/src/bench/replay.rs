use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::compile::{value_for, MetadataOp, OpAction, OpKind, OpStream};
use crate::backend::{Backend, BackendError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Dispatch each op no earlier than `issue_ms × time_scale` after start.
    Faithful { time_scale: f64 },
    /// Ignore issue times; keep exactly `workers` ops in flight.
    ClosedLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub schedule: Schedule,
    pub workers: usize,
    /// Abort once errors exceed this fraction of the stream.
    pub abort_error_rate: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            schedule: Schedule::ClosedLoop,
            workers: 1,
            abort_error_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Miss,
    /// Carries the error class.
    Error(String),
}

impl Outcome {
    pub fn label(&self) -> &str {
        match self {
            Outcome::Ok => "ok",
            Outcome::Miss => "miss",
            Outcome::Error(_) => "error",
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::Error(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyRecord {
    /// Position of the op in its stream.
    pub op_index: usize,
    pub kind: OpKind,
    pub issue_ms: u64,
    pub latency_ns: u64,
    pub outcome: Outcome,
    /// How late the op was dispatched against its schedule.
    pub lag_ns: u64,
    /// Entries returned (scans), 1/0 for hits/misses of point gets.
    pub items: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyLog {
    pub records: Vec<LatencyRecord>,
}

impl LatencyLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_outcome(&self, label: &str) -> usize {
        self.records
            .iter()
            .filter(|r| r.outcome.label() == label)
            .count()
    }

    pub fn errors(&self) -> usize {
        self.records.iter().filter(|r| r.outcome.is_error()).count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub log: LatencyLog,
    pub aborted: bool,
    pub wall_ms: u64,
    pub max_lag_ns: u64,
    pub mean_lag_ns: f64,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("time_scale must be finite and non-negative")]
    BadTimeScale,
    #[error("backend unavailable: {0}")]
    Unavailable(BackendError),
    #[error("preload failed: {0}")]
    Preload(BackendError),
}

/// Replays `stream` against `backend` and records one latency per op.
///
/// Preload entries are installed first, untimed. Latency brackets only the
/// backend call; lateness against the schedule is kept separately in
/// `lag_ns`. Records come back in stream order.
///
/// Workers pull ops from a shared cursor, so with more than one worker a
/// read may run before an earlier insert of the same block and record a
/// miss; insert-on-miss streams are only order-exact with one worker.
pub fn replay<B: Backend + ?Sized>(
    stream: &OpStream,
    backend: &B,
    config: &ReplayConfig,
) -> Result<ReplayReport, ReplayError> {
    if config.workers == 0 {
        return Err(ReplayError::NoWorkers);
    }
    if let Schedule::Faithful { time_scale } = config.schedule {
        if !(time_scale.is_finite() && time_scale >= 0.0) {
            return Err(ReplayError::BadTimeScale);
        }
    }
    backend.stats().map_err(ReplayError::Unavailable)?;
    for (key, value) in &stream.preload {
        backend.put(*key, *value).map_err(ReplayError::Preload)?;
    }

    let total = stream.ops.len();
    let max_errors = config.abort_error_rate * total as f64;
    let next = AtomicUsize::new(0);
    let errors = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let start = Instant::now();

    let mut buffers: Vec<Vec<LatencyRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        if abort.load(Ordering::Relaxed) {
                            break;
                        }
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= total {
                            break;
                        }
                        let op = &stream.ops[i];
                        let lag_ns = match config.schedule {
                            Schedule::ClosedLoop => 0,
                            Schedule::Faithful { time_scale } => {
                                wait_until_due(start, op.issue_ms, time_scale)
                            }
                        };
                        let rec = execute(backend, i, op, lag_ns);
                        if rec.outcome.is_error() {
                            let n = errors.fetch_add(1, Ordering::Relaxed) + 1;
                            if n as f64 > max_errors {
                                abort.store(true, Ordering::Relaxed);
                            }
                        }
                        local.push(rec);
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replay worker panicked"))
            .collect()
    });

    let mut records: Vec<LatencyRecord> = buffers.iter_mut().flat_map(std::mem::take).collect();
    records.sort_by_key(|r| r.op_index);
    let max_lag_ns = records.iter().map(|r| r.lag_ns).max().unwrap_or(0);
    let mean_lag_ns = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.lag_ns as f64).sum::<f64>() / records.len() as f64
    };
    Ok(ReplayReport {
        aborted: abort.load(Ordering::Relaxed),
        wall_ms: start.elapsed().as_millis() as u64,
        log: LatencyLog { records },
        max_lag_ns,
        mean_lag_ns,
    })
}

fn wait_until_due(start: Instant, issue_ms: u64, time_scale: f64) -> u64 {
    let due = start + Duration::from_secs_f64(issue_ms as f64 * time_scale / 1000.0);
    let now = Instant::now();
    if now < due {
        std::thread::sleep(due - now);
        0
    } else {
        (now - due).as_nanos() as u64
    }
}

fn execute<B: Backend + ?Sized>(
    backend: &B,
    op_index: usize,
    op: &MetadataOp,
    lag_ns: u64,
) -> LatencyRecord {
    let t0 = Instant::now();
    let (elapsed, judged) = match op.action {
        OpAction::PointGet { key, id } => {
            let r = backend.get(&key);
            let elapsed = t0.elapsed();
            let judged = match r {
                Ok(Some(v)) if v == value_for(id) => (Outcome::Ok, 1),
                Ok(Some(_)) => (Outcome::Error("mismatch".into()), 1),
                Ok(None) => (Outcome::Miss, 0),
                Err(e) => (Outcome::Error(e.class().into()), 0),
            };
            (elapsed, judged)
        }
        OpAction::RangeScan {
            start,
            end_exclusive,
            first,
            len,
        } => {
            let r = backend.scan(&start, &end_exclusive, len as usize);
            let elapsed = t0.elapsed();
            let judged = match r {
                Ok(entries) => {
                    let n = entries.len() as u32;
                    // every entry must lie in the run and carry its id as value
                    let consistent = entries.iter().all(|(k, v)| {
                        let id = k.block_id();
                        id.0.wrapping_sub(first.0) < u64::from(len) && *v == value_for(id)
                    });
                    if !consistent {
                        (Outcome::Error("mismatch".into()), n)
                    } else if n == len {
                        (Outcome::Ok, n)
                    } else {
                        (Outcome::Miss, n)
                    }
                }
                Err(e) => (Outcome::Error(e.class().into()), 0),
            };
            (elapsed, judged)
        }
        OpAction::Insert { key, value } => {
            let r = backend.put(key, value);
            let elapsed = t0.elapsed();
            let judged = match r {
                Ok(_) => (Outcome::Ok, 1),
                Err(e) => (Outcome::Error(e.class().into()), 0),
            };
            (elapsed, judged)
        }
    };
    finish(op_index, op, lag_ns, elapsed, judged)
}

fn finish(
    op_index: usize,
    op: &MetadataOp,
    lag_ns: u64,
    elapsed: Duration,
    (outcome, items): (Outcome, u32),
) -> LatencyRecord {
    LatencyRecord {
        op_index,
        kind: op.kind(),
        issue_ms: op.issue_ms,
        latency_ns: (elapsed.as_nanos() as u64).max(1),
        outcome,
        lag_ns,
        items,
    }
}
