//! Trace-driven metadata benchmark: op compilation, replay, and tail-latency
//! aggregation.

mod compile;
mod replay;
mod stats;

pub use compile::{
    compile_ops, value_for, CompileError, CompileOptions, LoadMode, MetadataOp, OpAction, OpKind,
    OpStream,
};
pub use replay::{
    replay, LatencyLog, LatencyRecord, Outcome, ReplayConfig, ReplayError, ReplayReport, Schedule,
};
pub use stats::{
    interval_stats, normalize, percentile, percentile_sorted, IntervalRow, IntervalStats,
    NormalizedCell, NormalizedReport, StatsError,
};

/// Default aggregation window, seconds.
pub const DEFAULT_INTERVAL_S: u64 = 60;
/// Default warm-up exclusion, seconds of trace time.
pub const DEFAULT_WARMUP_S: u64 = 600;
