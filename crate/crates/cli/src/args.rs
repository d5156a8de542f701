use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kvmeta::analysis::RandomnessMode;
use kvmeta::bench::LoadMode;
use kvmeta::index::KeyScheme;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "kvmeta",
    version,
    about = "KV-cache metadata trace analysis and benchmarking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characterize a trace: hit-rate CDF, sequential fraction, runs tests, reuse timeline.
    Analyze(AnalyzeArgs),
    /// Compile a trace into metadata ops and replay them against a backend.
    Bench(BenchArgs),
    /// Serve an in-process store over the binary wire protocol.
    Serve(ServeArgs),
    /// Generate a synthetic trace from a JSON config.
    Synth(SynthArgs),
    /// Normalize interval statistics against a baseline and draw charts.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunsMode {
    PerKeyGaps,
    PerRequestMedian,
}

impl From<RunsMode> for RandomnessMode {
    fn from(m: RunsMode) -> Self {
        match m {
            RunsMode::PerKeyGaps => RandomnessMode::PerKeyGaps,
            RunsMode::PerRequestMedian => RandomnessMode::PerRequestMedian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Preload,
    InsertOnMiss,
}

impl From<ModeArg> for LoadMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Preload => LoadMode::Preload,
            ModeArg::InsertOnMiss => LoadMode::InsertOnMiss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleArg {
    ClosedLoop,
    Faithful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KeySchemeArg {
    Ordered,
    StrictHash,
}

impl From<KeySchemeArg> for KeyScheme {
    fn from(k: KeySchemeArg) -> Self {
        match k {
            KeySchemeArg::Ordered => KeyScheme::Ordered,
            KeySchemeArg::StrictHash => KeyScheme::StrictHash,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// JSON-Lines trace, optionally gzip-compressed (`.gz`).
    pub trace: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Width of a reuse-timeline bucket, seconds.
    #[arg(long, default_value_t = 60)]
    pub bucket_seconds: u64,
    /// Minimum occurrences before a key (or request) is runs-tested.
    #[arg(long, default_value_t = 8)]
    pub min_occurrences: usize,
    /// Construction written to runs_test.csv; the summary reports both.
    #[arg(long, value_enum, default_value_t = RunsMode::PerKeyGaps)]
    pub runs_mode: RunsMode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// JSON-Lines trace, optionally gzip-compressed (`.gz`).
    pub trace: PathBuf,
    /// inproc[:capacity=N,policy=lru|lru_pin,pin=N,halflife=S,max_entries=N] | remote:HOST:PORT | external:ADDRESS
    #[arg(long, default_value = "inproc")]
    pub backend: String,
    /// Install keys before timing, or insert each block at its first access.
    #[arg(long, value_enum, default_value_t = ModeArg::Preload)]
    pub mode: ModeArg,
    /// `faithful` honours trace arrival times; `closed-loop` replays back to back.
    #[arg(long, value_enum, default_value_t = ScheduleArg::ClosedLoop)]
    pub schedule: ScheduleArg,
    /// Multiplier on trace time for the faithful schedule (0.5 = twice as fast).
    #[arg(long, default_value_t = 1.0)]
    pub time_scale: f64,
    /// Replay threads pulling from one shared op cursor.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Aggregation interval, seconds.
    #[arg(long, default_value_t = 60)]
    pub interval: u64,
    /// Leading trace time excluded from statistics, seconds.
    #[arg(long, default_value_t = 600)]
    pub warmup: u64,
    /// Split every block into this many sub-blocks.
    #[arg(long, default_value_t = 1)]
    pub chunk_split: u32,
    /// Namespace label, at most 24 bytes.
    #[arg(long, default_value = "")]
    pub namespace: String,
    /// `strict-hash` scatters ids, so every read becomes a point get.
    #[arg(long, value_enum, default_value_t = KeySchemeArg::Ordered)]
    pub key_scheme: KeySchemeArg,
    /// Issue one point get per block instead of range scans.
    #[arg(long)]
    pub point_only: bool,
    /// Abort once errors exceed this fraction of all ops.
    #[arg(long, default_value_t = 0.01)]
    pub abort_error_rate: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7700")]
    pub listen: String,
    /// capacity=N,policy=lru|lru_pin,pin=N,halflife=S,max_entries=N
    #[arg(long, default_value = "")]
    pub cache: String,
    /// Seconds between stats log lines.
    #[arg(long, default_value_t = 60)]
    pub stats_interval: u64,
    /// Directory for the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    /// JSON generator config.
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// File name of the generated trace inside `--out`.
    #[arg(long, default_value = "synth.jsonl")]
    pub trace_name: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// interval_stats.csv inputs as LABEL=PATH or PATH (label = parent directory name).
    #[arg(long = "input", required = true)]
    pub inputs: Vec<String>,
    /// Label of the baseline input; defaults to the first.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Optional hit_rate_cdf.csv to chart.
    #[arg(long)]
    pub cdf: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}
