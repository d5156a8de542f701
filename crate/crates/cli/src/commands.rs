use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use kvmeta::analysis::{
    hit_rate_cdf, mean_sequential_fraction, nonseq_randomness_report, per_request_hit_rates,
    per_request_sequential_fraction, reuse_timeline, RandomnessMode, RunsTestReport,
};
use kvmeta::backend::Backend;
use kvmeta::bench::{
    compile_ops, interval_stats, normalize, percentile, replay, CompileOptions, IntervalStats,
    OpKind, ReplayConfig, Schedule,
};
use kvmeta::index::{IndexStats, MetaStore, Namespace};
use kvmeta::service::{serve, ServiceHandle};
use kvmeta::synth::{fit_report, generate, measure, FitReport, FitTargets, SynthConfig};
use kvmeta::trace::{load_trace, serialize_trace};
use serde::Serialize;

use crate::args::{AnalyzeArgs, BenchArgs, ReportArgs, ScheduleArg, ServeArgs, SynthArgs};
use crate::manifest::RunManifest;
use crate::spec::{parse_store_config, BackendSpec};
use crate::svg::{self, Chart, Series};
use crate::tables;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The replay error-rate threshold tripped; outputs are partial.
    Aborted,
}

fn snapshot<T: Serialize>(args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Nearest-rank percentile of a non-empty sample.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Serialize)]
pub struct HitRateSummary {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub fraction_above_half: f64,
}

#[derive(Debug, Serialize)]
pub struct RunsSummary {
    pub tested: usize,
    pub skipped: usize,
    pub fraction_random: Option<f64>,
}

impl From<&RunsTestReport> for RunsSummary {
    fn from(r: &RunsTestReport) -> Self {
        RunsSummary {
            tested: r.tested,
            skipped: r.skipped,
            fraction_random: r.fraction_random,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AnalysisSummary {
    pub label: String,
    pub requests: usize,
    pub non_empty_requests: usize,
    pub total_blocks: usize,
    pub out_of_order: usize,
    pub hit_rate: HitRateSummary,
    pub avg_sequential_fraction: f64,
    pub runs_test_per_key_gaps: RunsSummary,
    pub runs_test_per_request_median: RunsSummary,
}

pub fn analyze(args: &AnalyzeArgs, argv: &[String]) -> Result<(RunStatus, AnalysisSummary)> {
    let parsed =
        load_trace(&args.trace).with_context(|| format!("loading {}", args.trace.display()))?;
    let trace = &parsed.trace;
    let manifest = RunManifest::begin("analyze", argv, snapshot(args)?)
        .with_trace(&trace.label, &args.trace)?;
    create_dir(&args.out)?;

    let cdf = hit_rate_cdf(trace)?;
    let mut rates: Vec<f64> = per_request_hit_rates(trace)
        .into_iter()
        .map(|(_, h)| h)
        .collect();
    rates.sort_by(f64::total_cmp);
    let seq = per_request_sequential_fraction(trace);
    let timeline = reuse_timeline(trace, args.bucket_seconds.max(1));
    let by_key = nonseq_randomness_report(trace, args.min_occurrences, RandomnessMode::PerKeyGaps);
    let by_request = nonseq_randomness_report(
        trace,
        args.min_occurrences,
        RandomnessMode::PerRequestMedian,
    );
    let selected = match RandomnessMode::from(args.runs_mode) {
        RandomnessMode::PerKeyGaps => &by_key,
        RandomnessMode::PerRequestMedian => &by_request,
    };

    tables::write_hit_rate_cdf(&args.out.join("hit_rate_cdf.csv"), &cdf)?;
    tables::write_seq_fraction(&args.out.join("seq_fraction.csv"), &seq)?;
    tables::write_runs_test(&args.out.join("runs_test.csv"), selected)?;
    tables::write_reuse_timeline(&args.out.join("reuse_timeline.csv"), &timeline)?;

    let summary = AnalysisSummary {
        label: trace.label.clone(),
        requests: trace.len(),
        non_empty_requests: rates.len(),
        total_blocks: trace.total_blocks(),
        out_of_order: parsed.out_of_order,
        hit_rate: HitRateSummary {
            mean: rates.iter().sum::<f64>() / rates.len() as f64,
            p50: nearest_rank(&rates, 0.5),
            p90: nearest_rank(&rates, 0.9),
            p99: nearest_rank(&rates, 0.99),
            fraction_above_half: cdf.fraction_above(0.5),
        },
        avg_sequential_fraction: mean_sequential_fraction(trace).unwrap_or(0.0),
        runs_test_per_key_gaps: (&by_key).into(),
        runs_test_per_request_median: (&by_request).into(),
    };
    tables::write_json(&args.out.join("summary.json"), &summary)?;
    manifest.finish(&args.out)?;
    Ok((RunStatus::Completed, summary))
}

#[derive(Debug, Serialize)]
pub struct KindSummary {
    pub op_kind: OpKind,
    pub samples: usize,
    pub errors: usize,
    pub p99_ns: Option<u64>,
    /// Mean over intervals of the per-interval p99.
    pub mean_interval_p99_ns: Option<f64>,
    pub intervals: usize,
}

#[derive(Debug, Serialize)]
pub struct BenchSummary {
    pub label: String,
    pub backend: String,
    pub ops: usize,
    pub records: usize,
    pub covered_positions: usize,
    pub ok: usize,
    pub misses: usize,
    pub errors: usize,
    pub aborted: bool,
    pub wall_ms: u64,
    pub max_lag_ns: u64,
    pub mean_lag_ns: f64,
    pub per_kind: Vec<KindSummary>,
    /// Backend counters accumulated during the run (preload included).
    pub backend_stats: Option<IndexStats>,
    pub cache_hit_rate: Option<f64>,
}

fn stats_delta(before: IndexStats, after: IndexStats) -> IndexStats {
    let (b, a) = (before.to_array(), after.to_array());
    let mut d = [0u64; IndexStats::FIELDS];
    for i in 0..IndexStats::FIELDS {
        d[i] = a[i].saturating_sub(b[i]);
    }
    let mut delta = IndexStats::from_array(d);
    // gauges, not counters
    delta.resident_entries = after.resident_entries;
    delta.cached_entries = after.cached_entries;
    delta
}

pub fn bench(args: &BenchArgs, argv: &[String]) -> Result<(RunStatus, BenchSummary)> {
    let spec: BackendSpec = args.backend.parse()?;
    let trace = load_trace(&args.trace)
        .with_context(|| format!("loading {}", args.trace.display()))?
        .trace;
    let mut manifest =
        RunManifest::begin("bench", argv, snapshot(args)?).with_trace(&trace.label, &args.trace)?;
    manifest.backend = Some(spec.describe());
    let namespace = Namespace::from_label(&args.namespace)
        .ok_or_else(|| anyhow!("namespace `{}` is longer than 24 bytes", args.namespace))?;
    let opts = CompileOptions {
        mode: args.mode.into(),
        namespace,
        chunk_split: args.chunk_split,
        key_scheme: args.key_scheme.into(),
        point_only: args.point_only,
    };
    let stream = compile_ops(&trace, &opts)?;
    let schedule = match args.schedule {
        ScheduleArg::ClosedLoop => Schedule::ClosedLoop,
        ScheduleArg::Faithful => Schedule::Faithful {
            time_scale: args.time_scale,
        },
    };
    let config = ReplayConfig {
        schedule,
        workers: args.workers,
        abort_error_rate: args.abort_error_rate,
    };
    if args.interval == 0 {
        bail!("--interval must be positive");
    }
    create_dir(&args.out)?;

    let backend: Arc<dyn Backend> = spec.open()?;
    let before = backend.stats().ok();
    let report = replay(&stream, &*backend, &config)?;
    let after = backend.stats().ok();
    let log = &report.log;

    tables::write_latency_log(&args.out.join("latency_log.csv"), log)?;
    let stats = interval_stats(log, args.interval, args.warmup);
    tables::write_interval_stats(&args.out.join("interval_stats.csv"), &stats)?;

    let warmup_ms = args.warmup.saturating_mul(1000);
    let per_kind = OpKind::ALL
        .into_iter()
        .filter(|k| stream.count(*k) > 0)
        .map(|kind| {
            let lat: Vec<u64> = log
                .records
                .iter()
                .filter(|r| r.kind == kind && r.issue_ms >= warmup_ms && !r.outcome.is_error())
                .map(|r| r.latency_ns)
                .collect();
            let rows: Vec<_> = stats.rows.iter().filter(|r| r.op_kind == kind).collect();
            KindSummary {
                op_kind: kind,
                samples: lat.len(),
                errors: stats
                    .errors
                    .iter()
                    .filter(|((_, k), _)| *k == kind)
                    .map(|(_, n)| n)
                    .sum(),
                p99_ns: percentile(&lat, 0.99).ok(),
                mean_interval_p99_ns: (!rows.is_empty())
                    .then(|| rows.iter().map(|r| r.p99_ns as f64).sum::<f64>() / rows.len() as f64),
                intervals: rows.len(),
            }
        })
        .collect::<Vec<_>>();

    let backend_stats = before.zip(after).map(|(b, a)| stats_delta(b, a));
    let summary = BenchSummary {
        label: trace.label.clone(),
        backend: backend.describe(),
        ops: stream.len(),
        records: log.len(),
        covered_positions: stream.covered_positions(),
        ok: log.count_outcome("ok"),
        misses: log.count_outcome("miss"),
        errors: log.errors(),
        aborted: report.aborted,
        wall_ms: report.wall_ms,
        max_lag_ns: report.max_lag_ns,
        mean_lag_ns: report.mean_lag_ns,
        per_kind,
        cache_hit_rate: backend_stats.and_then(|s| s.cache_hit_rate()),
        backend_stats,
    };

    for k in &summary.per_kind {
        match (k.p99_ns, k.mean_interval_p99_ns) {
            (Some(p99), Some(mean)) => println!(
                "{}: n={} p99={}ns mean-interval-p99={:.0}ns over {} intervals",
                k.op_kind, k.samples, p99, mean, k.intervals
            ),
            (Some(p99), None) => println!("{}: n={} p99={}ns", k.op_kind, k.samples, p99),
            _ => println!("{}: no samples after warm-up", k.op_kind),
        }
    }
    println!(
        "ops={} ok={} miss={} error={}{}",
        summary.ops,
        summary.ok,
        summary.misses,
        summary.errors,
        if summary.aborted { " ABORTED" } else { "" }
    );

    tables::write_json(&args.out.join("bench_summary.json"), &summary)?;
    let status = if report.aborted {
        fs::write(
            args.out.join("ABORTED"),
            format!(
                "error-rate threshold {} exceeded; outputs are partial ({} of {} ops recorded)\n",
                args.abort_error_rate,
                log.len(),
                stream.len()
            ),
        )?;
        manifest.aborted = true;
        RunStatus::Aborted
    } else {
        RunStatus::Completed
    };
    manifest.finish(&args.out)?;
    Ok((status, summary))
}

pub fn stats_line(s: &IndexStats) -> String {
    format!(
        "puts={} gets={} scans={} deletes={} cache_hits={} cache_misses={} resident={} cached={}",
        s.puts,
        s.gets,
        s.scans,
        s.deletes,
        s.cache_hits,
        s.cache_misses,
        s.resident_entries,
        s.cached_entries
    )
}

pub fn start_service(args: &ServeArgs) -> Result<(ServiceHandle, Arc<MetaStore>)> {
    let config = parse_store_config(&args.cache)?;
    let store = Arc::new(MetaStore::new(config)?);
    let handle = serve(args.listen.as_str(), store.clone())
        .with_context(|| format!("binding {}", args.listen))?;
    Ok((handle, store))
}

/// Serves until `stop` is raised, logging counters every
/// `stats_interval` seconds, then drains and returns the final counters.
pub fn serve_until(args: &ServeArgs, argv: &[String], stop: &AtomicBool) -> Result<IndexStats> {
    let mut manifest = RunManifest::begin("serve", argv, snapshot(args)?);
    let (handle, store) = start_service(args)?;
    manifest.backend = Some(format!("inproc:{}", args.cache));
    println!("listening on {}", handle.local_addr());
    let every = Duration::from_secs(args.stats_interval.max(1));
    let mut last = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
        if last.elapsed() >= every {
            tracing::info!("stats {}", stats_line(&MetaStore::stats(&store)));
            last = Instant::now();
        }
    }
    tracing::info!("shutting down; draining connections");
    handle.shutdown();
    let stats = MetaStore::stats(&store);
    tracing::info!("final stats {}", stats_line(&stats));
    if let Some(out) = &args.out {
        create_dir(out)?;
        manifest.finish(out)?;
    }
    Ok(stats)
}

#[derive(Debug, Serialize)]
pub struct SynthOutput {
    pub requests: usize,
    pub total_blocks: usize,
    pub measured: FitTargets,
    /// Present when the config declares targets.
    pub fit: Option<FitReport>,
}

pub fn synth(args: &SynthArgs, argv: &[String]) -> Result<(RunStatus, SynthOutput)> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config: SynthConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow!("invalid config {}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let trace =
        generate(&config).map_err(|e| anyhow!("invalid config {}: {e}", args.config.display()))?;
    create_dir(&args.out)?;
    let trace_path = args.out.join(&args.trace_name);
    fs::write(&trace_path, serialize_trace(&trace))
        .with_context(|| format!("writing {}", trace_path.display()))?;

    let output = SynthOutput {
        requests: trace.len(),
        total_blocks: trace.total_blocks(),
        measured: measure(&trace),
        fit: config.targets.map(|t| fit_report(&trace, t)),
    };
    tables::write_json(&args.out.join("fit_report.json"), &output)?;
    let mut snap = snapshot(args)?;
    snap["generator"] = serde_json::to_value(&config)?;
    RunManifest::begin("synth", argv, snap)
        .with_trace(&trace.label, &trace_path)?
        .finish(&args.out)?;
    Ok((RunStatus::Completed, output))
}

fn split_input(raw: &str) -> (String, PathBuf) {
    match raw.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(raw);
            let label = path
                .parent()
                .and_then(|p| p.file_name())
                .or_else(|| path.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| raw.to_string());
            (label, path)
        }
    }
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cells(s: &IntervalStats) -> BTreeSet<(u64, OpKind)> {
    s.rows
        .iter()
        .map(|r| (r.interval_index, r.op_kind))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ReportSummary {
    pub baseline: String,
    /// label → op_kind → mean normalized p99.
    pub mean_ratio: BTreeMap<String, BTreeMap<OpKind, f64>>,
    pub charts: Vec<String>,
}

pub fn report(args: &ReportArgs, argv: &[String]) -> Result<(RunStatus, ReportSummary)> {
    let mut inputs: Vec<(String, IntervalStats)> = Vec::new();
    for raw in &args.inputs {
        let (label, path) = split_input(raw);
        if inputs.iter().any(|(l, _)| *l == label) {
            bail!("duplicate input label `{label}`; use LABEL=PATH");
        }
        inputs.push((label, tables::read_interval_stats(&path)?));
    }
    let baseline_label = args.baseline.clone().unwrap_or_else(|| inputs[0].0.clone());
    let baseline = inputs
        .iter()
        .find(|(l, _)| *l == baseline_label)
        .map(|(_, s)| s.clone())
        .ok_or_else(|| anyhow!("baseline `{baseline_label}` is not among the inputs"))?;

    let grid = cells(&baseline);
    let mut problems = Vec::new();
    for (label, stats) in &inputs {
        let mine = cells(stats);
        for (i, k) in grid.difference(&mine) {
            problems.push(format!("{label} lacks ({i}, {k})"));
        }
        for (i, k) in mine.difference(&grid) {
            problems.push(format!(
                "{baseline_label} lacks ({i}, {k}) present in {label}"
            ));
        }
    }
    if !problems.is_empty() {
        bail!("mismatched interval grids: {}", problems.join("; "));
    }

    create_dir(&args.out)?;
    let mut series_by_kind: BTreeMap<OpKind, Vec<Series>> = BTreeMap::new();
    let mut mean_ratio = BTreeMap::new();
    let mut primary: Option<Vec<_>> = None;
    for (label, stats) in &inputs {
        let norm = normalize(stats, &baseline)?;
        tables::write_normalized(
            &args
                .out
                .join(format!("normalized_{}.csv", file_safe(label))),
            &norm.cells,
        )?;
        if primary.is_none() && *label != baseline_label {
            primary = Some(norm.cells.clone());
        }
        for kind in OpKind::ALL {
            let points: Vec<(f64, f64)> = norm
                .cells
                .iter()
                .filter(|c| c.op_kind == kind)
                .filter_map(|c| c.ratio.map(|r| (c.interval_index as f64, r)))
                .collect();
            if !points.is_empty() {
                series_by_kind.entry(kind).or_default().push(Series {
                    name: label.clone(),
                    points,
                });
            }
        }
        mean_ratio.insert(label.clone(), norm.mean_ratio);
    }
    let primary = match primary {
        Some(c) => c,
        None => normalize(&baseline, &baseline)?.cells,
    };
    tables::write_normalized(&args.out.join("normalized.csv"), &primary)?;

    let mut charts = Vec::new();
    for (kind, series) in &series_by_kind {
        let name = format!("normalized_p99_{}.svg", kind.as_str());
        let title = format!("Normalized p99 {} latency ({}=1)", kind, baseline_label);
        let svg = svg::render(
            &Chart {
                title: &title,
                x_label: "interval index",
                y_label: "normalized p99",
                x_domain: None,
                y_domain: None,
                steps: false,
            },
            series,
        );
        fs::write(args.out.join(&name), svg)?;
        charts.push(name);
    }
    if let Some(cdf_path) = &args.cdf {
        let cdf = tables::read_hit_rate_cdf(cdf_path)?;
        let svg = svg::render(
            &Chart {
                title: "CDF of block hit ratio",
                x_label: "block hit ratio",
                y_label: "fraction of requests",
                x_domain: Some((0.0, 1.0)),
                y_domain: Some((0.0, 1.0)),
                steps: true,
            },
            &[Series {
                name: "requests".into(),
                points: cdf
                    .points
                    .iter()
                    .map(|p| (p.hit_rate, p.cum_fraction))
                    .collect(),
            }],
        );
        fs::write(args.out.join("hit_rate_cdf.svg"), svg)?;
        charts.push("hit_rate_cdf.svg".into());
    }

    let summary = ReportSummary {
        baseline: baseline_label,
        mean_ratio,
        charts,
    };
    tables::write_json(&args.out.join("report_summary.json"), &summary)?;
    RunManifest::begin("report", argv, snapshot(args)?).finish(&args.out)?;
    Ok((RunStatus::Completed, summary))
}
