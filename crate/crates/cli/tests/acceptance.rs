//! Acceptance suite. Prints one `PASS`, `FAIL` or `SKIPPED` line per
//! criterion and exits non-zero if any criterion fails.
//!
//! Criterion 4 needs the public Mooncake tool&agent trace; point
//! `KVMETA_TOOLAGENT_TRACE` at a local copy (plain or `.gz`) to enable it.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kvmeta::analysis::{
    hit_rate_cdf, mean_sequential_fraction, nonseq_randomness_report, per_request_hit_rates,
    request_hit_rate, runs_test, segment_runs, sequential_fraction, stat_from_counts,
    RandomnessMode, SeenSet,
};
use kvmeta::bench::{
    compile_ops, interval_stats, normalize, replay, CompileOptions, LatencyLog, LoadMode, OpAction,
    OpKind, OpStream, ReplayConfig,
};
use kvmeta::conformance::{check_against_model, random_ops, OpMix};
use kvmeta::index::{CacheConfig, CachePolicy, Clock, MetaKey, MetaStore, MetaValue, StoreConfig};
use kvmeta::service::protocol::{split_frame, Request, Response, Status};
use kvmeta::service::{serve, RemoteBackend};
use kvmeta::synth::{generate, SynthConfig};
use kvmeta::trace::{load_trace, BlockId, Trace};
use kvmeta_cli::args::SynthArgs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRACE_ENV: &str = "KVMETA_TOOLAGENT_TRACE";

enum Verdict {
    Pass(String),
    Fail(String),
    Skipped(String),
}

type Check = Result<String, String>;

type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn six() -> Trace {
    load_trace(&repo("fixtures/six_requests.jsonl"))
        .expect("fixture loads")
        .trace
}

fn cookbook(name: &str) -> SynthConfig {
    let text = std::fs::read_to_string(repo(&format!("cookbook/{name}"))).expect("cookbook config");
    serde_json::from_str(&text).expect("cookbook config parses")
}

fn ids(v: &[u64]) -> Vec<BlockId> {
    v.iter().copied().map(BlockId).collect()
}

fn oracle_equivalence() -> Verdict {
    const SEQUENCES: u64 = 1_000;
    const BUDGET: Duration = Duration::from_secs(120);
    let mix = OpMix {
        ops: 10_000,
        ids: 1_000,
        namespaces: 3,
    };
    let start = Instant::now();
    for seed in 0..SEQUENCES {
        let ops = random_ops(seed, mix);
        let pinned = CacheConfig {
            capacity_entries: 16 + (seed as usize * 37) % 400,
            policy: CachePolicy::LruPin,
            pin_first_n: 16,
            hotness_halflife_s: 1.0,
        };
        for (name, cache, tick_ms) in [
            ("capacity 0", CacheConfig::disabled(), 1),
            ("lru_pin", pinned, seed % 2_000),
        ] {
            let (clock, now) = Clock::manual();
            let store = MetaStore::with_clock(
                StoreConfig {
                    max_entries: None,
                    cache,
                },
                clock,
            )
            .expect("valid config");
            if let Err(m) = check_against_model(&store, &ops, |i| {
                now.store(i as u64 * tick_ms, Ordering::Relaxed)
            }) {
                return Verdict::Fail(format!("seed {seed}, {name}: {m}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{SEQUENCES} sequences x {} ops x 2 configs in {:.1}s",
        mix.ops,
        elapsed.as_secs_f64()
    );
    if elapsed > BUDGET {
        Verdict::Fail(format!("{detail}; budget is {}s", BUDGET.as_secs()))
    } else {
        Verdict::Pass(detail)
    }
}

/// Frozen reference values from an independent implementation
/// (statsmodels `runstest_1samp`, no continuity correction):
/// (n1, n2, runs, z, p).
const RUNS_ORACLE: [(usize, usize, usize, f64, f64); 7] = [
    (5, 5, 10, 2.683_281_572_999_747_7, 0.007_290_358_091_535_638),
    (5, 5, 6, 0.0, 1.0),
    (4, 4, 8, 2.291_287_847_477_920_4, 0.021_946_771_003_246_834),
    (5, 5, 4, -1.341_640_786_499_873_8, 0.179_712_494_878_999_76),
    (3, 7, 6, 0.654_653_670_707_977, 0.512_690_760_261_923_5),
    (3, 7, 4, -0.981_980_506_061_965_9, 0.326_109_452_020_488_9),
    (
        6,
        6,
        2,
        -3.027_650_354_097_491_7,
        0.002_464_630_724_967_804_7,
    ),
];

fn runs_test_numerics() -> Check {
    let alternating: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
    let st = runs_test(&alternating).map_err(|e| e.to_string())?;
    ensure!(
        (st.n1, st.n2, st.runs) == (5, 5, 10),
        "alternating counts {:?}",
        (st.n1, st.n2, st.runs)
    );
    ensure!(
        (st.p_value - 0.0073).abs() <= 0.001,
        "alternating p = {}",
        st.p_value
    );

    let six_runs = [
        true, true, false, false, true, true, false, false, true, false,
    ];
    let st = runs_test(&six_runs).map_err(|e| e.to_string())?;
    ensure!(
        st.runs == 6 && st.p_value == 1.0,
        "R=6 gives p = {} over {} runs",
        st.p_value,
        st.runs
    );

    for (n1, n2, r, z, p) in RUNS_ORACLE {
        let st = stat_from_counts(n1, n2, r);
        ensure!(
            (st.z - z).abs() < 1e-12,
            "({n1},{n2},{r}): z {} vs oracle {z}",
            st.z
        );
        ensure!(
            (st.p_value - p).abs() < 1e-12,
            "({n1},{n2},{r}): p {} vs oracle {p}",
            st.p_value
        );
    }

    // runs equidistant from the mean give the same two-sided p
    let mut pairs = 0;
    for n in 4..=40usize {
        let mean = n + 1;
        for r in 2..mean {
            let (lo, hi) = (
                stat_from_counts(n, n, r),
                stat_from_counts(n, n, 2 * mean - r),
            );
            ensure!(
                (lo.p_value - hi.p_value).abs() <= 1e-12,
                "n={n}: p(R={r}) = {} but p(R={}) = {}",
                lo.p_value,
                2 * mean - r,
                hi.p_value
            );
            pairs += 1;
        }
        for m in 1..n {
            for r in 2..=(2 * m).min(m + n) {
                let (a, b) = (stat_from_counts(m, n, r), stat_from_counts(n, m, r));
                ensure!(
                    a.p_value == b.p_value,
                    "({m},{n},{r}) not symmetric in n1/n2"
                );
            }
        }
    }
    Ok(format!(
        "p(5,5,10) = {:.6}; {} oracle cases within 1e-12; {pairs} symmetric pairs",
        stat_from_counts(5, 5, 10).p_value,
        RUNS_ORACLE.len()
    ))
}

fn render(stream: &OpStream) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new(); 6];
    for op in &stream.ops {
        out[op.request_ordinal as usize].push(match op.action {
            OpAction::PointGet { id, .. } => format!("G{}", id.0),
            OpAction::RangeScan { first, len, .. } => format!("S{}+{}", first.0, len),
            OpAction::Insert { key, .. } => format!("I{}", key.block_id().0),
        });
    }
    out
}

fn analysis_fixtures() -> Check {
    let t = six();
    let runs: Vec<Vec<(u64, usize)>> = t
        .requests
        .iter()
        .map(|r| {
            segment_runs(&r.block_ids)
                .iter()
                .map(|run| (run.start_id.0, run.length))
                .collect()
        })
        .collect();
    let expected_runs: Vec<Vec<(u64, usize)>> = vec![
        vec![(1, 3), (7, 1)],
        vec![(1, 3), (7, 1)],
        vec![(5, 3), (42, 1), (9, 2)],
        vec![(8, 1), (7, 1), (6, 1)],
        vec![(3, 1), (9, 1), (27, 1)],
        vec![],
    ];
    ensure!(runs == expected_runs, "segment_runs {runs:?}");

    let fractions: Vec<Option<f64>> = t
        .requests
        .iter()
        .map(|r| sequential_fraction(&r.block_ids).ok())
        .collect();
    ensure!(
        fractions
            == [
                Some(0.75),
                Some(0.75),
                Some(5.0 / 6.0),
                Some(0.0),
                Some(0.0),
                None
            ],
        "sequential_fraction {fractions:?}"
    );
    let mean = mean_sequential_fraction(&t).ok_or("no mean sequential fraction")?;
    ensure!(
        (mean - (0.75 + 0.75 + 5.0 / 6.0) / 5.0).abs() < 1e-15,
        "mean sequential fraction {mean}"
    );

    let mut seen = SeenSet::new();
    let mut rates = Vec::new();
    for r in &t.requests {
        rates.push(request_hit_rate(&r.block_ids, &seen).ok());
        seen.absorb(&r.block_ids);
    }
    ensure!(
        rates
            == [
                Some(0.0),
                Some(1.0),
                Some(1.0 / 6.0),
                Some(2.0 / 3.0),
                Some(2.0 / 3.0),
                None
            ],
        "request_hit_rate {rates:?}"
    );
    // duplicates inside one request count once
    let mut seen = SeenSet::new();
    seen.absorb(&ids(&[1]));
    ensure!(
        request_hit_rate(&ids(&[1, 1, 2]), &seen) == Ok(0.5),
        "duplicate ids counted twice"
    );
    let cdf = hit_rate_cdf(&t).map_err(|e| e.to_string())?;
    ensure!(
        (cdf.fraction_above(0.5) - 0.6).abs() < 1e-12,
        "fraction above 0.5 = {}",
        cdf.fraction_above(0.5)
    );

    let preload = compile_ops(&t, &CompileOptions::default()).map_err(|e| e.to_string())?;
    let expected = [
        vec!["S1+3", "G7"],
        vec!["S1+3", "G7"],
        vec!["S5+3", "G42", "S9+2"],
        vec!["G8", "G7", "G6"],
        vec!["G3", "G9", "G27"],
        vec![],
    ];
    ensure!(
        render(&preload) == expected,
        "preload ops {:?}",
        render(&preload)
    );
    let mut loaded: Vec<u64> = preload
        .preload
        .iter()
        .map(|(k, _)| k.block_id().0)
        .collect();
    loaded.sort_unstable();
    ensure!(
        loaded == [1, 2, 3, 5, 6, 7, 8, 9, 10, 27, 42],
        "preload set {loaded:?}"
    );

    let iom = compile_ops(
        &t,
        &CompileOptions {
            mode: LoadMode::InsertOnMiss,
            ..CompileOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let expected = [
        vec!["I1", "I2", "I3", "I7"],
        vec!["S1+3", "G7"],
        vec!["I5", "I6", "G7", "I42", "I9", "I10"],
        vec!["I8", "G7", "G6"],
        vec!["G3", "G9", "I27"],
        vec![],
    ];
    ensure!(
        render(&iom) == expected,
        "insert-on-miss ops {:?}",
        render(&iom)
    );
    Ok("runs, fractions, hit rates and both compiled op streams exact".into())
}

fn trace_reproduction() -> Verdict {
    let Some(path) = std::env::var_os(TRACE_ENV).map(PathBuf::from) else {
        return Verdict::Skipped(format!("set {TRACE_ENV} to the tool&agent trace to run"));
    };
    match reproduce_on(&path) {
        Ok(detail) => Verdict::Pass(detail),
        Err(detail) => Verdict::Fail(detail),
    }
}

fn reproduce_on(path: &Path) -> Check {
    let trace = load_trace(path)
        .map_err(|e| format!("{}: {e}", path.display()))?
        .trace;
    let seq = mean_sequential_fraction(&trace).ok_or("trace has no non-empty requests")?;
    let rates = per_request_hit_rates(&trace);
    let above = rates.iter().filter(|(_, h)| *h > 0.5).count() as f64 / rates.len() as f64;
    let mut randomness = Vec::new();
    for mode in [RandomnessMode::PerKeyGaps, RandomnessMode::PerRequestMedian] {
        let rep = nonseq_randomness_report(&trace, 8, mode);
        randomness.push(format!(
            "{} fraction_random={} (tested {}, reference 0.89)",
            mode.as_str(),
            rep.fraction_random
                .map_or("n/a".into(), |f| format!("{f:.3}")),
            rep.tested
        ));
    }
    let detail = format!(
        "{} requests; avg sequential fraction {seq:.4} (0.868 +/- 0.02); hit rate > 0.5 for {above:.3} (>= 0.70); {}",
        trace.len(),
        randomness.join("; ")
    );
    ensure!((seq - 0.868).abs() <= 0.02, "{detail}");
    ensure!(above >= 0.70, "{detail}");
    Ok(detail)
}

fn check_preload(trace: &Trace, name: &str) -> Result<usize, String> {
    let stream = compile_ops(trace, &CompileOptions::default()).map_err(|e| e.to_string())?;
    let rep = replay(&stream, &MetaStore::default(), &ReplayConfig::default())
        .map_err(|e| e.to_string())?;
    ensure!(
        rep.log.len() == stream.len(),
        "{name}: {} of {} ops logged",
        rep.log.len(),
        stream.len()
    );
    ensure!(
        rep.log.count_outcome("miss") == 0,
        "{name}: {} misses",
        rep.log.count_outcome("miss")
    );
    ensure!(rep.log.errors() == 0, "{name}: {} errors", rep.log.errors());
    for (op, rec) in stream.ops.iter().zip(&rep.log.records) {
        if let OpAction::RangeScan { len, .. } = op.action {
            ensure!(
                rec.items == len,
                "{name}: op {} scanned {} of a {len}-block run",
                rec.op_index,
                rec.items
            );
        }
    }
    let base = stream.covered_positions();
    for k in 2..=4u32 {
        let split = compile_ops(
            trace,
            &CompileOptions {
                chunk_split: k,
                ..CompileOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            split.covered_positions() == base * k as usize,
            "{name}: chunk_split {k} covers {} positions, expected {}",
            split.covered_positions(),
            base * k as usize
        );
        let rep = replay(&split, &MetaStore::default(), &ReplayConfig::default())
            .map_err(|e| e.to_string())?;
        ensure!(
            rep.log.count_outcome("miss") == 0,
            "{name}: chunk_split {k} missed"
        );
    }
    Ok(stream.len())
}

fn protocol_conformance() -> Check {
    let mut ops = check_preload(&six(), "fixture")?;
    for name in [
        "tool_agent_profile.json",
        "prefix_heavy.json",
        "fresh_paths.json",
    ] {
        let trace = generate(&cookbook(name)).map_err(|e| e.to_string())?;
        ops += check_preload(&trace, name)?;
    }
    Ok(format!(
        "{ops} replayed ops: zero misses, every scan returned its run; chunk_split 2..4 exact"
    ))
}

fn outcomes(log: &LatencyLog) -> Vec<(usize, OpKind, &str, u32)> {
    log.records
        .iter()
        .map(|r| (r.op_index, r.kind, r.outcome.label(), r.items))
        .collect()
}

fn random_request(rng: &mut ChaCha8Rng) -> Request {
    let key = |rng: &mut ChaCha8Rng| MetaKey(rng.gen());
    match rng.gen_range(0..5) {
        0 => Request::Put {
            key: key(rng),
            value: MetaValue(rng.gen()),
        },
        1 => Request::Get { key: key(rng) },
        2 => Request::Scan {
            start: key(rng),
            end_exclusive: key(rng),
            max_results: rng.gen(),
        },
        3 => Request::Delete { key: key(rng) },
        _ => Request::Stats,
    }
}

fn random_response(rng: &mut ChaCha8Rng, request: &Request) -> Response {
    if rng.gen_ratio(1, 10) {
        return Response::Error(if rng.gen() {
            Status::BadRequest
        } else {
            Status::Internal
        });
    }
    let value = |rng: &mut ChaCha8Rng| rng.gen::<bool>().then(|| MetaValue(rng.gen()));
    match request {
        Request::Put { .. } => Response::Put {
            previous: value(rng),
        },
        Request::Get { .. } => Response::Get(value(rng)),
        Request::Scan { .. } => {
            let n = rng.gen_range(0..16);
            Response::Scan(
                (0..n)
                    .map(|_| (MetaKey(rng.gen()), MetaValue(rng.gen())))
                    .collect(),
            )
        }
        Request::Delete { .. } => Response::Delete { removed: rng.gen() },
        Request::Stats => {
            let mut counters = [0u64; kvmeta::index::IndexStats::FIELDS];
            rng.fill(&mut counters);
            Response::Stats(kvmeta::index::IndexStats::from_array(counters))
        }
    }
}

fn wire_transparency() -> Check {
    let store = Arc::new(MetaStore::default());
    let handle = serve("127.0.0.1:0", store).map_err(|e| e.to_string())?;
    let client = RemoteBackend::connect(handle.local_addr()).map_err(|e| e.to_string())?;
    let synthetic = generate(&cookbook("tool_agent_profile.json")).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (trace, name) in [(six(), "fixture"), (synthetic, "synthetic")] {
        for (mode, ns) in [(LoadMode::Preload, "pre"), (LoadMode::InsertOnMiss, "iom")] {
            let opts = CompileOptions {
                mode,
                namespace: kvmeta::index::Namespace::from_label(&format!("{name}-{ns}"))
                    .expect("short label"),
                ..CompileOptions::default()
            };
            let stream = compile_ops(&trace, &opts).map_err(|e| e.to_string())?;
            let cfg = ReplayConfig::default();
            let local = replay(&stream, &MetaStore::default(), &cfg).map_err(|e| e.to_string())?;
            let remote = replay(&stream, &client, &cfg).map_err(|e| e.to_string())?;
            let (a, b) = (outcomes(&local.log), outcomes(&remote.log));
            ensure!(
                a.len() == b.len(),
                "{name}/{ns}: {} local vs {} remote records",
                a.len(),
                b.len()
            );
            if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
                return Err(format!(
                    "{name}/{ns}: op {i} local {:?} remote {:?}",
                    a[i], b[i]
                ));
            }
            compared += a.len();
        }
    }
    handle.shutdown();

    const FRAMES: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    for i in 0..FRAMES {
        let req = random_request(&mut rng);
        let bytes = req.encode();
        let (op, payload) = split_frame(&bytes).map_err(|e| format!("request frame {i}: {e}"))?;
        ensure!(
            Request::decode(op, payload).as_ref() == Ok(&req),
            "request frame {i} did not round-trip"
        );
        let resp = random_response(&mut rng, &req);
        let bytes = resp.encode(op);
        let (rop, payload) = split_frame(&bytes).map_err(|e| format!("response frame {i}: {e}"))?;
        ensure!(
            Response::decode(op, rop, payload).as_ref() == Ok(&resp),
            "response frame {i} did not round-trip"
        );
    }
    Ok(format!(
        "{compared} ops outcome-identical over loopback; {} fuzzed frames round-trip",
        2 * FRAMES
    ))
}

fn cache_hit_rate(
    stream: &OpStream,
    policy: CachePolicy,
    pin: u64,
    capacity: usize,
) -> Result<f64, String> {
    let (clock, now) = Clock::manual();
    let cache = CacheConfig {
        capacity_entries: capacity,
        policy,
        pin_first_n: pin,
        hotness_halflife_s: 600.0,
    };
    let store = MetaStore::with_clock(
        StoreConfig {
            max_entries: None,
            cache,
        },
        clock,
    )
    .map_err(|e| e.to_string())?;
    for (k, v) in &stream.preload {
        store.put(*k, *v).map_err(|e| e.to_string())?;
    }
    for op in &stream.ops {
        now.store(op.issue_ms, Ordering::Relaxed);
        if let OpAction::PointGet { key, .. } = op.action {
            store.get(&key);
        }
    }
    store
        .stats()
        .cache_hit_rate()
        .ok_or_else(|| "no cache lookups".to_string())
}

fn cache_design() -> Check {
    const CAPACITY: usize = 128;
    let trace = generate(&cookbook("prefix_heavy.json")).map_err(|e| e.to_string())?;
    let stream = compile_ops(
        &trace,
        &CompileOptions {
            point_only: true,
            ..CompileOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let lru = cache_hit_rate(&stream, CachePolicy::Lru, 0, CAPACITY)?;
    let pinned = cache_hit_rate(&stream, CachePolicy::LruPin, 16, CAPACITY)?;
    let detail = format!("capacity {CAPACITY}: lru_pin(16) {pinned:.4} vs lru {lru:.4}");
    ensure!(pinned > lru, "{detail}");
    Ok(detail)
}

fn normalization_and_determinism() -> Check {
    let trace = generate(&cookbook("tool_agent_profile.json")).map_err(|e| e.to_string())?;
    let stream = compile_ops(&trace, &CompileOptions::default()).map_err(|e| e.to_string())?;
    let rep = replay(&stream, &MetaStore::default(), &ReplayConfig::default())
        .map_err(|e| e.to_string())?;
    let stats = interval_stats(&rep.log, 60, 600);
    ensure!(!stats.rows.is_empty(), "no intervals after warm-up");
    let norm = normalize(&stats, &stats).map_err(|e| e.to_string())?;
    ensure!(
        norm.cells.len() == stats.rows.len(),
        "normalize dropped cells"
    );
    ensure!(
        norm.cells.iter().all(|c| c.ratio == Some(1.0)),
        "normalize(s, s) is not all ones"
    );
    ensure!(
        norm.mean_ratio.values().all(|&m| m == 1.0),
        "mean ratios {:?}",
        norm.mean_ratio
    );

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for run in ["a", "b"] {
        let args = SynthArgs {
            config: repo("cookbook/tool_agent_profile.json"),
            out: dir.path().join(run),
            seed: Some(11),
            trace_name: "trace.jsonl".into(),
        };
        kvmeta_cli::commands::synth(&args, &[]).map_err(|e| e.to_string())?;
        digests.push(std::fs::read(args.out.join("trace.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure!(
        digests[0] == digests[1],
        "synth output differs between runs"
    );
    Ok(format!(
        "{} cells all 1.0; two synth runs byte-identical ({} bytes)",
        norm.cells.len(),
        digests[0].len()
    ))
}

fn guarded(f: fn() -> Check) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(detail)) => Verdict::Pass(detail),
        Ok(Err(detail)) => Verdict::Fail(detail),
        Err(p) => Verdict::Fail(panic_message(p)),
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("runs-test numerics", || guarded(runs_test_numerics)),
        ("analysis fixtures", || guarded(analysis_fixtures)),
        ("trace-conditional reproduction", trace_reproduction),
        ("benchmark protocol conformance", || {
            guarded(protocol_conformance)
        }),
        ("wire-protocol transparency", || guarded(wire_transparency)),
        ("cache-design property", || guarded(cache_design)),
        ("normalization identity and determinism", || {
            guarded(normalization_and_determinism)
        }),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = panic::catch_unwind(*run).unwrap_or_else(|p| Verdict::Fail(panic_message(p)));
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skipped(d) => ("SKIPPED", d),
        };
        println!("criterion {} {name}: {tag} - {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
