//! Request-trace data model and the JSON-Lines trace format.
//!
//! The on-disk format matches the public Mooncake trace release: one JSON
//! object per line with integer `timestamp` (ms), `input_length`,
//! `output_length` and an integer array `hash_ids`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde_json::Value;
use thiserror::Error;

/// Tokens per KVC block when the source does not say otherwise.
pub const DEFAULT_BLOCK_TOKENS: u32 = 512;

/// Logical identifier of one KVC block (the trace's `hash_id`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BlockId(pub u64);

impl BlockId {
    pub fn get(self) -> u64 {
        self.0
    }
}

impl From<u64> for BlockId {
    fn from(id: u64) -> Self {
        BlockId(id)
    }
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRequest {
    /// Milliseconds since the first request of the trace.
    pub arrival_ms: u64,
    pub input_len: u64,
    pub output_len: u64,
    /// Block ids in source order. Duplicates are kept.
    pub block_ids: Vec<BlockId>,
}

impl TraceRequest {
    pub fn new(arrival_ms: u64, input_len: u64, output_len: u64, ids: &[u64]) -> Self {
        TraceRequest {
            arrival_ms,
            input_len,
            output_len,
            block_ids: ids.iter().copied().map(BlockId).collect(),
        }
    }
}

/// An immutable, arrival-ordered request stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub requests: Vec<TraceRequest>,
    pub label: String,
    /// Annotation only; never used by op compilation.
    pub block_tokens: u32,
}

impl Trace {
    /// Builds a trace, stably sorting requests by arrival time.
    pub fn new(label: impl Into<String>, mut requests: Vec<TraceRequest>) -> Self {
        requests.sort_by_key(|r| r.arrival_ms);
        Trace {
            requests,
            label: label.into(),
            block_tokens: DEFAULT_BLOCK_TOKENS,
        }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Total number of block occurrences over all requests.
    pub fn total_blocks(&self) -> usize {
        self.requests.iter().map(|r| r.block_ids.len()).sum()
    }

    /// Arrival time of the last request, i.e. the trace span in ms.
    pub fn span_ms(&self) -> u64 {
        self.requests.last().map_or(0, |r| r.arrival_ms)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of parsing: the trace plus how many source records arrived out
/// of timestamp order (they are sorted, not rejected).
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub trace: Trace,
    pub out_of_order: usize,
}

/// Parses a JSON-Lines trace. Blank lines are ignored.
///
/// Requests are stably sorted by timestamp and rebased so the earliest
/// arrives at 0 ms.
pub fn parse_trace<R: Read>(input: R, label: &str) -> Result<ParsedTrace, TraceError> {
    let reader = BufReader::new(input);
    let mut raw: Vec<(u64, TraceRequest)> = Vec::new();
    let mut out_of_order = 0usize;
    let mut max_seen: Option<u64> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let req = parse_record(text).map_err(|reason| TraceError::Malformed {
            line: line_no,
            reason,
        })?;
        let ts = req.arrival_ms;
        match max_seen {
            Some(m) if ts < m => out_of_order += 1,
            _ => max_seen = Some(ts),
        }
        raw.push((ts, req));
    }

    if raw.is_empty() {
        return Err(TraceError::Empty);
    }
    raw.sort_by_key(|(ts, _)| *ts);
    let base = raw[0].0;
    let requests = raw
        .into_iter()
        .map(|(_, mut r)| {
            r.arrival_ms -= base;
            r
        })
        .collect();

    if out_of_order > 0 {
        tracing::warn!(
            out_of_order,
            label,
            "trace records were out of timestamp order; sorted"
        );
    }

    Ok(ParsedTrace {
        trace: Trace {
            requests,
            label: label.to_string(),
            block_tokens: DEFAULT_BLOCK_TOKENS,
        },
        out_of_order,
    })
}

/// Opens a trace file, transparently decompressing `*.gz`. The label is the
/// file name without its extensions.
pub fn load_trace(path: &Path) -> Result<ParsedTrace, TraceError> {
    let file = File::open(path)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let label = name.split('.').next().unwrap_or("").to_string();
    if name.ends_with(".gz") {
        parse_trace(GzDecoder::new(file), &label)
    } else {
        parse_trace(file, &label)
    }
}

fn parse_record(text: &str) -> Result<TraceRequest, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "record is not a JSON object".to_string())?;

    let field_u64 = |name: &str| -> Result<u64, String> {
        let v = obj
            .get(name)
            .ok_or_else(|| format!("missing field `{name}`"))?;
        as_non_negative(v).map_err(|e| format!("field `{name}`: {e}"))
    };

    let arrival_ms = field_u64("timestamp")?;
    let input_len = field_u64("input_length")?;
    let output_len = field_u64("output_length")?;
    let ids = obj
        .get("hash_ids")
        .ok_or_else(|| "missing field `hash_ids`".to_string())?
        .as_array()
        .ok_or_else(|| "field `hash_ids`: expected an array".to_string())?;
    let block_ids = ids
        .iter()
        .enumerate()
        .map(|(i, v)| {
            as_non_negative(v)
                .map(BlockId)
                .map_err(|e| format!("hash_ids[{i}]: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(TraceRequest {
        arrival_ms,
        input_len,
        output_len,
        block_ids,
    })
}

fn as_non_negative(v: &Value) -> Result<u64, String> {
    match v {
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                Ok(u)
            } else if n.as_i64().is_some() {
                Err(format!("negative value {n}"))
            } else {
                Err(format!("non-integer value {n}"))
            }
        }
        other => Err(format!("expected an integer, found {other}")),
    }
}

/// Writes the canonical JSON-Lines form: fixed field order, no spaces, one
/// record per line, trailing newline after every record.
pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    let mut line = String::new();
    for req in &trace.requests {
        line.clear();
        encode_record(req, &mut line);
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn serialize_trace(trace: &Trace) -> Vec<u8> {
    let mut out = String::with_capacity(trace.total_blocks() * 8 + trace.len() * 80);
    for req in &trace.requests {
        encode_record(req, &mut out);
    }
    out.into_bytes()
}

fn encode_record(req: &TraceRequest, out: &mut String) {
    use std::fmt::Write as _;
    let _ = write!(
        out,
        "{{\"timestamp\":{},\"input_length\":{},\"output_length\":{},\"hash_ids\":[",
        req.arrival_ms, req.input_len, req.output_len
    );
    for (i, id) in req.block_ids.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}", id.0);
    }
    out.push_str("]}\n");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ParsedTrace, TraceError> {
        parse_trace(s.as_bytes(), "t")
    }

    #[test]
    fn parses_single_record() {
        let p = parse(
            r#"{"timestamp":0,"input_length":2048,"output_length":128,"hash_ids":[1,2,3,4]}"#,
        )
        .unwrap();
        assert_eq!(p.trace.len(), 1);
        let r = &p.trace.requests[0];
        assert_eq!(r.arrival_ms, 0);
        assert_eq!(r.input_len, 2048);
        assert_eq!(r.output_len, 128);
        assert_eq!(r.block_ids.len(), 4);
        assert_eq!(p.out_of_order, 0);
    }

    #[test]
    fn empty_hash_ids_accepted() {
        let p =
            parse(r#"{"timestamp":5,"input_length":1,"output_length":1,"hash_ids":[]}"#).unwrap();
        assert!(p.trace.requests[0].block_ids.is_empty());
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(parse(""), Err(TraceError::Empty)));
        assert!(matches!(parse("\n\n"), Err(TraceError::Empty)));
        assert_eq!(parse("").unwrap_err().to_string(), "empty trace");
    }

    #[test]
    fn sorts_and_rebases() {
        let src = "\
{\"timestamp\":1500,\"input_length\":1,\"output_length\":1,\"hash_ids\":[3]}
{\"timestamp\":1000,\"input_length\":1,\"output_length\":1,\"hash_ids\":[1]}
{\"timestamp\":1200,\"input_length\":1,\"output_length\":1,\"hash_ids\":[2]}
{\"timestamp\":1200,\"input_length\":2,\"output_length\":1,\"hash_ids\":[9]}
";
        let p = parse(src).unwrap();
        let arrivals: Vec<u64> = p.trace.requests.iter().map(|r| r.arrival_ms).collect();
        assert_eq!(arrivals, vec![0, 200, 200, 500]);
        // stable: the two 1200 records keep source order
        assert_eq!(p.trace.requests[1].block_ids, vec![BlockId(2)]);
        assert_eq!(p.trace.requests[2].block_ids, vec![BlockId(9)]);
        assert_eq!(p.out_of_order, 3);
    }

    #[test]
    fn duplicate_ids_preserved() {
        let p = parse(r#"{"timestamp":0,"input_length":1,"output_length":1,"hash_ids":[4,4,5,4]}"#)
            .unwrap();
        let ids: Vec<u64> = p.trace.requests[0].block_ids.iter().map(|b| b.0).collect();
        assert_eq!(ids, vec![4, 4, 5, 4]);
    }

    #[test]
    fn malformed_records_name_the_line() {
        let good = r#"{"timestamp":0,"input_length":1,"output_length":1,"hash_ids":[1]}"#;
        let cases = [
            "not json",
            r#"{"timestamp":0,"input_length":1,"hash_ids":[1]}"#,
            r#"{"timestamp":-3,"input_length":1,"output_length":1,"hash_ids":[1]}"#,
            r#"{"timestamp":0,"input_length":1,"output_length":1,"hash_ids":[1.5]}"#,
            r#"{"timestamp":0,"input_length":1,"output_length":1,"hash_ids":["a"]}"#,
            r#"{"timestamp":0,"input_length":1,"output_length":1,"hash_ids":7}"#,
            r#"[1,2]"#,
        ];
        for bad in cases {
            let src = format!("{good}\n{bad}\n");
            match parse(&src) {
                Err(TraceError::Malformed { line, .. }) => assert_eq!(line, 2, "{bad}"),
                other => panic!("expected malformed error for {bad}, got {other:?}"),
            }
        }
        let err = parse(r#"{"timestamp":0,"input_length":-1,"output_length":1,"hash_ids":[]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
    }

    #[test]
    fn empty_trace_serializes_to_nothing() {
        let t = Trace::new("e", vec![]);
        assert!(serialize_trace(&t).is_empty());
    }

    #[test]
    fn canonical_form() {
        let t = Trace::new(
            "x",
            vec![
                TraceRequest::new(0, 10, 2, &[1, 2]),
                TraceRequest::new(7, 3, 4, &[]),
            ],
        );
        let s = String::from_utf8(serialize_trace(&t)).unwrap();
        assert_eq!(
            s,
            "{\"timestamp\":0,\"input_length\":10,\"output_length\":2,\"hash_ids\":[1,2]}\n\
             {\"timestamp\":7,\"input_length\":3,\"output_length\":4,\"hash_ids\":[]}\n"
        );
        let mut buf = Vec::new();
        write_trace(&t, &mut buf).unwrap();
        assert_eq!(buf, s.as_bytes());
    }

    #[test]
    fn gzip_input() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        let dir = std::env::temp_dir().join(format!("kvmeta-gz-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("small.jsonl.gz");
        let t = Trace::new("small", vec![TraceRequest::new(0, 1, 1, &[5, 6])]);
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), Compression::default());
        enc.write_all(&serialize_trace(&t)).unwrap();
        enc.finish().unwrap();
        let p = load_trace(&path).unwrap();
        assert_eq!(p.trace, t);
        std::fs::remove_dir_all(&dir).ok();
    }
}
