use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::segment_runs;
use crate::index::{KeyScheme, MetaKey, MetaValue, Namespace};
use crate::trace::{BlockId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    /// Every referenced key is installed before timing; all ops are reads.
    #[default]
    Preload,
    /// The first access of a block inserts it; later accesses read it.
    InsertOnMiss,
}

impl LoadMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadMode::Preload => "preload",
            LoadMode::InsertOnMiss => "insert_on_miss",
        }
    }
}

impl std::str::FromStr for LoadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preload" => Ok(LoadMode::Preload),
            "insert_on_miss" | "insert-on-miss" => Ok(LoadMode::InsertOnMiss),
            other => Err(format!(
                "unknown mode `{other}` (expected preload or insert_on_miss)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub mode: LoadMode,
    pub namespace: Namespace,
    /// Each block becomes this many consecutive sub-blocks.
    pub chunk_split: u32,
    pub key_scheme: KeyScheme,
    /// Issue a point get per block instead of range scans.
    pub point_only: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            mode: LoadMode::Preload,
            namespace: Namespace::ZERO,
            chunk_split: 1,
            key_scheme: KeyScheme::Ordered,
            point_only: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("chunk_split must be at least 1")]
    ZeroChunkSplit,
    #[error("block id {0} overflows the id space after chunk splitting")]
    IdOverflow(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    PointGet,
    RangeScan,
    Insert,
}

impl OpKind {
    pub const ALL: [OpKind; 3] = [OpKind::PointGet, OpKind::RangeScan, OpKind::Insert];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::PointGet => "point_get",
            OpKind::RangeScan => "range_scan",
            OpKind::Insert => "insert",
        }
    }
}

impl std::str::FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown op kind `{s}`"))
    }
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpAction {
    PointGet {
        key: MetaKey,
        id: BlockId,
    },
    /// Covers ids `first..first + len`; `end_exclusive` is the key of
    /// `first + len`.
    RangeScan {
        start: MetaKey,
        end_exclusive: MetaKey,
        first: BlockId,
        len: u32,
    },
    Insert {
        key: MetaKey,
        value: MetaValue,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetadataOp {
    pub action: OpAction,
    pub issue_ms: u64,
    pub request_ordinal: u32,
}

impl MetadataOp {
    pub fn kind(&self) -> OpKind {
        match self.action {
            OpAction::PointGet { .. } => OpKind::PointGet,
            OpAction::RangeScan { .. } => OpKind::RangeScan,
            OpAction::Insert { .. } => OpKind::Insert,
        }
    }

    /// Block positions this op accounts for.
    pub fn positions(&self) -> usize {
        match self.action {
            OpAction::RangeScan { len, .. } => len as usize,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpStream {
    pub ops: Vec<MetadataOp>,
    /// Installed untimed before replay (preload mode only).
    pub preload: Vec<(MetaKey, MetaValue)>,
    pub options: Option<CompileOptions>,
}

impl OpStream {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn covered_positions(&self) -> usize {
        self.ops.iter().map(MetadataOp::positions).sum()
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|o| o.kind() == kind).count()
    }
}

/// Value stored for a block: the id itself, so every read is checkable.
pub fn value_for(id: BlockId) -> MetaValue {
    MetaValue(id.0)
}

fn expand(ids: &[BlockId], k: u32) -> Result<Vec<BlockId>, CompileError> {
    if k == 1 {
        return Ok(ids.to_vec());
    }
    let k = u64::from(k);
    let mut out = Vec::with_capacity(ids.len() * k as usize);
    for id in ids {
        let base = id.0.checked_mul(k).ok_or(CompileError::IdOverflow(id.0))?;
        base.checked_add(k - 1)
            .ok_or(CompileError::IdOverflow(id.0))?;
        out.extend((0..k).map(|j| BlockId(base + j)));
    }
    Ok(out)
}

/// Turns a trace into the timed metadata op stream: one range scan per
/// contiguous run of two or more ids, one point get per isolated id.
pub fn compile_ops(trace: &Trace, opts: &CompileOptions) -> Result<OpStream, CompileError> {
    if opts.chunk_split == 0 {
        return Err(CompileError::ZeroChunkSplit);
    }
    let scheme = opts.key_scheme;
    let ns = opts.namespace;
    let scans = scheme.supports_scans() && !opts.point_only;

    let mut ops = Vec::with_capacity(trace.total_blocks());
    let mut seen: HashSet<BlockId> = HashSet::new();
    let mut preload = Vec::new();

    for (ordinal, req) in trace.requests.iter().enumerate() {
        let ids = expand(&req.block_ids, opts.chunk_split)?;
        let mut emitter = Emitter {
            ops: &mut ops,
            issue_ms: req.arrival_ms,
            ordinal: ordinal as u32,
            scheme,
            ns,
            scans,
        };
        match opts.mode {
            LoadMode::Preload => {
                for &id in &ids {
                    if seen.insert(id) {
                        preload.push((scheme.key(ns, id), value_for(id)));
                    }
                }
                emitter.reads(&ids)?;
            }
            LoadMode::InsertOnMiss => {
                let mut pending: Vec<BlockId> = Vec::new();
                for &id in &ids {
                    if seen.insert(id) {
                        emitter.reads(&pending)?;
                        pending.clear();
                        emitter.push(OpAction::Insert {
                            key: scheme.key(ns, id),
                            value: value_for(id),
                        });
                    } else {
                        pending.push(id);
                    }
                }
                emitter.reads(&pending)?;
            }
        }
    }

    Ok(OpStream {
        ops,
        preload,
        options: Some(*opts),
    })
}

struct Emitter<'a> {
    ops: &'a mut Vec<MetadataOp>,
    issue_ms: u64,
    ordinal: u32,
    scheme: KeyScheme,
    ns: Namespace,
    scans: bool,
}

impl Emitter<'_> {
    fn push(&mut self, action: OpAction) {
        self.ops.push(MetadataOp {
            action,
            issue_ms: self.issue_ms,
            request_ordinal: self.ordinal,
        });
    }

    fn point(&mut self, id: BlockId) {
        self.push(OpAction::PointGet {
            key: self.scheme.key(self.ns, id),
            id,
        });
    }

    fn reads(&mut self, ids: &[BlockId]) -> Result<(), CompileError> {
        if !self.scans {
            for &id in ids {
                self.point(id);
            }
            return Ok(());
        }
        for run in segment_runs(ids) {
            if run.is_sequential() {
                let first = run.start_id;
                let end = first
                    .0
                    .checked_add(run.length as u64)
                    .ok_or(CompileError::IdOverflow(first.0))?;
                self.push(OpAction::RangeScan {
                    start: self.scheme.key(self.ns, first),
                    end_exclusive: self.scheme.key(self.ns, BlockId(end)),
                    first,
                    len: run.length as u32,
                });
            } else {
                self.point(run.start_id);
            }
        }
        Ok(())
    }
}
