//! Deterministic generator of prefix-prefill traces.
//!
//! Requests walk a lazily grown prefix tree whose nodes own contiguous
//! block-id spans, so shared prefixes show up as shared contiguous runs.
//! Each request then appends fresh contiguous suffix blocks and may append a
//! few isolated ids drawn from older suffixes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{mean_sequential_fraction, per_request_hit_rates};
use crate::trace::{BlockId, Trace, TraceRequest, DEFAULT_BLOCK_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeShape {
    pub depth: u32,
    pub branching: u32,
    pub blocks_per_node: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

fn default_random_blocks() -> CountRange {
    CountRange { min: 1, max: 3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_requests: usize,
    pub mean_interarrival_ms: f64,
    pub prefix_tree: TreeShape,
    /// Weight on re-walking an existing child relative to opening a new one.
    pub reuse_bias: f64,
    /// Probability that a request gets isolated ids appended.
    pub random_block_rate: f64,
    pub suffix_blocks: CountRange,
    /// How many isolated ids an injecting request receives.
    #[serde(default = "default_random_blocks")]
    pub random_blocks: CountRange,
    pub seed: u64,
    /// What the config was tuned for; not used by generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<FitTargets>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("empty trace")]
    Empty,
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(
        "tree with branching {branching} and depth {depth} cannot supply {requested} fresh paths"
    )]
    TreeTooSmall {
        branching: u32,
        depth: u32,
        requested: usize,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError::Invalid {
        field,
        reason: reason.into(),
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_requests == 0 {
            return Err(SynthError::Empty);
        }
        if !(self.mean_interarrival_ms.is_finite() && self.mean_interarrival_ms > 0.0) {
            return Err(invalid("mean_interarrival_ms", "must be positive"));
        }
        let t = &self.prefix_tree;
        if t.depth == 0 {
            return Err(invalid("prefix_tree.depth", "must be at least 1"));
        }
        if t.branching == 0 {
            return Err(invalid("prefix_tree.branching", "must be at least 1"));
        }
        if t.blocks_per_node == 0 {
            return Err(invalid("prefix_tree.blocks_per_node", "must be at least 1"));
        }
        if !(self.reuse_bias.is_finite() && self.reuse_bias >= 0.0) {
            return Err(invalid("reuse_bias", "must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.random_block_rate) {
            return Err(invalid("random_block_rate", "must lie in [0, 1]"));
        }
        if self.suffix_blocks.min > self.suffix_blocks.max {
            return Err(invalid("suffix_blocks", "min exceeds max"));
        }
        if self.random_blocks.min > self.random_blocks.max {
            return Err(invalid("random_blocks", "min exceeds max"));
        }
        if self.reuse_bias == 0.0 {
            let leaves = (t.branching as f64).powi(t.depth as i32);
            if leaves < self.num_requests as f64 {
                return Err(SynthError::TreeTooSmall {
                    branching: t.branching,
                    depth: t.depth,
                    requested: self.num_requests,
                });
            }
        }
        Ok(())
    }
}

struct Node {
    first_id: u64,
    children: Vec<usize>,
    visits: u64,
}

struct Tree {
    nodes: Vec<Node>,
    next_id: u64,
    blocks_per_node: u64,
}

impl Tree {
    fn new(blocks_per_node: u32) -> Self {
        // node 0 is a block-less root
        Tree {
            nodes: vec![Node {
                first_id: 0,
                children: Vec::new(),
                visits: 0,
            }],
            next_id: 0,
            blocks_per_node: u64::from(blocks_per_node),
        }
    }

    fn allocate(&mut self, n: u64) -> u64 {
        let first = self.next_id;
        self.next_id += n;
        first
    }

    fn add_child(&mut self, parent: usize) -> usize {
        let first_id = self.allocate(self.blocks_per_node);
        self.nodes.push(Node {
            first_id,
            children: Vec::new(),
            visits: 0,
        });
        let idx = self.nodes.len() - 1;
        self.nodes[parent].children.push(idx);
        idx
    }

    /// Preferential attachment: an existing child is chosen with weight
    /// `reuse_bias × visits`, a new child (while there is room) with weight 1.
    fn step(
        &mut self,
        at: usize,
        branching: usize,
        reuse_bias: f64,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let children = &self.nodes[at].children;
        let room = children.len() < branching;
        let weights: Vec<f64> = children
            .iter()
            .map(|&c| reuse_bias * self.nodes[c].visits as f64)
            .collect();
        let reuse_total: f64 = weights.iter().sum();
        let new_weight = if room { 1.0 } else { 0.0 };
        let total = reuse_total + new_weight;
        if total == 0.0 {
            // full and no reuse weight: uniform among existing
            let pick = rng.gen_range(0..children.len());
            return children[pick];
        }
        let mut x = rng.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                return self.nodes[at].children[i];
            }
            x -= w;
        }
        if room {
            self.add_child(at)
        } else {
            *self.nodes[at].children.last().expect("non-empty when full")
        }
    }
}

/// Generates a trace; a pure function of `config`.
pub fn generate(config: &SynthConfig) -> Result<Trace, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let interarrival = Exp::new(1.0 / config.mean_interarrival_ms).expect("rate is positive");
    let shape = config.prefix_tree;
    let mut tree = Tree::new(shape.blocks_per_node);
    let mut retired: Vec<u64> = Vec::new();
    let mut clock_ms = 0.0f64;
    let mut requests = Vec::with_capacity(config.num_requests);

    for i in 0..config.num_requests {
        if i > 0 {
            clock_ms += interarrival.sample(&mut rng);
        }
        let mut ids: Vec<u64> = Vec::new();
        let mut at = 0usize;
        for _ in 0..shape.depth {
            at = tree.step(at, shape.branching as usize, config.reuse_bias, &mut rng);
            tree.nodes[at].visits += 1;
            let first = tree.nodes[at].first_id;
            ids.extend(first..first + tree.blocks_per_node);
        }

        let suffix = rng.gen_range(config.suffix_blocks.min..=config.suffix_blocks.max) as u64;
        let first = tree.allocate(suffix);
        ids.extend(first..first + suffix);

        if config.random_block_rate > 0.0
            && rng.gen::<f64>() < config.random_block_rate
            && !retired.is_empty()
        {
            let n = rng.gen_range(config.random_blocks.min..=config.random_blocks.max);
            for _ in 0..n {
                // a few draws to find an id that does not continue the run
                for _ in 0..8 {
                    let r = retired[rng.gen_range(0..retired.len())];
                    if ids.last().is_none_or(|&p| p.checked_add(1) != Some(r)) {
                        ids.push(r);
                        break;
                    }
                }
            }
        }
        retired.extend(first..first + suffix);

        let output_len = rng.gen_range(16..=512u64);
        requests.push(TraceRequest {
            arrival_ms: clock_ms.round() as u64,
            input_len: ids.len() as u64 * u64::from(DEFAULT_BLOCK_TOKENS),
            output_len,
            block_ids: ids.into_iter().map(BlockId).collect(),
        });
    }

    Ok(Trace {
        requests,
        label: format!("synth-{}", config.seed),
        block_tokens: DEFAULT_BLOCK_TOKENS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FitTargets {
    pub seq_fraction: f64,
    pub mean_hit_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub targets: FitTargets,
    pub measured: FitTargets,
    /// Absolute deviations, measured minus target, in magnitude.
    pub seq_fraction_deviation: f64,
    pub mean_hit_rate_deviation: f64,
}

/// Measures sequential fraction and mean hit rate over the non-empty
/// requests of `trace`.
pub fn measure(trace: &Trace) -> FitTargets {
    let rates = per_request_hit_rates(trace);
    let mean_hit_rate = if rates.is_empty() {
        0.0
    } else {
        rates.iter().map(|(_, h)| h).sum::<f64>() / rates.len() as f64
    };
    FitTargets {
        seq_fraction: mean_sequential_fraction(trace).unwrap_or(0.0),
        mean_hit_rate,
    }
}

pub fn fit_report(trace: &Trace, targets: FitTargets) -> FitReport {
    let measured = measure(trace);
    FitReport {
        targets,
        measured,
        seq_fraction_deviation: (measured.seq_fraction - targets.seq_fraction).abs(),
        mean_hit_rate_deviation: (measured.mean_hit_rate - targets.mean_hit_rate).abs(),
    }
}
