//! Op-by-op comparison of a [`Backend`] against [`SortedListModel`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backend::{Backend, BackendError};
use crate::index::{encode_key, MetaKey, MetaValue, Namespace, SortedListModel};
use crate::trace::BlockId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelOp {
    Put(MetaKey, MetaValue),
    Get(MetaKey),
    Scan {
        start: MetaKey,
        end_exclusive: MetaKey,
        max_results: usize,
    },
    Delete(MetaKey),
}

#[derive(Debug, Clone, Copy)]
pub struct OpMix {
    pub ops: usize,
    /// Ids are drawn from `0..ids` in every namespace.
    pub ids: u64,
    pub namespaces: usize,
}

fn namespace(i: usize) -> Namespace {
    Namespace::from_label(&format!("ns{i}")).expect("short label")
}

/// Random mixed workload: roughly 35% puts, 35% gets, 15% scans (a few of
/// them with empty or inverted ranges) and 15% deletes.
pub fn random_ops(seed: u64, mix: OpMix) -> Vec<ModelOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let namespaces: Vec<Namespace> = (0..mix.namespaces.max(1)).map(namespace).collect();
    let key = |rng: &mut ChaCha8Rng| {
        let ns = namespaces[rng.gen_range(0..namespaces.len())];
        (ns, rng.gen_range(0..mix.ids))
    };
    (0..mix.ops)
        .map(|_| {
            let roll = rng.gen_range(0..100);
            let (ns, id) = key(&mut rng);
            let k = encode_key(ns, BlockId(id));
            match roll {
                0..=34 => ModelOp::Put(k, MetaValue(rng.gen())),
                35..=69 => ModelOp::Get(k),
                70..=84 => {
                    let end = if rng.gen_ratio(1, 20) {
                        id.saturating_sub(rng.gen_range(0..3))
                    } else {
                        id + rng.gen_range(1..=64)
                    };
                    ModelOp::Scan {
                        start: k,
                        end_exclusive: encode_key(ns, BlockId(end)),
                        max_results: rng.gen_range(1..=80),
                    }
                }
                _ => ModelOp::Delete(k),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub step: usize,
    /// `None` for the final resident-count check.
    pub op: Option<ModelOp>,
    pub expected: String,
    pub actual: String,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} ({:?}): expected {}, got {}",
            self.step, self.op, self.expected, self.actual
        )
    }
}

#[derive(Debug, PartialEq)]
enum Observed {
    Value(Option<MetaValue>),
    Entries(Vec<(MetaKey, MetaValue)>),
    Removed(bool),
    Failed(&'static str),
}

fn observe<T>(r: Result<T, BackendError>, wrap: impl FnOnce(T) -> Observed) -> Observed {
    match r {
        Ok(v) => wrap(v),
        Err(e) => Observed::Failed(e.class()),
    }
}

/// Replays `ops` against a fresh model and `backend` in lockstep and stops
/// at the first divergence. `before_op` runs ahead of each step, e.g. to
/// advance a manual clock.
pub fn check_against_model<B: Backend + ?Sized>(
    backend: &B,
    ops: &[ModelOp],
    mut before_op: impl FnMut(usize),
) -> Result<(), Box<Mismatch>> {
    let model = SortedListModel::new();
    for (step, op) in ops.iter().enumerate() {
        before_op(step);
        let (expected, actual) = match *op {
            ModelOp::Put(k, v) => (
                Observed::Value(model.put(k, v)),
                observe(backend.put(k, v), Observed::Value),
            ),
            ModelOp::Get(k) => (
                Observed::Value(model.get(&k)),
                observe(backend.get(&k), Observed::Value),
            ),
            ModelOp::Scan {
                start,
                end_exclusive,
                max_results,
            } => (
                observe(
                    model
                        .scan(&start, &end_exclusive, max_results)
                        .map_err(BackendError::from),
                    Observed::Entries,
                ),
                observe(
                    backend.scan(&start, &end_exclusive, max_results),
                    Observed::Entries,
                ),
            ),
            ModelOp::Delete(k) => (
                Observed::Removed(model.delete(&k)),
                observe(backend.delete(&k), Observed::Removed),
            ),
        };
        if expected != actual {
            return Err(Box::new(Mismatch {
                step,
                op: Some(*op),
                expected: format!("{expected:?}"),
                actual: format!("{actual:?}"),
            }));
        }
    }
    let resident = backend.stats().map(|s| s.resident_entries).ok();
    if resident != Some(model.len() as u64) {
        return Err(Box::new(Mismatch {
            step: ops.len(),
            op: None,
            expected: format!("{} resident entries", model.len()),
            actual: format!("{resident:?}"),
        }));
    }
    Ok(())
}
