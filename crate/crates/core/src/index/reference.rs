//! Naive reference model: a sorted association list with binary search.
//! Slow and obviously correct; used to check faster backends op by op.

use std::sync::Mutex;

use super::key::{MetaKey, MetaValue};
use super::store::{IndexError, IndexStats};

#[derive(Debug, Default)]
pub struct SortedListModel {
    entries: Mutex<Vec<(MetaKey, MetaValue)>>,
}

impl SortedListModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, key: MetaKey, value: MetaValue) -> Option<MetaValue> {
        let mut e = self.entries.lock().unwrap();
        match e.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => Some(std::mem::replace(&mut e[i].1, value)),
            Err(i) => {
                e.insert(i, (key, value));
                None
            }
        }
    }

    pub fn get(&self, key: &MetaKey) -> Option<MetaValue> {
        let e = self.entries.lock().unwrap();
        e.binary_search_by(|(k, _)| k.cmp(key)).ok().map(|i| e[i].1)
    }

    pub fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, IndexError> {
        if start >= end_exclusive {
            return Err(IndexError::BadRange);
        }
        let e = self.entries.lock().unwrap();
        let from = e.partition_point(|(k, _)| k < start);
        Ok(e[from..]
            .iter()
            .take_while(|(k, _)| k < end_exclusive)
            .take(max_results)
            .copied()
            .collect())
    }

    pub fn delete(&self, key: &MetaKey) -> bool {
        let mut e = self.entries.lock().unwrap();
        match e.binary_search_by(|(k, _)| k.cmp(key)) {
            Ok(i) => {
                e.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Only the resident count is meaningful; the model keeps no counters.
    pub fn stats(&self) -> IndexStats {
        IndexStats {
            resident_entries: self.len() as u64,
            ..IndexStats::default()
        }
    }
}
