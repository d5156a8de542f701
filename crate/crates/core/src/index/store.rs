use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::{CacheConfig, HotCache};
use super::key::{MetaKey, MetaValue};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndexError {
    #[error("bad range: start must be below end_exclusive")]
    BadRange,
    #[error("store is full ({limit} entries)")]
    CapacityExhausted { limit: usize },
    #[error("invalid cache config: {0}")]
    Config(String),
}

/// Counter snapshot. Field order is the wire order of the STATS response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub puts: u64,
    pub gets: u64,
    pub scans: u64,
    pub deletes: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub resident_entries: u64,
    pub cached_entries: u64,
}

impl IndexStats {
    pub const FIELDS: usize = 8;

    pub fn to_array(self) -> [u64; Self::FIELDS] {
        [
            self.puts,
            self.gets,
            self.scans,
            self.deletes,
            self.cache_hits,
            self.cache_misses,
            self.resident_entries,
            self.cached_entries,
        ]
    }

    pub fn from_array(a: [u64; Self::FIELDS]) -> Self {
        IndexStats {
            puts: a[0],
            gets: a[1],
            scans: a[2],
            deletes: a[3],
            cache_hits: a[4],
            cache_misses: a[5],
            resident_entries: a[6],
            cached_entries: a[7],
        }
    }

    /// Hits over cached lookups, if any lookups were counted.
    pub fn cache_hit_rate(&self) -> Option<f64> {
        let total = self.cache_hits + self.cache_misses;
        (total > 0).then(|| self.cache_hits as f64 / total as f64)
    }
}

/// Time source for hotness decay.
#[derive(Debug, Clone)]
pub enum Clock {
    Wall(Instant),
    /// Caller-driven milliseconds, e.g. trace time during a replay.
    Manual(Arc<AtomicU64>),
}

impl Clock {
    pub fn wall() -> Self {
        Clock::Wall(Instant::now())
    }

    pub fn manual() -> (Self, Arc<AtomicU64>) {
        let t = Arc::new(AtomicU64::new(0));
        (Clock::Manual(t.clone()), t)
    }

    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::Wall(start) => start.elapsed().as_millis() as u64,
            Clock::Manual(t) => t.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StoreConfig {
    /// Upper bound on stored entries; `None` is unbounded.
    pub max_entries: Option<usize>,
    pub cache: CacheConfig,
}

/// The map behind both access paths. Keys live in the hash directory
/// (key → value) and in the ordered index (key only).
#[derive(Debug, Default)]
struct Index {
    directory: HashMap<MetaKey, MetaValue>,
    ordered: BTreeSet<MetaKey>,
}

#[derive(Debug, Default)]
struct Counters {
    puts: AtomicU64,
    gets: AtomicU64,
    scans: AtomicU64,
    deletes: AtomicU64,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
    resident: AtomicU64,
    cached: AtomicU64,
}

/// In-memory metadata store with a hash path for point lookups, an ordered
/// path for range scans, and a hot-entry cache in front of point lookups.
///
/// Single operations are linearizable: writers hold the index write lock
/// while they update the cache, and a cache miss is filled while the index
/// read lock is still held. Lock order is always index, then cache.
/// Scans read one consistent snapshot of the index.
#[derive(Debug)]
pub struct MetaStore {
    index: RwLock<Index>,
    cache: Mutex<HotCache>,
    cache_enabled: bool,
    max_entries: Option<usize>,
    counters: Counters,
    clock: Clock,
}

impl Default for MetaStore {
    fn default() -> Self {
        MetaStore::with_clock(StoreConfig::default(), Clock::wall())
            .expect("default config is valid")
    }
}

impl MetaStore {
    pub fn new(config: StoreConfig) -> Result<Self, IndexError> {
        Self::with_clock(config, Clock::wall())
    }

    pub fn with_clock(config: StoreConfig, clock: Clock) -> Result<Self, IndexError> {
        config.cache.validate().map_err(IndexError::Config)?;
        let cache = HotCache::new(config.cache);
        Ok(MetaStore {
            cache_enabled: cache.enabled(),
            index: RwLock::new(Index::default()),
            cache: Mutex::new(cache),
            max_entries: config.max_entries,
            counters: Counters::default(),
            clock,
        })
    }

    fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }

    fn sync_cached(&self, cache: &HotCache) {
        self.counters
            .cached
            .store(cache.len() as u64, Ordering::Relaxed);
    }

    pub fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, IndexError> {
        let mut index = self.index.write().unwrap();
        let exists = index.directory.contains_key(&key);
        if !exists {
            if let Some(limit) = self.max_entries {
                if index.directory.len() >= limit {
                    return Err(IndexError::CapacityExhausted { limit });
                }
            }
        }
        let previous = index.directory.insert(key, value);
        if previous.is_none() {
            index.ordered.insert(key);
        }
        if self.cache_enabled {
            let mut cache = self.cache.lock().unwrap();
            cache.on_put(key, value, self.clock.now_ms());
            self.sync_cached(&cache);
        }
        self.counters
            .resident
            .store(index.directory.len() as u64, Ordering::Relaxed);
        Self::bump(&self.counters.puts);
        Ok(previous)
    }

    pub fn get(&self, key: &MetaKey) -> Option<MetaValue> {
        Self::bump(&self.counters.gets);
        if !self.cache_enabled {
            return self.index.read().unwrap().directory.get(key).copied();
        }
        let now = self.clock.now_ms();
        if let Some(v) = self.cache.lock().unwrap().lookup(key, now) {
            Self::bump(&self.counters.cache_hits);
            return Some(v);
        }
        Self::bump(&self.counters.cache_misses);
        let index = self.index.read().unwrap();
        let found = index.directory.get(key).copied();
        if let Some(v) = found {
            let mut cache = self.cache.lock().unwrap();
            cache.admit(*key, v, now);
            self.sync_cached(&cache);
        }
        found
    }

    /// Entries with `start <= key < end_exclusive`, ascending, at most
    /// `max_results` of them.
    pub fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, IndexError> {
        if start >= end_exclusive {
            return Err(IndexError::BadRange);
        }
        Self::bump(&self.counters.scans);
        let index = self.index.read().unwrap();
        Ok(index
            .ordered
            .range(*start..*end_exclusive)
            .take(max_results)
            .map(|k| (*k, index.directory[k]))
            .collect())
    }

    pub fn delete(&self, key: &MetaKey) -> bool {
        let mut index = self.index.write().unwrap();
        let removed = index.directory.remove(key).is_some();
        if removed {
            index.ordered.remove(key);
            if self.cache_enabled {
                let mut cache = self.cache.lock().unwrap();
                cache.remove(key);
                self.sync_cached(&cache);
            }
        }
        self.counters
            .resident
            .store(index.directory.len() as u64, Ordering::Relaxed);
        Self::bump(&self.counters.deletes);
        removed
    }

    pub fn stats(&self) -> IndexStats {
        let c = &self.counters;
        IndexStats {
            puts: c.puts.load(Ordering::Relaxed),
            gets: c.gets.load(Ordering::Relaxed),
            scans: c.scans.load(Ordering::Relaxed),
            deletes: c.deletes.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            cache_misses: c.cache_misses.load(Ordering::Relaxed),
            resident_entries: c.resident.load(Ordering::Relaxed),
            cached_entries: c.cached.load(Ordering::Relaxed),
        }
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().directory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
