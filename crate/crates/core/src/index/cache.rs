//! Bounded hot-entry cache in front of the index.
//!
//! Two policies share one eviction structure, an ordered set of
//! `(priority, last_access_seq, key)` over unpinned entries:
//!
//! * `Lru`: priority is constant, so eviction is by least-recent access.
//! * `LruPin`: entries whose block id is below `pin_first_n` are pinned and
//!   never evicted; the rest are evicted least-hot first, ties going to the
//!   least recently used. Hotness is an access counter with exponential
//!   decay of half-life `hotness_halflife_s`.
//!
//! A decayed counter `c·2^(-(t-t₀)/H)` compares across entries the same way
//! at any `t`, so each entry keeps the time-invariant key
//! `log2(c) + t₀/H` and only moves in the order when it is touched.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::key::{MetaKey, MetaValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    Lru,
    #[default]
    LruPin,
}

impl CachePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            CachePolicy::Lru => "lru",
            CachePolicy::LruPin => "lru_pin",
        }
    }
}

impl std::str::FromStr for CachePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lru" => Ok(CachePolicy::Lru),
            "lru_pin" | "lru-pin" => Ok(CachePolicy::LruPin),
            other => Err(format!(
                "unknown cache policy `{other}` (expected lru or lru_pin)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// 0 disables the cache layer.
    pub capacity_entries: usize,
    pub policy: CachePolicy,
    /// Block ids `0..pin_first_n` of every namespace are pinned.
    pub pin_first_n: u64,
    pub hotness_halflife_s: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity_entries: 4096,
            policy: CachePolicy::LruPin,
            pin_first_n: 16,
            hotness_halflife_s: 600.0,
        }
    }
}

impl CacheConfig {
    pub fn disabled() -> Self {
        CacheConfig {
            capacity_entries: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.pin_first_n > self.capacity_entries as u64 && self.capacity_entries > 0 {
            return Err(format!(
                "pin_first_n ({}) exceeds capacity_entries ({})",
                self.pin_first_n, self.capacity_entries
            ));
        }
        if !(self.hotness_halflife_s.is_finite() && self.hotness_halflife_s > 0.0) {
            return Err(format!(
                "hotness_halflife_s must be positive, got {}",
                self.hotness_halflife_s
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    value: MetaValue,
    pinned: bool,
    heat: f64,
    seq: u64,
}

#[derive(Debug)]
pub(crate) struct HotCache {
    config: CacheConfig,
    slots: HashMap<MetaKey, Slot>,
    order: BTreeSet<(u64, u64, MetaKey)>,
    seq: u64,
}

impl HotCache {
    pub fn new(config: CacheConfig) -> Self {
        HotCache {
            config,
            slots: HashMap::new(),
            order: BTreeSet::new(),
            seq: 0,
        }
    }

    pub fn enabled(&self) -> bool {
        self.config.capacity_entries > 0
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_pinned_key(&self, key: &MetaKey) -> bool {
        self.config.policy == CachePolicy::LruPin && key.block_id().0 < self.config.pin_first_n
    }

    fn priority(&self, heat: f64) -> u64 {
        match self.config.policy {
            CachePolicy::Lru => 0,
            // heat is non-negative, so the raw bits sort like the value
            CachePolicy::LruPin => heat.max(0.0).to_bits(),
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn now_units(&self, now_ms: u64) -> f64 {
        now_ms as f64 / (1000.0 * self.config.hotness_halflife_s)
    }

    /// Returns the cached value and records the access.
    pub fn lookup(&mut self, key: &MetaKey, now_ms: u64) -> Option<MetaValue> {
        let mut slot = *self.slots.get(key)?;
        if !slot.pinned {
            self.order
                .remove(&(self.priority(slot.heat), slot.seq, *key));
        }
        let t = self.now_units(now_ms);
        // decayed count at t, plus this access
        let decayed = (slot.heat - t).exp2();
        slot.heat = t + (decayed + 1.0).log2();
        slot.seq = self.next_seq();
        if !slot.pinned {
            self.order
                .insert((self.priority(slot.heat), slot.seq, *key));
        }
        self.slots.insert(*key, slot);
        Some(slot.value)
    }

    /// Inserts a freshly read entry, evicting if needed. Unpinned entries are
    /// not admitted when every resident entry is pinned.
    pub fn admit(&mut self, key: MetaKey, value: MetaValue, now_ms: u64) {
        if !self.enabled() {
            return;
        }
        if let Some(slot) = self.slots.get_mut(&key) {
            slot.value = value;
            return;
        }
        let pinned = self.is_pinned_key(&key);
        if self.slots.len() >= self.config.capacity_entries {
            match self.order.pop_first() {
                Some((_, _, victim)) => {
                    self.slots.remove(&victim);
                }
                // pinned entries may overflow capacity; nothing else may
                None if !pinned => return,
                None => {}
            }
        }
        let heat = self.now_units(now_ms);
        let seq = self.next_seq();
        self.slots.insert(
            key,
            Slot {
                value,
                pinned,
                heat,
                seq,
            },
        );
        if !pinned {
            self.order.insert((self.priority(heat), seq, key));
        }
    }

    /// Write-through for puts: refreshes a resident value, and admits pinned
    /// keys so their first read already hits.
    pub fn on_put(&mut self, key: MetaKey, value: MetaValue, now_ms: u64) {
        if !self.enabled() {
            return;
        }
        if let Some(slot) = self.slots.get_mut(&key) {
            slot.value = value;
        } else if self.is_pinned_key(&key) {
            self.admit(key, value, now_ms);
        }
    }

    pub fn remove(&mut self, key: &MetaKey) {
        if let Some(slot) = self.slots.remove(key) {
            if !slot.pinned {
                self.order
                    .remove(&(self.priority(slot.heat), slot.seq, *key));
            }
        }
    }

    #[cfg(test)]
    pub fn contains(&self, key: &MetaKey) -> bool {
        self.slots.contains_key(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::key::Namespace;
    use crate::trace::BlockId;

    fn key(id: u64) -> MetaKey {
        MetaKey::encode(Namespace::ZERO, BlockId(id))
    }

    fn cfg(capacity: usize, policy: CachePolicy, pin: u64) -> CacheConfig {
        CacheConfig {
            capacity_entries: capacity,
            policy,
            pin_first_n: pin,
            hotness_halflife_s: 600.0,
        }
    }

    #[test]
    fn lru_evicts_least_recent() {
        let mut c = HotCache::new(cfg(2, CachePolicy::Lru, 0));
        c.admit(key(100), MetaValue(1), 0);
        c.admit(key(101), MetaValue(2), 0);
        assert_eq!(c.lookup(&key(100), 0), Some(MetaValue(1)));
        c.admit(key(102), MetaValue(3), 0);
        assert!(c.contains(&key(100)));
        assert!(!c.contains(&key(101)));
        assert!(c.contains(&key(102)));
    }

    #[test]
    fn pinned_entries_survive_floods() {
        let mut c = HotCache::new(cfg(4, CachePolicy::LruPin, 2));
        c.on_put(key(0), MetaValue(0), 0);
        c.on_put(key(1), MetaValue(1), 0);
        c.on_put(key(50), MetaValue(50), 0); // not pinned, not admitted by a put
        assert_eq!(c.len(), 2);
        for id in 100..200 {
            c.admit(key(id), MetaValue(id), id);
        }
        assert_eq!(c.len(), 4);
        assert_eq!(c.lookup(&key(0), 500), Some(MetaValue(0)));
        assert_eq!(c.lookup(&key(1), 500), Some(MetaValue(1)));
    }

    #[test]
    fn hot_entry_outlives_recent_cold_ones() {
        let mut c = HotCache::new(cfg(3, CachePolicy::LruPin, 0));
        c.admit(key(10), MetaValue(10), 0);
        for t in 1..20 {
            c.lookup(&key(10), t);
        }
        c.admit(key(11), MetaValue(11), 30);
        c.admit(key(12), MetaValue(12), 31);
        c.admit(key(13), MetaValue(13), 32);
        // 11 is the coldest of the unpinned set
        assert!(c.contains(&key(10)));
        assert!(!c.contains(&key(11)));
    }

    #[test]
    fn heat_decays_with_time() {
        let mut c = HotCache::new(CacheConfig {
            hotness_halflife_s: 1.0,
            ..cfg(2, CachePolicy::LruPin, 0)
        });
        c.admit(key(10), MetaValue(10), 0);
        for _ in 0..3 {
            c.lookup(&key(10), 0);
        }
        // an hour later a single recent access is hotter than 4 stale ones
        c.admit(key(11), MetaValue(11), 3_600_000);
        c.admit(key(12), MetaValue(12), 3_600_001);
        assert!(!c.contains(&key(10)));
        assert!(c.contains(&key(11)));
    }

    #[test]
    fn disabled_cache_holds_nothing() {
        let mut c = HotCache::new(CacheConfig::disabled());
        c.admit(key(1), MetaValue(1), 0);
        c.on_put(key(0), MetaValue(0), 0);
        assert_eq!(c.len(), 0);
        assert_eq!(c.lookup(&key(1), 0), None);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(4, CachePolicy::LruPin, 5).validate().is_err());
        assert!(cfg(4, CachePolicy::LruPin, 4).validate().is_ok());
        assert!(CacheConfig::disabled().validate().is_ok());
        let bad = CacheConfig {
            hotness_halflife_s: 0.0,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
