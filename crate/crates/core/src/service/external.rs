//! Backend adapter over a Redis server.
//!
//! Point entries are plain strings (`kvmeta:` ‖ key → 8-byte value). The
//! ordered path is one sorted set whose members are `key ‖ value` at score
//! 0, so `ZRANGEBYLEX` over `[start, (end` returns exactly the entries with
//! `start <= key < end`. Writes touch both under a Lua script, which Redis
//! runs atomically.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use redis::{Connection, Script};

use crate::backend::{Backend, BackendError};
use crate::index::{IndexStats, MetaKey, MetaValue, KEY_LEN, VALUE_LEN};

const PREFIX: &[u8] = b"kvmeta:";
const ORDERED_SET: &str = "kvmeta:ordered";

const PUT_LUA: &str = r#"
local old = redis.call('GET', KEYS[1])
if old then redis.call('ZREM', KEYS[2], ARGV[1] .. old) end
redis.call('SET', KEYS[1], ARGV[2])
redis.call('ZADD', KEYS[2], 0, ARGV[1] .. ARGV[2])
return old
"#;

const DELETE_LUA: &str = r#"
local old = redis.call('GET', KEYS[1])
if not old then return 0 end
redis.call('DEL', KEYS[1])
redis.call('ZREM', KEYS[2], ARGV[1] .. old)
return 1
"#;

pub struct RedisBackend {
    client: redis::Client,
    address: String,
    pool: Mutex<Vec<Connection>>,
    put_script: Script,
    delete_script: Script,
    puts: AtomicU64,
    gets: AtomicU64,
    scans: AtomicU64,
    deletes: AtomicU64,
}

fn ext(e: redis::RedisError) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else if e.is_io_error() || e.is_connection_dropped() || e.is_connection_refusal() {
        BackendError::Transport(e.to_string())
    } else {
        BackendError::External(e.to_string())
    }
}

fn string_key(key: &MetaKey) -> Vec<u8> {
    let mut k = PREFIX.to_vec();
    k.extend_from_slice(&key.0);
    k
}

fn value_from(bytes: &[u8]) -> Result<MetaValue, BackendError> {
    let arr: [u8; VALUE_LEN] = bytes
        .try_into()
        .map_err(|_| BackendError::Protocol(format!("stored value has {} bytes", bytes.len())))?;
    Ok(MetaValue::from_bytes(arr))
}

impl RedisBackend {
    /// `address` is `host:port` or a full `redis://` URL.
    pub fn connect(address: &str) -> Result<Self, BackendError> {
        let url = if address.starts_with("redis://") || address.starts_with("unix://") {
            address.to_string()
        } else {
            format!("redis://{address}")
        };
        let client = redis::Client::open(url.as_str()).map_err(ext)?;
        let first = client.get_connection().map_err(ext)?;
        Ok(RedisBackend {
            client,
            address: url,
            pool: Mutex::new(vec![first]),
            put_script: Script::new(PUT_LUA),
            delete_script: Script::new(DELETE_LUA),
            puts: AtomicU64::new(0),
            gets: AtomicU64::new(0),
            scans: AtomicU64::new(0),
            deletes: AtomicU64::new(0),
        })
    }

    fn with_conn<T>(
        &self,
        f: impl FnOnce(&mut Connection) -> redis::RedisResult<T>,
    ) -> Result<T, BackendError> {
        let pooled = self.pool.lock().unwrap().pop();
        let mut conn = match pooled {
            Some(c) => c,
            None => self.client.get_connection().map_err(ext)?,
        };
        let out = f(&mut conn).map_err(ext)?;
        self.pool.lock().unwrap().push(conn);
        Ok(out)
    }
}

impl Backend for RedisBackend {
    fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, BackendError> {
        self.puts.fetch_add(1, Ordering::Relaxed);
        let old: Option<Vec<u8>> = self.with_conn(|c| {
            self.put_script
                .key(string_key(&key))
                .key(ORDERED_SET)
                .arg(&key.0[..])
                .arg(&value.to_bytes()[..])
                .invoke(c)
        })?;
        old.map(|b| value_from(&b)).transpose()
    }

    fn get(&self, key: &MetaKey) -> Result<Option<MetaValue>, BackendError> {
        self.gets.fetch_add(1, Ordering::Relaxed);
        let v: Option<Vec<u8>> =
            self.with_conn(|c| redis::cmd("GET").arg(string_key(key)).query(c))?;
        v.map(|b| value_from(&b)).transpose()
    }

    fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, BackendError> {
        if start >= end_exclusive {
            return Err(BackendError::BadRange);
        }
        self.scans.fetch_add(1, Ordering::Relaxed);
        let mut lo = b"[".to_vec();
        lo.extend_from_slice(&start.0);
        let mut hi = b"(".to_vec();
        hi.extend_from_slice(&end_exclusive.0);
        let limit = i64::try_from(max_results).unwrap_or(i64::MAX);
        let members: Vec<Vec<u8>> = self.with_conn(|c| {
            redis::cmd("ZRANGEBYLEX")
                .arg(ORDERED_SET)
                .arg(lo)
                .arg(hi)
                .arg("LIMIT")
                .arg(0)
                .arg(limit)
                .query(c)
        })?;
        members
            .into_iter()
            .map(|m| {
                if m.len() != KEY_LEN + VALUE_LEN {
                    return Err(BackendError::Protocol(format!(
                        "ordered member has {} bytes",
                        m.len()
                    )));
                }
                let mut k = [0u8; KEY_LEN];
                k.copy_from_slice(&m[..KEY_LEN]);
                Ok((MetaKey(k), value_from(&m[KEY_LEN..])?))
            })
            .collect()
    }

    fn delete(&self, key: &MetaKey) -> Result<bool, BackendError> {
        self.deletes.fetch_add(1, Ordering::Relaxed);
        let removed: i64 = self.with_conn(|c| {
            self.delete_script
                .key(string_key(key))
                .key(ORDERED_SET)
                .arg(&key.0[..])
                .invoke(c)
        })?;
        Ok(removed == 1)
    }

    fn stats(&self) -> Result<IndexStats, BackendError> {
        let resident: u64 = self.with_conn(|c| redis::cmd("ZCARD").arg(ORDERED_SET).query(c))?;
        Ok(IndexStats {
            puts: self.puts.load(Ordering::Relaxed),
            gets: self.gets.load(Ordering::Relaxed),
            scans: self.scans.load(Ordering::Relaxed),
            deletes: self.deletes.load(Ordering::Relaxed),
            resident_entries: resident,
            ..IndexStats::default()
        })
    }

    fn describe(&self) -> String {
        format!("external:{}", self.address)
    }
}
