//! `--backend` and `--cache` argument syntax.
//!
//! ```text
//! inproc[:capacity=4096,policy=lru_pin,pin=16,halflife=600,max_entries=N]
//! remote:HOST:PORT
//! external:ADDRESS
//! ```

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use kvmeta::backend::Backend;
use kvmeta::index::{CacheConfig, MetaStore, StoreConfig};
use kvmeta::service::RemoteBackend;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Inproc { store: StoreConfig },
    Remote { endpoint: String },
    External { address: String },
}

/// Parses `key=value` pairs into a store config, starting from defaults.
pub fn parse_store_config(opts: &str) -> Result<StoreConfig> {
    let mut store = StoreConfig::default();
    for pair in opts.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{pair}`"))?;
        let bad = |e: &dyn std::fmt::Display| anyhow!("bad value for `{k}`: {e}");
        match k {
            "capacity" => store.cache.capacity_entries = v.parse().map_err(|e| bad(&e))?,
            "policy" => store.cache.policy = v.parse().map_err(|e: String| bad(&e))?,
            "pin" => store.cache.pin_first_n = v.parse().map_err(|e| bad(&e))?,
            "halflife" => store.cache.hotness_halflife_s = v.parse().map_err(|e| bad(&e))?,
            "max_entries" => store.max_entries = Some(v.parse().map_err(|e| bad(&e))?),
            other => bail!(
                "unknown store option `{other}` (capacity, policy, pin, halflife, max_entries)"
            ),
        }
    }
    store.cache.validate().map_err(|e| anyhow!(e))?;
    Ok(store)
}

pub fn cache_summary(c: &CacheConfig) -> String {
    format!(
        "capacity={},policy={},pin={},halflife={}",
        c.capacity_entries,
        c.policy.as_str(),
        c.pin_first_n,
        c.hotness_halflife_s
    )
}

impl std::str::FromStr for BackendSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        match (kind, rest) {
            ("inproc", opts) => Ok(BackendSpec::Inproc {
                store: parse_store_config(opts.unwrap_or(""))?,
            }),
            ("remote", Some(ep)) if !ep.is_empty() => Ok(BackendSpec::Remote {
                endpoint: ep.to_string(),
            }),
            ("external", Some(addr)) if !addr.is_empty() => Ok(BackendSpec::External {
                address: addr.to_string(),
            }),
            _ => bail!(
                "backend must be inproc[:opts], remote:HOST:PORT or external:ADDRESS, got `{s}`"
            ),
        }
    }
}

impl BackendSpec {
    pub fn open(&self) -> Result<Arc<dyn Backend>> {
        match self {
            BackendSpec::Inproc { store } => Ok(Arc::new(MetaStore::new(*store)?)),
            BackendSpec::Remote { endpoint } => Ok(Arc::new(
                RemoteBackend::connect(endpoint.as_str())
                    .with_context(|| format!("connecting to {endpoint}"))?,
            )),
            BackendSpec::External { address } => open_external(address),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BackendSpec::Inproc { store } => format!("inproc:{}", cache_summary(&store.cache)),
            BackendSpec::Remote { endpoint } => format!("remote:{endpoint}"),
            BackendSpec::External { address } => format!("external:{address}"),
        }
    }
}

#[cfg(feature = "redis")]
fn open_external(address: &str) -> Result<Arc<dyn Backend>> {
    Ok(Arc::new(kvmeta::service::RedisBackend::connect(address)?))
}

#[cfg(not(feature = "redis"))]
fn open_external(_address: &str) -> Result<Arc<dyn Backend>> {
    bail!("external backends need a build with `--features redis`")
}

#[cfg(test)]
mod tests {
    use super::*;
    use kvmeta::index::CachePolicy;

    #[test]
    fn parses_specs() {
        assert_eq!(
            "inproc".parse::<BackendSpec>().unwrap(),
            BackendSpec::Inproc {
                store: StoreConfig::default()
            }
        );
        match "inproc:capacity=0,policy=lru"
            .parse::<BackendSpec>()
            .unwrap()
        {
            BackendSpec::Inproc { store } => {
                assert_eq!(store.cache.capacity_entries, 0);
                assert_eq!(store.cache.policy, CachePolicy::Lru);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            "remote:127.0.0.1:7700".parse::<BackendSpec>().unwrap(),
            BackendSpec::Remote {
                endpoint: "127.0.0.1:7700".into()
            }
        );
        assert!("remote".parse::<BackendSpec>().is_err());
        assert!("tcp:1".parse::<BackendSpec>().is_err());
        assert!("inproc:capacity=x".parse::<BackendSpec>().is_err());
        assert!("inproc:colour=red".parse::<BackendSpec>().is_err());
        assert!("inproc:capacity=8,pin=16".parse::<BackendSpec>().is_err());
    }
}
