//! The operation contract every metadata backend implements.

use std::sync::Arc;

use thiserror::Error;

use crate::index::{IndexError, IndexStats, MetaKey, MetaStore, MetaValue};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("bad range: start must be below end_exclusive")]
    BadRange,
    #[error("store is full")]
    Capacity,
    #[error("request rejected by server")]
    BadRequest,
    #[error("server internal error")]
    Internal,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out")]
    Timeout,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("external service error: {0}")]
    External(String),
}

impl BackendError {
    /// Short stable class name for logs and CSVs.
    pub fn class(&self) -> &'static str {
        match self {
            BackendError::BadRange => "bad_range",
            BackendError::Capacity => "capacity",
            BackendError::BadRequest => "bad_request",
            BackendError::Internal => "internal",
            BackendError::Transport(_) => "transport",
            BackendError::Timeout => "timeout",
            BackendError::Protocol(_) => "protocol",
            BackendError::External(_) => "external",
        }
    }
}

impl From<IndexError> for BackendError {
    fn from(e: IndexError) -> Self {
        match e {
            IndexError::BadRange => BackendError::BadRange,
            IndexError::CapacityExhausted { .. } => BackendError::Capacity,
            IndexError::Config(msg) => BackendError::External(msg),
        }
    }
}

/// put/get/scan/delete/stats with the semantics of [`MetaStore`].
pub trait Backend: Send + Sync {
    fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, BackendError>;
    fn get(&self, key: &MetaKey) -> Result<Option<MetaValue>, BackendError>;
    fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, BackendError>;
    fn delete(&self, key: &MetaKey) -> Result<bool, BackendError>;
    fn stats(&self) -> Result<IndexStats, BackendError>;
    fn describe(&self) -> String;
}

impl Backend for MetaStore {
    fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, BackendError> {
        MetaStore::put(self, key, value).map_err(Into::into)
    }

    fn get(&self, key: &MetaKey) -> Result<Option<MetaValue>, BackendError> {
        Ok(MetaStore::get(self, key))
    }

    fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, BackendError> {
        MetaStore::scan(self, start, end_exclusive, max_results).map_err(Into::into)
    }

    fn delete(&self, key: &MetaKey) -> Result<bool, BackendError> {
        Ok(MetaStore::delete(self, key))
    }

    fn stats(&self) -> Result<IndexStats, BackendError> {
        Ok(MetaStore::stats(self))
    }

    fn describe(&self) -> String {
        "inproc".to_string()
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn put(&self, key: MetaKey, value: MetaValue) -> Result<Option<MetaValue>, BackendError> {
        (**self).put(key, value)
    }

    fn get(&self, key: &MetaKey) -> Result<Option<MetaValue>, BackendError> {
        (**self).get(key)
    }

    fn scan(
        &self,
        start: &MetaKey,
        end_exclusive: &MetaKey,
        max_results: usize,
    ) -> Result<Vec<(MetaKey, MetaValue)>, BackendError> {
        (**self).scan(start, end_exclusive, max_results)
    }

    fn delete(&self, key: &MetaKey) -> Result<bool, BackendError> {
        (**self).delete(key)
    }

    fn stats(&self) -> Result<IndexStats, BackendError> {
        (**self).stats()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}
