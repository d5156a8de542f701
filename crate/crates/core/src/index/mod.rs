//! Reference KVC metadata store.

mod cache;
mod key;
mod reference;
mod store;

pub use cache::{CacheConfig, CachePolicy};
pub use key::{
    decode_key, encode_key, KeyScheme, MetaKey, MetaValue, Namespace, KEY_LEN, NAMESPACE_LEN,
    VALUE_LEN,
};
pub use reference::SortedListModel;
pub use store::{Clock, IndexError, IndexStats, MetaStore, StoreConfig};
