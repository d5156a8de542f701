//! TCP service exposing a backend over the binary frame protocol, and the
//! matching client.

mod client;
#[cfg(feature = "redis")]
mod external;
pub mod protocol;
mod server;

pub use client::{RemoteBackend, DEFAULT_OP_TIMEOUT};
#[cfg(feature = "redis")]
pub use external::RedisBackend;
pub use server::{dispatch, serve, ServiceHandle};
