//! Trace analysis, trace-driven benchmarking and a reference metadata store
//! for the block index behind LLM KV-cache prefix prefill.

pub mod analysis;
pub mod backend;
pub mod bench;
pub mod conformance;
pub mod index;
pub mod service;
pub mod synth;
pub mod trace;
