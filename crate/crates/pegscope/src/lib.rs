//! Deterministic stablecoin transparency audit toolkit.
//!
//! Aligns on-chain market observations with off-chain issuer attestations:
//! derived indicators ([`metrics`]), fixture ingestion ([`ingest`]), an
//! append-only canonical store ([`store`]), a five-tool JSON-RPC data server
//! ([`tools`], [`server`]), and a three-agent classification pipeline
//! ([`agents`], [`classify`]) with table and figure reporting ([`report`]).

pub mod agents;
pub mod canonical;
pub mod classify;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod report;
pub mod server;
pub mod store;
pub mod tools;
pub mod types;

pub use error::{Error, Result};
