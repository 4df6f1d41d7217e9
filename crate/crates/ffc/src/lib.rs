//! Federated feature construction over distributed tabular data.
//!
//! A population of fixed-length program strings is evolved on each simulated
//! client with gravitational-search dynamics; crowding clustering splits every
//! population into niches so that several distinct constructed features survive
//! per client. An edge server aggregates the niche champions each round and
//! applies one global update step, sending refined programs back to their
//! owners. No raw samples or labels ever cross the client boundary, only
//! program positions, velocities, fitness scalars, and indices.
//!
//! The crate ships the full desk-scale pipeline: CSV ingestion and iid/non-iid
//! partitioning ([`data`]), the program genome and expression trees
//! ([`genome`]), information-gain-ratio fitness ([`fitness`]), the
//! gravitational update step ([`gsa`]), crowding clustering ([`niching`]),
//! round orchestration ([`federation`]), a gain-ratio decision tree used to
//! score the constructed features against a no-construction baseline
//! ([`eval`]), and the config/pipeline plumbing shared by the `ffc` binary
//! and the Python bindings ([`cli`]).

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod federation;
pub mod fitness;
pub mod genome;
pub mod gsa;
pub mod niching;
pub mod rng;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
