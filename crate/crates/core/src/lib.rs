//! Fine-grained inference-serving decision layer.
//!
//! The crate models a router that keeps a global earliest-deadline-first
//! queue of queries and, whenever a worker is free, asks a scheduling policy
//! for a `(batch size, subnet)` pair drawn from a latency/accuracy catalog of
//! weight-shared subnets. The same router drives both a deterministic
//! discrete-event simulator ([`sim`]) and a threaded live runtime with mock
//! workers ([`live`]).
//!
//! Supporting pieces:
//!
//! * [`profile`]: subnet catalog, pareto filtering, latency buckets and the
//!   supernet memory model.
//! * [`tracegen`]: seeded bursty, time-varying and spike arrival traces.
//! * [`queue`]: the EDF queue and batch formation.
//! * [`policy`]: SlackFit and the baseline policies.
//! * [`oracle`]: exact solver for tiny offline scheduling instances plus the
//!   batch utility function.
//! * [`metrics`]: SLO attainment, serving accuracy and dynamics export.
//! * [`sweep`]: experiment grids over traces, policies and seeds.

pub mod error;
pub mod live;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod profile;
pub mod queue;
pub mod router;
pub mod sim;
pub mod sweep;
pub mod tracegen;

pub use error::{Error, Result};

/// Time and latency in integer microseconds.
pub type Micros = u64;

/// Slack can go negative once a deadline has passed.
pub type SignedMicros = i64;
