//! Effective-throughput analysis for cache-aided broadcast networks.
//!
//! A base station serves `K` users over one shared error-free link. Each user
//! prefetches raw content bits into a private buffer, then requests items
//! according to a known demand distribution. The effective throughput of a
//! user is the expected number of items it no longer has to pay for, where a
//! multicast message is charged equally to everyone in its audience.
//!
//! The crate is split into:
//!
//! * [`model`]: instances, demand distributions and the pure-caching baseline.
//! * [`lp`]: a small dense simplex solver returning vertex optima.
//! * [`twouser`]: exclusive-fraction algebra, per-outcome costs and the
//!   scalarized LP whose sweep traces the achievable polygon.
//! * [`games`]: best-response search for pure Nash equilibria and the
//!   cooperative surplus split.
//! * [`multiuser`]: popularity placement with grouped XOR multicast delivery
//!   for any number of users, plus a decoding simulator.
//! * [`oracle`]: brute-force cross-checks used by tests and the CLI.
//! * [`presets`]: the standard instances and seeded random generators.

pub mod error;
pub mod games;
pub mod lp;
pub mod model;
pub mod multiuser;
pub mod oracle;
pub mod presets;
pub mod twouser;

pub use error::{Error, Result};
