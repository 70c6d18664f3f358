//! Storage, wire formats, protocol simulation and the `gait` CLI.
//!
//! [`formats`] pins the JSON envelopes and CSV layout everything exchanges,
//! [`vault`] is the append-only "cloud storage" role, [`protocol`] wires
//! simulated actors through the registration, identification and
//! message-exchange flows, and [`bench`] carries the timing and synthetic
//! matching harnesses. The algorithmic layers live in `amsobe-core`.

pub mod bench;
pub mod cli;
pub mod formats;
pub mod protocol;
pub mod vault;
