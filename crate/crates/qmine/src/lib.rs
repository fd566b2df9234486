//! Classical simulation of a two-party quantum counting protocol for
//! privacy-preserving association rule mining.
//!
//! Alice owns a binary transaction database and answers quantum database
//! calls; Bob wants the support of a predicate he keeps private and drives
//! quantum counting through Grover iterations. Alice mixes decoy test states
//! into the exchange to catch a Bob who reads the data, and Bob mixes noise
//! functions into his schedule so Alice cannot learn his predicate. The
//! adversary and harness modules measure both guarantees.

pub mod adversary;
pub mod bits;
pub mod cli;
pub mod error;
pub mod harness;
pub mod mining;
pub mod oracles;
pub mod qsim;
pub mod protocol;
pub mod rng;
pub mod teststates;

pub use bits::BitString;
pub use error::{Error, Result};
