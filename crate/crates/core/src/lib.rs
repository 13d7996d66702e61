//! Fuse automated passenger counts with anonymized multimodal trip-chain
//! traces.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`] reads counter, trace and station files and coarsens raw
//!   traces into anonymous [`model::Leg`]s.
//! * [`chains`] groups legs into trip chains and pulls out one
//!   [`chains::TrainLegContext`] per train leg.
//! * [`stats`] checks how well trace ridership tracks counter ridership.
//! * [`patterns`] builds the station OD matrix and travel time, distance and
//!   flow distributions.
//! * [`coverage`] measures each station's catchment (cell counts, Gini,
//!   radius of gyration) and access/egress mode shares.
//! * [`fusion`] explains ridership from those station profiles with a
//!   random forest, permutation importance and partial dependence.
//! * [`synth`] simulates a toy network with known ground truth so every
//!   stage can be checked end to end.
//! * [`pipeline`] strings the stages together for the command line, with
//!   [`config`] for the run file and [`report`] for manifest-stamped
//!   output.

pub mod chains;
pub mod config;
pub mod coverage;
pub mod error;
pub mod fusion;
pub mod ingest;
pub mod model;
pub mod patterns;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod warnings;

pub use error::{Error, Result};
pub use warnings::Warnings;
