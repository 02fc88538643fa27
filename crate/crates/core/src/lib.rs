//! Multi-DTN bulk transfer simulation and measurement toolkit.
//!
//! The crate models a set of HPC facilities, each exposing a cluster of
//! data transfer nodes dual-homed between a parallel filesystem and a wide
//! area network, and an orchestrator that moves file trees between sites
//! in verified batches. Everything runs on a deterministic simulated
//! clock: identical inputs and seeds reproduce identical results, byte for
//! byte.
//!
//! - [`dataset`]: synthetic file trees with prescribed size histograms.
//! - [`topology`]: sites, DTN clusters, tuning presets, links, routes.
//! - [`simnet`]: max-min fair fluid network simulator with TCP rate caps
//!   and speed-mismatch loss.
//! - [`engine`]: batch planning, node assignment, checksum pipelines,
//!   retries, transfer reports.
//! - [`harness`]: pairwise rate meshes, component tests, bottleneck
//!   triangulation, table rendering.
//! - [`fixtures`]: the shipped example topologies.

pub mod content;
pub mod dataset;
pub mod engine;
pub mod fixtures;
pub mod harness;
pub mod rng;
pub mod simnet;
pub mod topology;
