//! Transfer orchestrator: expands a job into file batches, distributes
//! batches across DTN pairs with bounded concurrency, drives parallel
//! streams on the simulated network, charges checksum compute at both
//! endpoints, verifies integrity, and retries corrupted files.

mod exec;

pub use exec::{execute, DeliveredFile, ExecuteOutcome, SimConfig};

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::content;
use crate::dataset::DatasetManifest;
use crate::simnet::SimError;
use crate::topology::TopologyError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("site '{0}' is not in the topology")]
    UnknownSite(String),
    #[error("site '{0}' has no DTN nodes")]
    EmptyCluster(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("file '{path}' failed verification after {attempts} attempts")]
    RetriesExhausted { path: String, attempts: u32 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Named tuning levels for how hard the tool drives the network, mapped to
/// (concurrent batches, streams per batch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkUse {
    Minimal,
    Default,
    Aggressive,
    Custom,
}

impl NetworkUse {
    pub fn concurrency_streams(self) -> Option<(usize, usize)> {
        match self {
            NetworkUse::Minimal => Some((1, 1)),
            NetworkUse::Default => Some((4, 2)),
            NetworkUse::Aggressive => Some((8, 4)),
            NetworkUse::Custom => None,
        }
    }
}

impl std::str::FromStr for NetworkUse {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minimal" => Ok(NetworkUse::Minimal),
            "default" => Ok(NetworkUse::Default),
            "aggressive" => Ok(NetworkUse::Aggressive),
            "custom" => Ok(NetworkUse::Custom),
            other => Err(format!("unknown network-use level '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferPolicy {
    /// Files in the probe batch that starts every job.
    pub initial_batch_files: usize,
    /// Files per batch once the probe batch completes cleanly.
    pub escalated_batch_files: usize,
    /// Batches allowed in flight at once.
    pub concurrency: usize,
    /// Parallel streams each active batch drives.
    pub streams_per_batch: usize,
    /// Scheduling cost charged before each file, in seconds.
    pub per_file_overhead: f64,
    pub checksum_enabled: bool,
    /// Re-transfers allowed per file beyond the first attempt.
    pub max_retries_per_file: u32,
    pub network_use: NetworkUse,
}

impl Default for TransferPolicy {
    fn default() -> Self {
        Self {
            initial_batch_files: 1000,
            escalated_batch_files: 10_000,
            concurrency: 8,
            streams_per_batch: 4,
            per_file_overhead: 0.025,
            checksum_enabled: true,
            max_retries_per_file: 3,
            network_use: NetworkUse::Aggressive,
        }
    }
}

impl TransferPolicy {
    /// Policy with the concurrency/stream mapping for a named level.
    pub fn for_network_use(level: NetworkUse) -> Self {
        let mut policy = Self {
            network_use: level,
            ..Self::default()
        };
        if let Some((concurrency, streams)) = level.concurrency_streams() {
            policy.concurrency = concurrency;
            policy.streams_per_batch = streams;
        }
        policy
    }

    /// Fixed batch size: disables escalation entirely.
    pub fn without_escalation(mut self) -> Self {
        self.escalated_batch_files = self.initial_batch_files;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.initial_batch_files == 0 {
            return Err(EngineError::InvalidPolicy(
                "initial_batch_files must be at least 1".into(),
            ));
        }
        if self.initial_batch_files > self.escalated_batch_files {
            return Err(EngineError::InvalidPolicy(format!(
                "initial_batch_files {} exceeds escalated_batch_files {}",
                self.initial_batch_files, self.escalated_batch_files
            )));
        }
        if self.concurrency == 0 || self.streams_per_batch == 0 {
            return Err(EngineError::InvalidPolicy(
                "concurrency and streams_per_batch must be at least 1".into(),
            ));
        }
        if self.per_file_overhead < 0.0 {
            return Err(EngineError::InvalidPolicy(
                "per_file_overhead must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A transfer request: move `manifest` from `src_site` to `dst_site`.
#[derive(Debug, Clone)]
pub struct TransferJob {
    pub id: String,
    pub manifest: DatasetManifest,
    pub src_site: String,
    pub dst_site: String,
    pub policy: TransferPolicy,
    pub seed: u64,
    /// Per-file probability of corrupting a transfer attempt.
    pub corruption_probability: f64,
}

impl TransferJob {
    pub fn new(
        id: impl Into<String>,
        manifest: DatasetManifest,
        src_site: impl Into<String>,
        dst_site: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            id: id.into(),
            manifest,
            src_site: src_site.into(),
            dst_site: dst_site.into(),
            policy: TransferPolicy::default(),
            seed,
            corruption_probability: 0.0,
        }
    }
}

/// A contiguous slice of the manifest scheduled as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub id: String,
    pub file_range: Range<usize>,
}

impl BatchPlan {
    pub fn len(&self) -> usize {
        self.file_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.file_range.is_empty()
    }
}

/// Splits the manifest into a probe batch of `initial_batch_files` followed
/// by `escalated_batch_files`-sized batches (last one short). Escalation is
/// provisional: execution revokes it if the probe batch is not clean.
pub fn plan_batches(manifest: &DatasetManifest, policy: &TransferPolicy) -> Vec<BatchPlan> {
    plan_batches_from(manifest.entries.len(), 0, policy.initial_batch_files, policy)
}

pub(crate) fn plan_batches_from(
    total_files: usize,
    start: usize,
    first_batch: usize,
    policy: &TransferPolicy,
) -> Vec<BatchPlan> {
    let mut batches = Vec::new();
    let mut at = start;
    let mut next_size = first_batch;
    while at < total_files {
        let take = next_size.min(total_files - at);
        batches.push(BatchPlan {
            id: format!("b{:06}", batches.len()),
            file_range: at..at + take,
        });
        at += take;
        next_size = policy.escalated_batch_files;
    }
    batches
}

/// Deal batches over the src x dst node cross product with a rotating
/// diagonal so consecutive batches land on distinct pairs and every node
/// takes an equal share: batch k maps to
/// `src[(k + o) % S]`, `dst[((k + o) + (k + o) / S) % D]` with `o` derived
/// from the seed.
pub fn assign(
    batches: &[BatchPlan],
    src_nodes: &[String],
    dst_nodes: &[String],
    seed: u64,
) -> Vec<(String, String)> {
    assert!(!src_nodes.is_empty() && !dst_nodes.is_empty());
    let s = src_nodes.len();
    let d = dst_nodes.len();
    let offset = (seed % (s as u64 * d as u64)) as usize;
    batches
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let j = k + offset;
            let src = &src_nodes[j % s];
            let dst = &dst_nodes[(j + j / s) % d];
            (src.clone(), dst.clone())
        })
        .collect()
}

/// 256-bit digest of a file's deterministic content stream. Pure; agrees
/// with hashing the bytes the dataset materializer writes.
pub fn checksum_of(content_seed: u64, size_bytes: u64) -> [u8; 32] {
    content::stream_digest(content_seed, size_bytes)
}

pub fn checksum_hex(content_seed: u64, size_bytes: u64) -> String {
    content::digest_hex(&checksum_of(content_seed, size_bytes))
}

/// Average rate in bits/s needed to move `bytes` in `duration_s`.
pub fn goal_rate(bytes: u64, duration_s: f64) -> f64 {
    assert!(duration_s > 0.0, "duration must be positive");
    bytes as f64 * 8.0 / duration_s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchTiming {
    pub id: String,
    pub files: usize,
    pub bytes: u64,
    pub start_s: f64,
    pub end_s: f64,
}

/// Per-job result. The average rate is goodput: retransmitted bytes are
/// excluded from the numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub job_id: String,
    pub bytes_transferred: u64,
    pub elapsed_s: f64,
    pub average_rate_bits_per_s: f64,
    pub retransmitted_bytes: u64,
    pub checksum_failures: u64,
    pub batches: Vec<BatchTiming>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    job_id: &'a str,
    bytes: u64,
    elapsed_s: f64,
    avg_gbps: f64,
    retransmitted_bytes: u64,
    checksum_failures: u64,
    batches: &'a [BatchTiming],
}

impl TransferReport {
    pub fn average_gbps(&self) -> f64 {
        self.average_rate_bits_per_s / 1e9
    }

    pub fn to_json(&self) -> String {
        let doc = ReportDoc {
            job_id: &self.job_id,
            bytes: self.bytes_transferred,
            elapsed_s: self.elapsed_s,
            avg_gbps: self.average_gbps(),
            retransmitted_bytes: self.retransmitted_bytes,
            checksum_failures: self.checksum_failures,
            batches: &self.batches,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// One-line human summary: `<job_id> <bytes> B in <elapsed> s = <rate> Gbps`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} B in {:.3} s = {:.3} Gbps",
            self.job_id, self.bytes_transferred, self.elapsed_s,
            self.average_gbps()
        )
    }
}
