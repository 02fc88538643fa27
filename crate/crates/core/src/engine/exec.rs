//! Job execution on the simulated clock.
//!
//! A job's batches are dealt to DTN pairs and at most `concurrency` run at
//! once; a pair starts its next batch only when the current one fully
//! verifies. The first batch is a probe and always runs alone: if it
//! completes with any checksum failure, the provisional escalation is
//! revoked and the remaining files are re-planned at the initial batch
//! size. Within a batch, files are dealt round-robin to `streams_per_batch`
//! lanes; each lane charges the per-file scheduling and metadata overhead,
//! then drives one flow per file. Checksum compute runs in FIFO pipelines
//! at each endpoint node at its hash rate, overlapping other files'
//! transfers but never a file's own.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::rng::{hash_u64s, unit_f64};
use crate::simnet::{FlowSpec, LogRecord, SimEvent, Simulation, TcpModelParams};
use crate::topology::Topology;

use super::{
    assign, plan_batches_from, BatchPlan, BatchTiming, EngineError, TransferJob, TransferReport,
};

/// Wall-clock floor for degenerate jobs (empty manifest), in seconds.
pub const SETUP_EPSILON_S: f64 = 1e-3;

const CORRUPTION_STREAM_TAG: u64 = 0xc0de_fa11;
const CORRUPTED_SEED_TAG: u64 = 0x0bad_beef;

/// Simulation context for one job.
#[derive(Debug, Clone, Default)]
pub struct SimConfig {
    pub tcp: TcpModelParams,
    /// Long-lived memory-to-memory flows (src_node, dst_node) competing
    /// with the job for bandwidth.
    pub background_flows: Vec<(String, String)>,
}

/// What actually arrived for one manifest entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveredFile {
    pub path: String,
    pub size_bytes: u64,
    pub content_seed: u64,
    /// Seed of the bytes that landed; differs from `content_seed` when the
    /// delivery was corrupted and went undetected (checksums off).
    pub delivered_seed: u64,
    pub attempts: u32,
}

#[derive(Debug)]
pub struct ExecuteOutcome {
    pub report: TransferReport,
    pub delivered: Vec<DeliveredFile>,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone, Copy)]
struct FileJob {
    batch: usize,
    lane: usize,
    entry: usize,
    attempt: u32,
    corrupted: bool,
}

#[derive(Debug)]
struct Lane {
    queue: VecDeque<(usize, u32)>,
    current: Option<(usize, u32)>,
}

#[derive(Debug)]
struct ActiveBatch {
    src_node: usize,
    dst_node: usize,
    lanes: Vec<Lane>,
    outstanding: usize,
    clean: bool,
    started_s: f64,
    per_file_overhead: f64,
}

#[derive(Debug)]
enum Pending {
    LaneReady { batch: usize, lane: usize },
    SrcHashDone(FileJob),
    DstHashDone(FileJob),
}

struct Exec<'t> {
    topo: &'t Topology,
    job: &'t TransferJob,
    sim: Simulation<'t>,
    plan: Vec<BatchPlan>,
    assignments: Vec<(String, String)>,
    src_nodes: Vec<String>,
    dst_nodes: Vec<String>,
    active: BTreeMap<usize, ActiveBatch>,
    done: BTreeSet<usize>,
    busy_pairs: BTreeSet<(String, String)>,
    gate_open: bool,
    tokens: BTreeMap<u64, Pending>,
    next_token: u64,
    flow_files: BTreeMap<String, FileJob>,
    hash_free: BTreeMap<usize, f64>,
    timings: BTreeMap<usize, BatchTiming>,
    delivered: Vec<DeliveredFile>,
    checksum_failures: u64,
    retransmitted_bytes: u64,
}

/// Runs a transfer job to completion and reports goodput, retransmissions,
/// verification failures, and per-batch timings.
pub fn execute(
    job: &TransferJob,
    topo: &Topology,
    sim_cfg: &SimConfig,
) -> Result<ExecuteOutcome, EngineError> {
    job.policy.validate()?;
    if !(0.0..1.0).contains(&job.corruption_probability) {
        return Err(EngineError::InvalidPolicy(format!(
            "corruption_probability {} must be in [0, 1)",
            job.corruption_probability
        )));
    }
    for site in [&job.src_site, &job.dst_site] {
        if topo.site_idx(site).is_none() {
            return Err(EngineError::UnknownSite(site.clone()));
        }
    }
    let src_nodes: Vec<String> = topo
        .nodes_of_site(&job.src_site)?
        .iter()
        .map(|n| n.id.clone())
        .collect();
    let dst_nodes: Vec<String> = topo
        .nodes_of_site(&job.dst_site)?
        .iter()
        .map(|n| n.id.clone())
        .collect();
    if src_nodes.is_empty() {
        return Err(EngineError::EmptyCluster(job.src_site.clone()));
    }
    if dst_nodes.is_empty() {
        return Err(EngineError::EmptyCluster(job.dst_site.clone()));
    }

    if job.manifest.is_empty() {
        return Ok(ExecuteOutcome {
            report: TransferReport {
                job_id: job.id.clone(),
                bytes_transferred: 0,
                elapsed_s: SETUP_EPSILON_S,
                average_rate_bits_per_s: 0.0,
                retransmitted_bytes: 0,
                checksum_failures: 0,
                batches: Vec::new(),
            },
            delivered: Vec::new(),
            log: Vec::new(),
        });
    }

    let mut sim = Simulation::new(topo, sim_cfg.tcp.clone(), job.seed)?;
    for (i, (src, dst)) in sim_cfg.background_flows.iter().enumerate() {
        sim.start_background_flow(&FlowSpec {
            id: format!("bg{i:04}"),
            src_node: src.clone(),
            dst_node: dst.clone(),
            bytes: 0.0,
            use_fs: false,
        })?;
    }

    let plan = super::plan_batches(&job.manifest, &job.policy);
    let assignments = assign(&plan, &src_nodes, &dst_nodes, job.seed);

    let exec = Exec {
        topo,
        job,
        sim,
        plan,
        assignments,
        src_nodes,
        dst_nodes,
        active: BTreeMap::new(),
        done: BTreeSet::new(),
        busy_pairs: BTreeSet::new(),
        gate_open: false,
        tokens: BTreeMap::new(),
        next_token: 0,
        flow_files: BTreeMap::new(),
        hash_free: BTreeMap::new(),
        timings: BTreeMap::new(),
        delivered: Vec::new(),
        checksum_failures: 0,
        retransmitted_bytes: 0,
    };
    exec.run()
}

impl<'t> Exec<'t> {
    fn run(mut self) -> Result<ExecuteOutcome, EngineError> {
        self.start_ready_batches()?;
        while self.done.len() < self.plan.len() {
            match self.sim.step()? {
                Some(SimEvent::Timer { token, .. }) => {
                    let pending = self.tokens.remove(&token).expect("token registered");
                    match pending {
                        Pending::LaneReady { batch, lane } => self.lane_ready(batch, lane)?,
                        Pending::SrcHashDone(fj) => self.src_hash_done(fj),
                        Pending::DstHashDone(fj) => self.dst_hash_done(fj)?,
                    }
                }
                Some(SimEvent::FlowFinished { flow_id, .. }) => self.flow_finished(&flow_id)?,
                None => {
                    // Events drained with batches still pending would be a
                    // scheduling bug; surface it as a stall.
                    let batch_id = self
                        .plan
                        .iter()
                        .enumerate()
                        .find(|(i, _)| !self.done.contains(i))
                        .map(|(_, b)| b.id.clone())
                        .unwrap_or_default();
                    return Err(EngineError::Sim(crate::simnet::SimError::Stall {
                        flow_id: batch_id,
                    }));
                }
            }
        }

        let elapsed = self.sim.now().max(SETUP_EPSILON_S);
        let bytes: u64 = self.job.manifest.entries.iter().map(|e| e.size_bytes).sum();
        self.sim
            .note("job_done", &self.job.id, format!("bytes={bytes}"));
        let report = TransferReport {
            job_id: self.job.id.clone(),
            bytes_transferred: bytes,
            elapsed_s: elapsed,
            average_rate_bits_per_s: bytes as f64 * 8.0 / elapsed,
            retransmitted_bytes: self.retransmitted_bytes,
            checksum_failures: self.checksum_failures,
            batches: self.timings.into_values().collect(),
        };
        Ok(ExecuteOutcome {
            report,
            delivered: self.delivered,
            log: self.sim.into_log(),
        })
    }

    fn schedule(&mut self, at: f64, pending: Pending) {
        let token = self.next_token;
        self.next_token += 1;
        self.tokens.insert(token, pending);
        self.sim.schedule_timer(at, token);
    }

    /// Starts every batch that may run now: the probe batch gates the rest,
    /// a pair serves one batch at a time, and at most `concurrency` batches
    /// are in flight.
    fn start_ready_batches(&mut self) -> Result<(), EngineError> {
        for idx in 0..self.plan.len() {
            if self.active.len() >= self.job.policy.concurrency {
                break;
            }
            if self.done.contains(&idx) || self.active.contains_key(&idx) {
                continue;
            }
            if idx != 0 && !self.gate_open {
                continue;
            }
            if self.busy_pairs.contains(&self.assignments[idx]) {
                continue;
            }
            self.start_batch(idx)?;
        }
        Ok(())
    }

    fn start_batch(&mut self, idx: usize) -> Result<(), EngineError> {
        let batch_id = self.plan[idx].id.clone();
        let file_range = self.plan[idx].file_range.clone();
        let files = file_range.len();
        let (src_id, dst_id) = self.assignments[idx].clone();
        let src_node = self.topo.node_idx(&src_id).expect("assigned node exists");
        let dst_node = self.topo.node_idx(&dst_id).expect("assigned node exists");
        let src = &self.topo.nodes[src_node];
        let dst = &self.topo.nodes[dst_node];
        let per_file_overhead = self.job.policy.per_file_overhead
            + self.topo.preset_of(src).metadata_op_latency
            + self.topo.preset_of(dst).metadata_op_latency
            + self.topo.site_of(src).integration_file_latency_s
            + self.topo.site_of(dst).integration_file_latency_s;

        let lane_count = self.job.policy.streams_per_batch.min(files).max(1);
        let mut lanes: Vec<Lane> = (0..lane_count)
            .map(|_| Lane {
                queue: VecDeque::new(),
                current: None,
            })
            .collect();
        for (i, entry) in file_range.enumerate() {
            lanes[i % lane_count].queue.push_back((entry, 0));
        }

        self.sim.note(
            "batch_start",
            &batch_id,
            format!("files={files} src={src_id} dst={dst_id}"),
        );
        self.busy_pairs.insert((src_id, dst_id));
        self.active.insert(
            idx,
            ActiveBatch {
                src_node,
                dst_node,
                lanes,
                outstanding: files,
                clean: true,
                started_s: self.sim.now(),
                per_file_overhead,
            },
        );
        for lane in 0..lane_count {
            self.begin_next_file(idx, lane);
        }
        Ok(())
    }

    /// Pops the lane's next file and charges its scheduling overhead.
    fn begin_next_file(&mut self, batch: usize, lane: usize) {
        let now = self.sim.now();
        let state = self.active.get_mut(&batch).expect("batch active");
        let Some(next) = state.lanes[lane].queue.pop_front() else {
            return;
        };
        state.lanes[lane].current = Some(next);
        let at = now + state.per_file_overhead;
        self.schedule(at, Pending::LaneReady { batch, lane });
    }

    fn lane_ready(&mut self, batch: usize, lane: usize) -> Result<(), EngineError> {
        let (entry, attempt) = self.active[&batch].lanes[lane]
            .current
            .expect("lane has a file");
        let size = self.job.manifest.entries[entry].size_bytes;
        let src_node = self.topo.nodes[self.active[&batch].src_node].id.clone();
        let dst_node = self.topo.nodes[self.active[&batch].dst_node].id.clone();
        let flow_id = format!("{}/b{batch:06}/l{lane}/f{entry:08}/a{attempt}", self.job.id);
        self.flow_files.insert(
            flow_id.clone(),
            FileJob {
                batch,
                lane,
                entry,
                attempt,
                corrupted: false,
            },
        );
        self.sim.start_flow(&FlowSpec {
            id: flow_id,
            src_node,
            dst_node,
            bytes: size as f64,
            use_fs: true,
        })?;
        Ok(())
    }

    fn flow_finished(&mut self, flow_id: &str) -> Result<(), EngineError> {
        let mut fj = self.flow_files.remove(flow_id).expect("flow registered");
        let now = self.sim.now();
        fj.corrupted = self.draw_corruption(fj.entry, fj.attempt);

        // Free the lane for the next file; this file's verification
        // continues in the hash pipelines.
        {
            let state = self.active.get_mut(&fj.batch).expect("batch active");
            state.lanes[fj.lane].current = None;
        }
        self.begin_next_file(fj.batch, fj.lane);

        if self.job.policy.checksum_enabled {
            let src_node = self.active[&fj.batch].src_node;
            let size = self.job.manifest.entries[fj.entry].size_bytes as f64;
            let rate = self.topo.nodes[src_node].cpu_hash_rate;
            let free = self.hash_free.get(&src_node).copied().unwrap_or(0.0);
            let done = free.max(now) + size / rate;
            self.hash_free.insert(src_node, done);
            self.schedule(done, Pending::SrcHashDone(fj));
        } else {
            self.deliver(fj)?;
        }
        Ok(())
    }

    fn src_hash_done(&mut self, fj: FileJob) {
        let now = self.sim.now();
        let dst_node = self.active[&fj.batch].dst_node;
        let size = self.job.manifest.entries[fj.entry].size_bytes as f64;
        let rate = self.topo.nodes[dst_node].cpu_hash_rate;
        let free = self.hash_free.get(&dst_node).copied().unwrap_or(0.0);
        let done = free.max(now) + size / rate;
        self.hash_free.insert(dst_node, done);
        self.schedule(done, Pending::DstHashDone(fj));
    }

    fn dst_hash_done(&mut self, fj: FileJob) -> Result<(), EngineError> {
        if !fj.corrupted {
            return self.deliver(fj);
        }
        let (path, size) = {
            let entry = &self.job.manifest.entries[fj.entry];
            (entry.path.clone(), entry.size_bytes)
        };
        self.checksum_failures += 1;
        self.retransmitted_bytes += size;
        self.sim.note(
            "file_retry",
            &path,
            format!("attempt={} batch=b{:06}", fj.attempt + 1, fj.batch),
        );
        if fj.attempt >= self.job.policy.max_retries_per_file {
            return Err(EngineError::RetriesExhausted {
                path,
                attempts: fj.attempt + 1,
            });
        }
        let state = self.active.get_mut(&fj.batch).expect("batch active");
        state.clean = false;
        state.lanes[fj.lane].queue.push_back((fj.entry, fj.attempt + 1));
        if state.lanes[fj.lane].current.is_none() {
            self.begin_next_file(fj.batch, fj.lane);
        }
        Ok(())
    }

    /// Records the file as delivered and completes the batch when it was
    /// the last outstanding verification.
    fn deliver(&mut self, fj: FileJob) -> Result<(), EngineError> {
        let entry = &self.job.manifest.entries[fj.entry];
        let delivered_seed = if fj.corrupted {
            // Undetected corruption (checksums off): wrong bytes land.
            hash_u64s(&[entry.content_seed, CORRUPTED_SEED_TAG, fj.attempt as u64])
        } else {
            entry.content_seed
        };
        self.delivered.push(DeliveredFile {
            path: entry.path.clone(),
            size_bytes: entry.size_bytes,
            content_seed: entry.content_seed,
            delivered_seed,
            attempts: fj.attempt + 1,
        });
        let state = self.active.get_mut(&fj.batch).expect("batch active");
        state.outstanding -= 1;
        if state.outstanding == 0 {
            self.complete_batch(fj.batch)?;
        }
        Ok(())
    }

    fn complete_batch(&mut self, idx: usize) -> Result<(), EngineError> {
        let state = self.active.remove(&idx).expect("batch active");
        let (batch_id, files, bytes) = {
            let batch = &self.plan[idx];
            let bytes: u64 = batch
                .file_range
                .clone()
                .map(|e| self.job.manifest.entries[e].size_bytes)
                .sum();
            (batch.id.clone(), batch.len(), bytes)
        };
        self.sim.note(
            "batch_done",
            &batch_id,
            format!("files={files} clean={}", state.clean),
        );
        self.timings.insert(
            idx,
            BatchTiming {
                id: batch_id,
                files,
                bytes,
                start_s: state.started_s,
                end_s: self.sim.now(),
            },
        );
        self.busy_pairs.remove(&self.assignments[idx]);
        self.done.insert(idx);

        if idx == 0 {
            self.gate_open = true;
            let escalation_planned =
                self.job.policy.escalated_batch_files > self.job.policy.initial_batch_files;
            if !state.clean && escalation_planned && self.plan.len() > 1 {
                self.revoke_escalation();
            }
        }
        self.start_ready_batches()
    }

    /// Re-plans everything after the probe batch at the initial batch size
    /// and re-deals the assignments. Nothing beyond the probe batch has
    /// started (it gates them), so the rewrite is safe.
    fn revoke_escalation(&mut self) {
        let total = self.job.manifest.entries.len();
        let probe = self.plan[0].clone();
        let fixed_policy = super::TransferPolicy {
            escalated_batch_files: self.job.policy.initial_batch_files,
            ..self.job.policy.clone()
        };
        let mut plan = vec![probe.clone()];
        plan.extend(plan_batches_from(
            total,
            probe.file_range.end,
            self.job.policy.initial_batch_files,
            &fixed_policy,
        ));
        for (i, b) in plan.iter_mut().enumerate() {
            b.id = format!("b{i:06}");
        }
        self.sim.note(
            "plan_revoked",
            &self.job.id,
            format!("batches={}", plan.len()),
        );
        self.assignments = assign(&plan, &self.src_nodes, &self.dst_nodes, self.job.seed);
        self.plan = plan;
    }

    /// Keyed per-(file, attempt) Bernoulli draw; independent of event
    /// interleaving.
    fn draw_corruption(&self, entry: usize, attempt: u32) -> bool {
        if self.job.corruption_probability <= 0.0 {
            return false;
        }
        let v = hash_u64s(&[
            self.job.seed,
            CORRUPTION_STREAM_TAG,
            entry as u64,
            attempt as u64,
        ]);
        unit_f64(v) < self.job.corruption_probability
    }
}
