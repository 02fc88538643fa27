//! Discrete-event loop over the fluid allocation model.
//!
//! The clock advances to the earliest of (a) the next scheduled timer and
//! (b) the earliest projected flow completion under current rates. Rates
//! are recomputed only when the active flow set changes. At equal times,
//! timers fire before flow completions; ties among timers break by
//! schedule order and among flows by lexicographic id.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::rng::SplitMix64;
use crate::topology::Topology;

use super::{
    fill_resolved, resolve_flow, Allocation, FlowSpec, ResolvedFlow, SimError, TcpModelParams,
};

/// One line of the exported event log:
/// `time_s TAB seq TAB event_kind TAB flow_id TAB detail`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub seq: u64,
    pub kind: String,
    pub flow_id: String,
    pub detail: String,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{:.9}\t{}\t{}\t{}\t{}",
            self.time, self.seq, self.kind, self.flow_id, self.detail
        )
    }
}

/// Renders a log as newline-delimited text with a stable field order.
pub fn log_to_text(log: &[LogRecord]) -> String {
    let mut out = String::new();
    for rec in log {
        out.push_str(&rec.to_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimEvent {
    FlowFinished { flow_id: String, time: f64 },
    Timer { token: u64, time: f64 },
}

#[derive(Debug)]
struct ActiveFlow {
    resolved: ResolvedFlow,
    remaining: f64,
    rate: f64,
    background: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TimerRec {
    time: f64,
    seq: u64,
    token: u64,
}

impl Eq for TimerRec {}

impl Ord for TimerRec {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for TimerRec {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A deterministic simulation run. One run owns all of its state; distinct
/// runs share nothing.
pub struct Simulation<'t> {
    topo: &'t Topology,
    params: TcpModelParams,
    rng: SplitMix64,
    now: f64,
    log_seq: u64,
    timer_seq: u64,
    // Active flows keyed by id; BTreeMap iteration gives the lexicographic
    // processing order the allocator requires.
    active: BTreeMap<String, ActiveFlow>,
    timers: BinaryHeap<Reverse<TimerRec>>,
    log: Vec<LogRecord>,
    rates_dirty: bool,
}

impl<'t> Simulation<'t> {
    pub fn new(topo: &'t Topology, params: TcpModelParams, seed: u64) -> Result<Self, SimError> {
        params.validate()?;
        Ok(Self {
            topo,
            params,
            rng: SplitMix64::new(seed),
            now: 0.0,
            log_seq: 0,
            timer_seq: 0,
            active: BTreeMap::new(),
            timers: BinaryHeap::new(),
            log: Vec::new(),
            rates_dirty: false,
        })
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<LogRecord> {
        self.log
    }

    pub fn active_flow_count(&self) -> usize {
        self.active.values().filter(|f| !f.background).count()
    }

    fn push_log(&mut self, kind: &str, flow_id: &str, detail: String) {
        let rec = LogRecord {
            time: self.now,
            seq: self.log_seq,
            kind: kind.to_string(),
            flow_id: flow_id.to_string(),
            detail,
        };
        self.log_seq += 1;
        self.log.push(rec);
    }

    /// Appends a caller-defined entry (batch lifecycle, retries, ...) to the
    /// shared, totally ordered log.
    pub fn note(&mut self, kind: &str, id: &str, detail: String) {
        self.push_log(kind, id, detail);
    }

    /// Starts a flow at the current time. Flow ids must be unique among
    /// active flows.
    pub fn start_flow(&mut self, spec: &FlowSpec) -> Result<(), SimError> {
        debug_assert!(!self.active.contains_key(&spec.id));
        let resolved = resolve_flow(spec, self.topo, &self.params, &mut self.rng)?;
        self.push_log("flow_start", &spec.id, format!("bytes={}", spec.bytes as u64));
        self.active.insert(
            spec.id.clone(),
            ActiveFlow {
                resolved,
                remaining: spec.bytes,
                rate: 0.0,
                background: false,
            },
        );
        self.rates_dirty = true;
        Ok(())
    }

    /// Starts a flow that never completes and only consumes bandwidth.
    pub fn start_background_flow(&mut self, spec: &FlowSpec) -> Result<(), SimError> {
        let resolved = resolve_flow(spec, self.topo, &self.params, &mut self.rng)?;
        self.push_log("flow_start", &spec.id, "bytes=background".to_string());
        self.active.insert(
            spec.id.clone(),
            ActiveFlow {
                resolved,
                remaining: f64::INFINITY,
                rate: 0.0,
                background: true,
            },
        );
        self.rates_dirty = true;
        Ok(())
    }

    pub fn schedule_timer(&mut self, at: f64, token: u64) {
        debug_assert!(at >= self.now);
        let rec = TimerRec {
            time: at.max(self.now),
            seq: self.timer_seq,
            token,
        };
        self.timer_seq += 1;
        self.timers.push(Reverse(rec));
    }

    fn reallocate(&mut self) {
        if self.active.is_empty() {
            self.rates_dirty = false;
            return;
        }
        let refs: Vec<&ResolvedFlow> = self.active.values().map(|f| &f.resolved).collect();
        let rates = fill_resolved(&refs, self.topo);
        for (id, flow) in self.active.iter_mut() {
            flow.rate = rates[id];
        }
        self.rates_dirty = false;
        self.push_log("realloc", "-", format!("flows={}", rates.len()));
    }

    /// Earliest projected completion among active foreground flows:
    /// (time, flow id), ties to the lexicographically smallest id.
    fn next_completion(&self) -> Option<(f64, &str)> {
        let mut best: Option<(f64, &str)> = None;
        for (id, flow) in &self.active {
            if flow.background {
                continue;
            }
            let t = if flow.remaining <= 0.0 {
                self.now
            } else if flow.rate > 0.0 {
                self.now + flow.remaining * 8.0 / flow.rate
            } else {
                continue;
            };
            match best {
                Some((bt, _)) if bt <= t => {}
                _ => best = Some((t, id.as_str())),
            }
        }
        best
    }

    fn advance_to(&mut self, t: f64) {
        let dt = t - self.now;
        if dt > 0.0 {
            for flow in self.active.values_mut() {
                if flow.remaining.is_finite() {
                    flow.remaining = (flow.remaining - flow.rate * dt / 8.0).max(0.0);
                }
            }
        }
        self.now = t;
    }

    /// Advances to the next event. Returns `Ok(None)` when nothing is
    /// pending; errs if foreground flows are active but can never finish.
    pub fn step(&mut self) -> Result<Option<SimEvent>, SimError> {
        if self.rates_dirty {
            self.reallocate();
        }
        let next_timer = self.timers.peek().map(|Reverse(t)| *t);
        let next_done = self.next_completion().map(|(t, id)| (t, id.to_string()));

        match (next_timer, next_done) {
            (None, None) => {
                if let Some((id, _)) = self
                    .active
                    .iter()
                    .find(|(_, f)| !f.background && f.remaining > 0.0)
                {
                    return Err(SimError::Stall {
                        flow_id: id.clone(),
                    });
                }
                Ok(None)
            }
            (Some(timer), done) => {
                let timer_first = match &done {
                    Some((t, _)) => timer.time <= *t,
                    None => true,
                };
                if timer_first {
                    self.timers.pop();
                    self.advance_to(timer.time);
                    Ok(Some(SimEvent::Timer {
                        token: timer.token,
                        time: timer.time,
                    }))
                } else {
                    let (t, id) = done.expect("checked above");
                    self.finish_flow(t, id)
                }
            }
            (None, Some((t, id))) => self.finish_flow(t, id),
        }
    }

    fn finish_flow(&mut self, t: f64, id: String) -> Result<Option<SimEvent>, SimError> {
        self.advance_to(t);
        let flow = self.active.remove(&id).expect("finishing flow is active");
        debug_assert!(flow.remaining <= 1e-6 * flow.rate.max(1.0));
        self.push_log("flow_finish", &id, "-".to_string());
        self.rates_dirty = true;
        Ok(Some(SimEvent::FlowFinished { flow_id: id, time: t }))
    }

    /// Time of the next pending event, if any. Recomputes rates first so
    /// completion projections are current.
    pub fn next_event_time(&mut self) -> Option<f64> {
        if self.rates_dirty {
            self.reallocate();
        }
        let timer = self.timers.peek().map(|Reverse(t)| t.time);
        let done = self.next_completion().map(|(t, _)| t);
        match (timer, done) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Current allocation snapshot.
    pub fn allocation(&mut self) -> Allocation {
        if self.rates_dirty {
            self.reallocate();
        }
        Allocation {
            rates: self
                .active
                .iter()
                .map(|(id, f)| (id.clone(), f.rate))
                .collect(),
            timestamp: self.now,
        }
    }
}

/// Outcome of a self-contained run: the event log, completion times by
/// flow id, and the clock at exit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub log: Vec<LogRecord>,
    pub completions: BTreeMap<String, f64>,
    pub end_time: f64,
}

impl<'t> Simulation<'t> {
    /// Runs a set of scheduled flow starts to completion or to `until`,
    /// whichever comes first.
    pub fn run(
        mut self,
        events: Vec<(f64, FlowSpec)>,
        until: f64,
    ) -> Result<RunOutcome, SimError> {
        let mut pending: BTreeMap<u64, FlowSpec> = BTreeMap::new();
        for (i, (at, spec)) in events.into_iter().enumerate() {
            debug_assert!(at >= 0.0);
            let token = i as u64;
            self.schedule_timer(at, token);
            pending.insert(token, spec);
        }
        let mut completions = BTreeMap::new();
        loop {
            if let Some(t) = self.next_event_time() {
                if t > until {
                    self.advance_to(until);
                    break;
                }
            }
            match self.step()? {
                None => break,
                Some(SimEvent::Timer { token, .. }) => {
                    if let Some(spec) = pending.remove(&token) {
                        self.start_flow(&spec)?;
                    }
                }
                Some(SimEvent::FlowFinished { flow_id, time }) => {
                    completions.insert(flow_id, time);
                }
            }
        }
        Ok(RunOutcome {
            log: self.log,
            completions,
            end_time: self.now,
        })
    }

    /// Test hook: injects an active zero-rate flow without touching the
    /// allocator, to exercise the stall guard.
    #[cfg(test)]
    fn inject_zero_rate_flow(&mut self, id: &str) {
        self.active.insert(
            id.to_string(),
            ActiveFlow {
                resolved: ResolvedFlow {
                    id: id.to_string(),
                    resources: Vec::new(),
                    rate_cap: 0.0,
                },
                remaining: 1.0,
                rate: 0.0,
                background: false,
            },
        );
        self.rates_dirty = false;
    }
}
