//! Deterministic fluid network simulator.
//!
//! Active flows receive max-min fair bandwidth shares computed by
//! progressive filling over the resources they traverse (WAN links per
//! direction, endpoint WAN interfaces, per-node filesystem throughput,
//! and any site-level chained-rate cap). Each flow is additionally capped
//! by its TCP window over the path RTT and by the loss-response rate for
//! the path's packet loss. Rates change only at flow start/finish events.

mod sim;

pub use sim::{log_to_text, LogRecord, RunOutcome, SimEvent, Simulation};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("invalid tcp model params: {0}")]
    InvalidParams(String),
    #[error("simulation stalled: flow '{flow_id}' is active at zero rate with no pending event")]
    Stall { flow_id: String },
}

/// TCP behavior knobs: segment size, the loss-response constant, and a
/// baseline per-path loss probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TcpModelParams {
    /// Payload-equivalent segment size in bytes.
    pub mss: f64,
    pub mathis_constant: f64,
    pub base_loss_rate: f64,
}

impl Default for TcpModelParams {
    fn default() -> Self {
        Self {
            mss: 1500.0,
            mathis_constant: 1.22,
            base_loss_rate: 0.0,
        }
    }
}

impl TcpModelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.mss.is_finite() || self.mss <= 0.0 {
            return Err(SimError::InvalidParams("mss must be positive".into()));
        }
        if !self.mathis_constant.is_finite() || self.mathis_constant <= 0.0 {
            return Err(SimError::InvalidParams(
                "mathis_constant must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.base_loss_rate) {
            return Err(SimError::InvalidParams(
                "base_loss_rate must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Buffer needed to absorb a speed-mismatch burst: one bandwidth-delay
/// product of the slow side, in bytes.
pub fn required_buffer(rtt: f64, egress_capacity: f64) -> f64 {
    rtt * egress_capacity / 8.0
}

/// Loss fraction when `arrival_rate` feeds an egress port of
/// `egress_capacity` with `egress_buffer` bytes of port buffering, under a
/// fluid tail-drop model: no overload means no loss; a buffer of at least
/// one BDP of the slow side absorbs the burst; otherwise the excess
/// fraction `(arrival - egress) / arrival` is dropped.
pub fn mismatch_loss_rate(
    arrival_rate: f64,
    egress_capacity: f64,
    egress_buffer: f64,
    rtt: f64,
) -> f64 {
    debug_assert!(egress_capacity > 0.0);
    if arrival_rate <= egress_capacity {
        return 0.0;
    }
    if egress_buffer >= required_buffer(rtt, egress_capacity) {
        return 0.0;
    }
    (arrival_rate - egress_capacity) / arrival_rate
}

/// Steady-state rate of a loss-limited TCP stream (bits/s):
/// `mathis_constant * (mss * 8 / rtt) / sqrt(loss)`. Unbounded when the
/// path is lossless or the RTT is zero.
pub fn loss_response_rate(params: &TcpModelParams, rtt: f64, loss: f64) -> f64 {
    if loss <= 0.0 || rtt <= 0.0 {
        return f64::INFINITY;
    }
    params.mathis_constant * (params.mss * 8.0 / rtt) / loss.sqrt()
}

/// One shared capacity in the allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResourceId {
    /// Per-node filesystem throughput (chained transfers only).
    Fs(usize),
    /// A WAN interface of a node; index 0 is the primary.
    Iface(usize, usize),
    /// A link traversed in one direction.
    LinkDir(usize, bool),
    /// Site-level cap on chained (filesystem + WAN) flows.
    SiteChain(usize),
    /// Node-internal memory-to-memory path.
    Loopback(usize),
}

/// A stream to simulate: who talks to whom, how many bytes, and whether
/// the filesystem stage is part of the pipeline (component tests bypass it).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: String,
    pub src_node: String,
    pub dst_node: String,
    pub bytes: f64,
    pub use_fs: bool,
}

/// Flow with resolved path resources and per-flow rate cap.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedFlow {
    pub id: String,
    pub resources: Vec<ResourceId>,
    /// min(window rate, loss-response rate); may be infinite.
    pub rate_cap: f64,
}

/// Max-min fair rates at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub rates: BTreeMap<String, f64>,
    pub timestamp: f64,
}

pub(crate) fn resource_capacity(topo: &Topology, rid: ResourceId) -> f64 {
    match rid {
        ResourceId::Fs(node) => {
            let n = &topo.nodes[node];
            topo.preset_of(n).effective_fs_throughput * 8.0
        }
        ResourceId::Iface(node, idx) => topo.nodes[node].wan_iface_speed_at(idx),
        ResourceId::LinkDir(link, _) => topo.links[link].capacity,
        ResourceId::SiteChain(site) => topo.sites[site]
            .integration_cap_bps
            .expect("SiteChain resource only exists for capped sites"),
        ResourceId::Loopback(node) => topo.nodes[node].wan_iface_speed,
    }
}

/// Resolves a flow spec against the topology: picks WAN interfaces (complex
/// nodes choose uniformly from the seeded stream), walks the static route,
/// derives speed-mismatch loss from the segment speed chain, and computes
/// the per-flow rate cap.
pub(crate) fn resolve_flow(
    spec: &FlowSpec,
    topo: &Topology,
    params: &TcpModelParams,
    rng: &mut SplitMix64,
) -> Result<ResolvedFlow, SimError> {
    let src_idx = topo
        .node_idx(&spec.src_node)
        .ok_or_else(|| SimError::UnknownNode(spec.src_node.clone()))?;
    let dst_idx = topo
        .node_idx(&spec.dst_node)
        .ok_or_else(|| SimError::UnknownNode(spec.dst_node.clone()))?;
    let src = &topo.nodes[src_idx];
    let dst = &topo.nodes[dst_idx];

    if src_idx == dst_idx {
        return Ok(ResolvedFlow {
            id: spec.id.clone(),
            resources: vec![ResourceId::Loopback(src_idx)],
            rate_cap: f64::INFINITY,
        });
    }

    let pick_iface = |node: &crate::topology::DtnNode, rng: &mut SplitMix64| -> usize {
        if node.is_simple() {
            0
        } else {
            rng.next_below(node.wan_iface_count() as u64) as usize
        }
    };
    // Draw order is fixed: source first, then destination.
    let src_iface = pick_iface(src, rng);
    let dst_iface = pick_iface(dst, rng);

    let hops = topo.route_hops(src.site_idx, dst.site_idx)?;
    let rtt: f64 = hops
        .iter()
        .map(|h| topo.links[h.link_idx].rtt_contribution)
        .sum();

    // Segment speed chain: src interface, links in path order, dst interface.
    // A transition into a slower segment drops at the port feeding it; the
    // buffer at that port belongs to the upstream link when there is one,
    // otherwise to the downstream link. Adjacent interfaces (intra-site
    // paths) are assumed adequately buffered.
    #[derive(Clone, Copy)]
    enum Segment {
        Iface(f64),
        Link(usize),
    }
    let mut segments = Vec::with_capacity(hops.len() + 2);
    segments.push(Segment::Iface(src.wan_iface_speed_at(src_iface)));
    for h in hops {
        segments.push(Segment::Link(h.link_idx));
    }
    segments.push(Segment::Iface(dst.wan_iface_speed_at(dst_iface)));

    let seg_capacity = |s: &Segment| match s {
        Segment::Iface(speed) => *speed,
        Segment::Link(idx) => topo.links[*idx].capacity,
    };
    let mut survival = 1.0 - params.base_loss_rate;
    for pair in segments.windows(2) {
        let upstream = seg_capacity(&pair[0]);
        let downstream = seg_capacity(&pair[1]);
        let buffer = match (&pair[0], &pair[1]) {
            (Segment::Link(idx), _) => topo.links[*idx].egress_buffer,
            (_, Segment::Link(idx)) => topo.links[*idx].egress_buffer,
            (Segment::Iface(_), Segment::Iface(_)) => f64::INFINITY,
        };
        survival *= 1.0 - mismatch_loss_rate(upstream, downstream, buffer, rtt);
    }
    let path_loss = 1.0 - survival;

    let mut resources = Vec::with_capacity(hops.len() + 6);
    if spec.use_fs {
        resources.push(ResourceId::Fs(src_idx));
        if topo.sites[src.site_idx].integration_cap_bps.is_some() {
            resources.push(ResourceId::SiteChain(src.site_idx));
        }
    }
    resources.push(ResourceId::Iface(src_idx, src_iface));
    for h in hops {
        resources.push(ResourceId::LinkDir(h.link_idx, h.forward));
    }
    resources.push(ResourceId::Iface(dst_idx, dst_iface));
    if spec.use_fs {
        if topo.sites[dst.site_idx].integration_cap_bps.is_some() {
            resources.push(ResourceId::SiteChain(dst.site_idx));
        }
        resources.push(ResourceId::Fs(dst_idx));
    }
    resources.sort();
    resources.dedup();

    let window = src.tcp_window_limit.min(dst.tcp_window_limit);
    let window_rate = if rtt > 0.0 {
        window * 8.0 / rtt
    } else {
        f64::INFINITY
    };
    let loss_rate = loss_response_rate(params, rtt, path_loss);

    Ok(ResolvedFlow {
        id: spec.id.clone(),
        resources,
        rate_cap: window_rate.min(loss_rate),
    })
}

/// Progressive filling: all unfrozen flows rise together; each step is the
/// largest raise before some resource saturates or some flow hits its cap.
/// Flows with indices in `members[i]` share `capacities[j]`. Deterministic
/// given input order; callers order flows lexicographically by id.
pub fn progressive_fill(capacities: &[f64], members: &[Vec<usize>], caps: &[f64]) -> Vec<f64> {
    let n = members.len();
    let mut rates = vec![0.0f64; n];
    let mut frozen = vec![false; n];
    let mut usage = vec![0.0f64; capacities.len()];
    let mut crossing: Vec<usize> = vec![0; capacities.len()];

    loop {
        for c in crossing.iter_mut() {
            *c = 0;
        }
        let mut unfrozen = 0usize;
        for f in 0..n {
            if !frozen[f] {
                unfrozen += 1;
                for &r in &members[f] {
                    crossing[r] += 1;
                }
            }
        }
        if unfrozen == 0 {
            break;
        }

        let mut step = f64::INFINITY;
        for (r, &cap) in capacities.iter().enumerate() {
            if crossing[r] > 0 {
                let headroom = (cap - usage[r]).max(0.0);
                step = step.min(headroom / crossing[r] as f64);
            }
        }
        for f in 0..n {
            if !frozen[f] && caps[f].is_finite() {
                step = step.min(caps[f] - rates[f]);
            }
        }

        if step.is_infinite() {
            // No shared resource and no finite cap bounds these flows.
            for f in 0..n {
                if !frozen[f] {
                    rates[f] = caps[f];
                    frozen[f] = true;
                }
            }
            break;
        }
        let step = step.max(0.0);

        for f in 0..n {
            if !frozen[f] {
                rates[f] += step;
                for &r in &members[f] {
                    usage[r] += step;
                }
            }
        }

        // Freeze flows at their cap or crossing a saturated resource.
        let mut progressed = false;
        for f in 0..n {
            if frozen[f] {
                continue;
            }
            let at_cap = caps[f].is_finite() && rates[f] >= caps[f] - caps[f].abs() * 1e-12;
            let saturated = members[f].iter().any(|&r| {
                usage[r] >= capacities[r] - capacities[r].abs() * 1e-12
            });
            if at_cap || saturated {
                frozen[f] = true;
                progressed = true;
            }
        }
        if !progressed {
            // Numeric guard: freeze the lowest-index unfrozen flow.
            if let Some(f) = (0..n).find(|&f| !frozen[f]) {
                frozen[f] = true;
            }
        }
    }
    rates
}

pub(crate) fn fill_resolved(
    flows: &[&ResolvedFlow],
    topo: &Topology,
) -> BTreeMap<String, f64> {
    let mut resource_ids: Vec<ResourceId> = flows
        .iter()
        .flat_map(|f| f.resources.iter().copied())
        .collect();
    resource_ids.sort();
    resource_ids.dedup();
    let index: BTreeMap<ResourceId, usize> = resource_ids
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i))
        .collect();
    let capacities: Vec<f64> = resource_ids
        .iter()
        .map(|&r| resource_capacity(topo, r))
        .collect();
    let members: Vec<Vec<usize>> = flows
        .iter()
        .map(|f| f.resources.iter().map(|r| index[r]).collect())
        .collect();
    let caps: Vec<f64> = flows.iter().map(|f| f.rate_cap).collect();
    let rates = progressive_fill(&capacities, &members, &caps);
    flows
        .iter()
        .zip(rates)
        .map(|(f, r)| (f.id.clone(), r))
        .collect()
}

/// Max-min fair allocation for a set of flows at one instant. Flows are
/// processed in lexicographic id order; complex-node interface choices are
/// drawn from the stream seeded by `seed`.
pub fn allocate(
    flows: &[FlowSpec],
    topo: &Topology,
    params: &TcpModelParams,
    seed: u64,
) -> Result<Allocation, SimError> {
    params.validate()?;
    let mut ordered: Vec<&FlowSpec> = flows.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = SplitMix64::new(seed);
    let resolved: Vec<ResolvedFlow> = ordered
        .iter()
        .map(|spec| resolve_flow(spec, topo, params, &mut rng))
        .collect::<Result<_, _>>()?;
    let refs: Vec<&ResolvedFlow> = resolved.iter().collect();
    Ok(Allocation {
        rates: fill_resolved(&refs, topo),
        timestamp: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::load_topology;
    use proptest::prelude::*;

    fn two_site_topology(
        capacity_bps: f64,
        rtt_s: f64,
        window_bytes: f64,
        egress_buffer: f64,
    ) -> Topology {
        let cfg = format!(
            r#"{{
              "sites": [{{"id":"A"}},{{"id":"B"}}],
              "presets": [{{"name":"std","effective_fs_throughput_Bps":1e12,"metadata_op_latency_s":0}}],
              "nodes": [
                {{"id":"a1","site":"A","wan_iface_speed_bps":{speed},"fs_iface_speed_bps":1e13,
                  "cpu_hash_rate_Bps":1e12,"tcp_window_limit_bytes":{window},"fs_tuning":"std"}},
                {{"id":"b1","site":"B","wan_iface_speed_bps":{speed},"fs_iface_speed_bps":1e13,
                  "cpu_hash_rate_Bps":1e12,"tcp_window_limit_bytes":{window},"fs_tuning":"std"}}
              ],
              "links": [{{"id":"ab","from":"A","to":"B","capacity_bps":{cap},
                          "rtt_contribution_s":{rtt},"egress_buffer_bytes":{buf}}}],
              "routes": [{{"src":"A","dst":"B","links":["ab"]}}]
            }}"#,
            speed = capacity_bps.max(100e9),
            cap = capacity_bps,
            rtt = rtt_s,
            window = window_bytes,
            buf = egress_buffer,
        );
        load_topology(&cfg).unwrap()
    }

    fn flow(id: &str, bytes: f64) -> FlowSpec {
        FlowSpec {
            id: id.into(),
            src_node: "a1".into(),
            dst_node: "b1".into(),
            bytes,
            use_fs: false,
        }
    }

    #[test]
    fn three_identical_flows_split_a_link_evenly() {
        let topo = two_site_topology(100e9, 0.0, 1e12, 1e12);
        let alloc = allocate(
            &[flow("f1", 1.0), flow("f2", 1.0), flow("f3", 1.0)],
            &topo,
            &TcpModelParams::default(),
            0,
        )
        .unwrap();
        for rate in alloc.rates.values() {
            assert!((rate - 100e9 / 3.0).abs() / (100e9 / 3.0) < 1e-9);
        }
    }

    #[test]
    fn window_over_rtt_caps_a_single_flow() {
        // 64 MB window over 50 ms on a lossless 100 Gb/s path: 10.24 Gb/s.
        let topo = two_site_topology(100e9, 0.050, 64e6, 1e12);
        let alloc = allocate(&[flow("f1", 1.0)], &topo, &TcpModelParams::default(), 0).unwrap();
        let rate = alloc.rates["f1"];
        assert!((rate - 10.24e9).abs() / 10.24e9 < 1e-9, "rate {rate}");
    }

    #[test]
    fn loss_response_caps_a_single_flow() {
        // mss 1500 B, rtt 50 ms, loss 1e-4: 1.22 * 240000 / 0.01 = 29.28 Mb/s.
        let topo = two_site_topology(100e9, 0.050, 1e12, 1e12);
        let params = TcpModelParams {
            base_loss_rate: 1e-4,
            ..TcpModelParams::default()
        };
        let alloc = allocate(&[flow("f1", 1.0)], &topo, &params, 0).unwrap();
        let rate = alloc.rates["f1"];
        assert!((rate - 29.28e6).abs() / 29.28e6 < 1e-9, "rate {rate}");
    }

    #[test]
    fn no_overload_means_no_loss() {
        assert_eq!(mismatch_loss_rate(10e9, 100e9, 0.0, 0.05), 0.0);
    }

    #[test]
    fn bufferless_overload_drops_the_excess_fraction() {
        let loss = mismatch_loss_rate(100e9, 10e9, 0.0, 0.05);
        assert!((loss - 0.9).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn one_bdp_of_buffering_absorbs_the_burst() {
        let rtt = 0.05;
        let egress = 10e9;
        let bdp = required_buffer(rtt, egress);
        assert_eq!(mismatch_loss_rate(100e9, egress, bdp, rtt), 0.0);
        assert!(mismatch_loss_rate(100e9, egress, bdp - 1.0, rtt) > 0.0);
    }

    #[test]
    fn empty_flow_set_allocates_nothing() {
        let topo = two_site_topology(100e9, 0.0, 1e12, 1e12);
        let alloc = allocate(&[], &topo, &TcpModelParams::default(), 0).unwrap();
        assert!(alloc.rates.is_empty());
    }

    #[test]
    fn speed_mismatch_flows_through_to_the_flow_cap() {
        // 100G sender interface into a 10G receiver interface with no
        // buffering at the feeding link: loss 0.9 tanks the flow cap.
        let cfg = r#"{
          "sites": [{"id":"A"},{"id":"B"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e12,"metadata_op_latency_s":0}],
          "nodes": [
            {"id":"a1","site":"A","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":1e13,
             "cpu_hash_rate_Bps":1e12,"tcp_window_limit_bytes":1e12,"fs_tuning":"std"},
            {"id":"b1","site":"B","wan_iface_speed_bps":10e9,"fs_iface_speed_bps":1e13,
             "cpu_hash_rate_Bps":1e12,"tcp_window_limit_bytes":1e12,"fs_tuning":"std"}
          ],
          "links": [{"id":"ab","from":"A","to":"B","capacity_bps":100e9,
                     "rtt_contribution_s":0.05,"egress_buffer_bytes":0}],
          "routes": [{"src":"A","dst":"B","links":["ab"]}]
        }"#;
        let topo = load_topology(cfg).unwrap();
        let alloc = allocate(&[flow("f1", 1.0)], &topo, &TcpModelParams::default(), 0).unwrap();
        // Loss-response rate at p = 0.9: 1.22 * (1500*8/0.05) / sqrt(0.9).
        let expected = 1.22 * (1500.0 * 8.0 / 0.05) / 0.9f64.sqrt();
        let rate = alloc.rates["f1"];
        assert!((rate - expected).abs() / expected < 1e-9, "rate {rate}");
    }

    #[test]
    fn capacity_conservation_and_cap_dominance_hold() {
        let topo = two_site_topology(40e9, 0.02, 32e6, 1e12);
        let flows: Vec<FlowSpec> = (0..5).map(|i| flow(&format!("f{i}"), 1.0)).collect();
        let alloc = allocate(&flows, &topo, &TcpModelParams::default(), 0).unwrap();
        let total: f64 = alloc.rates.values().sum();
        assert!(total <= 40e9 * (1.0 + 1e-9));
        let window_cap = 32e6 * 8.0 / 0.02;
        for rate in alloc.rates.values() {
            assert!(*rate <= window_cap * (1.0 + 1e-9));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn fill_respects_capacity_caps_and_maxmin(
            caps_seed in any::<u64>(),
            n_flows in 1usize..6,
            n_resources in 1usize..5,
        ) {
            let mut rng = crate::rng::SplitMix64::new(caps_seed);
            let capacities: Vec<f64> = (0..n_resources)
                .map(|_| 1e8 + rng.next_unit_f64() * 1e11)
                .collect();
            let members: Vec<Vec<usize>> = (0..n_flows)
                .map(|_| {
                    let count = 1 + rng.next_below(n_resources as u64) as usize;
                    let mut m: Vec<usize> = (0..n_resources).collect();
                    rng.shuffle(&mut m);
                    m.truncate(count);
                    m.sort_unstable();
                    m
                })
                .collect();
            let caps: Vec<f64> = (0..n_flows)
                .map(|_| {
                    if rng.next_unit_f64() < 0.5 {
                        1e7 + rng.next_unit_f64() * 2e10
                    } else {
                        f64::INFINITY
                    }
                })
                .collect();
            let rates = progressive_fill(&capacities, &members, &caps);

            // Capacity conservation.
            for (r, &cap) in capacities.iter().enumerate() {
                let used: f64 = (0..n_flows)
                    .filter(|&f| members[f].contains(&r))
                    .map(|f| rates[f])
                    .sum();
                prop_assert!(used <= cap * (1.0 + 1e-9));
            }
            // Cap dominance.
            for f in 0..n_flows {
                prop_assert!(rates[f] <= caps[f] * (1.0 + 1e-9) || caps[f].is_infinite());
            }
            // Max-min certificate: every flow below its cap crosses a
            // saturated resource on which it is (weakly) the largest.
            for f in 0..n_flows {
                if caps[f].is_finite() && rates[f] >= caps[f] * (1.0 - 1e-9) {
                    continue;
                }
                let has_bottleneck = members[f].iter().any(|&r| {
                    let used: f64 = (0..n_flows)
                        .filter(|&g| members[g].contains(&r))
                        .map(|g| rates[g])
                        .sum();
                    let saturated = used >= capacities[r] * (1.0 - 1e-9);
                    let largest = (0..n_flows)
                        .filter(|&g| members[g].contains(&r))
                        .all(|g| rates[g] <= rates[f] * (1.0 + 1e-9) + 1e-6);
                    saturated && largest
                });
                prop_assert!(has_bottleneck, "flow {f} lacks a bottleneck: {rates:?}");
            }
        }

        #[test]
        fn loss_is_monotone(
            arrival in 1e6f64..1e12,
            egress in 1e6f64..1e12,
            buffer in 0.0f64..1e9,
            rtt in 0.0f64..0.2,
        ) {
            let base = mismatch_loss_rate(arrival, egress, buffer, rtt);
            prop_assert!((0.0..1.0).contains(&base));
            let more_arrival = mismatch_loss_rate(arrival * 1.5, egress, buffer, rtt);
            prop_assert!(more_arrival >= base - 1e-15);
            let more_buffer = mismatch_loss_rate(arrival, egress, buffer * 2.0 + 1.0, rtt);
            prop_assert!(more_buffer <= base + 1e-15);
        }
    }
}
