//! Sites, DTN clusters, tuning presets, links, and static routes, loaded
//! from a JSON config document and validated into an immutable graph.
//!
//! Rates are stored in bits/s except CPU hash rate and filesystem
//! throughput, which operators quote in bytes/s; the simulator converts.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid topology at {path}: {msg}")]
    Validate { path: String, msg: String },
    #[error("unknown site '{0}'")]
    UnknownSite(String),
    #[error("no route between '{src}' and '{dst}'")]
    Unreachable { src: String, dst: String },
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> TopologyError {
    TopologyError::Validate {
        path: path.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteConfig {
    id: String,
    /// Rate cap applied only to flows that chain the filesystem and WAN
    /// stages (i.e. real transfers, not component tests). Models a site
    /// whose pieces all pass isolated tests but underperform end to end.
    #[serde(default)]
    integration_cap_bps: Option<f64>,
    /// Extra per-file latency with the same chained-only scoping.
    #[serde(default)]
    integration_file_latency_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetConfig {
    name: String,
    #[serde(rename = "effective_fs_throughput_Bps")]
    effective_fs_throughput_bytes: f64,
    metadata_op_latency_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeConfig {
    id: String,
    site: String,
    wan_iface_speed_bps: f64,
    fs_iface_speed_bps: f64,
    #[serde(default)]
    extra_wan_iface_speeds_bps: Vec<f64>,
    #[serde(rename = "cpu_hash_rate_Bps")]
    cpu_hash_rate_bytes: f64,
    tcp_window_limit_bytes: f64,
    fs_tuning: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkConfig {
    id: String,
    from: String,
    to: String,
    capacity_bps: f64,
    rtt_contribution_s: f64,
    egress_buffer_bytes: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteConfig {
    src: String,
    dst: String,
    links: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyConfig {
    #[serde(default)]
    description: Option<String>,
    sites: Vec<SiteConfig>,
    presets: Vec<PresetConfig>,
    nodes: Vec<NodeConfig>,
    links: Vec<LinkConfig>,
    routes: Vec<RouteConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: String,
    pub integration_cap_bps: Option<f64>,
    pub integration_file_latency_s: f64,
}

/// Aggregate effect of filesystem client tuning: what the node can move
/// through its mount, and the per-file metadata cost.
#[derive(Debug, Clone, PartialEq)]
pub struct FsTuningPreset {
    pub name: String,
    /// bytes/s per node.
    pub effective_fs_throughput: f64,
    /// seconds per file operation.
    pub metadata_op_latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtnNode {
    pub id: String,
    pub site: String,
    pub wan_iface_speed: f64,
    pub fs_iface_speed: f64,
    /// Speeds of any extra WAN interfaces. Empty for the simple design.
    pub extra_wan_iface_speeds: Vec<f64>,
    /// bytes/s of checksum compute.
    pub cpu_hash_rate: f64,
    /// bytes.
    pub tcp_window_limit: f64,
    pub fs_tuning: String,
    pub(crate) site_idx: usize,
    pub(crate) preset_idx: usize,
}

impl DtnNode {
    pub fn extra_wan_ifaces(&self) -> usize {
        self.extra_wan_iface_speeds.len()
    }

    pub fn is_simple(&self) -> bool {
        self.extra_wan_iface_speeds.is_empty()
    }

    pub fn wan_iface_count(&self) -> usize {
        1 + self.extra_wan_iface_speeds.len()
    }

    /// Interface 0 is the primary; higher indices are the extras.
    pub fn wan_iface_speed_at(&self, idx: usize) -> f64 {
        if idx == 0 {
            self.wan_iface_speed
        } else {
            self.extra_wan_iface_speeds[idx - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub endpoints: (String, String),
    /// bits/s, per direction.
    pub capacity: f64,
    /// seconds added to the path round-trip time.
    pub rtt_contribution: f64,
    /// bytes of port buffering at the downstream end.
    pub egress_buffer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteHop {
    pub link_idx: usize,
    /// True when the link is traversed from `endpoints.0` to `endpoints.1`.
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub description: Option<String>,
    pub sites: Vec<Site>,
    pub presets: Vec<FsTuningPreset>,
    pub nodes: Vec<DtnNode>,
    pub links: Vec<Link>,
    routes: BTreeMap<(usize, usize), Vec<RouteHop>>,
    site_index: BTreeMap<String, usize>,
    node_index: BTreeMap<String, usize>,
    /// Node indices per site, sorted by node id.
    nodes_by_site: Vec<Vec<usize>>,
}

impl Topology {
    pub fn site_idx(&self, id: &str) -> Option<usize> {
        self.site_index.get(id).copied()
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&DtnNode> {
        self.node_idx(id).map(|i| &self.nodes[i])
    }

    pub fn preset_of(&self, node: &DtnNode) -> &FsTuningPreset {
        &self.presets[node.preset_idx]
    }

    pub fn site_of(&self, node: &DtnNode) -> &Site {
        &self.sites[node.site_idx]
    }

    /// Node ids of a site's cluster, sorted by id.
    pub fn nodes_of_site(&self, site: &str) -> Result<Vec<&DtnNode>, TopologyError> {
        let si = self
            .site_idx(site)
            .ok_or_else(|| TopologyError::UnknownSite(site.to_string()))?;
        Ok(self.nodes_by_site[si].iter().map(|&i| &self.nodes[i]).collect())
    }

    /// Ordered site pairs (src, dst), src != dst, in declaration order.
    pub fn site_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        for a in &self.sites {
            for b in &self.sites {
                if a.id != b.id {
                    pairs.push((a.id.clone(), b.id.clone()));
                }
            }
        }
        pairs
    }

    pub(crate) fn route_hops(
        &self,
        src_idx: usize,
        dst_idx: usize,
    ) -> Result<&[RouteHop], TopologyError> {
        if src_idx == dst_idx {
            return Ok(&[]);
        }
        self.routes
            .get(&(src_idx, dst_idx))
            .map(|v| v.as_slice())
            .ok_or_else(|| TopologyError::Unreachable {
                src: self.sites[src_idx].id.clone(),
                dst: self.sites[dst_idx].id.clone(),
            })
    }

    /// The fixed path between two sites and its total round-trip time.
    pub fn path_between(
        &self,
        src: &str,
        dst: &str,
    ) -> Result<(Vec<&Link>, f64), TopologyError> {
        let si = self
            .site_idx(src)
            .ok_or_else(|| TopologyError::UnknownSite(src.to_string()))?;
        let di = self
            .site_idx(dst)
            .ok_or_else(|| TopologyError::UnknownSite(dst.to_string()))?;
        let hops = self.route_hops(si, di)?;
        let links: Vec<&Link> = hops.iter().map(|h| &self.links[h.link_idx]).collect();
        let rtt = links.iter().map(|l| l.rtt_contribution).sum();
        Ok((links, rtt))
    }

    /// True when every node follows the simple single-WAN-interface design.
    pub fn all_simple(&self) -> bool {
        self.nodes.iter().all(DtnNode::is_simple)
    }
}

/// Parses and validates a topology config document.
pub fn load_topology(config_text: &str) -> Result<Topology, TopologyError> {
    let cfg: TopologyConfig = serde_json::from_str(config_text)?;

    let mut site_index = BTreeMap::new();
    for (i, s) in cfg.sites.iter().enumerate() {
        if site_index.insert(s.id.clone(), i).is_some() {
            return Err(invalid(format!("sites[{i}].id"), format!("duplicate site '{}'", s.id)));
        }
        if let Some(cap) = s.integration_cap_bps {
            if !cap.is_finite() || cap <= 0.0 {
                return Err(invalid(
                    format!("sites[{i}].integration_cap_bps"),
                    "must be positive and finite when present",
                ));
            }
        }
        if !s.integration_file_latency_s.is_finite() || s.integration_file_latency_s < 0.0 {
            return Err(invalid(
                format!("sites[{i}].integration_file_latency_s"),
                "must be non-negative and finite",
            ));
        }
    }

    let mut preset_index = BTreeMap::new();
    for (i, p) in cfg.presets.iter().enumerate() {
        if preset_index.insert(p.name.clone(), i).is_some() {
            return Err(invalid(
                format!("presets[{i}].name"),
                format!("duplicate preset '{}'", p.name),
            ));
        }
        if !p.effective_fs_throughput_bytes.is_finite() || p.effective_fs_throughput_bytes <= 0.0 {
            return Err(invalid(
                format!("presets[{i}].effective_fs_throughput_Bps"),
                "must be positive and finite",
            ));
        }
        if !p.metadata_op_latency_s.is_finite() || p.metadata_op_latency_s < 0.0 {
            return Err(invalid(
                format!("presets[{i}].metadata_op_latency_s"),
                "must be non-negative and finite",
            ));
        }
    }

    let mut node_index = BTreeMap::new();
    let mut nodes = Vec::with_capacity(cfg.nodes.len());
    for (i, n) in cfg.nodes.iter().enumerate() {
        if node_index.insert(n.id.clone(), i).is_some() {
            return Err(invalid(format!("nodes[{i}].id"), format!("duplicate node '{}'", n.id)));
        }
        let site_idx = *site_index
            .get(&n.site)
            .ok_or_else(|| invalid(format!("nodes[{i}].site"), format!("unknown site '{}'", n.site)))?;
        let preset_idx = *preset_index.get(&n.fs_tuning).ok_or_else(|| {
            invalid(
                format!("nodes[{i}].fs_tuning"),
                format!("unknown preset '{}'", n.fs_tuning),
            )
        })?;
        for (field, value) in [
            ("wan_iface_speed_bps", n.wan_iface_speed_bps),
            ("fs_iface_speed_bps", n.fs_iface_speed_bps),
            ("cpu_hash_rate_Bps", n.cpu_hash_rate_bytes),
            ("tcp_window_limit_bytes", n.tcp_window_limit_bytes),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(invalid(format!("nodes[{i}].{field}"), "must be positive"));
            }
        }
        for (j, &speed) in n.extra_wan_iface_speeds_bps.iter().enumerate() {
            if !speed.is_finite() || speed <= 0.0 {
                return Err(invalid(
                    format!("nodes[{i}].extra_wan_iface_speeds_bps[{j}]"),
                    "must be positive",
                ));
            }
        }
        let preset = &cfg.presets[preset_idx];
        if preset.effective_fs_throughput_bytes > n.fs_iface_speed_bps / 8.0 {
            return Err(invalid(
                format!("nodes[{i}]"),
                format!(
                    "node '{}': preset '{}' effective_fs_throughput {} B/s exceeds \
                     fs_iface_speed/8 = {} B/s",
                    n.id,
                    preset.name,
                    preset.effective_fs_throughput_bytes,
                    n.fs_iface_speed_bps / 8.0
                ),
            ));
        }
        nodes.push(DtnNode {
            id: n.id.clone(),
            site: n.site.clone(),
            wan_iface_speed: n.wan_iface_speed_bps,
            fs_iface_speed: n.fs_iface_speed_bps,
            extra_wan_iface_speeds: n.extra_wan_iface_speeds_bps.clone(),
            cpu_hash_rate: n.cpu_hash_rate_bytes,
            tcp_window_limit: n.tcp_window_limit_bytes,
            fs_tuning: n.fs_tuning.clone(),
            site_idx,
            preset_idx,
        });
    }

    let mut link_index = BTreeMap::new();
    for (i, l) in cfg.links.iter().enumerate() {
        if link_index.insert(l.id.clone(), i).is_some() {
            return Err(invalid(format!("links[{i}].id"), format!("duplicate link '{}'", l.id)));
        }
        if !l.capacity_bps.is_finite() || l.capacity_bps <= 0.0 {
            return Err(invalid(format!("links[{i}].capacity_bps"), "must be positive"));
        }
        if !l.rtt_contribution_s.is_finite() || l.rtt_contribution_s < 0.0 {
            return Err(invalid(
                format!("links[{i}].rtt_contribution_s"),
                "must be non-negative and finite",
            ));
        }
        if !l.egress_buffer_bytes.is_finite() || l.egress_buffer_bytes < 0.0 {
            return Err(invalid(
                format!("links[{i}].egress_buffer_bytes"),
                "must be non-negative and finite",
            ));
        }
    }

    // Resolve routes. Each declared route is a contiguous chain of links
    // from src to dst; the reverse direction is derived automatically and
    // an explicitly declared reverse must mirror it.
    let mut routes: BTreeMap<(usize, usize), Vec<RouteHop>> = BTreeMap::new();
    let mut declared: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, r) in cfg.routes.iter().enumerate() {
        let si = *site_index
            .get(&r.src)
            .ok_or_else(|| invalid(format!("routes[{i}].src"), format!("unknown site '{}'", r.src)))?;
        let di = *site_index
            .get(&r.dst)
            .ok_or_else(|| invalid(format!("routes[{i}].dst"), format!("unknown site '{}'", r.dst)))?;
        if si == di {
            return Err(invalid(format!("routes[{i}]"), "src and dst must differ"));
        }
        let mut hops = Vec::with_capacity(r.links.len());
        let mut at = r.src.clone();
        for (j, link_id) in r.links.iter().enumerate() {
            let li = *link_index.get(link_id).ok_or_else(|| {
                invalid(
                    format!("routes[{i}].links[{j}]"),
                    format!("unknown link '{link_id}'"),
                )
            })?;
            let link = &cfg.links[li];
            let forward = if link.from == at {
                true
            } else if link.to == at {
                false
            } else {
                return Err(invalid(
                    format!("routes[{i}].links[{j}]"),
                    format!("link '{link_id}' does not attach to '{at}'"),
                ));
            };
            at = if forward { link.to.clone() } else { link.from.clone() };
            hops.push(RouteHop { link_idx: li, forward });
        }
        if at != r.dst {
            return Err(invalid(
                format!("routes[{i}]"),
                format!("link chain ends at '{at}', not '{}'", r.dst),
            ));
        }
        if declared.insert((si, di), i).is_some() {
            return Err(invalid(
                format!("routes[{i}]"),
                format!("duplicate route {} -> {}", r.src, r.dst),
            ));
        }
        let reverse: Vec<RouteHop> = hops
            .iter()
            .rev()
            .map(|h| RouteHop {
                link_idx: h.link_idx,
                forward: !h.forward,
            })
            .collect();
        if let Some(existing) = routes.get(&(si, di)) {
            if *existing != hops {
                return Err(invalid(
                    format!("routes[{i}]"),
                    format!("route {} -> {} conflicts with the mirror of its reverse", r.src, r.dst),
                ));
            }
        }
        routes.insert((si, di), hops);
        if let Some(existing) = routes.get(&(di, si)) {
            if *existing != reverse && declared.contains_key(&(di, si)) {
                return Err(invalid(
                    format!("routes[{i}]"),
                    format!("route {} -> {} does not mirror the declared reverse", r.src, r.dst),
                ));
            }
        }
        routes.entry((di, si)).or_insert(reverse);
    }

    // Every site pair must be connected.
    for (si, a) in cfg.sites.iter().enumerate() {
        for (di, b) in cfg.sites.iter().enumerate() {
            if si != di && !routes.contains_key(&(si, di)) {
                return Err(invalid(
                    "routes",
                    format!("no route connects '{}' and '{}'", a.id, b.id),
                ));
            }
        }
    }

    let links = cfg
        .links
        .iter()
        .map(|l| Link {
            id: l.id.clone(),
            endpoints: (l.from.clone(), l.to.clone()),
            capacity: l.capacity_bps,
            rtt_contribution: l.rtt_contribution_s,
            egress_buffer: l.egress_buffer_bytes,
        })
        .collect();

    let sites: Vec<Site> = cfg
        .sites
        .iter()
        .map(|s| Site {
            id: s.id.clone(),
            integration_cap_bps: s.integration_cap_bps,
            integration_file_latency_s: s.integration_file_latency_s,
        })
        .collect();

    let mut nodes_by_site: Vec<Vec<usize>> = vec![Vec::new(); sites.len()];
    let mut by_id: Vec<usize> = (0..nodes.len()).collect();
    by_id.sort_by(|&a, &b| nodes[a].id.cmp(&nodes[b].id));
    for idx in by_id {
        nodes_by_site[nodes[idx].site_idx].push(idx);
    }

    Ok(Topology {
        description: cfg.description,
        sites,
        presets: cfg
            .presets
            .iter()
            .map(|p| FsTuningPreset {
                name: p.name.clone(),
                effective_fs_throughput: p.effective_fs_throughput_bytes,
                metadata_op_latency: p.metadata_op_latency_s,
            })
            .collect(),
        nodes,
        links,
        routes,
        site_index,
        node_index,
        nodes_by_site,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_site_config() -> String {
        // Star through a core vertex; 100 Gb/s everywhere.
        let mut links = String::new();
        let mut routes = String::new();
        for (i, s) in ["A", "B", "C", "D"].iter().enumerate() {
            if i > 0 {
                links.push(',');
            }
            links.push_str(&format!(
                r#"{{"id":"{s}-core","from":"{s}","to":"core","capacity_bps":100e9,
                    "rtt_contribution_s":0.01,"egress_buffer_bytes":1e9}}"#
            ));
        }
        let mut first = true;
        for a in ["A", "B", "C", "D"] {
            for b in ["A", "B", "C", "D"] {
                if a < b {
                    if !first {
                        routes.push(',');
                    }
                    first = false;
                    routes.push_str(&format!(
                        r#"{{"src":"{a}","dst":"{b}","links":["{a}-core","{b}-core"]}}"#
                    ));
                }
            }
        }
        format!(
            r#"{{
              "sites": [{{"id":"A"}},{{"id":"B"}},{{"id":"C"}},{{"id":"D"}}],
              "presets": [{{"name":"std","effective_fs_throughput_Bps":3e9,"metadata_op_latency_s":0.001}}],
              "nodes": [
                {{"id":"a1","site":"A","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":100e9,
                  "cpu_hash_rate_Bps":3e9,"tcp_window_limit_bytes":64e6,"fs_tuning":"std"}},
                {{"id":"b1","site":"B","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":100e9,
                  "cpu_hash_rate_Bps":3e9,"tcp_window_limit_bytes":64e6,"fs_tuning":"std"}},
                {{"id":"c1","site":"C","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":100e9,
                  "cpu_hash_rate_Bps":3e9,"tcp_window_limit_bytes":64e6,"fs_tuning":"std"}},
                {{"id":"d1","site":"D","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":100e9,
                  "cpu_hash_rate_Bps":3e9,"tcp_window_limit_bytes":64e6,"fs_tuning":"std"}}
              ],
              "links": [{links}],
              "routes": [{routes}]
            }}"#
        )
    }

    #[test]
    fn four_site_config_has_twelve_ordered_pairs() {
        let topo = load_topology(&four_site_config()).unwrap();
        assert_eq!(topo.site_pairs().len(), 12);
        assert!(topo.all_simple());
    }

    #[test]
    fn single_site_config_is_valid_with_no_pairs() {
        let cfg = r#"{
          "sites": [{"id":"A"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e9,"metadata_op_latency_s":0}],
          "nodes": [{"id":"a1","site":"A","wan_iface_speed_bps":10e9,"fs_iface_speed_bps":10e9,
                     "cpu_hash_rate_Bps":1e9,"tcp_window_limit_bytes":1e7,"fs_tuning":"std"}],
          "links": [],
          "routes": []
        }"#;
        let topo = load_topology(cfg).unwrap();
        assert!(topo.site_pairs().is_empty());
    }

    #[test]
    fn preset_exceeding_interface_speed_names_the_node() {
        // 20 GB/s preset on a 100 Gb/s (= 12.5 GB/s) filesystem interface.
        let cfg = r#"{
          "sites": [{"id":"A"}],
          "presets": [{"name":"hot","effective_fs_throughput_Bps":20e9,"metadata_op_latency_s":0}],
          "nodes": [{"id":"a1","site":"A","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":100e9,
                     "cpu_hash_rate_Bps":1e9,"tcp_window_limit_bytes":1e7,"fs_tuning":"hot"}],
          "links": [],
          "routes": []
        }"#;
        let err = load_topology(cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a1"), "error should name the node: {msg}");
        assert!(msg.contains("exceeds"), "{msg}");
    }

    #[test]
    fn rtt_is_additive_along_the_path() {
        let cfg = r#"{
          "sites": [{"id":"A"},{"id":"B"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e9,"metadata_op_latency_s":0}],
          "nodes": [
            {"id":"a1","site":"A","wan_iface_speed_bps":10e9,"fs_iface_speed_bps":10e9,
             "cpu_hash_rate_Bps":1e9,"tcp_window_limit_bytes":1e7,"fs_tuning":"std"},
            {"id":"b1","site":"B","wan_iface_speed_bps":10e9,"fs_iface_speed_bps":10e9,
             "cpu_hash_rate_Bps":1e9,"tcp_window_limit_bytes":1e7,"fs_tuning":"std"}
          ],
          "links": [
            {"id":"l1","from":"A","to":"x","capacity_bps":10e9,"rtt_contribution_s":0.001,"egress_buffer_bytes":0},
            {"id":"l2","from":"x","to":"y","capacity_bps":10e9,"rtt_contribution_s":0.048,"egress_buffer_bytes":0},
            {"id":"l3","from":"y","to":"B","capacity_bps":10e9,"rtt_contribution_s":0.001,"egress_buffer_bytes":0}
          ],
          "routes": [{"src":"A","dst":"B","links":["l1","l2","l3"]}]
        }"#;
        let topo = load_topology(cfg).unwrap();
        let (links, rtt) = topo.path_between("A", "B").unwrap();
        assert_eq!(links.len(), 3);
        assert!((rtt - 0.050).abs() < 1e-12);
    }

    #[test]
    fn self_path_is_empty_with_zero_rtt() {
        let topo = load_topology(&four_site_config()).unwrap();
        let (links, rtt) = topo.path_between("A", "A").unwrap();
        assert!(links.is_empty());
        assert_eq!(rtt, 0.0);
    }

    #[test]
    fn star_route_through_hub_is_symmetric() {
        let topo = load_topology(&four_site_config()).unwrap();
        let (fwd, rtt_fwd) = topo.path_between("A", "C").unwrap();
        let (rev, rtt_rev) = topo.path_between("C", "A").unwrap();
        assert_eq!(fwd.len(), 2);
        assert_eq!(fwd[0].id, "A-core");
        assert_eq!(fwd[1].id, "C-core");
        assert_eq!(rev[0].id, "C-core");
        assert_eq!(rev[1].id, "A-core");
        assert!((rtt_fwd - 0.02).abs() < 1e-12);
        assert_eq!(rtt_fwd, rtt_rev);
    }

    #[test]
    fn rtt_symmetry_holds_for_all_pairs() {
        let topo = load_topology(&four_site_config()).unwrap();
        for (a, b) in topo.site_pairs() {
            let (_, fwd) = topo.path_between(&a, &b).unwrap();
            let (_, rev) = topo.path_between(&b, &a).unwrap();
            assert_eq!(fwd, rev, "{a}->{b}");
        }
    }

    #[test]
    fn load_is_deterministic() {
        let text = four_site_config();
        assert_eq!(load_topology(&text).unwrap(), load_topology(&text).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = r#"{
          "sites": [{"id":"A"}],
          "presets": [],
          "nodes": [],
          "links": [],
          "routes": [],
          "surprise": true
        }"#;
        assert!(matches!(load_topology(cfg), Err(TopologyError::Parse(_))));
    }

    #[test]
    fn dangling_references_are_reported_with_field_path() {
        let cfg = r#"{
          "sites": [{"id":"A"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e9,"metadata_op_latency_s":0}],
          "nodes": [{"id":"a1","site":"NOPE","wan_iface_speed_bps":10e9,"fs_iface_speed_bps":10e9,
                     "cpu_hash_rate_Bps":1e9,"tcp_window_limit_bytes":1e7,"fs_tuning":"std"}],
          "links": [],
          "routes": []
        }"#;
        let err = load_topology(cfg).unwrap_err();
        assert!(err.to_string().contains("nodes[0].site"));
    }

    #[test]
    fn missing_route_between_sites_is_an_error() {
        let cfg = r#"{
          "sites": [{"id":"A"},{"id":"B"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e9,"metadata_op_latency_s":0}],
          "nodes": [],
          "links": [],
          "routes": []
        }"#;
        let err = load_topology(cfg).unwrap_err();
        assert!(err.to_string().contains("no route connects"));
    }

    #[test]
    fn discontinuous_route_chain_is_rejected() {
        let cfg = r#"{
          "sites": [{"id":"A"},{"id":"B"}],
          "presets": [{"name":"std","effective_fs_throughput_Bps":1e9,"metadata_op_latency_s":0}],
          "nodes": [],
          "links": [
            {"id":"l1","from":"A","to":"x","capacity_bps":1e9,"rtt_contribution_s":0,"egress_buffer_bytes":0},
            {"id":"l2","from":"y","to":"B","capacity_bps":1e9,"rtt_contribution_s":0,"egress_buffer_bytes":0}
          ],
          "routes": [{"src":"A","dst":"B","links":["l1","l2"]}]
        }"#;
        let err = load_topology(cfg).unwrap_err();
        assert!(err.to_string().contains("does not attach"));
    }
}
