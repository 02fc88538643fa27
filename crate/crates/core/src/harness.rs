//! Mesh testing and diagnosis: pairwise transfers across all site pairs,
//! isolated component measurements (filesystem-only, WAN-only), bottleneck
//! triangulation, and rate-matrix rendering.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::DatasetManifest;
use crate::engine::{execute, EngineError, SimConfig, TransferJob, TransferPolicy};
use crate::rng::hash_u64s;
use crate::simnet::{allocate, FlowSpec, TcpModelParams};
use crate::topology::{Topology, TopologyError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("mesh testing needs at least 2 sites, topology has {0}")]
    NeedTwoSites(usize),
    #[error("component reports missing for site '{0}'")]
    MissingComponents(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("matrix csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Pairwise source -> destination rates; the diagonal is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub sites: Vec<String>,
    /// bits/s keyed by (src, dst).
    pub rates: BTreeMap<(String, String), f64>,
    /// Pairs whose transfer failed; non-empty marks the matrix incomplete.
    pub failures: Vec<MeshFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshFailure {
    pub src: String,
    pub dst: String,
    pub reason: String,
}

impl RateMatrix {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
            && self.rates.len() == self.sites.len() * (self.sites.len().saturating_sub(1))
    }

    pub fn get(&self, src: &str, dst: &str) -> Option<f64> {
        self.rates.get(&(src.to_string(), dst.to_string())).copied()
    }

    /// Ordered (src, dst) pairs following the site declaration order.
    pub fn ordered_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        for s in &self.sites {
            for d in &self.sites {
                if s != d {
                    pairs.push((s.clone(), d.clone()));
                }
            }
        }
        pairs
    }

    /// Machine-readable export: `src,dst,gbps` rows in site order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("src,dst,gbps\n");
        for (s, d) in self.ordered_pairs() {
            if let Some(rate) = self.get(&s, &d) {
                out.push_str(&format!("{s},{d},{:.6}\n", rate / 1e9));
            }
        }
        out
    }

    /// Parses the CSV export. Site order is the order of first appearance.
    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "src,dst,gbps" => {}
            _ => {
                return Err(HarnessError::Csv {
                    line: 1,
                    msg: "expected header 'src,dst,gbps'".into(),
                })
            }
        }
        let mut sites: Vec<String> = Vec::new();
        let mut rates = BTreeMap::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(HarnessError::Csv {
                    line: idx + 1,
                    msg: "expected 3 columns".into(),
                });
            }
            let gbps: f64 = cols[2].trim().parse().map_err(|e| HarnessError::Csv {
                line: idx + 1,
                msg: format!("bad rate: {e}"),
            })?;
            for site in [cols[0], cols[1]] {
                if !sites.iter().any(|s| s == site) {
                    sites.push(site.to_string());
                }
            }
            rates.insert((cols[0].to_string(), cols[1].to_string()), gbps * 1e9);
        }
        Ok(Self {
            sites,
            rates,
            failures: Vec::new(),
        })
    }
}

/// Mesh run parameters.
#[derive(Debug, Clone)]
pub struct MeshConfig {
    pub policy: TransferPolicy,
    pub tcp: TcpModelParams,
    pub corruption_probability: f64,
    /// Background memory-to-memory flows per pair (cross traffic).
    pub background_flows_per_pair: usize,
    /// Restrict the mesh to these sites; `None` means every site.
    pub sites: Option<Vec<String>>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            policy: TransferPolicy::default(),
            tcp: TcpModelParams::default(),
            corruption_probability: 0.0,
            background_flows_per_pair: 0,
            sites: None,
        }
    }
}

/// Runs one transfer per ordered site pair, sequentially on independent
/// simulation clocks, and collects average goodput per pair.
pub fn run_mesh(
    topo: &Topology,
    manifest: &DatasetManifest,
    cfg: &MeshConfig,
    seed: u64,
) -> Result<RateMatrix, HarnessError> {
    let selected: Vec<String> = match &cfg.sites {
        None => topo.sites.iter().map(|s| s.id.clone()).collect(),
        Some(names) => {
            for name in names {
                if topo.site_idx(name).is_none() {
                    return Err(HarnessError::Topology(TopologyError::UnknownSite(
                        name.clone(),
                    )));
                }
            }
            names.clone()
        }
    };
    if selected.len() < 2 {
        return Err(HarnessError::NeedTwoSites(selected.len()));
    }
    let mut pairs = Vec::new();
    for a in &selected {
        for b in &selected {
            if a != b {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    let mut rates = BTreeMap::new();
    let mut failures = Vec::new();
    for (i, (src, dst)) in pairs.into_iter().enumerate() {
        let pair_seed = hash_u64s(&[seed, i as u64]);
        let mut job = TransferJob::new(
            format!("mesh-{src}-{dst}"),
            manifest.clone(),
            src.clone(),
            dst.clone(),
            pair_seed,
        );
        job.policy = cfg.policy.clone();
        job.corruption_probability = cfg.corruption_probability;
        let mut sim_cfg = SimConfig {
            tcp: cfg.tcp.clone(),
            background_flows: Vec::new(),
        };
        if cfg.background_flows_per_pair > 0 {
            let src_nodes = topo.nodes_of_site(&src)?;
            let dst_nodes = topo.nodes_of_site(&dst)?;
            for k in 0..cfg.background_flows_per_pair {
                let s = &src_nodes[k % src_nodes.len()];
                let d = &dst_nodes[k % dst_nodes.len()];
                sim_cfg.background_flows.push((s.id.clone(), d.id.clone()));
            }
        }
        match execute(&job, topo, &sim_cfg) {
            Ok(outcome) => {
                rates.insert((src, dst), outcome.report.average_rate_bits_per_s);
            }
            Err(e) => failures.push(MeshFailure {
                src,
                dst,
                reason: e.to_string(),
            }),
        }
    }
    Ok(RateMatrix {
        sites: selected,
        rates,
        failures,
    })
}

/// Isolated measurements for one site: filesystem rates straight from the
/// cluster's tuning presets, WAN path rates from memory-to-memory flows
/// (filesystem stage bypassed), and the node-internal loopback ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentReport {
    pub site: String,
    /// bits/s, aggregate across the site's cluster.
    pub fs_read_rate: f64,
    pub fs_write_rate: f64,
    /// bits/s per peer site, memory-to-memory.
    pub wan_path_rates: BTreeMap<String, f64>,
    pub dtn_loopback_rate: f64,
}

pub fn component_tests(
    topo: &Topology,
    site: &str,
    seed: u64,
) -> Result<ComponentReport, HarnessError> {
    let nodes = topo.nodes_of_site(site)?;
    let fs_rate: f64 = nodes
        .iter()
        .map(|n| topo.preset_of(n).effective_fs_throughput * 8.0)
        .sum();
    let loopback: f64 = nodes.iter().map(|n| n.wan_iface_speed).sum();

    let mut wan_path_rates = BTreeMap::new();
    for (pi, peer) in topo.sites.iter().enumerate() {
        if peer.id == site {
            continue;
        }
        let peer_nodes = topo.nodes_of_site(&peer.id)?;
        let mut flows = Vec::new();
        for (i, a) in nodes.iter().enumerate() {
            for (j, b) in peer_nodes.iter().enumerate() {
                flows.push(FlowSpec {
                    id: format!("wan{i:02}x{j:02}"),
                    src_node: a.id.clone(),
                    dst_node: b.id.clone(),
                    bytes: 1.0,
                    use_fs: false,
                });
            }
        }
        let alloc = allocate(
            &flows,
            topo,
            &TcpModelParams::default(),
            hash_u64s(&[seed, pi as u64]),
        )
        .map_err(EngineError::Sim)?;
        wan_path_rates.insert(peer.id.clone(), alloc.rates.values().sum());
    }

    Ok(ComponentReport {
        site: site.to_string(),
        fs_read_rate: fs_rate,
        fs_write_rate: fs_rate,
        wan_path_rates,
        dtn_loopback_rate: loopback,
    })
}

/// Where a below-goal measurement points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "suspect", rename_all = "snake_case")]
pub enum Suspect {
    SiteFs { site: String },
    SiteDtn { site: String },
    WanPath { src: String, dst: String },
    EndToEndIntegration { site: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub measurement: String,
    pub value_gbps: f64,
    pub threshold_gbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckDiagnosis {
    #[serde(flatten)]
    pub suspect: Suspect,
    pub evidence: Vec<Evidence>,
}

/// Decision rule, in order: (1) any site whose filesystem or DTN component
/// rate is below goal is diagnosed there; (2) otherwise any below-goal WAN
/// path is diagnosed; (3) otherwise, with every component at or above goal,
/// below-goal end-to-end pairs point at integration trouble at the site
/// common to all failing pairs.
pub fn triangulate(
    mesh: &RateMatrix,
    components: &[ComponentReport],
    goal: f64,
) -> Result<Vec<BottleneckDiagnosis>, HarnessError> {
    let by_site: BTreeMap<&str, &ComponentReport> = components
        .iter()
        .map(|c| (c.site.as_str(), c))
        .collect();
    for site in &mesh.sites {
        if !by_site.contains_key(site.as_str()) {
            return Err(HarnessError::MissingComponents(site.clone()));
        }
    }
    let gbps = |v: f64| v / 1e9;
    let mut component_diagnoses = Vec::new();
    for site in &mesh.sites {
        let report = by_site[site.as_str()];
        let mut evidence = Vec::new();
        if report.fs_read_rate < goal {
            evidence.push(Evidence {
                measurement: "fs_read_rate".into(),
                value_gbps: gbps(report.fs_read_rate),
                threshold_gbps: gbps(goal),
            });
        }
        if report.fs_write_rate < goal {
            evidence.push(Evidence {
                measurement: "fs_write_rate".into(),
                value_gbps: gbps(report.fs_write_rate),
                threshold_gbps: gbps(goal),
            });
        }
        if !evidence.is_empty() {
            component_diagnoses.push(BottleneckDiagnosis {
                suspect: Suspect::SiteFs { site: site.clone() },
                evidence,
            });
        }
        if report.dtn_loopback_rate < goal {
            component_diagnoses.push(BottleneckDiagnosis {
                suspect: Suspect::SiteDtn { site: site.clone() },
                evidence: vec![Evidence {
                    measurement: "dtn_loopback_rate".into(),
                    value_gbps: gbps(report.dtn_loopback_rate),
                    threshold_gbps: gbps(goal),
                }],
            });
        }
    }
    for (src, dst) in mesh.ordered_pairs() {
        let rate = by_site[src.as_str()]
            .wan_path_rates
            .get(&dst)
            .copied()
            .unwrap_or(f64::INFINITY);
        if rate < goal {
            component_diagnoses.push(BottleneckDiagnosis {
                suspect: Suspect::WanPath {
                    src: src.clone(),
                    dst: dst.clone(),
                },
                evidence: vec![Evidence {
                    measurement: "wan_path_rate".into(),
                    value_gbps: gbps(rate),
                    threshold_gbps: gbps(goal),
                }],
            });
        }
    }
    if !component_diagnoses.is_empty() {
        return Ok(component_diagnoses);
    }

    // Components all pass: look for under-goal end-to-end pairs.
    let failing: Vec<(String, String)> = mesh
        .ordered_pairs()
        .into_iter()
        .filter(|(s, d)| mesh.get(s, d).is_some_and(|r| r < goal))
        .collect();
    if failing.is_empty() {
        return Ok(Vec::new());
    }
    let mut candidates: Vec<&String> = mesh
        .sites
        .iter()
        .filter(|site| failing.iter().all(|(s, d)| s == *site || d == *site))
        .collect();
    if candidates.is_empty() {
        // No single common site; report every site that appears in a
        // failing pair, in site order.
        candidates = mesh
            .sites
            .iter()
            .filter(|site| failing.iter().any(|(s, d)| s == *site || d == *site))
            .collect();
    }
    let mut out = Vec::new();
    for site in candidates {
        let evidence: Vec<Evidence> = failing
            .iter()
            .filter(|(s, d)| s == site || d == site)
            .map(|(s, d)| Evidence {
                measurement: format!("end_to_end {s}->{d}"),
                value_gbps: gbps(mesh.get(s, d).unwrap_or(0.0)),
                threshold_gbps: gbps(goal),
            })
            .collect();
        out.push(BottleneckDiagnosis {
            suspect: Suspect::EndToEndIntegration { site: site.clone() },
            evidence,
        });
    }
    Ok(out)
}

/// Structured export of a diagnosis run.
pub fn diagnosis_to_json(diagnoses: &[BottleneckDiagnosis], goal: f64) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        goal_gbps: f64,
        diagnoses: &'a [BottleneckDiagnosis],
    }
    serde_json::to_string_pretty(&Doc {
        goal_gbps: goal / 1e9,
        diagnoses,
    })
    .expect("diagnosis serializes")
}

/// Renders the matrix as an aligned grid: sources as rows, destinations as
/// columns, blank diagonal, one decimal place in Gb/s, below-goal cells
/// flagged with '*'. Byte-stable for identical inputs.
pub fn render_matrix(matrix: &RateMatrix, goal: f64) -> String {
    let n = matrix.sites.len();
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(n + 1);
    let mut header = Vec::with_capacity(n + 1);
    header.push("src\\dst".to_string());
    header.extend(matrix.sites.iter().cloned());
    cells.push(header);
    for s in &matrix.sites {
        let mut row = Vec::with_capacity(n + 1);
        row.push(s.clone());
        for d in &matrix.sites {
            if s == d {
                row.push(String::new());
            } else {
                match matrix.get(s, d) {
                    Some(rate) => {
                        let gbps = rate / 1e9;
                        let flag = if rate < goal { "*" } else { "" };
                        row.push(format!("{gbps:.1}{flag}"));
                    }
                    None => row.push("-".to_string()),
                }
            }
        }
        cells.push(row);
    }
    let cols = cells[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                out.push_str(&format!("{:<w$}", cell, w = widths[0]));
            } else {
                out.push_str(&format!("  {:>w$}", cell, w = widths[c]));
            }
        }
        // Trailing spaces would be invisible noise; strip them.
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}
