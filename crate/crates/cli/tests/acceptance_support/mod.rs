//! Shared machinery for the acceptance suite: reference inputs, an
//! independent max-min oracle, and the seeded bottleneck injector.

use pdtn_core::dataset::{generate_manifest, DatasetManifest, FileEntry, GeneratorConfig};
use pdtn_core::engine::TransferPolicy;
use pdtn_core::harness::{MeshConfig, Suspect};
use pdtn_core::rng::SplitMix64;
use pdtn_core::topology::{load_topology, Topology};

pub fn reference_calibrated_manifest(seed: u64) -> DatasetManifest {
    generate_manifest(&GeneratorConfig::reference_calibrated(seed)).expect("reference generates")
}

/// One DTN per site over a single 40 Gb/s path. All batches serialize on
/// the one node pair, which isolates batch-size effects: every batch pays
/// its own drain and verification tail.
pub fn single_pair_topology() -> Topology {
    let cfg = r#"{
      "sites": [{"id":"SRC"},{"id":"DST"}],
      "presets": [{"name":"fs","effective_fs_throughput_Bps":6e9,"metadata_op_latency_s":0.0005}],
      "nodes": [
        {"id":"src-dtn","site":"SRC","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":200e9,
         "cpu_hash_rate_Bps":6e9,"tcp_window_limit_bytes":512e6,"fs_tuning":"fs"},
        {"id":"dst-dtn","site":"DST","wan_iface_speed_bps":100e9,"fs_iface_speed_bps":200e9,
         "cpu_hash_rate_Bps":6e9,"tcp_window_limit_bytes":512e6,"fs_tuning":"fs"}
      ],
      "links": [{"id":"wan","from":"SRC","to":"DST","capacity_bps":40e9,
                 "rtt_contribution_s":0.02,"egress_buffer_bytes":1e9}],
      "routes": [{"src":"SRC","dst":"DST","links":["wan"]}]
    }"#;
    load_topology(cfg).expect("single-pair topology loads")
}

/// Independent max-min oracle: repeatedly bisect for the highest common
/// water level all unfrozen flows can share, then freeze cap-limited flows
/// at their caps and resource-blocked flows at the level. Different
/// formulation and arithmetic path from the production allocator.
pub fn maxmin_oracle(capacities: &[f64], members: &[Vec<usize>], caps: &[f64]) -> Vec<f64> {
    fn usage_at(
        fixed: &[Option<f64>],
        members: &[Vec<usize>],
        caps: &[f64],
        level: f64,
        r: usize,
    ) -> f64 {
        (0..fixed.len())
            .filter(|f| members[*f].contains(&r))
            .map(|f| fixed[f].unwrap_or_else(|| level.min(caps[f])))
            .sum()
    }
    fn feasible(
        fixed: &[Option<f64>],
        capacities: &[f64],
        members: &[Vec<usize>],
        caps: &[f64],
        level: f64,
    ) -> bool {
        capacities
            .iter()
            .enumerate()
            .all(|(r, &cap)| usage_at(fixed, members, caps, level, r) <= cap * (1.0 + 1e-12))
    }

    let n = members.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    loop {
        let unfrozen: Vec<usize> = (0..n).filter(|&f| fixed[f].is_none()).collect();
        if unfrozen.is_empty() {
            break;
        }
        let mut hi = capacities.iter().cloned().fold(0.0, f64::max) * 1.001 + 1.0;
        if feasible(&fixed, capacities, members, caps, hi) {
            // Only cap-limited flows remain (every flow crosses a resource,
            // so an unbounded level would saturate one).
            for &f in &unfrozen {
                fixed[f] = Some(caps[f].min(hi));
            }
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if feasible(&fixed, capacities, members, caps, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let level = lo;

        let tight: Vec<bool> = capacities
            .iter()
            .enumerate()
            .map(|(r, &cap)| {
                usage_at(&fixed, members, caps, level, r) >= cap * (1.0 - 1e-9)
            })
            .collect();
        let mut froze = false;
        for &f in &unfrozen {
            if members[f].iter().any(|&r| tight[r]) {
                fixed[f] = Some(level.min(caps[f]));
                froze = true;
            }
        }
        for &f in &unfrozen {
            if fixed[f].is_none() && caps[f] <= level * (1.0 + 1e-9) {
                fixed[f] = Some(caps[f]);
                froze = true;
            }
        }
        if !froze {
            for &f in &unfrozen {
                fixed[f] = Some(level.min(caps[f]));
            }
        }
    }
    fixed.into_iter().map(|r| r.unwrap()).collect()
}

#[derive(Debug, Clone)]
pub enum InjectionKind {
    /// One site's filesystem preset capped far below goal.
    SiteFs { site: usize },
    /// One inter-site link slowed far below goal (hits both directions).
    WanPath { a: usize, b: usize },
    /// One site's chained-stage cap: components pass, transfers do not.
    Integration { site: usize },
}

pub struct Scenario {
    pub kind: InjectionKind,
    pub config: String,
    pub manifest: DatasetManifest,
    pub mesh_config: MeshConfig,
}

const SITES: [&str; 4] = ["A", "B", "C", "D"];
const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

impl Scenario {
    pub fn expected_suspects(&self) -> Vec<Suspect> {
        match &self.kind {
            InjectionKind::SiteFs { site } => vec![Suspect::SiteFs {
                site: SITES[*site].to_string(),
            }],
            InjectionKind::WanPath { a, b } => vec![
                Suspect::WanPath {
                    src: SITES[*a].to_string(),
                    dst: SITES[*b].to_string(),
                },
                Suspect::WanPath {
                    src: SITES[*b].to_string(),
                    dst: SITES[*a].to_string(),
                },
            ],
            InjectionKind::Integration { site } => vec![Suspect::EndToEndIntegration {
                site: SITES[*site].to_string(),
            }],
        }
    }
}

/// Builds a healthy four-site full mesh (site filesystems at 40 Gb/s,
/// links at 100 Gb/s, goal 15 Gb/s) and injects exactly one bottleneck
/// at roughly half the goal, chosen by the seed.
pub fn injection_scenario(seed: u64) -> Scenario {
    let mut rng = SplitMix64::new(seed ^ 0x0001_7ec7);
    let kind = match rng.next_below(3) {
        0 => InjectionKind::SiteFs {
            site: rng.next_below(4) as usize,
        },
        1 => {
            let (a, b) = PAIRS[rng.next_below(6) as usize];
            InjectionKind::WanPath { a, b }
        }
        _ => InjectionKind::Integration {
            site: rng.next_below(4) as usize,
        },
    };

    let mut sites = String::new();
    for (i, s) in SITES.iter().enumerate() {
        if i > 0 {
            sites.push(',');
        }
        let cap = match &kind {
            InjectionKind::Integration { site } if *site == i => {
                r#","integration_cap_bps":7e9"#
            }
            _ => "",
        };
        sites.push_str(&format!(r#"{{"id":"{s}"{cap}}}"#));
    }

    // Per-site presets so one site's filesystem can be capped alone.
    let mut presets = String::new();
    let mut nodes = String::new();
    for (i, s) in SITES.iter().enumerate() {
        let fs_rate = match &kind {
            InjectionKind::SiteFs { site } if *site == i => 0.375e9, // 6 Gb/s per site
            _ => 2.5e9, // 40 Gb/s per site
        };
        if i > 0 {
            presets.push(',');
        }
        presets.push_str(&format!(
            r#"{{"name":"fs-{s}","effective_fs_throughput_Bps":{fs_rate},"metadata_op_latency_s":0}}"#,
            s = s.to_lowercase(),
        ));
        for k in 0..2 {
            if !(i == 0 && k == 0) {
                nodes.push(',');
            }
            nodes.push_str(&format!(
                r#"{{"id":"{s}-dtn{k:02}","site":"{S}","wan_iface_speed_bps":100e9,
                    "fs_iface_speed_bps":100e9,"cpu_hash_rate_Bps":3e9,
                    "tcp_window_limit_bytes":128e6,"fs_tuning":"fs-{s}"}}"#,
                s = s.to_lowercase(),
                S = s,
            ));
        }
    }

    let mut links = String::new();
    let mut routes = String::new();
    for (idx, (a, b)) in PAIRS.iter().enumerate() {
        let capacity = match &kind {
            InjectionKind::WanPath { a: ia, b: ib } if (ia, ib) == (a, b) => 7e9,
            _ => 100e9,
        };
        if idx > 0 {
            links.push(',');
            routes.push(',');
        }
        let (sa, sb) = (SITES[*a], SITES[*b]);
        let id = format!("{}{}", sa.to_lowercase(), sb.to_lowercase());
        links.push_str(&format!(
            r#"{{"id":"{id}","from":"{sa}","to":"{sb}","capacity_bps":{capacity},
                "rtt_contribution_s":0.02,"egress_buffer_bytes":1e9}}"#
        ));
        routes.push_str(&format!(
            r#"{{"src":"{sa}","dst":"{sb}","links":["{id}"]}}"#
        ));
    }

    let config = format!(
        r#"{{
          "sites": [{sites}],
          "presets": [{presets}],
          "nodes": [{nodes}],
          "links": [{links}],
          "routes": [{routes}]
        }}"#
    );

    let manifest = DatasetManifest {
        entries: (0..32)
            .map(|i| FileEntry {
                path: format!("d/f{i:04}.dat"),
                size_bytes: 1_000_000_000,
                content_seed: 0xace0 + i as u64,
            })
            .collect(),
        directory_count: 1,
        generator_seed: 1,
        scale_factor: 1.0,
    };

    let mesh_config = MeshConfig {
        policy: TransferPolicy {
            initial_batch_files: 8,
            escalated_batch_files: 8,
            per_file_overhead: 0.0,
            ..TransferPolicy::default()
        },
        ..MeshConfig::default()
    };

    Scenario {
        kind,
        config,
        manifest,
        mesh_config,
    }
}
