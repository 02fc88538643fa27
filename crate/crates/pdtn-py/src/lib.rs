//! Python bindings: the data-set generator, topology loader, transfer
//! engine, and measurement harness behind a small scripting surface.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pdtn_core::dataset;
use pdtn_core::engine;
use pdtn_core::fixtures;
use pdtn_core::harness;
use pdtn_core::simnet;
use pdtn_core::topology;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A generated or parsed data-set manifest.
#[pyclass(name = "Manifest", skip_from_py_object)]
#[derive(Clone)]
struct PyManifest {
    inner: dataset::DatasetManifest,
}

#[pymethods]
impl PyManifest {
    #[getter]
    fn file_count(&self) -> u64 {
        self.inner.file_count()
    }

    #[getter]
    fn directory_count(&self) -> u64 {
        self.inner.directory_count
    }

    #[getter]
    fn total_bytes(&self) -> u64 {
        self.inner.total_bytes()
    }

    /// Decade histogram as a dict of label -> file count.
    fn summarize(&self) -> BTreeMap<String, u64> {
        dataset::summarize(&self.inner)
            .labeled_counts()
            .into_iter()
            .collect()
    }

    /// (path, size_bytes, content_seed) triples in manifest order.
    fn entries(&self) -> Vec<(String, u64, u64)> {
        self.inner
            .entries
            .iter()
            .map(|e| (e.path.clone(), e.size_bytes, e.content_seed))
            .collect()
    }

    /// The on-disk manifest format.
    fn to_text(&self) -> String {
        dataset::write_manifest(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Manifest(files={}, dirs={}, bytes={})",
            self.inner.file_count(),
            self.inner.directory_count,
            self.inner.total_bytes()
        )
    }
}

/// Generates a manifest. `preset` is `"petascale-reference"` or `"empty"`;
/// alternatively pass `counts` as a dict of decade label -> file count.
#[pyfunction]
#[pyo3(signature = (preset=None, counts=None, seed=42, calibrate=false,
                    total_bytes=None, scale_factor=1.0, dirs=None))]
#[allow(clippy::too_many_arguments)]
fn generate_manifest(
    preset: Option<&str>,
    counts: Option<BTreeMap<String, u64>>,
    seed: u64,
    calibrate: bool,
    total_bytes: Option<u64>,
    scale_factor: f64,
    dirs: Option<u64>,
) -> PyResult<PyManifest> {
    let mut cfg = match (preset, counts) {
        (Some("petascale-reference"), None) => dataset::GeneratorConfig::reference(seed),
        (Some("empty"), None) => dataset::GeneratorConfig::empty(seed),
        (Some(other), None) => {
            return Err(value_err(format!(
                "unknown preset '{other}' (petascale-reference, empty)"
            )))
        }
        (None, Some(counts)) => {
            let mut decades = BTreeMap::new();
            for (label, count) in counts {
                let decade = dataset::decade_for_label(&label)
                    .ok_or_else(|| value_err(format!("unknown decade label '{label}'")))?;
                *decades.entry(decade).or_insert(0) += count;
            }
            dataset::GeneratorConfig {
                counts: dataset::SizeHistogram::from_counts(decades, 0),
                directory_count: 0,
                seed,
                scale_factor: 1.0,
                calibrate_total_bytes: None,
            }
        }
        _ => return Err(value_err("pass exactly one of preset/counts")),
    };
    cfg.scale_factor = scale_factor;
    if let Some(dirs) = dirs {
        cfg.directory_count = dirs;
    }
    if calibrate {
        cfg.calibrate_total_bytes =
            Some(total_bytes.unwrap_or(dataset::REFERENCE_TOTAL_BYTES));
    }
    Ok(PyManifest {
        inner: dataset::generate_manifest(&cfg).map_err(value_err)?,
    })
}

/// Parses the on-disk manifest format.
#[pyfunction]
fn parse_manifest(text: &str) -> PyResult<PyManifest> {
    Ok(PyManifest {
        inner: dataset::parse_manifest(text).map_err(value_err)?,
    })
}

/// A validated site/node/link topology.
#[pyclass(name = "Topology")]
struct PyTopology {
    inner: topology::Topology,
}

#[pymethods]
impl PyTopology {
    #[getter]
    fn sites(&self) -> Vec<String> {
        self.inner.sites.iter().map(|s| s.id.clone()).collect()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes.iter().map(|n| n.id.clone()).collect()
    }

    fn all_simple(&self) -> bool {
        self.inner.all_simple()
    }

    /// Round-trip time between two sites, in seconds.
    fn path_rtt(&self, src: &str, dst: &str) -> PyResult<f64> {
        let (_, rtt) = self.inner.path_between(src, dst).map_err(value_err)?;
        Ok(rtt)
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(sites={}, nodes={}, links={})",
            self.inner.sites.len(),
            self.inner.nodes.len(),
            self.inner.links.len()
        )
    }
}

/// Loads a topology from JSON config text.
#[pyfunction]
fn load_topology(config_text: &str) -> PyResult<PyTopology> {
    Ok(PyTopology {
        inner: topology::load_topology(config_text).map_err(value_err)?,
    })
}

/// Loads a shipped fixture: start-state, end-state, or integration-trap.
#[pyfunction]
fn load_fixture(name: &str) -> PyResult<PyTopology> {
    match fixtures::load(name) {
        Some(result) => Ok(PyTopology {
            inner: result.map_err(value_err)?,
        }),
        None => Err(value_err(format!(
            "unknown fixture '{name}' (available: {})",
            fixtures::NAMES.join(", ")
        ))),
    }
}

fn policy_from(
    network_use: Option<&str>,
    per_file_overhead: Option<f64>,
    checksum: bool,
) -> PyResult<engine::TransferPolicy> {
    let mut policy = match network_use {
        Some(level) => {
            let level: engine::NetworkUse = level.parse().map_err(value_err)?;
            engine::TransferPolicy::for_network_use(level)
        }
        None => engine::TransferPolicy::default(),
    };
    if let Some(overhead) = per_file_overhead {
        policy.per_file_overhead = overhead;
    }
    policy.checksum_enabled = checksum;
    Ok(policy)
}

/// Runs one transfer and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (topology, manifest, src, dst, seed=42, network_use=None,
                    per_file_overhead=None, checksum=true, corruption_probability=0.0))]
#[allow(clippy::too_many_arguments)]
fn run_transfer(
    topology: &PyTopology,
    manifest: &PyManifest,
    src: &str,
    dst: &str,
    seed: u64,
    network_use: Option<&str>,
    per_file_overhead: Option<f64>,
    checksum: bool,
    corruption_probability: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let mut job = engine::TransferJob::new(
        format!("py-{src}-{dst}"),
        manifest.inner.clone(),
        src,
        dst,
        seed,
    );
    job.policy = policy_from(network_use, per_file_overhead, checksum)?;
    job.corruption_probability = corruption_probability;
    let outcome =
        engine::execute(&job, &topology.inner, &engine::SimConfig::default()).map_err(runtime_err)?;
    let report = outcome.report;
    let mut out = BTreeMap::new();
    out.insert("bytes".to_string(), report.bytes_transferred as f64);
    out.insert("elapsed_s".to_string(), report.elapsed_s);
    out.insert("avg_gbps".to_string(), report.average_gbps());
    out.insert(
        "retransmitted_bytes".to_string(),
        report.retransmitted_bytes as f64,
    );
    out.insert(
        "checksum_failures".to_string(),
        report.checksum_failures as f64,
    );
    out.insert("batches".to_string(), report.batches.len() as f64);
    Ok(out)
}

/// Rate rows as (src, dst, gbps) triples.
type MeshRates = Vec<(String, String, f64)>;

/// Runs the pairwise mesh and returns (rates, rendered_table) where rates
/// is a list of (src, dst, gbps).
#[pyfunction]
#[pyo3(signature = (topology, manifest, seed=42, goal_gbps=15.0, per_file_overhead=None))]
fn run_mesh(
    topology: &PyTopology,
    manifest: &PyManifest,
    seed: u64,
    goal_gbps: f64,
    per_file_overhead: Option<f64>,
) -> PyResult<(MeshRates, String)> {
    let mut cfg = harness::MeshConfig::default();
    if let Some(overhead) = per_file_overhead {
        cfg.policy.per_file_overhead = overhead;
    }
    let matrix = harness::run_mesh(&topology.inner, &manifest.inner, &cfg, seed)
        .map_err(runtime_err)?;
    let rates = matrix
        .ordered_pairs()
        .into_iter()
        .filter_map(|(s, d)| matrix.get(&s, &d).map(|r| (s, d, r / 1e9)))
        .collect();
    let table = harness::render_matrix(&matrix, goal_gbps * 1e9);
    Ok((rates, table))
}

/// Isolated component rates for one site, in Gb/s.
#[pyfunction]
#[pyo3(signature = (topology, site, seed=42))]
fn component_tests(
    topology: &PyTopology,
    site: &str,
    seed: u64,
) -> PyResult<BTreeMap<String, f64>> {
    let report =
        harness::component_tests(&topology.inner, site, seed).map_err(runtime_err)?;
    let mut out = BTreeMap::new();
    out.insert("fs_read_gbps".to_string(), report.fs_read_rate / 1e9);
    out.insert("fs_write_gbps".to_string(), report.fs_write_rate / 1e9);
    out.insert(
        "dtn_loopback_gbps".to_string(),
        report.dtn_loopback_rate / 1e9,
    );
    for (peer, rate) in &report.wan_path_rates {
        out.insert(format!("wan_to_{peer}_gbps"), rate / 1e9);
    }
    Ok(out)
}

/// Mesh + components + triangulation; returns a diagnosis list like
/// [{"suspect": "site_fs", "site": "X"}, ...].
#[pyfunction]
#[pyo3(signature = (topology, manifest, seed=42, goal_gbps=15.0, per_file_overhead=None))]
fn diagnose(
    topology: &PyTopology,
    manifest: &PyManifest,
    seed: u64,
    goal_gbps: f64,
    per_file_overhead: Option<f64>,
) -> PyResult<Vec<BTreeMap<String, String>>> {
    let mut cfg = harness::MeshConfig::default();
    if let Some(overhead) = per_file_overhead {
        cfg.policy.per_file_overhead = overhead;
    }
    let mesh = harness::run_mesh(&topology.inner, &manifest.inner, &cfg, seed)
        .map_err(runtime_err)?;
    let components: Vec<_> = topology
        .inner
        .sites
        .iter()
        .map(|s| harness::component_tests(&topology.inner, &s.id, seed))
        .collect::<Result<_, _>>()
        .map_err(runtime_err)?;
    let diagnoses =
        harness::triangulate(&mesh, &components, goal_gbps * 1e9).map_err(runtime_err)?;
    Ok(diagnoses
        .into_iter()
        .map(|d| {
            let mut row = BTreeMap::new();
            match d.suspect {
                harness::Suspect::SiteFs { site } => {
                    row.insert("suspect".into(), "site_fs".into());
                    row.insert("site".into(), site);
                }
                harness::Suspect::SiteDtn { site } => {
                    row.insert("suspect".into(), "site_dtn".into());
                    row.insert("site".into(), site);
                }
                harness::Suspect::WanPath { src, dst } => {
                    row.insert("suspect".into(), "wan_path".into());
                    row.insert("src".into(), src);
                    row.insert("dst".into(), dst);
                }
                harness::Suspect::EndToEndIntegration { site } => {
                    row.insert("suspect".into(), "end_to_end_integration".into());
                    row.insert("site".into(), site);
                }
            }
            row
        })
        .collect())
}

/// Hex digest of a file's deterministic content stream.
#[pyfunction]
fn checksum_of(content_seed: u64, size_bytes: u64) -> String {
    engine::checksum_hex(content_seed, size_bytes)
}

/// Average bits/s needed to move `bytes` in `duration_s`.
#[pyfunction]
fn goal_rate(bytes: u64, duration_s: f64) -> PyResult<f64> {
    if duration_s <= 0.0 {
        return Err(value_err("duration must be positive"));
    }
    Ok(engine::goal_rate(bytes, duration_s))
}

/// Loss fraction for a fast sender feeding a slower egress port.
#[pyfunction]
fn mismatch_loss_rate(
    arrival_rate: f64,
    egress_capacity: f64,
    egress_buffer: f64,
    rtt: f64,
) -> PyResult<f64> {
    if egress_capacity <= 0.0 {
        return Err(value_err("egress capacity must be positive"));
    }
    Ok(simnet::mismatch_loss_rate(
        arrival_rate,
        egress_capacity,
        egress_buffer,
        rtt,
    ))
}

#[pymodule]
fn pdtn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyManifest>()?;
    m.add_class::<PyTopology>()?;
    m.add_function(wrap_pyfunction!(generate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(parse_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(load_topology, m)?)?;
    m.add_function(wrap_pyfunction!(load_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(run_transfer, m)?)?;
    m.add_function(wrap_pyfunction!(run_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(component_tests, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(checksum_of, m)?)?;
    m.add_function(wrap_pyfunction!(goal_rate, m)?)?;
    m.add_function(wrap_pyfunction!(mismatch_loss_rate, m)?)?;
    m.add("FIXTURES", fixtures::NAMES.to_vec())?;
    Ok(())
}
