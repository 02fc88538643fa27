//! `pdtn`: data-set generation, single transfers, pairwise rate meshes,
//! component tests, bottleneck diagnosis, and matrix rendering over the
//! simulated multi-site DTN deployment.
//!
//! Every command is deterministic: identical arguments, files, and seeds
//! produce byte-identical outputs. Exit codes: 0 success, 2 usage or
//! config error, 3 runtime transfer failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pdtn_core::dataset::{
    self, decade_for_label, generate_manifest, parse_manifest, summarize, write_manifest,
    DatasetManifest, GeneratorConfig, SizeHistogram,
};
use pdtn_core::engine::{
    execute, EngineError, NetworkUse, SimConfig, TransferJob, TransferPolicy,
};
use pdtn_core::harness::{
    component_tests, diagnosis_to_json, render_matrix, run_mesh, triangulate, ComponentReport,
    HarnessError, MeshConfig, RateMatrix,
};
use pdtn_core::simnet::log_to_text;
use pdtn_core::topology::{load_topology, Topology};
use pdtn_core::fixtures;

/// Default seed: a fixed constant rather than the wall clock, so runs
/// without an explicit seed still reproduce.
const DEFAULT_SEED: u64 = 42;
const DEFAULT_GOAL_GBPS: f64 = 15.0;

#[derive(Debug)]
enum CliError {
    /// Bad arguments, unreadable or invalid config: exit 2.
    Config(String),
    /// The transfer itself failed at runtime: exit 3.
    Transfer(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Transfer(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Transfer(m) => m,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::RetriesExhausted { .. } | EngineError::Sim(_) => {
                CliError::Transfer(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Engine(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Csv,
    Structured,
}

#[derive(Parser, Debug)]
#[command(
    name = "pdtn",
    version,
    about = "Multi-DTN bulk transfer simulator and measurement harness"
)]
struct Cli {
    /// Seed for every pseudo-random choice in the run.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Topology: a config file path or a named fixture
    /// (start-state, end-state, integration-trap). The PDTN_FIXTURES
    /// environment variable overrides the fixture directory.
    #[arg(long, global = true)]
    topology: Option<String>,

    /// Stdout format for reports.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: OutputFormat,

    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a data-set manifest with a prescribed size histogram.
    GenDataset(GenDatasetArgs),
    /// Run one transfer between two sites and report goodput.
    Transfer(TransferArgs),
    /// Run transfers over every ordered site pair and tabulate rates.
    Mesh(MeshArgs),
    /// Run isolated component tests (filesystem, WAN, loopback) per site.
    Components(ComponentsArgs),
    /// Mesh + component tests + bottleneck triangulation.
    Diagnose(DiagnoseArgs),
    /// Render a rate matrix CSV as an aligned table.
    Render(RenderArgs),
    /// Write manifest entries to disk as real files for external hashing.
    Materialize(MaterializeArgs),
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    /// Named histogram preset: petascale-reference.
    #[arg(long, conflicts_with_all = ["empty", "counts"])]
    preset: Option<String>,

    /// Generate an empty manifest.
    #[arg(long, conflicts_with = "counts")]
    empty: bool,

    /// Custom decade counts, e.g. "1K-10K=100,1M-10M=5".
    #[arg(long)]
    counts: Option<String>,

    /// Directory count (defaults to the preset's, or 0 for custom counts).
    #[arg(long)]
    dirs: Option<u64>,

    /// Calibrate total bytes to the target.
    #[arg(long)]
    calibrate: bool,

    /// Calibration target in bytes (defaults to the reference total).
    #[arg(long)]
    total_bytes: Option<u64>,

    /// Multiplier applied to the calibration target.
    #[arg(long, default_value_t = 1.0)]
    scale_factor: f64,

    /// Manifest output path; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct PolicyArgs {
    /// Files in the probe batch.
    #[arg(long = "policy.batch")]
    batch: Option<usize>,

    /// Files per batch after a clean probe batch.
    #[arg(long = "policy.escalated")]
    escalated: Option<usize>,

    /// Disable batch escalation (fixed batch size).
    #[arg(long)]
    no_escalate: bool,

    /// Simultaneous batches.
    #[arg(long)]
    concurrency: Option<usize>,

    /// Parallel streams per batch.
    #[arg(long)]
    streams: Option<usize>,

    /// Named tuning level: minimal, default, aggressive, custom.
    #[arg(long)]
    network_use: Option<String>,

    /// Seconds of scheduling overhead charged per file.
    #[arg(long)]
    per_file_overhead: Option<f64>,

    /// Disable integrity checksums.
    #[arg(long)]
    no_checksum: bool,

    /// Re-transfers allowed per file.
    #[arg(long)]
    max_retries: Option<u32>,

    /// Per-file corruption probability for fault injection.
    #[arg(long, default_value_t = 0.0)]
    corruption_prob: f64,
}

impl PolicyArgs {
    fn build(&self) -> Result<TransferPolicy, CliError> {
        let mut policy = match &self.network_use {
            Some(level) => {
                let level: NetworkUse = level.parse().map_err(config_err)?;
                TransferPolicy::for_network_use(level)
            }
            None => TransferPolicy::default(),
        };
        if let Some(batch) = self.batch {
            policy.initial_batch_files = batch;
            if policy.escalated_batch_files < batch {
                policy.escalated_batch_files = batch;
            }
        }
        if let Some(escalated) = self.escalated {
            policy.escalated_batch_files = escalated;
        }
        if self.no_escalate {
            policy = policy.without_escalation();
        }
        if let Some(concurrency) = self.concurrency {
            policy.concurrency = concurrency;
            policy.network_use = NetworkUse::Custom;
        }
        if let Some(streams) = self.streams {
            policy.streams_per_batch = streams;
            policy.network_use = NetworkUse::Custom;
        }
        if let Some(overhead) = self.per_file_overhead {
            policy.per_file_overhead = overhead;
        }
        if self.no_checksum {
            policy.checksum_enabled = false;
        }
        if let Some(retries) = self.max_retries {
            policy.max_retries_per_file = retries;
        }
        policy.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(policy)
    }
}

#[derive(Args, Debug)]
struct ManifestSource {
    /// Manifest file to transfer.
    #[arg(long, conflicts_with = "gen_preset")]
    manifest: Option<PathBuf>,

    /// Generate the manifest in memory from a preset instead.
    #[arg(long)]
    gen_preset: Option<String>,

    /// Calibrate the generated manifest to the reference byte total.
    #[arg(long, requires = "gen_preset")]
    gen_calibrate: bool,
}

impl ManifestSource {
    fn load(&self, seed: u64) -> Result<DatasetManifest, CliError> {
        match (&self.manifest, &self.gen_preset) {
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    config_err(format!("cannot read manifest '{}': {e}", path.display()))
                })?;
                parse_manifest(&text).map_err(|e| config_err(e.to_string()))
            }
            (None, Some(preset)) => {
                let cfg = generator_config_for(preset, seed, self.gen_calibrate, None, 1.0)?;
                generate_manifest(&cfg).map_err(|e| config_err(e.to_string()))
            }
            _ => Err(config_err(
                "exactly one of --manifest or --gen-preset is required",
            )),
        }
    }
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[command(flatten)]
    source: ManifestSource,

    /// Source site id.
    #[arg(long)]
    src: String,

    /// Destination site id.
    #[arg(long)]
    dst: String,

    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    source: ManifestSource,

    /// Restrict the mesh to these sites (comma-separated).
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<String>>,

    /// Goal rate used for sub-goal flags, in Gb/s.
    #[arg(long, default_value_t = DEFAULT_GOAL_GBPS)]
    goal_gbps: f64,

    /// Also run component tests and triangulate bottlenecks.
    #[arg(long)]
    diagnose: bool,

    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args, Debug)]
struct ComponentsArgs {
    /// Site to test; all sites when omitted.
    #[arg(long)]
    site: Option<String>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: ManifestSource,

    /// Goal rate in Gb/s.
    #[arg(long, default_value_t = DEFAULT_GOAL_GBPS)]
    goal_gbps: f64,

    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Rate matrix CSV (as written by `mesh`).
    #[arg(long)]
    input: PathBuf,

    /// Goal rate in Gb/s.
    #[arg(long, default_value_t = DEFAULT_GOAL_GBPS)]
    goal_gbps: f64,
}

#[derive(Args, Debug)]
struct MaterializeArgs {
    /// Manifest file to materialize.
    #[arg(long)]
    manifest: PathBuf,

    /// Directory to write files under.
    #[arg(long)]
    root: PathBuf,

    /// Byte cap guarding against accidental disk fill.
    #[arg(long, default_value_t = 2_000_000_000)]
    cap_bytes: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenDataset(args) => cmd_gen_dataset(cli, args),
        Command::Transfer(args) => cmd_transfer(cli, args),
        Command::Mesh(args) => cmd_mesh(cli, args),
        Command::Components(args) => cmd_components(cli, args),
        Command::Diagnose(args) => cmd_diagnose(cli, args),
        Command::Render(args) => cmd_render(cli, args),
        Command::Materialize(args) => cmd_materialize(args),
    }
}

/// Resolves `--topology`: an existing file path, a file under
/// `$PDTN_FIXTURES`, or a built-in fixture name.
fn load_named_topology(name: &str) -> Result<Topology, CliError> {
    let path = Path::new(name);
    let text = if path.is_file() {
        fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read topology '{name}': {e}")))?
    } else {
        let from_env = std::env::var_os("PDTN_FIXTURES").map(PathBuf::from).and_then(|dir| {
            let candidate = dir.join(format!("{name}.json"));
            candidate.is_file().then_some(candidate)
        });
        match from_env {
            Some(candidate) => fs::read_to_string(&candidate).map_err(|e| {
                config_err(format!(
                    "cannot read topology '{}': {e}",
                    candidate.display()
                ))
            })?,
            None => fixtures::config_text(name)
                .ok_or_else(|| {
                    config_err(format!(
                        "topology '{name}' not found: no such file and no fixture by that name \
                         (fixtures: {})",
                        fixtures::NAMES.join(", ")
                    ))
                })?
                .to_string(),
        }
    };
    load_topology(&text).map_err(|e| config_err(e.to_string()))
}

fn required_topology(cli: &Cli) -> Result<Topology, CliError> {
    match &cli.topology {
        Some(name) => load_named_topology(name),
        None => Err(config_err("--topology is required for this command")),
    }
}

fn out_dir(cli: &Cli) -> Result<Option<&PathBuf>, CliError> {
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)
            .map_err(|e| config_err(format!("cannot create '{}': {e}", dir.display())))?;
    }
    Ok(cli.out.as_ref())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| config_err(format!("cannot write '{}': {e}", path.display())))
}

fn generator_config_for(
    preset: &str,
    seed: u64,
    calibrate: bool,
    total_bytes: Option<u64>,
    scale_factor: f64,
) -> Result<GeneratorConfig, CliError> {
    let mut cfg = match preset {
        "petascale-reference" => GeneratorConfig::reference(seed),
        "empty" => GeneratorConfig::empty(seed),
        other => {
            return Err(config_err(format!(
                "unknown preset '{other}' (available: petascale-reference, empty)"
            )))
        }
    };
    cfg.scale_factor = scale_factor;
    if calibrate {
        cfg.calibrate_total_bytes =
            Some(total_bytes.unwrap_or(dataset::REFERENCE_TOTAL_BYTES));
    }
    Ok(cfg)
}

fn parse_counts(spec: &str) -> Result<SizeHistogram, CliError> {
    let mut counts = std::collections::BTreeMap::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (label, count) = part
            .split_once('=')
            .ok_or_else(|| config_err(format!("bad counts entry '{part}', want LABEL=N")))?;
        let decade = decade_for_label(label.trim())
            .ok_or_else(|| config_err(format!("unknown decade label '{label}'")))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|e| config_err(format!("bad count in '{part}': {e}")))?;
        *counts.entry(decade).or_insert(0) += count;
    }
    Ok(SizeHistogram::from_counts(counts, 0))
}

fn histogram_table(hist: &SizeHistogram) -> String {
    let mut out = String::from("size range      files\n");
    for (label, count) in hist.labeled_counts() {
        out.push_str(&format!("{label:<14} {count:>6}\n"));
    }
    out
}

fn cmd_gen_dataset(cli: &Cli, args: &GenDatasetArgs) -> Result<(), CliError> {
    let cfg = if args.empty {
        let mut cfg = GeneratorConfig::empty(cli.seed);
        cfg.scale_factor = args.scale_factor;
        cfg
    } else if let Some(counts) = &args.counts {
        let mut cfg = GeneratorConfig {
            counts: parse_counts(counts)?,
            directory_count: args.dirs.unwrap_or(0),
            seed: cli.seed,
            scale_factor: args.scale_factor,
            calibrate_total_bytes: None,
        };
        if args.calibrate {
            cfg.calibrate_total_bytes = Some(
                args.total_bytes
                    .ok_or_else(|| config_err("--calibrate with --counts needs --total-bytes"))?,
            );
        }
        cfg
    } else {
        let preset = args.preset.as_deref().unwrap_or("petascale-reference");
        let mut cfg = generator_config_for(
            preset,
            cli.seed,
            args.calibrate,
            args.total_bytes,
            args.scale_factor,
        )?;
        if let Some(dirs) = args.dirs {
            cfg.directory_count = dirs;
        }
        cfg
    };

    let manifest = generate_manifest(&cfg).map_err(|e| config_err(e.to_string()))?;
    let text = write_manifest(&manifest);
    let hist = summarize(&manifest);
    match &args.output {
        Some(path) => {
            fs::write(path, &text)
                .map_err(|e| config_err(format!("cannot write '{}': {e}", path.display())))?;
            print!("{}", histogram_table(&hist));
            println!(
                "files={} dirs={} bytes={} -> {}",
                manifest.file_count(),
                manifest.directory_count,
                manifest.total_bytes(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_transfer(cli: &Cli, args: &TransferArgs) -> Result<(), CliError> {
    let topo = required_topology(cli)?;
    let manifest = args.source.load(cli.seed)?;
    let mut job = TransferJob::new(
        format!("transfer-{}-{}", args.src, args.dst),
        manifest,
        args.src.clone(),
        args.dst.clone(),
        cli.seed,
    );
    job.policy = args.policy.build()?;
    job.corruption_probability = args.policy.corruption_prob;
    let outcome = execute(&job, &topo, &SimConfig::default())?;
    println!("{}", outcome.report.summary_line());
    if let Some(dir) = out_dir(cli)? {
        write_out(dir, "report.json", &outcome.report.to_json())?;
        write_out(dir, "events.log", &log_to_text(&outcome.log))?;
    }
    if cli.format == OutputFormat::Structured {
        println!("{}", outcome.report.to_json());
    }
    Ok(())
}

fn mesh_config(policy: &PolicyArgs, sites: Option<Vec<String>>) -> Result<MeshConfig, CliError> {
    Ok(MeshConfig {
        policy: policy.build()?,
        corruption_probability: policy.corruption_prob,
        sites,
        ..MeshConfig::default()
    })
}

fn emit_matrix(
    cli: &Cli,
    matrix: &RateMatrix,
    goal: f64,
) -> Result<(), CliError> {
    let table = render_matrix(matrix, goal);
    let csv = matrix.to_csv();
    match cli.format {
        OutputFormat::Text => print!("{table}"),
        OutputFormat::Csv => print!("{csv}"),
        OutputFormat::Structured => {
            let rows: Vec<serde_json::Value> = matrix
                .ordered_pairs()
                .into_iter()
                .filter_map(|(s, d)| {
                    matrix.get(&s, &d).map(|r| {
                        serde_json::json!({"src": s, "dst": d, "gbps": r / 1e9})
                    })
                })
                .collect();
            let doc = serde_json::json!({"sites": matrix.sites, "rates": rows});
            println!("{}", serde_json::to_string_pretty(&doc).expect("matrix json"));
        }
    }
    if !matrix.failures.is_empty() {
        for f in &matrix.failures {
            eprintln!("pair {}->{} failed: {}", f.src, f.dst, f.reason);
        }
    }
    if let Some(dir) = out_dir(cli)? {
        write_out(dir, "matrix.txt", &table)?;
        write_out(dir, "matrix.csv", &csv)?;
    }
    Ok(())
}

fn components_json(reports: &[ComponentReport]) -> String {
    let docs: Vec<serde_json::Value> = reports
        .iter()
        .map(|c| {
            serde_json::json!({
                "site": c.site,
                "fs_read_gbps": c.fs_read_rate / 1e9,
                "fs_write_gbps": c.fs_write_rate / 1e9,
                "dtn_loopback_gbps": c.dtn_loopback_rate / 1e9,
                "wan_path_gbps": c
                    .wan_path_rates
                    .iter()
                    .map(|(peer, r)| (peer.clone(), r / 1e9))
                    .collect::<std::collections::BTreeMap<String, f64>>(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("components json")
}

fn components_text(reports: &[ComponentReport]) -> String {
    let mut out = String::new();
    for c in reports {
        out.push_str(&format!(
            "site {}: fs_read {:.1} Gb/s, fs_write {:.1} Gb/s, loopback {:.1} Gb/s\n",
            c.site,
            c.fs_read_rate / 1e9,
            c.fs_write_rate / 1e9,
            c.dtn_loopback_rate / 1e9
        ));
        for (peer, rate) in &c.wan_path_rates {
            out.push_str(&format!("  wan -> {peer}: {:.1} Gb/s\n", rate / 1e9));
        }
    }
    out
}

fn all_component_reports(
    topo: &Topology,
    seed: u64,
    only: Option<&str>,
) -> Result<Vec<ComponentReport>, CliError> {
    let mut reports = Vec::new();
    for site in &topo.sites {
        if let Some(only) = only {
            if site.id != only {
                continue;
            }
        }
        reports.push(component_tests(topo, &site.id, seed)?);
    }
    if reports.is_empty() {
        return Err(config_err(match only {
            Some(site) => format!("site '{site}' not in topology"),
            None => "topology has no sites".to_string(),
        }));
    }
    Ok(reports)
}

fn cmd_mesh(cli: &Cli, args: &MeshArgs) -> Result<(), CliError> {
    let topo = required_topology(cli)?;
    let manifest = args.source.load(cli.seed)?;
    let cfg = mesh_config(&args.policy, args.sites.clone())?;
    let goal = args.goal_gbps * 1e9;
    let matrix = run_mesh(&topo, &manifest, &cfg, cli.seed)?;
    emit_matrix(cli, &matrix, goal)?;
    if args.diagnose {
        let reports = all_component_reports(&topo, cli.seed, None)?;
        let diagnoses = triangulate(&matrix, &reports, goal)?;
        let json = diagnosis_to_json(&diagnoses, goal);
        println!("{json}");
        if let Some(dir) = out_dir(cli)? {
            write_out(dir, "components.json", &components_json(&reports))?;
            write_out(dir, "diagnosis.json", &json)?;
        }
    }
    Ok(())
}

fn cmd_components(cli: &Cli, args: &ComponentsArgs) -> Result<(), CliError> {
    let topo = required_topology(cli)?;
    let reports = all_component_reports(&topo, cli.seed, args.site.as_deref())?;
    match cli.format {
        OutputFormat::Structured | OutputFormat::Csv => println!("{}", components_json(&reports)),
        OutputFormat::Text => print!("{}", components_text(&reports)),
    }
    if let Some(dir) = out_dir(cli)? {
        write_out(dir, "components.json", &components_json(&reports))?;
    }
    Ok(())
}

fn cmd_diagnose(cli: &Cli, args: &DiagnoseArgs) -> Result<(), CliError> {
    let topo = required_topology(cli)?;
    let manifest = args.source.load(cli.seed)?;
    let cfg = mesh_config(&args.policy, None)?;
    let goal = args.goal_gbps * 1e9;
    let matrix = run_mesh(&topo, &manifest, &cfg, cli.seed)?;
    let reports = all_component_reports(&topo, cli.seed, None)?;
    let diagnoses = triangulate(&matrix, &reports, goal)?;
    print!("{}", render_matrix(&matrix, goal));
    if diagnoses.is_empty() {
        println!("no bottleneck: every measurement meets {:.1} Gb/s", goal / 1e9);
    } else {
        println!("{}", diagnosis_to_json(&diagnoses, goal));
    }
    if let Some(dir) = out_dir(cli)? {
        write_out(dir, "matrix.txt", &render_matrix(&matrix, goal))?;
        write_out(dir, "matrix.csv", &matrix.to_csv())?;
        write_out(dir, "components.json", &components_json(&reports))?;
        write_out(dir, "diagnosis.json", &diagnosis_to_json(&diagnoses, goal))?;
    }
    Ok(())
}

fn cmd_render(cli: &Cli, args: &RenderArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| config_err(format!("cannot read '{}': {e}", args.input.display())))?;
    let matrix = RateMatrix::from_csv(&text).map_err(|e| config_err(e.to_string()))?;
    let table = render_matrix(&matrix, args.goal_gbps * 1e9);
    print!("{table}");
    if let Some(dir) = out_dir(cli)? {
        write_out(dir, "matrix.txt", &table)?;
    }
    Ok(())
}

fn cmd_materialize(args: &MaterializeArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| config_err(format!("cannot read '{}': {e}", args.manifest.display())))?;
    let manifest = parse_manifest(&text).map_err(|e| config_err(e.to_string()))?;
    let opts = dataset::MaterializeOptions {
        cap_bytes: args.cap_bytes,
    };
    let written = dataset::materialize(&manifest, &args.root, &opts)
        .map_err(|e| config_err(e.to_string()))?;
    println!("wrote {written} files under {}", args.root.display());
    Ok(())
}
