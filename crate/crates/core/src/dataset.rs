//! Test data set modeling: generate a file tree with a prescribed size
//! histogram, summarize it, serialize it, and optionally materialize it on
//! disk for real hashing at desk scale.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::content::ContentStream;
use crate::rng::SplitMix64;

/// Reference data set shape: 19,260 files in 211 directories totalling
/// 4,442,781,786,482 bytes, with the per-decade file counts below.
pub const REFERENCE_DIRECTORY_COUNT: u64 = 211;
pub const REFERENCE_FILE_COUNT: u64 = 19_260;
pub const REFERENCE_TOTAL_BYTES: u64 = 4_442_781_786_482;

const REFERENCE_DECADE_COUNTS: [(u32, u64); 11] = [
    (0, 7),
    (1, 1),
    (2, 59),
    (3, 3170),
    (4, 1560),
    (5, 2817),
    (6, 3901),
    (7, 3800),
    (8, 2295),
    (9, 1647),
    (10, 3),
];

/// One file in a manifest. `path` uses `/` separators and no leading `/`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub path: String,
    pub size_bytes: u64,
    pub content_seed: u64,
}

/// The file tree to transfer. Entries are ordered depth-first
/// lexicographically and the ordering is deterministic for a fixed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<FileEntry>,
    pub directory_count: u64,
    pub generator_seed: u64,
    pub scale_factor: f64,
}

impl DatasetManifest {
    pub fn file_count(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries
            .iter()
            .map(|e| e.size_bytes as u128)
            .sum::<u128>()
            .min(u64::MAX as u128) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// File counts per order of magnitude. A file of size `s` lands in decade
/// `[10^k, 10^(k+1))`; sizes below 10 (including zero-byte files) land in
/// the "0-10" bucket. Zero-count buckets are not stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SizeHistogram {
    decade_counts: BTreeMap<u32, u64>,
    pub total_bytes: u64,
}

impl SizeHistogram {
    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(counts: I, total_bytes: u64) -> Self {
        let decade_counts = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        Self {
            decade_counts,
            total_bytes,
        }
    }

    pub fn count(&self, decade: u32) -> u64 {
        self.decade_counts.get(&decade).copied().unwrap_or(0)
    }

    pub fn count_for_label(&self, label: &str) -> u64 {
        decade_for_label(label).map_or(0, |d| self.count(d))
    }

    pub fn file_count(&self) -> u64 {
        self.decade_counts.values().sum()
    }

    pub fn decades(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.decade_counts.iter().map(|(&d, &c)| (d, c))
    }

    pub fn labeled_counts(&self) -> Vec<(String, u64)> {
        self.decades().map(|(d, c)| (decade_label(d), c)).collect()
    }
}

/// The reference histogram (counts and byte total above).
pub fn reference_histogram() -> SizeHistogram {
    SizeHistogram::from_counts(REFERENCE_DECADE_COUNTS, REFERENCE_TOTAL_BYTES)
}

/// Decade index for a size in bytes: 0 for [0,10), k for [10^k, 10^(k+1)).
pub fn decade_of(size: u64) -> u32 {
    let mut k = 0u32;
    let mut bound = 10u64;
    while size >= bound {
        k += 1;
        if bound > u64::MAX / 10 {
            break;
        }
        bound *= 10;
    }
    k
}

fn pow10_name(exp: u32) -> String {
    let units = ["", "K", "M", "G", "T", "P", "E"];
    let unit = units[(exp / 3) as usize];
    let lead = 10u64.pow(exp % 3);
    format!("{lead}{unit}")
}

/// Human label for a decade, matching the histogram table convention:
/// "0-10", "10-100", "100-1K", "1K-10K", ... "10G-100G".
pub fn decade_label(decade: u32) -> String {
    if decade == 0 {
        "0-10".to_string()
    } else {
        format!("{}-{}", pow10_name(decade), pow10_name(decade + 1))
    }
}

pub fn decade_for_label(label: &str) -> Option<u32> {
    (0..=19).find(|&d| decade_label(d) == label)
}

fn decade_bounds(decade: u32) -> (u64, u64) {
    // Inclusive [lo, hi] integer bounds; the top decade is clamped to the
    // largest representable size.
    if decade == 0 {
        (0, 9)
    } else {
        let lo = 10u64.pow(decade);
        let hi = if decade >= 19 { u64::MAX } else { lo * 10 - 1 };
        (lo, hi)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(
        "infeasible calibration: target {target} bytes outside reachable range \
         [{min}, {max}]; binding decade {decade}"
    )]
    InfeasibleCalibration {
        target: u64,
        min: u64,
        max: u64,
        decade: String,
    },
    #[error(
        "infeasible directory count: {directories} directories need at least \
         {required_files} files, manifest has {files}"
    )]
    InfeasibleDirectories {
        directories: u64,
        required_files: u64,
        files: u64,
    },
    #[error("materialize would write {total_bytes} bytes, over the {cap_bytes} byte cap")]
    CapExceeded { total_bytes: u64, cap_bytes: u64 },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("manifest header disagrees with body: {field} header={header} body={body}")]
    HeaderMismatch {
        field: &'static str,
        header: u64,
        body: u64,
    },
}

/// Generation parameters. `counts` fixes the decade histogram exactly;
/// `calibrate_total_bytes`, when set, steers the byte total to within
/// ±0.5% of `scale_factor * calibrate_total_bytes`.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub counts: SizeHistogram,
    pub directory_count: u64,
    pub seed: u64,
    pub scale_factor: f64,
    pub calibrate_total_bytes: Option<u64>,
}

impl GeneratorConfig {
    pub fn reference(seed: u64) -> Self {
        Self {
            counts: reference_histogram(),
            directory_count: REFERENCE_DIRECTORY_COUNT,
            seed,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        }
    }

    pub fn reference_calibrated(seed: u64) -> Self {
        Self {
            calibrate_total_bytes: Some(REFERENCE_TOTAL_BYTES),
            ..Self::reference(seed)
        }
    }

    pub fn empty(seed: u64) -> Self {
        Self {
            counts: SizeHistogram::default(),
            directory_count: 0,
            seed,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        }
    }
}

struct DirTree {
    /// Directory paths in creation (BFS) order.
    dirs: Vec<String>,
    /// Indices into `dirs` of directories with no child directory.
    leaves: Vec<usize>,
}

/// Builds `count` directories at most three levels deep, named by a global
/// counter, breadth-first with the smallest branching factor whose
/// three-level capacity covers the count.
fn build_dir_tree(count: u64) -> DirTree {
    if count == 0 {
        return DirTree {
            dirs: Vec::new(),
            leaves: Vec::new(),
        };
    }
    // Smallest branching factor whose three-level capacity covers the count.
    let mut branch = 1u64;
    while branch + branch * branch + branch * branch * branch < count {
        branch += 1;
    }
    let width = count.to_string().len().max(3);
    let mut dirs: Vec<String> = Vec::with_capacity(count as usize);
    let mut depth: Vec<u8> = Vec::with_capacity(count as usize);
    let mut has_child: Vec<bool> = Vec::with_capacity(count as usize);
    // Heap-style breadth-first parenting: directory i hangs off parents[i/branch],
    // where parents[0] is the root and the rest are prior directories shallower
    // than the depth limit.
    let mut parents: Vec<Option<usize>> = vec![None];
    for idx in 0..count as usize {
        let parent = parents[idx / branch as usize];
        let name = format!("d{idx:0w$}", w = width);
        let (path, d) = match parent {
            None => (name, 1u8),
            Some(pi) => (format!("{}/{name}", dirs[pi]), depth[pi] + 1),
        };
        if let Some(pi) = parent {
            has_child[pi] = true;
        }
        dirs.push(path);
        depth.push(d);
        has_child.push(false);
        if d < 3 {
            parents.push(Some(idx));
        }
    }
    let leaves = (0..dirs.len()).filter(|&i| !has_child[i]).collect();
    DirTree { dirs, leaves }
}

/// Generates a manifest whose decade histogram equals `cfg.counts` exactly,
/// spread over exactly `cfg.directory_count` directories. Deterministic for
/// a fixed seed.
pub fn generate_manifest(cfg: &GeneratorConfig) -> Result<DatasetManifest, DatasetError> {
    if !cfg.scale_factor.is_finite() || cfg.scale_factor <= 0.0 {
        return Err(DatasetError::InvalidConfig(format!(
            "scale_factor must be a positive finite number, got {}",
            cfg.scale_factor
        )));
    }
    if let Some(t) = cfg.calibrate_total_bytes {
        if t == 0 {
            return Err(DatasetError::InvalidConfig(
                "calibration target must be positive".into(),
            ));
        }
    }
    if let Some((decade, _)) = cfg.counts.decades().find(|&(d, _)| d > 19) {
        return Err(DatasetError::InvalidConfig(format!(
            "decade {decade} exceeds the largest representable file size"
        )));
    }

    let file_count: u64 = cfg.counts.file_count();
    let mut rng = SplitMix64::new(cfg.seed);

    // Sample sizes decade by decade, ascending, log-uniform within the decade.
    let mut sizes: Vec<(u32, u64)> = Vec::with_capacity(file_count as usize);
    for (decade, count) in cfg.counts.decades() {
        let (lo, hi) = decade_bounds(decade);
        for _ in 0..count {
            let size = if decade == 0 {
                rng.next_below(10)
            } else {
                let u = rng.next_unit_f64();
                let s = (lo as f64) * 10f64.powf(u);
                (s.floor() as u64).clamp(lo, hi)
            };
            sizes.push((decade, size));
        }
    }

    if let Some(base_target) = cfg.calibrate_total_bytes {
        calibrate(&mut sizes, cfg.scale_factor, base_target)?;
    }

    // Directory shaping: every leaf directory gets one file so that each
    // directory is the prefix of at least one entry path.
    let tree = build_dir_tree(cfg.directory_count);
    if file_count == 0 {
        if cfg.directory_count != 0 {
            return Err(DatasetError::InfeasibleDirectories {
                directories: cfg.directory_count,
                required_files: tree.leaves.len().max(1) as u64,
                files: 0,
            });
        }
        return Ok(DatasetManifest {
            entries: Vec::new(),
            directory_count: 0,
            generator_seed: cfg.seed,
            scale_factor: cfg.scale_factor,
        });
    }
    if (tree.leaves.len() as u64) > file_count {
        return Err(DatasetError::InfeasibleDirectories {
            directories: cfg.directory_count,
            required_files: tree.leaves.len() as u64,
            files: file_count,
        });
    }

    // Interleave sizes across the tree: shuffle, then deal one file to each
    // leaf first and the rest round-robin over all directories.
    rng.shuffle(&mut sizes);
    let mut per_dir_counter: Vec<u64> = vec![0; tree.dirs.len().max(1)];
    let mut root_counter = 0u64;
    let mut entries: Vec<FileEntry> = Vec::with_capacity(sizes.len());
    for (i, &(_, size)) in sizes.iter().enumerate() {
        let content_seed = rng.next_u64();
        let path = if tree.dirs.is_empty() {
            let name = format!("f{root_counter:05}.dat");
            root_counter += 1;
            name
        } else {
            let dir_idx = if i < tree.leaves.len() {
                tree.leaves[i]
            } else {
                (i - tree.leaves.len()) % tree.dirs.len()
            };
            let n = per_dir_counter[dir_idx];
            per_dir_counter[dir_idx] += 1;
            format!("{}/f{n:05}.dat", tree.dirs[dir_idx])
        };
        entries.push(FileEntry {
            path,
            size_bytes: size,
            content_seed,
        });
    }

    entries.sort_by(|a, b| path_components(&a.path).cmp(&path_components(&b.path)));

    Ok(DatasetManifest {
        entries,
        directory_count: cfg.directory_count,
        generator_seed: cfg.seed,
        scale_factor: cfg.scale_factor,
    })
}

/// Single multiplicative pass clamped to decade bounds, then a greedy
/// residual spread starting from the decade holding the most bytes. Exact
/// whenever the target lies inside the reachable range.
fn calibrate(
    sizes: &mut [(u32, u64)],
    scale_factor: f64,
    base_target: u64,
) -> Result<(), DatasetError> {
    let target = (scale_factor * base_target as f64).round();
    if !target.is_finite() || target < 1.0 || target > u64::MAX as f64 {
        return Err(DatasetError::InvalidConfig(format!(
            "scaled calibration target {target} is out of range"
        )));
    }
    let target = target as u64;

    let mut min_total: u128 = 0;
    let mut max_total: u128 = 0;
    let mut per_decade_min: BTreeMap<u32, u128> = BTreeMap::new();
    let mut per_decade_max: BTreeMap<u32, u128> = BTreeMap::new();
    for &(decade, _) in sizes.iter() {
        let (lo, hi) = decade_bounds(decade);
        min_total += lo as u128;
        max_total += hi as u128;
        *per_decade_min.entry(decade).or_insert(0) += lo as u128;
        *per_decade_max.entry(decade).or_insert(0) += hi as u128;
    }
    if (target as u128) < min_total || (target as u128) > max_total {
        let binding = if (target as u128) < min_total {
            per_decade_min.iter().max_by_key(|(_, &v)| v)
        } else {
            per_decade_max.iter().max_by_key(|(_, &v)| v)
        };
        return Err(DatasetError::InfeasibleCalibration {
            target,
            min: min_total.min(u64::MAX as u128) as u64,
            max: max_total.min(u64::MAX as u128) as u64,
            decade: binding.map_or_else(|| "none".into(), |(&d, _)| decade_label(d)),
        });
    }

    let current: u128 = sizes.iter().map(|&(_, s)| s as u128).sum();
    if current > 0 {
        let factor = target as f64 / current as f64;
        for (decade, size) in sizes.iter_mut() {
            let (lo, hi) = decade_bounds(*decade);
            *size = ((*size as f64 * factor).round() as u64).clamp(lo, hi);
        }
    }

    // Residual pass: decades ordered by bytes held, richest first.
    let mut decade_totals: BTreeMap<u32, u128> = BTreeMap::new();
    for &(decade, size) in sizes.iter() {
        *decade_totals.entry(decade).or_insert(0) += size as u128;
    }
    let mut order: Vec<u32> = decade_totals.keys().copied().collect();
    order.sort_by(|a, b| {
        decade_totals[b]
            .cmp(&decade_totals[a])
            .then_with(|| b.cmp(a))
    });

    let mut residual: i128 =
        target as i128 - sizes.iter().map(|&(_, s)| s as i128).sum::<i128>();
    for decade in order {
        if residual == 0 {
            break;
        }
        let (lo, hi) = decade_bounds(decade);
        for (d, size) in sizes.iter_mut() {
            if *d != decade || residual == 0 {
                continue;
            }
            if residual > 0 {
                let slack = (hi - *size) as i128;
                let add = slack.min(residual);
                *size += add as u64;
                residual -= add;
            } else {
                let slack = (*size - lo) as i128;
                let sub = slack.min(-residual);
                *size -= sub as u64;
                residual += sub;
            }
        }
    }
    debug_assert_eq!(residual, 0);
    Ok(())
}

fn path_components(path: &str) -> Vec<&str> {
    path.split('/').collect()
}

/// Number of distinct directory prefixes among entry paths, counting every
/// ancestor level.
pub fn distinct_directory_prefixes(entries: &[FileEntry]) -> u64 {
    let mut dirs: BTreeSet<&str> = BTreeSet::new();
    for entry in entries {
        for (i, &b) in entry.path.as_bytes().iter().enumerate() {
            if b == b'/' {
                dirs.insert(&entry.path[..i]);
            }
        }
    }
    dirs.len() as u64
}

/// Histogram of a manifest: counts per decade plus the exact byte total.
pub fn summarize(manifest: &DatasetManifest) -> SizeHistogram {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    let mut total: u64 = 0;
    for entry in &manifest.entries {
        *counts.entry(decade_of(entry.size_bytes)).or_insert(0) += 1;
        total += entry.size_bytes;
    }
    SizeHistogram::from_counts(counts, total)
}

#[derive(Debug, Clone)]
pub struct MaterializeOptions {
    /// Refuse to write more than this many bytes in total.
    pub cap_bytes: u64,
}

impl Default for MaterializeOptions {
    fn default() -> Self {
        Self {
            cap_bytes: 2_000_000_000,
        }
    }
}

/// Writes every manifest entry under `root_dir` with its exact size and
/// deterministic content. Idempotent. Returns the number of files written.
pub fn materialize(
    manifest: &DatasetManifest,
    root_dir: &Path,
    opts: &MaterializeOptions,
) -> Result<u64, DatasetError> {
    let total = manifest.total_bytes();
    if total > opts.cap_bytes {
        return Err(DatasetError::CapExceeded {
            total_bytes: total,
            cap_bytes: opts.cap_bytes,
        });
    }
    let io_err = |path: &Path, source: std::io::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut written = 0u64;
    for entry in &manifest.entries {
        let target = root_dir.join(&entry.path);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        let file = fs::File::create(&target).map_err(|e| io_err(&target, e))?;
        let mut writer = std::io::BufWriter::new(file);
        let mut stream = ContentStream::new(entry.content_seed);
        let mut buf = [0u8; 64 * 1024];
        let mut remaining = entry.size_bytes;
        while remaining > 0 {
            let take = remaining.min(buf.len() as u64) as usize;
            stream.fill(&mut buf[..take]);
            writer.write_all(&buf[..take]).map_err(|e| io_err(&target, e))?;
            remaining -= take as u64;
        }
        writer.flush().map_err(|e| io_err(&target, e))?;
        written += 1;
    }
    Ok(written)
}

/// Serializes a manifest in the on-disk format: a header line
/// `pdtn-manifest v1 seed=<hex> dirs=<n> files=<n> bytes=<n>` followed by
/// one `path TAB size_bytes TAB content_seed_hex` record per file.
pub fn write_manifest(manifest: &DatasetManifest) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "pdtn-manifest v1 seed={:016x} dirs={} files={} bytes={}\n",
        manifest.generator_seed,
        manifest.directory_count,
        manifest.file_count(),
        manifest.total_bytes(),
    ));
    for entry in &manifest.entries {
        out.push_str(&format!(
            "{}\t{}\t{:016x}\n",
            entry.path, entry.size_bytes, entry.content_seed
        ));
    }
    out
}

/// Parses the on-disk format, validating that the header totals agree with
/// the body. The scale factor is a generation-time parameter and is not
/// persisted; parsed manifests report 1.0.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DatasetError::Format {
        line: 1,
        msg: "empty manifest file".into(),
    })?;
    let fmt_err = |line: usize, msg: String| DatasetError::Format { line, msg };

    let mut seed = None;
    let mut dirs = None;
    let mut files = None;
    let mut bytes = None;
    let mut parts = header.split(' ');
    if parts.next() != Some("pdtn-manifest") || parts.next() != Some("v1") {
        return Err(fmt_err(1, "expected header 'pdtn-manifest v1 ...'".into()));
    }
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| fmt_err(1, format!("malformed header field '{part}'")))?;
        match key {
            "seed" => {
                seed = Some(u64::from_str_radix(value, 16).map_err(|e| {
                    fmt_err(1, format!("bad seed '{value}': {e}"))
                })?)
            }
            "dirs" => dirs = value.parse::<u64>().ok(),
            "files" => files = value.parse::<u64>().ok(),
            "bytes" => bytes = value.parse::<u64>().ok(),
            other => return Err(fmt_err(1, format!("unknown header field '{other}'"))),
        }
    }
    let (seed, dirs, files, bytes) = match (seed, dirs, files, bytes) {
        (Some(s), Some(d), Some(f), Some(b)) => (s, d, f, b),
        _ => return Err(fmt_err(1, "header missing seed/dirs/files/bytes".into())),
    };

    let mut entries = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let path = cols
            .next()
            .filter(|p| !p.is_empty() && !p.starts_with('/'))
            .ok_or_else(|| fmt_err(idx + 1, "bad path column".into()))?;
        let size = cols
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| fmt_err(idx + 1, "bad size column".into()))?;
        let content_seed = cols
            .next()
            .and_then(|s| u64::from_str_radix(s, 16).ok())
            .ok_or_else(|| fmt_err(idx + 1, "bad content seed column".into()))?;
        if cols.next().is_some() {
            return Err(fmt_err(idx + 1, "too many columns".into()));
        }
        entries.push(FileEntry {
            path: path.to_string(),
            size_bytes: size,
            content_seed,
        });
    }

    let mut seen = BTreeSet::new();
    for (i, entry) in entries.iter().enumerate() {
        if !seen.insert(entry.path.as_str()) {
            return Err(fmt_err(i + 2, format!("duplicate path '{}'", entry.path)));
        }
    }
    let manifest = DatasetManifest {
        entries,
        directory_count: dirs,
        generator_seed: seed,
        scale_factor: 1.0,
    };
    if manifest.file_count() != files {
        return Err(DatasetError::HeaderMismatch {
            field: "files",
            header: files,
            body: manifest.file_count(),
        });
    }
    if manifest.total_bytes() != bytes {
        return Err(DatasetError::HeaderMismatch {
            field: "bytes",
            header: bytes,
            body: manifest.total_bytes(),
        });
    }
    let body_dirs = distinct_directory_prefixes(&manifest.entries);
    if body_dirs != dirs {
        return Err(DatasetError::HeaderMismatch {
            field: "dirs",
            header: dirs,
            body: body_dirs,
        });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::checksum_of;
    use proptest::prelude::*;
    use sha2::{Digest, Sha256};

    #[test]
    fn reference_counts_and_directories() {
        let m = generate_manifest(&GeneratorConfig::reference(42)).unwrap();
        assert_eq!(m.file_count(), 19_260);
        assert_eq!(m.directory_count, 211);
        assert_eq!(distinct_directory_prefixes(&m.entries), 211);
    }

    #[test]
    fn all_zero_spec_gives_empty_manifest() {
        let m = generate_manifest(&GeneratorConfig::empty(1)).unwrap();
        assert!(m.entries.is_empty());
        assert_eq!(m.directory_count, 0);
        assert_eq!(m.total_bytes(), 0);
    }

    #[test]
    fn calibrated_total_within_half_percent() {
        let m = generate_manifest(&GeneratorConfig::reference_calibrated(42)).unwrap();
        // Independent re-summation over the emitted entries.
        let total: u128 = m.entries.iter().map(|e| e.size_bytes as u128).sum();
        let target = REFERENCE_TOTAL_BYTES as f64;
        let err = (total as f64 - target).abs() / target;
        assert!(err <= 0.005, "calibration error {err}");
        // Histogram is still exact after calibration.
        let hist = summarize(&m);
        for (d, c) in reference_histogram().decades() {
            assert_eq!(hist.count(d), c, "decade {}", decade_label(d));
        }
    }

    #[test]
    fn infeasible_calibration_names_binding_decade() {
        let cfg = GeneratorConfig {
            calibrate_total_bytes: Some(REFERENCE_TOTAL_BYTES),
            scale_factor: 0.001,
            ..GeneratorConfig::reference(7)
        };
        match generate_manifest(&cfg) {
            Err(DatasetError::InfeasibleCalibration { decade, .. }) => {
                assert_eq!(decade, "1G-10G");
            }
            other => panic!("expected infeasible calibration, got {other:?}"),
        }
    }

    #[test]
    fn summarize_reference_matches_spec_counts() {
        let m = generate_manifest(&GeneratorConfig::reference(42)).unwrap();
        let hist = summarize(&m);
        assert_eq!(hist.count_for_label("1K-10K"), 3170);
        assert_eq!(hist.count_for_label("0-10"), 7);
        assert_eq!(hist.count_for_label("10G-100G"), 3);
    }

    #[test]
    fn summarize_empty_manifest() {
        let m = generate_manifest(&GeneratorConfig::empty(0)).unwrap();
        let hist = summarize(&m);
        assert_eq!(hist.file_count(), 0);
        assert_eq!(hist.total_bytes, 0);
        assert_eq!(hist.count_for_label("1K-10K"), 0);
    }

    #[test]
    fn summarize_hand_bucketed_sizes() {
        let m = DatasetManifest {
            entries: vec![
                FileEntry {
                    path: "a".into(),
                    size_bytes: 5,
                    content_seed: 1,
                },
                FileEntry {
                    path: "b".into(),
                    size_bytes: 500,
                    content_seed: 2,
                },
                FileEntry {
                    path: "c".into(),
                    size_bytes: 5_000_000,
                    content_seed: 3,
                },
            ],
            directory_count: 0,
            generator_seed: 0,
            scale_factor: 1.0,
        };
        let hist = summarize(&m);
        assert_eq!(hist.count_for_label("0-10"), 1);
        assert_eq!(hist.count_for_label("100-1K"), 1);
        assert_eq!(hist.count_for_label("1M-10M"), 1);
        assert_eq!(hist.file_count(), 3);
        assert_eq!(hist.total_bytes, 5_000_505);
    }

    #[test]
    fn bucket_boundaries_are_lower_inclusive() {
        assert_eq!(decade_of(0), 0);
        assert_eq!(decade_of(9), 0);
        assert_eq!(decade_of(10), 1);
        assert_eq!(decade_of(999), 2);
        assert_eq!(decade_of(1000), 3);
        assert_eq!(decade_of(9_999_999_999), 9);
        assert_eq!(decade_of(10_000_000_000), 10);
    }

    #[test]
    fn materialize_zero_byte_file() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest {
            entries: vec![FileEntry {
                path: "empty.dat".into(),
                size_bytes: 0,
                content_seed: 9,
            }],
            directory_count: 0,
            generator_seed: 0,
            scale_factor: 1.0,
        };
        let n = materialize(&m, dir.path(), &MaterializeOptions::default()).unwrap();
        assert_eq!(n, 1);
        let meta = std::fs::metadata(dir.path().join("empty.dat")).unwrap();
        assert_eq!(meta.len(), 0);
    }

    #[test]
    fn materialized_bytes_hash_to_engine_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let seed = 0x5eed;
        let size = 1_048_576u64;
        let m = DatasetManifest {
            entries: vec![FileEntry {
                path: "sub/file.dat".into(),
                size_bytes: size,
                content_seed: seed,
            }],
            directory_count: 1,
            generator_seed: 0,
            scale_factor: 1.0,
        };
        materialize(&m, dir.path(), &MaterializeOptions::default()).unwrap();
        let bytes = std::fs::read(dir.path().join("sub/file.dat")).unwrap();
        assert_eq!(bytes.len() as u64, size);
        // Recompute the digest from the raw file, independent of the stream.
        let mut h = Sha256::new();
        h.update(&bytes);
        let on_disk: [u8; 32] = h.finalize().into();
        assert_eq!(on_disk, checksum_of(seed, size));
    }

    #[test]
    fn materialize_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_manifest(&GeneratorConfig {
            counts: SizeHistogram::from_counts([(2, 5)], 0),
            directory_count: 2,
            seed: 3,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        })
        .unwrap();
        let a = materialize(&m, dir.path(), &MaterializeOptions::default()).unwrap();
        let b = materialize(&m, dir.path(), &MaterializeOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn materialize_cap_exceeded_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let m = DatasetManifest {
            entries: vec![FileEntry {
                path: "big.dat".into(),
                size_bytes: 3_000_000_000,
                content_seed: 0,
            }],
            directory_count: 0,
            generator_seed: 0,
            scale_factor: 1.0,
        };
        let err = materialize(&m, dir.path(), &MaterializeOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::CapExceeded { .. }));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_manifest(&GeneratorConfig::reference_calibrated(5)).unwrap();
        let b = generate_manifest(&GeneratorConfig::reference_calibrated(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_manifest(&GeneratorConfig::reference_calibrated(6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn manifest_format_round_trips_byte_exactly() {
        let m = generate_manifest(&GeneratorConfig {
            counts: SizeHistogram::from_counts([(0, 2), (3, 4), (6, 1)], 0),
            directory_count: 3,
            seed: 0x2a,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        })
        .unwrap();
        let text = write_manifest(&m);
        let parsed = parse_manifest(&text).unwrap();
        assert_eq!(parsed.entries, m.entries);
        assert_eq!(parsed.directory_count, m.directory_count);
        assert_eq!(parsed.generator_seed, m.generator_seed);
        assert_eq!(write_manifest(&parsed), text);
        assert!(text.starts_with("pdtn-manifest v1 seed=000000000000002a dirs=3 files=7 bytes="));
    }

    #[test]
    fn small_manifest_text_is_frozen() {
        let m = generate_manifest(&GeneratorConfig {
            counts: SizeHistogram::from_counts([(0, 1), (3, 2)], 0),
            directory_count: 1,
            seed: 7,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        })
        .unwrap();
        let text = write_manifest(&m);
        // Golden bytes: any change to sampling, naming, ordering, or the
        // format itself shows up here.
        assert_eq!(
            text,
            "pdtn-manifest v1 seed=0000000000000007 dirs=1 files=3 bytes=8999\n\
             d000/f00000.dat\t7957\t3fdabe86cbbeaa11\n\
             d000/f00001.dat\t3\t77cbc4a133c2d0f6\n\
             d000/f00002.dat\t1039\t53fcd6513d02befe\n"
        );
    }

    #[test]
    fn manifest_with_duplicate_paths_is_rejected() {
        let text = "pdtn-manifest v1 seed=0000000000000001 dirs=0 files=2 bytes=20\n\
                    a.dat\t10\t0000000000000001\n\
                    a.dat\t10\t0000000000000002\n";
        match parse_manifest(text) {
            Err(DatasetError::Format { msg, .. }) => assert!(msg.contains("duplicate")),
            other => panic!("expected duplicate-path error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_header_mismatch_is_rejected() {
        let m = generate_manifest(&GeneratorConfig {
            counts: SizeHistogram::from_counts([(3, 2)], 0),
            directory_count: 1,
            seed: 1,
            scale_factor: 1.0,
            calibrate_total_bytes: None,
        })
        .unwrap();
        let text = write_manifest(&m);
        let tampered = text.replacen("files=2", "files=3", 1);
        match parse_manifest(&tampered) {
            Err(DatasetError::HeaderMismatch { field: "files", .. }) => {}
            other => panic!("expected header mismatch, got {other:?}"),
        }
    }

    fn arb_spec() -> impl Strategy<Value = (Vec<(u32, u64)>, u64)> {
        (
            proptest::collection::vec((0u32..7, 0u64..30), 1..5),
            0u64..6,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn histogram_round_trips((counts, dirs) in arb_spec(), seed in any::<u64>()) {
            let mut merged: BTreeMap<u32, u64> = BTreeMap::new();
            for (d, c) in counts {
                *merged.entry(d).or_insert(0) += c;
            }
            let spec = SizeHistogram::from_counts(merged.clone(), 0);
            let files = spec.file_count();
            let dirs = dirs.min(files); // keep the directory shape feasible
            let cfg = GeneratorConfig {
                counts: spec.clone(),
                directory_count: dirs,
                seed,
                scale_factor: 1.0,
                calibrate_total_bytes: None,
            };
            match generate_manifest(&cfg) {
                Ok(m) => {
                    let hist = summarize(&m);
                    for (d, c) in spec.decades() {
                        prop_assert_eq!(hist.count(d), c);
                    }
                    prop_assert_eq!(hist.file_count(), files);
                    prop_assert_eq!(distinct_directory_prefixes(&m.entries), m.directory_count);
                    let again = generate_manifest(&cfg).unwrap();
                    prop_assert_eq!(m, again);
                }
                Err(DatasetError::InfeasibleDirectories { .. }) => {
                    // Legal outcome when few files must cover many leaf dirs.
                }
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }

        #[test]
        fn calibration_hits_targets_inside_the_feasible_window(
            seed in any::<u64>(),
            frac in 0.05f64..0.95,
        ) {
            let counts = SizeHistogram::from_counts([(2u32, 10u64), (4, 6), (6, 3)], 0);
            let (min, max) = counts.decades().fold((0u64, 0u64), |(lo, hi), (d, c)| {
                let (dlo, dhi) = decade_bounds(d);
                (lo + dlo * c, hi + dhi * c)
            });
            let target = min + ((max - min) as f64 * frac) as u64;
            let cfg = GeneratorConfig {
                counts,
                directory_count: 2,
                seed,
                scale_factor: 1.0,
                calibrate_total_bytes: Some(target),
            };
            let m = generate_manifest(&cfg).unwrap();
            let total = m.total_bytes() as f64;
            prop_assert!((total - target as f64).abs() / (target as f64) <= 0.005);
        }
    }
}
