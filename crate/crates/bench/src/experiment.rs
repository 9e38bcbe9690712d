//! Sweep driver: one fresh engine per sweep point, bulk load, replay,
//! collect a [`MetricsReport`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use learned_lsm::config::{CompactionStyle, Granularity, IndexKind, IndexParams};
use learned_lsm::metrics::{CompactionRecord, ReadStats};
use learned_lsm::workload::{
    gen_keys, gen_ops, value_from_hash, DatasetSpec, Op, WorkloadKind, WorkloadSpec,
};
use learned_lsm::{Db, EngineConfig, Key};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{BenchError, Result};
use crate::report::emit_csv;

/// Order in which the dataset is written during bulk load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadOrder {
    #[default]
    Sorted,
    Shuffled,
}

impl fmt::Display for LoadOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadOrder::Sorted => "sorted",
            LoadOrder::Shuffled => "shuffled",
        })
    }
}

impl FromStr for LoadOrder {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sorted" => Ok(LoadOrder::Sorted),
            "shuffled" | "random" => Ok(LoadOrder::Shuffled),
            other => Err(BenchError::Config(format!("unknown load order {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Base engine settings. Index kind, index parameters, SSTable size and
    /// data directory are replaced per sweep point.
    pub engine: EngineConfig,
    pub dataset: DatasetSpec,
    pub workload: WorkloadSpec,
    pub index_kinds: Vec<IndexKind>,
    pub boundaries: Vec<u64>,
    pub sstable_bytes: Vec<u64>,
    /// Overrides the ε derived from the boundary for error-bounded kinds.
    pub epsilon: Option<u64>,
    /// Fixes the RMI leaf count instead of searching for the boundary.
    pub leaf_count: Option<u64>,
    pub load_order: LoadOrder,
    pub repetitions: u32,
    /// Upper bound on the number of sweep points.
    pub max_points: usize,
    /// Leave each point's data directory in place after the run.
    pub keep_data: bool,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(engine: EngineConfig, dataset: DatasetSpec, workload: WorkloadSpec) -> Self {
        ExperimentConfig {
            index_kinds: vec![engine.index_kind],
            boundaries: vec![64],
            sstable_bytes: vec![engine.sstable_target_bytes],
            engine,
            dataset,
            workload,
            epsilon: None,
            leaf_count: None,
            load_order: LoadOrder::Sorted,
            repetitions: 1,
            max_points: 4096,
            keep_data: false,
            output: None,
        }
    }

    /// Cartesian product of the sweep lists, in kind-major order, after
    /// checking that every point yields a valid engine configuration.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        if self.index_kinds.is_empty() || self.boundaries.is_empty() || self.sstable_bytes.is_empty() {
            return Err(BenchError::Config("sweep lists must be non-empty".to_string()));
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be >= 1".to_string()));
        }
        let count = self.index_kinds.len()
            * self.boundaries.len()
            * self.sstable_bytes.len()
            * self.repetitions as usize;
        if count > self.max_points {
            return Err(BenchError::Config(format!(
                "sweep has {count} points, above the cap of {}",
                self.max_points
            )));
        }
        let mut points = Vec::with_capacity(count);
        for &index_kind in &self.index_kinds {
            for &boundary in &self.boundaries {
                for &sstable_bytes in &self.sstable_bytes {
                    for repetition in 0..self.repetitions {
                        let point = SweepPoint { index_kind, boundary, sstable_bytes, repetition };
                        self.engine_config(&point)?.validate()?;
                        points.push(point);
                    }
                }
            }
        }
        Ok(points)
    }

    pub fn validate(&self) -> Result<()> {
        self.points().map(|_| ())
    }

    pub fn engine_config(&self, point: &SweepPoint) -> Result<EngineConfig> {
        let mut config = self.engine.clone();
        config.index_kind = point.index_kind;
        config.index_params = params_for_boundary(
            point.index_kind,
            point.boundary,
            config.entry_size(),
            &self.engine.index_params,
            self.epsilon,
            self.leaf_count,
        )?;
        config.sstable_target_bytes = point.sstable_bytes;
        config.data_dir = self.engine.data_dir.join(point.dir_name());
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub index_kind: IndexKind,
    pub boundary: u64,
    pub sstable_bytes: u64,
    pub repetition: u32,
}

impl SweepPoint {
    fn dir_name(&self) -> String {
        format!("{}-b{}-s{}-r{}", self.index_kind, self.boundary, self.sstable_bytes, self.repetition)
    }
}

/// Index parameters delivering a position boundary of `boundary` entries:
/// ε = boundary/2 for error-bounded kinds, one `boundary`-entry block for
/// fence pointers, and a leaf-count search for the RMI.
pub fn params_for_boundary(
    kind: IndexKind,
    boundary: u64,
    entry_size: u64,
    base: &IndexParams,
    epsilon: Option<u64>,
    leaf_count: Option<u64>,
) -> Result<IndexParams> {
    if boundary < 2 {
        return Err(BenchError::Config(format!("boundary must be >= 2, got {boundary}")));
    }
    let mut params = base.clone();
    match kind {
        IndexKind::FencePointer => params.fp_block_bytes = boundary * entry_size,
        IndexKind::Rmi => match leaf_count {
            Some(count) => {
                params.leaf_count = count;
                params.rmi_target_boundary = None;
            }
            None => params.rmi_target_boundary = Some(boundary),
        },
        _ => params.epsilon = epsilon.unwrap_or(boundary / 2),
    }
    params.validate(kind)?;
    Ok(params)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub reads: u64,
    pub puts: u64,
    pub deletes: u64,
    pub scans: u64,
    pub scanned_entries: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.reads + self.puts + self.deletes + self.scans
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencySummary {
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
}

impl LatencySummary {
    /// Nearest-rank percentiles over per-op nanosecond latencies.
    pub fn from_nanos(latencies: &mut [u64]) -> Self {
        if latencies.is_empty() {
            return LatencySummary::default();
        }
        latencies.sort_unstable();
        let n = latencies.len();
        let rank = |q: f64| latencies[((q * n as f64).ceil() as usize).clamp(1, n) - 1] as f64;
        let sum: u128 = latencies.iter().map(|&l| l as u128).sum();
        LatencySummary {
            mean_us: sum as f64 / n as f64 / 1000.0,
            p50_us: rank(0.50) / 1000.0,
            p99_us: rank(0.99) / 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompactionSummary {
    pub count: u64,
    pub flushes: u64,
    pub input_entries: u64,
    pub output_entries: u64,
    pub total_ns: u64,
    pub read_ns: u64,
    pub merge_write_ns: u64,
    pub index_train_ns: u64,
    pub index_write_ns: u64,
}

impl CompactionSummary {
    /// Aggregates flushes and level-to-level compactions alike.
    pub fn from_records(records: &[CompactionRecord]) -> Self {
        let mut s = CompactionSummary::default();
        for r in records {
            s.count += 1;
            s.flushes += (r.from_level == 0) as u64;
            s.input_entries += r.input_entries;
            s.output_entries += r.output_entries;
            s.total_ns += r.total_ns;
            s.read_ns += r.read_ns;
            s.merge_write_ns += r.merge_write_ns;
            s.index_train_ns += r.index_train_ns;
            s.index_write_ns += r.index_write_ns;
        }
        s
    }

    pub fn total_ms(&self) -> f64 {
        self.total_ns as f64 / 1e6
    }

    pub fn train_ms(&self) -> f64 {
        self.index_train_ns as f64 / 1e6
    }

    pub fn index_write_ms(&self) -> f64 {
        self.index_write_ns as f64 / 1e6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub index_kind: IndexKind,
    /// Requested position boundary.
    pub boundary: u64,
    /// Widest window any live table can return.
    pub achieved_boundary: u64,
    pub sstable_bytes: u64,
    pub granularity: Granularity,
    pub compaction_style: CompactionStyle,
    pub dataset: String,
    pub workload: String,
    pub repetition: u32,
    pub ops: OpCounts,
    pub latency: LatencySummary,
    /// Wall time of read and scan operations.
    pub lookup_ns: u64,
    pub reads: ReadStats,
    pub index_bytes_per_level: Vec<u64>,
    pub bloom_bytes: u64,
    pub memtable_bytes: u64,
    pub table_count: u64,
    pub depth: u32,
    pub compaction: CompactionSummary,
    /// `None` when the point ran to completion.
    pub failure: Option<String>,
}

impl MetricsReport {
    fn empty(point: &SweepPoint, config: &ExperimentConfig) -> Self {
        MetricsReport {
            index_kind: point.index_kind,
            boundary: point.boundary,
            achieved_boundary: 0,
            sstable_bytes: point.sstable_bytes,
            granularity: config.engine.granularity,
            compaction_style: config.engine.compaction,
            dataset: config.dataset.kind.label(),
            workload: config.workload.kind.label(),
            repetition: point.repetition,
            ops: OpCounts::default(),
            latency: LatencySummary::default(),
            lookup_ns: 0,
            reads: ReadStats::default(),
            index_bytes_per_level: Vec::new(),
            bloom_bytes: 0,
            memtable_bytes: 0,
            table_count: 0,
            depth: 0,
            compaction: CompactionSummary::default(),
            failure: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn status(&self) -> String {
        match &self.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        }
    }

    /// Half the achieved boundary; fractional for odd RMI windows.
    pub fn epsilon(&self) -> f64 {
        self.achieved_boundary as f64 / 2.0
    }

    pub fn n_ops(&self) -> u64 {
        self.ops.total()
    }

    pub fn index_bytes(&self) -> u64 {
        self.index_bytes_per_level.iter().sum()
    }

    pub fn blocks_per_op(&self) -> f64 {
        per_op(self.reads.blocks_read, self.n_ops())
    }

    pub fn bytes_per_op(&self) -> f64 {
        per_op(self.reads.bytes_read, self.n_ops())
    }

    /// Point lookups that reached each level, level 1 first.
    pub fn per_level_read_ops(&self) -> Vec<u64> {
        self.reads.per_level.iter().map(|l| l.lookups).collect()
    }

    /// Each level's fraction of the measured read time, level 1 first.
    pub fn per_level_read_share(&self) -> Vec<f64> {
        let total: u64 = self.reads.per_level.iter().map(|l| l.time_ns).sum();
        self.reads
            .per_level
            .iter()
            .map(|l| if total == 0 { 0.0 } else { l.time_ns as f64 / total as f64 })
            .collect()
    }
}

fn per_op(total: u64, ops: u64) -> f64 {
    if ops == 0 {
        0.0
    } else {
        total as f64 / ops as f64
    }
}

/// Runs every sweep point of `config`. A point whose engine fails becomes a
/// failed report and the sweep continues. Writes the CSV when an output
/// path is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    let points = config.points()?;
    let keys = gen_keys(&config.dataset)?;
    let ops = gen_ops(&config.workload, &keys)?;
    let mut reports = Vec::with_capacity(points.len());
    for point in &points {
        let report = match run_point(config, point, &keys, &ops) {
            Ok(report) => report,
            Err(e) => MetricsReport { failure: Some(e.to_string()), ..MetricsReport::empty(point, config) },
        };
        reports.push(report);
    }
    if let Some(path) = &config.output {
        emit_csv(&reports, path)?;
    }
    Ok(reports)
}

/// One sweep point against pre-generated keys and operations.
pub fn run_point(
    config: &ExperimentConfig,
    point: &SweepPoint,
    keys: &[Key],
    ops: &[Op],
) -> Result<MetricsReport> {
    let engine = config.engine_config(point)?;
    let dir = engine.data_dir.clone();
    reset_dir(&dir)?;
    let result = measure(config, point, engine, keys, ops);
    if !config.keep_data {
        let _ = std::fs::remove_dir_all(&dir);
    }
    result
}

fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn measure(
    config: &ExperimentConfig,
    point: &SweepPoint,
    engine: EngineConfig,
    keys: &[Key],
    ops: &[Op],
) -> Result<MetricsReport> {
    let value_size = engine.value_size;
    let db = Db::open(engine)?;

    let mut order = keys.to_vec();
    if config.load_order == LoadOrder::Shuffled {
        order.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(config.dataset.seed));
    }
    for &key in &order {
        db.put(key, &value_from_hash(key, value_size))?;
    }
    drop(order);
    db.flush()?;
    db.take_compaction_records();

    let mut report = MetricsReport::empty(point, config);
    let mut latencies = Vec::with_capacity(ops.len());
    for op in ops {
        let elapsed = match *op {
            Op::Read { key } => {
                let t = Instant::now();
                db.get_with_stats(key, &mut report.reads)?;
                let ns = t.elapsed().as_nanos() as u64;
                report.ops.reads += 1;
                report.lookup_ns += ns;
                ns
            }
            Op::Scan { key, len } => {
                let t = Instant::now();
                let rows = db.scan_with_stats(key, len as usize, &mut report.reads)?;
                let ns = t.elapsed().as_nanos() as u64;
                report.ops.scans += 1;
                report.ops.scanned_entries += rows.len() as u64;
                report.lookup_ns += ns;
                ns
            }
            Op::Put { key, value_hash } => {
                let value = value_from_hash(value_hash, value_size);
                let t = Instant::now();
                db.put(key, &value)?;
                report.ops.puts += 1;
                t.elapsed().as_nanos() as u64
            }
            Op::Delete { key } => {
                let t = Instant::now();
                db.delete(key)?;
                report.ops.deletes += 1;
                t.elapsed().as_nanos() as u64
            }
        };
        latencies.push(elapsed);
    }
    if config.workload.kind == WorkloadKind::WriteOnly {
        db.flush()?;
    }

    report.latency = LatencySummary::from_nanos(&mut latencies);
    report.compaction = CompactionSummary::from_records(&db.take_compaction_records());
    let version = db.version();
    report.index_bytes_per_level = version.index_bytes_per_level();
    report.bloom_bytes = version.bloom_bytes();
    report.memtable_bytes = db.memtable_bytes();
    report.table_count = version.table_count() as u64;
    report.depth = version.depth();
    report.achieved_boundary = version.tables().map(|t| t.index().position_boundary()).max().unwrap_or(0);
    Ok(report)
}
