//! Self-checks run by `lsm-bench verify`: index containment, codec
//! round-trips, segmentation dominance, and engine-vs-ordered-map
//! equivalence with the per-probe I/O bound.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use learned_lsm::config::{boundary_blocks, CompactionStyle, Granularity, IndexKind};
use learned_lsm::index::{build_index, segment_greedy, segment_optimal, LearnedIndex};
use learned_lsm::metrics::ReadStats;
use learned_lsm::workload::{gen_keys, value_from_hash, DatasetKind, DatasetSpec};
use learned_lsm::{Db, EngineConfig, IndexParams, Key};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::experiment::params_for_boundary;

const MAX_FAILURE_SAMPLES: usize = 5;

/// Entry size the containment indexes are built for (100-byte values).
pub const CONTAINMENT_ENTRY_BYTES: u64 = 116;

/// Pass count of one invariant, with a few failing cases kept for display.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: u64,
    pub total: u64,
    pub samples: Vec<String>,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>) -> Self {
        CheckOutcome { name: name.into(), passed: 0, total: 0, samples: Vec::new() }
    }

    pub fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.samples.len() < MAX_FAILURE_SAMPLES {
            self.samples.push(detail());
        }
    }

    pub fn absorb(&mut self, other: CheckOutcome) {
        self.passed += other.passed;
        self.total += other.total;
        let room = MAX_FAILURE_SAMPLES.saturating_sub(self.samples.len());
        self.samples.extend(other.samples.into_iter().take(room));
    }

    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}/{}", self.name, self.passed, self.total)?;
        for s in &self.samples {
            write!(f, "\n    {s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Keys per containment dataset and ops per oracle run.
    pub n: u64,
    pub seed: u64,
    pub kinds: Vec<IndexKind>,
    pub epsilons: Vec<u64>,
    pub datasets: Vec<DatasetKind>,
    pub granularities: Vec<Granularity>,
    pub oracle_runs: u32,
    pub oracle_gets: u64,
    pub oracle_scans: u64,
    pub dominance_pairs: u32,
    pub data_dir: PathBuf,
}

impl VerifyOptions {
    pub fn new(n: u64, seed: u64, data_dir: impl Into<PathBuf>) -> Self {
        VerifyOptions {
            n,
            seed,
            kinds: IndexKind::ALL.to_vec(),
            epsilons: vec![4, 8, 16, 32, 64, 128],
            datasets: synthetic_datasets(),
            granularities: vec![Granularity::PerFile, Granularity::PerLevel],
            oracle_runs: 1,
            oracle_gets: (n / 10).max(1),
            oracle_scans: (n / 100).max(1),
            dominance_pairs: 200,
            data_dir: data_dir.into(),
        }
    }
}

pub fn synthetic_datasets() -> Vec<DatasetKind> {
    vec![
        DatasetKind::Uniform,
        DatasetKind::Segmented(learned_lsm::workload::DEFAULT_SEGMENTS),
        DatasetKind::Lognormal,
        DatasetKind::ParetoGaps,
    ]
}

fn index_for(kind: IndexKind, epsilon: u64, keys: &[Key]) -> Result<LearnedIndex> {
    let params =
        params_for_boundary(kind, 2 * epsilon, CONTAINMENT_ENTRY_BYTES, &IndexParams::default(), None, None)?;
    Ok(build_index(kind, &params, keys, CONTAINMENT_ENTRY_BYTES)?)
}

/// Every built key lies inside its predicted window, for every kind, ε
/// (as boundary 2ε) and dataset. One count per key.
pub fn containment(opts: &VerifyOptions) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("containment");
    for (d, dataset) in opts.datasets.iter().enumerate() {
        let keys = gen_keys(&DatasetSpec { kind: dataset.clone(), n: opts.n, seed: opts.seed + d as u64 })?;
        for &kind in &opts.kinds {
            for &eps in &opts.epsilons {
                out.absorb(containment_of(kind, eps, &keys, &dataset.label())?);
            }
        }
    }
    Ok(out)
}

pub fn containment_of(kind: IndexKind, epsilon: u64, keys: &[Key], label: &str) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new(format!("containment {kind} eps={epsilon} {label}"));
    let index = index_for(kind, epsilon, keys)?;
    let bound = index.position_boundary();
    for (pos, &key) in keys.iter().enumerate() {
        let range = index.predict(key)?;
        out.record(range.contains(pos as u64) && range.len() <= bound, || {
            format!("{kind} eps={epsilon} {label}: key {key} at {pos} predicted {range:?}")
        });
    }
    Ok(out)
}

/// Serialized then deserialized indexes answer 10^4 probes (built keys and
/// arbitrary keys) exactly as the original.
pub fn round_trip(opts: &VerifyOptions) -> Result<CheckOutcome> {
    const PROBES: usize = 10_000;
    let mut out = CheckOutcome::new("serialize round-trip");
    let keys = gen_keys(&DatasetSpec { kind: DatasetKind::Lognormal, n: opts.n, seed: opts.seed })?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(opts.seed ^ 0x5eed);
    for &kind in &opts.kinds {
        for &eps in &opts.epsilons {
            let index = index_for(kind, eps, &keys)?;
            let copy = LearnedIndex::deserialize(&index.serialize())?;
            let mut same = copy == index;
            for i in 0..PROBES {
                let probe = if i % 2 == 0 { keys[rng.random_range(0..keys.len())] } else { rng.random() };
                same &= copy.predict(probe)? == index.predict(probe)?;
            }
            out.record(same, || format!("{kind} eps={eps}: predictions differ after round-trip"));
        }
    }
    Ok(out)
}

/// Optimal segmentation never uses more segments than the greedy one, on
/// random (dataset, ε) pairs.
pub fn segment_dominance(pairs: u32, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("optimal <= greedy segments");
    let datasets = synthetic_datasets();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    for i in 0..pairs {
        let kind = datasets[rng.random_range(0..datasets.len())].clone();
        let n = rng.random_range(1_000..20_000);
        let eps = rng.random_range(1..=128);
        let keys = gen_keys(&DatasetSpec { kind: kind.clone(), n, seed: seed.wrapping_add(i as u64) })?;
        let optimal = segment_optimal(&keys, eps)?.len();
        let greedy = segment_greedy(&keys, eps)?.len();
        out.record(optimal <= greedy, || {
            format!("{} n={n} eps={eps}: optimal {optimal} > greedy {greedy}", kind.label())
        });
    }
    Ok(out)
}

/// Engine settings for oracle runs: small values and tables so that 10^5
/// operations spread over three levels and hundreds of tables.
pub fn oracle_engine_config(
    dir: impl Into<PathBuf>,
    kind: IndexKind,
    granularity: Granularity,
    boundary: u64,
) -> Result<EngineConfig> {
    let mut config = EngineConfig::new(dir);
    config.value_size = 16;
    config.block_bytes = 256;
    config.write_buffer_bytes = 64 << 10;
    config.sstable_target_bytes = 16 << 10;
    config.size_ratio = 4;
    config.index_kind = kind;
    config.granularity = granularity;
    if granularity == Granularity::PerLevel {
        config.compaction = CompactionStyle::Full;
    }
    config.index_params =
        params_for_boundary(kind, boundary, config.entry_size(), &config.index_params, None, None)?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRun {
    pub kind: IndexKind,
    pub granularity: Granularity,
    pub boundary: u64,
    pub seed: u64,
    pub gets: CheckOutcome,
    pub scans: CheckOutcome,
    /// One count per table probe: blocks read within
    /// `boundary_blocks(boundary, e, B)`.
    pub io_bound: CheckOutcome,
    pub max_probe_blocks: u64,
    pub block_bound: u64,
    pub depth: u32,
    pub tables: usize,
}

impl OracleRun {
    pub fn ok(&self) -> bool {
        self.gets.ok() && self.scans.ok() && self.io_bound.ok()
    }
}

/// Random puts and deletes against the engine and a `BTreeMap`, then point
/// gets and scans compared one by one.
pub fn oracle_run(
    config: EngineConfig,
    boundary: u64,
    seed: u64,
    ops: u64,
    gets: u64,
    scans: u64,
) -> Result<OracleRun> {
    let kind = config.index_kind;
    let granularity = config.granularity;
    let value_size = config.value_size;
    let block_bound = boundary_blocks(boundary, config.entry_size(), config.block_bytes);
    let label = format!("{kind}/{granularity}/b{boundary}/seed{seed}");

    let db = Db::open(config)?;
    let mut oracle: BTreeMap<Key, Vec<u8>> = BTreeMap::new();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let space = (ops / 2).max(1);
    let key_of = |slot: u64| slot.wrapping_mul(0x9E37_79B9) % (1 << 48);
    for _ in 0..ops {
        let key = key_of(rng.random_range(0..space));
        if rng.random_bool(0.75) {
            let value = value_from_hash(rng.random(), value_size);
            db.put(key, &value)?;
            oracle.insert(key, value);
        } else {
            db.delete(key)?;
            oracle.remove(&key);
        }
    }

    let mut run = OracleRun {
        kind,
        granularity,
        boundary,
        seed,
        gets: CheckOutcome::new(format!("gets {label}")),
        scans: CheckOutcome::new(format!("scans {label}")),
        io_bound: CheckOutcome::new(format!("io bound {label}")),
        max_probe_blocks: 0,
        block_bound,
        depth: 0,
        tables: 0,
    };
    for _ in 0..gets {
        let key = if rng.random_bool(0.9) {
            key_of(rng.random_range(0..space))
        } else {
            rng.random_range(0..1 << 48)
        };
        let mut stats = ReadStats::default();
        let got = db.get_with_stats(key, &mut stats)?;
        let want = oracle.get(&key);
        run.gets.record(got.as_ref() == want, || format!("{label}: get({key}) = {got:?}, expected {want:?}"));
        run.max_probe_blocks = run.max_probe_blocks.max(stats.max_probe_blocks);
        let within = stats.max_probe_blocks <= block_bound && stats.io_bound_violations == 0;
        for _ in 0..stats.table_probes {
            run.io_bound.record(within, || {
                format!(
                    "{label}: get({key}) read {} blocks in one table, bound {block_bound}",
                    stats.max_probe_blocks
                )
            });
        }
    }
    for _ in 0..scans {
        let from = rng.random_range(0..1 << 48);
        let len = rng.random_range(1..=100usize);
        let got = db.scan(from, len)?;
        let want: Vec<(Key, Vec<u8>)> =
            oracle.range(from..).take(len).map(|(k, v)| (*k, v.clone())).collect();
        run.scans.record(got == want, || {
            format!("{label}: scan({from}, {len}) returned {} rows, expected {}", got.len(), want.len())
        });
    }
    let version = db.version();
    run.depth = version.depth();
    run.tables = version.table_count();
    Ok(run)
}

/// `runs` oracle runs per (kind, granularity), cycling boundaries
/// 8, 16, 32, 64 across runs.
pub fn oracle_equivalence(opts: &VerifyOptions) -> Result<Vec<OracleRun>> {
    const BOUNDARIES: [u64; 4] = [8, 16, 32, 64];
    let mut runs = Vec::new();
    for &kind in &opts.kinds {
        for &granularity in &opts.granularities {
            for r in 0..opts.oracle_runs {
                let boundary = BOUNDARIES[r as usize % BOUNDARIES.len()];
                let seed = opts.seed.wrapping_mul(1000).wrapping_add(r as u64);
                let dir = opts.data_dir.join(format!("oracle-{kind}-{granularity}-{r}"));
                if dir.exists() {
                    std::fs::remove_dir_all(&dir)?;
                }
                let config = oracle_engine_config(&dir, kind, granularity, boundary)?;
                let run = oracle_run(config, boundary, seed, opts.n, opts.oracle_gets, opts.oracle_scans);
                let _ = std::fs::remove_dir_all(&dir);
                runs.push(run?);
            }
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(CheckOutcome::ok)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            writeln!(f, "{check}")?;
        }
        Ok(())
    }
}

pub fn verify_all(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut checks = vec![containment(opts)?, round_trip(opts)?];
    checks.push(segment_dominance(opts.dominance_pairs, opts.seed)?);
    let mut gets = CheckOutcome::new("oracle gets");
    let mut scans = CheckOutcome::new("oracle scans");
    let mut io = CheckOutcome::new("io bound per table probe");
    for run in oracle_equivalence(opts)? {
        gets.absorb(run.gets);
        scans.absorb(run.scans);
        io.absorb(run.io_bound);
    }
    checks.extend([gets, scans, io]);
    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_keeps_a_few_samples() {
        let mut c = CheckOutcome::new("x");
        for i in 0..10 {
            c.record(i % 2 == 0, || format!("odd {i}"));
        }
        assert_eq!((c.passed, c.total), (5, 10));
        assert_eq!(c.samples.len(), MAX_FAILURE_SAMPLES);
        assert!(!c.ok());
        assert!(c.to_string().starts_with("FAIL x: 5/10"));
    }

    #[test]
    fn small_suite_passes() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = VerifyOptions::new(3_000, 7, dir.path());
        opts.epsilons = vec![4, 32];
        opts.dominance_pairs = 5;
        let report = verify_all(&opts).unwrap();
        assert!(report.ok(), "{report}");
        assert_eq!(report.checks.len(), 6);
        assert_eq!(report.checks[0].total, 4 * 6 * 2 * 3_000);
        assert_eq!(report.checks[3].total, 12 * 300);
    }

    #[test]
    fn oracle_run_spans_several_levels() {
        let dir = tempfile::tempdir().unwrap();
        let config = oracle_engine_config(dir.path(), IndexKind::Pgm, Granularity::PerFile, 16).unwrap();
        let run = oracle_run(config, 16, 1, 60_000, 2_000, 100).unwrap();
        assert!(run.ok());
        assert!(run.depth >= 2, "depth {}", run.depth);
        assert!(run.max_probe_blocks >= 1 && run.max_probe_blocks <= run.block_bound);
    }
}
