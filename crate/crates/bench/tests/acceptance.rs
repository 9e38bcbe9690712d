//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers after `--` to run a
//! subset, e.g. `cargo test -p learned-lsm-bench --test acceptance -- 4 5`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::Instant;

use learned_lsm::config::{CompactionStyle, Granularity, IndexKind};
use learned_lsm::sstable::BloomFilter;
use learned_lsm::workload::{DatasetKind, DatasetSpec, KeyDistribution, WorkloadKind, WorkloadSpec};
use learned_lsm::EngineConfig;
use learned_lsm_bench::verify::{
    containment, oracle_equivalence, round_trip, segment_dominance, CheckOutcome, OracleRun, VerifyOptions,
};
use learned_lsm_bench::{run_experiment, CsvRow, ExperimentConfig, LoadOrder, MetricsReport};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const SEED: u64 = 42;
const LEARNED: [IndexKind; 5] =
    [IndexKind::Plr, IndexKind::FitingTree, IndexKind::Pgm, IndexKind::RadixSpline, IndexKind::Rmi];

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Verdict { pass, summary: summary.into(), details }
    }
}

type Outcome = Result<Verdict, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn outcome_details(checks: &[&CheckOutcome]) -> Vec<String> {
    checks.iter().flat_map(|c| c.samples.iter().cloned()).collect()
}

struct Sweep {
    kinds: Vec<IndexKind>,
    boundaries: Vec<u64>,
    sstable_bytes: Vec<u64>,
    workload: WorkloadKind,
    n_ops: u64,
    n_keys: u64,
    load_order: LoadOrder,
    granularity: Granularity,
    compaction: CompactionStyle,
    repetitions: u32,
}

impl Sweep {
    fn new(workload: WorkloadKind, n_ops: u64) -> Self {
        Sweep {
            kinds: IndexKind::ALL.to_vec(),
            boundaries: vec![64],
            sstable_bytes: vec![4 << 20],
            workload,
            n_ops,
            n_keys: 1_000_000,
            load_order: LoadOrder::Sorted,
            granularity: Granularity::PerFile,
            compaction: CompactionStyle::Partial,
            repetitions: 1,
        }
    }

    fn run(&self, dir: &Path) -> Result<Vec<MetricsReport>, String> {
        let mut engine = EngineConfig::new(dir);
        engine.granularity = self.granularity;
        engine.compaction = self.compaction;
        let dataset = DatasetSpec { kind: DatasetKind::Uniform, n: self.n_keys, seed: SEED };
        let workload = WorkloadSpec {
            kind: self.workload,
            n_ops: self.n_ops,
            seed: SEED + 1,
            key_distribution: KeyDistribution::UniformPick,
        };
        let mut config = ExperimentConfig::new(engine, dataset, workload);
        config.index_kinds = self.kinds.clone();
        config.boundaries = self.boundaries.clone();
        config.sstable_bytes = self.sstable_bytes.clone();
        config.load_order = self.load_order;
        config.repetitions = self.repetitions;
        let reports = run_experiment(&config).map_err(err)?;
        if let Some(bad) = reports.iter().find(|r| !r.is_ok()) {
            return Err(format!("{} b={} {}", bad.index_kind, bad.boundary, bad.status()));
        }
        Ok(reports)
    }
}

fn find(reports: &[MetricsReport], kind: IndexKind, boundary: u64) -> &MetricsReport {
    reports.iter().find(|r| r.index_kind == kind && r.boundary == boundary).expect("sweep point present")
}

fn verify_options(dir: &Path) -> VerifyOptions {
    VerifyOptions::new(100_000, SEED, dir)
}

fn criterion_1(dir: &Path) -> Outcome {
    let c = containment(&verify_options(dir)).map_err(err)?;
    let details = outcome_details(&[&c]);
    Ok(Verdict::new(c.ok(), format!("{}/{} keys inside their predicted window", c.passed, c.total), details))
}

fn oracle_runs(dir: &Path) -> Result<Vec<OracleRun>, String> {
    let mut opts = verify_options(dir);
    opts.oracle_runs = 10;
    opts.oracle_gets = 10_000;
    opts.oracle_scans = 1_000;
    oracle_equivalence(&opts).map_err(err)
}

fn criterion_2(runs: &[OracleRun]) -> Outcome {
    let mut gets = CheckOutcome::new("gets");
    let mut scans = CheckOutcome::new("scans");
    for run in runs {
        gets.absorb(run.gets.clone());
        scans.absorb(run.scans.clone());
    }
    let pass = gets.ok() && scans.ok() && runs.len() == 6 * 2 * 10;
    Ok(Verdict::new(
        pass,
        format!(
            "{} runs; gets {}/{}, scans {}/{} agree with the ordered map",
            runs.len(),
            gets.passed,
            gets.total,
            scans.passed,
            scans.total
        ),
        outcome_details(&[&gets, &scans]),
    ))
}

fn criterion_3(runs: &[OracleRun]) -> Outcome {
    let mut io = CheckOutcome::new("io");
    let mut worst = 0.0f64;
    for run in runs {
        io.absorb(run.io_bound.clone());
        worst = worst.max(run.max_probe_blocks as f64 / run.block_bound as f64);
    }
    Ok(Verdict::new(
        io.ok() && io.total > 0,
        format!(
            "{}/{} table probes within boundary_blocks; worst probe used {:.0}% of its bound",
            io.passed,
            io.total,
            worst * 100.0
        ),
        outcome_details(&[&io]),
    ))
}

const POINT_BOUNDARIES: [u64; 6] = [256, 128, 64, 32, 16, 8];

fn point_sweep(dir: &Path) -> Result<Vec<MetricsReport>, String> {
    let mut sweep = Sweep::new(WorkloadKind::PointOnly, 10_000);
    sweep.boundaries = POINT_BOUNDARIES.to_vec();
    sweep.run(dir)
}

fn criterion_4(reports: &[MetricsReport]) -> Outcome {
    let mut details = Vec::new();
    for kind in IndexKind::ALL {
        let blocks: Vec<f64> =
            POINT_BOUNDARIES.iter().map(|&b| find(reports, kind, b).blocks_per_op()).collect();
        for (w, b) in blocks.windows(2).zip(POINT_BOUNDARIES.windows(2)) {
            if w[1] > w[0] {
                details.push(format!(
                    "{kind}: blocks_per_op rose from {} at b={} to {} at b={}",
                    w[0], b[0], w[1], b[1]
                ));
            }
        }
    }
    for &b in POINT_BOUNDARIES.iter().filter(|&&b| b <= 64) {
        let fp = find(reports, IndexKind::FencePointer, b).index_bytes();
        for kind in LEARNED {
            let bytes = find(reports, kind, b).index_bytes();
            if bytes >= fp {
                details.push(format!("b={b}: {kind} index_bytes {bytes} >= fp {fp}"));
            }
        }
    }
    let summary = format!(
        "blocks_per_op monotone over b=256..8 for 6 kinds; fp memory dominant at b<=64 ({} violations)",
        details.len()
    );
    Ok(Verdict::new(details.is_empty(), summary, details))
}

fn criterion_5(reports: &[MetricsReport]) -> Outcome {
    let config = EngineConfig::new("");
    let plateau: Vec<u64> =
        POINT_BOUNDARIES.iter().copied().filter(|&b| b * config.entry_size() <= config.block_bytes).collect();
    let mut details = Vec::new();
    for kind in IndexKind::ALL {
        let blocks: Vec<f64> = plateau.iter().map(|&b| find(reports, kind, b).blocks_per_op()).collect();
        if blocks.windows(2).any(|w| w[0] != w[1]) {
            details.push(format!("{kind}: blocks_per_op {blocks:?} over b={plateau:?}"));
        }
    }
    let summary = format!("blocks_per_op identical for every kind over b={plateau:?}");
    Ok(Verdict::new(details.is_empty() && plateau.len() >= 2, summary, details))
}

fn criterion_6(dir: &Path) -> Outcome {
    const MIB: u64 = 1 << 20;
    let mut files = Sweep::new(WorkloadKind::PointOnly, 10_000);
    files.boundaries = vec![128];
    files.sstable_bytes = vec![4 * MIB, 16 * MIB, 64 * MIB];
    files.load_order = LoadOrder::Shuffled;
    let per_file = files.run(&dir.join("file"))?;
    let mut level = files;
    level.sstable_bytes = vec![64 * MIB];
    level.granularity = Granularity::PerLevel;
    level.compaction = CompactionStyle::Full;
    let per_level = level.run(&dir.join("level"))?;

    let mut details = Vec::new();
    let mut lines = Vec::new();
    for kind in IndexKind::ALL {
        let mut series: Vec<&MetricsReport> = [4 * MIB, 16 * MIB, 64 * MIB]
            .iter()
            .map(|&s| per_file.iter().find(|r| r.index_kind == kind && r.sstable_bytes == s).expect("point"))
            .collect();
        series.push(per_level.iter().find(|r| r.index_kind == kind).expect("point"));
        let bytes: Vec<u64> = series.iter().map(|r| r.index_bytes()).collect();
        let blocks: Vec<f64> = series.iter().map(|r| r.blocks_per_op()).collect();
        let spread =
            blocks.iter().cloned().fold(f64::MIN, f64::max) - blocks.iter().cloned().fold(f64::MAX, f64::min);
        lines.push(format!("{kind}: index_bytes {bytes:?}, blocks_per_op {blocks:?}"));
        if bytes.windows(2).any(|w| w[1] >= w[0]) {
            details.push(format!(
                "{kind}: index_bytes not strictly decreasing over 4/16/64 MiB, per-level: {bytes:?}"
            ));
        }
        if spread > 1.0 {
            details.push(format!("{kind}: blocks_per_op spread {spread:.4} > 1 block: {blocks:?}"));
        }
    }
    let pass = details.is_empty();
    details.extend(lines);
    Ok(Verdict::new(
        pass,
        "index memory shrinks with granularity at boundary 128, block reads within 1",
        details,
    ))
}

fn criterion_7(dir: &Path) -> Outcome {
    const BOUNDARIES: [u64; 3] = [16, 64, 256];
    let mut sweep = Sweep::new(WorkloadKind::WriteOnly, 100_000);
    sweep.kinds = LEARNED.to_vec();
    sweep.boundaries = BOUNDARIES.to_vec();
    sweep.load_order = LoadOrder::Shuffled;
    sweep.repetitions = 3;
    let reports = sweep.run(dir)?;

    let mut shares: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in &reports {
        let c = &r.compaction;
        if c.total_ns == 0 {
            return Err(format!(
                "{} b={}: no compactions during the write workload",
                r.index_kind, r.boundary
            ));
        }
        let share = (c.train_ms() + c.index_write_ms()) / c.total_ms();
        shares.entry((r.index_kind.to_string(), r.boundary)).or_default().push(share);
    }
    let mut details = Vec::new();
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for ((kind, b), mut runs) in shares {
        runs.sort_by(f64::total_cmp);
        let median = runs[runs.len() / 2];
        worst = worst.max(median);
        let line = format!("{kind} b={b}: median share {median:.4} of runs {runs:.4?}");
        if median >= 0.10 {
            details.push(line);
        } else {
            lines.push(line);
        }
    }
    let pass = details.is_empty();
    details.extend(lines);
    Ok(Verdict::new(
        pass,
        format!("(train + index write) / compaction < 0.10, worst three-run median {worst:.4}"),
        details,
    ))
}

fn criterion_8(dir: &Path) -> Outcome {
    const BOUNDARIES: [u64; 3] = [16, 64, 256];
    let mut details = Vec::new();
    let mut lines = Vec::new();
    for len in [10u64, 100, 1000] {
        let mut sweep = Sweep::new(WorkloadKind::RangeOnly(len), 10_000);
        sweep.boundaries = BOUNDARIES.to_vec();
        sweep.sstable_bytes = vec![64 << 20];
        let reports = sweep.run(&dir.join(format!("len{len}")))?;
        for b in BOUNDARIES {
            let bytes: Vec<f64> =
                IndexKind::ALL.iter().map(|&k| find(&reports, k, b).bytes_per_op()).collect();
            let ratio = bytes.iter().cloned().fold(f64::MIN, f64::max)
                / bytes.iter().cloned().fold(f64::MAX, f64::min);
            lines.push(format!("len={len} b={b}: max/min bytes_per_op {ratio:.4}"));
            if len == 10 {
                if !(ratio >= 1.0) {
                    details.push(format!("len=10 b={b}: ratio {ratio}"));
                }
                let fp = find(&reports, IndexKind::FencePointer, b).index_bytes();
                for kind in LEARNED {
                    let mem = find(&reports, kind, b).index_bytes();
                    if mem >= fp {
                        details.push(format!("len=10 b={b}: {kind} index_bytes {mem} >= fp {fp}"));
                    }
                }
            }
            if len == 1000 && ratio > 1.05 {
                details.push(format!("len=1000 b={b}: max/min bytes_per_op {ratio:.4} > 1.05"));
            }
        }
    }
    let pass = details.is_empty();
    details.extend(lines);
    Ok(Verdict::new(
        pass,
        "short ranges favour learned memory, length-1000 ranges converge within 5%",
        details,
    ))
}

fn criterion_9() -> Outcome {
    let c = segment_dominance(200, SEED).map_err(err)?;
    let details = outcome_details(&[&c]);
    Ok(Verdict::new(
        c.ok() && c.total == 200,
        format!("{}/{} pairs with optimal <= greedy", c.passed, c.total),
        details,
    ))
}

fn criterion_10() -> Outcome {
    const N: usize = 100_000;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(SEED);
    let mut keys: Vec<u64> = (0..N).map(|_| rng.random()).collect();
    keys.sort_unstable();
    keys.dedup();
    let filter = BloomFilter::build(&keys, 10);
    let present: HashSet<u64> = keys.iter().copied().collect();
    if let Some(k) = keys.iter().find(|&&k| !filter.may_contain(k)) {
        return Ok(Verdict::new(false, format!("false negative for key {k}"), Vec::new()));
    }
    let mut probes = 0u64;
    let mut false_positives = 0u64;
    while probes < N as u64 {
        let k: u64 = rng.random();
        if present.contains(&k) {
            continue;
        }
        probes += 1;
        false_positives += filter.may_contain(k) as u64;
    }
    let fpr = false_positives as f64 / probes as f64;
    Ok(Verdict::new(
        fpr <= 0.0164,
        format!(
            "FPR {fpr:.5} ({false_positives}/{probes}) with {} hash functions, limit 0.0164",
            filter.hash_count()
        ),
        Vec::new(),
    ))
}

fn logical_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&CsvRow::from(r).logical_fields().join(","));
        out.push('\n');
    }
    out
}

fn criterion_11(dir: &Path) -> Outcome {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (workload, order) in [
        (WorkloadKind::PointOnly, LoadOrder::Sorted),
        (WorkloadKind::RangeOnly(100), LoadOrder::Sorted),
        (WorkloadKind::WriteOnly, LoadOrder::Shuffled),
        (WorkloadKind::YcsbA, LoadOrder::Shuffled),
    ] {
        let mut sweep = Sweep::new(workload, 10_000);
        sweep.boundaries = vec![16, 128];
        sweep.n_keys = 200_000;
        sweep.load_order = order;
        first.extend(sweep.run(&dir.join("a"))?);
        second.extend(sweep.run(&dir.join("b"))?);
    }
    let (a, b) = (logical_csv(&first), logical_csv(&second));
    let mut details = Vec::new();
    if a != b {
        for (x, y) in a.lines().zip(b.lines()).filter(|(x, y)| x != y).take(5) {
            details.push(format!("{x}\n    vs {y}"));
        }
    }
    let identical = a == b;
    let rt = round_trip(&verify_options(dir)).map_err(err)?;
    details.extend(outcome_details(&[&rt]));
    Ok(Verdict::new(
        identical && rt.ok(),
        format!(
            "logical CSV of {} rows {}; round-trip {}/{} (kind, eps) pairs over 10^4 probes",
            first.len(),
            if identical { "byte-identical" } else { "DIFFERS" },
            rt.passed,
            rt.total
        ),
        details,
    ))
}

const NAMES: [&str; 11] = [
    "containment",
    "oracle equivalence",
    "I/O bound",
    "boundary trend",
    "plateau",
    "granularity",
    "compaction overhead",
    "range convergence",
    "optimal segmentation dominance",
    "bloom FPR",
    "determinism and round-trip",
];

fn main() {
    let selected: Vec<usize> =
        std::env::args().skip(1).filter_map(|a| a.parse().ok()).filter(|n| (1..=11).contains(n)).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let root = tempfile::tempdir().expect("temp dir");
    let dir = |n: usize| root.path().join(format!("c{n}"));

    let mut oracle: Option<Result<Vec<OracleRun>, String>> = None;
    let mut point: Option<Result<Vec<MetricsReport>, String>> = None;
    let mut failures = 0;
    for n in (1..=11).filter(|&n| wanted(n)) {
        let start = Instant::now();
        let outcome = match n {
            1 => criterion_1(&dir(n)),
            2 | 3 => {
                let runs = oracle.get_or_insert_with(|| oracle_runs(&dir(2))).clone();
                runs.and_then(|r| if n == 2 { criterion_2(&r) } else { criterion_3(&r) })
            }
            4 | 5 => {
                let reports = point.get_or_insert_with(|| point_sweep(&dir(4))).clone();
                reports.and_then(|r| if n == 4 { criterion_4(&r) } else { criterion_5(&r) })
            }
            6 => criterion_6(&dir(n)),
            7 => criterion_7(&dir(n)),
            8 => criterion_8(&dir(n)),
            9 => criterion_9(),
            10 => criterion_10(),
            _ => criterion_11(&dir(n)),
        };
        let verdict = outcome.unwrap_or_else(|e| Verdict::new(false, format!("error: {e}"), Vec::new()));
        failures += !verdict.pass as usize;
        println!(
            "{} {n:>2} {}: {} [{:.1}s]",
            if verdict.pass { "PASS" } else { "FAIL" },
            NAMES[n - 1],
            verdict.summary,
            start.elapsed().as_secs_f64()
        );
        for d in &verdict.details {
            println!("    {d}");
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
