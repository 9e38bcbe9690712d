use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use learned_lsm::config::{CompactionStyle, Granularity, IndexKind};
use learned_lsm::workload::{
    dump_ops, gen_keys, gen_ops, write_sosd, DatasetKind, DatasetSpec, KeyDistribution, WorkloadSpec,
};
use learned_lsm::EngineConfig;

use crate::error::{BenchError, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::report::write_csv;
use crate::verify::{verify_all, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

const MIB: f64 = (1u64 << 20) as f64;

#[derive(Debug, Parser)]
#[command(name = "lsm-bench", version, about = "LSM-tree learned index benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per sweep point.
    Bench(BenchArgs),
    /// Run the containment, round-trip and oracle-equivalence suites.
    Verify(VerifyArgs),
    /// Dump a dataset (SOSD binary) and/or an operation stream (text).
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// uniform, segmented[:k], lognormal, pareto or file:<path>
    #[arg(long, default_value = "uniform")]
    dataset: String,
    /// SOSD file to load; overrides --dataset.
    #[arg(long)]
    dataset_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl DatasetArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        let kind = match &self.dataset_file {
            Some(path) => DatasetKind::FromFile(path.clone()),
            None => self.dataset.parse()?,
        };
        if self.n == 0 {
            return Err(BenchError::Config("--n must be >= 1".to_string()));
        }
        Ok(DatasetSpec { kind, n: self.n, seed: self.seed })
    }
}

#[derive(Debug, Args)]
struct WorkloadArgs {
    /// point, write, range:<len>, ycsb-a … ycsb-f
    #[arg(long, default_value = "point")]
    workload: String,
    #[arg(long, default_value_t = 10_000)]
    ops: u64,
    /// uniform, zipf or latest
    #[arg(long, default_value = "uniform")]
    key_dist: String,
}

impl WorkloadArgs {
    fn spec(&self, seed: u64) -> Result<WorkloadSpec> {
        Ok(WorkloadSpec {
            kind: self.workload.parse()?,
            n_ops: self.ops,
            seed: seed.wrapping_add(1),
            key_distribution: self.key_dist.parse::<KeyDistribution>()?,
        })
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Index kinds to sweep: fp, plr, fit, pgm, rs, rmi.
    #[arg(long, value_delimiter = ',', default_value = "pgm")]
    index: Vec<String>,
    /// Position boundaries to sweep, in entries.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    boundary: Vec<u64>,
    /// Fixed ε for error-bounded kinds instead of boundary/2.
    #[arg(long)]
    epsilon: Option<u64>,
    /// Fixed RMI leaf count instead of the boundary search.
    #[arg(long)]
    leaf_count: Option<u64>,
    /// SSTable target sizes to sweep, in MiB.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    sstable_mb: Vec<f64>,
    /// file or level
    #[arg(long, default_value = "file")]
    granularity: String,
    /// partial or full
    #[arg(long, default_value = "partial")]
    compaction: String,
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value_t = 100)]
    value_size: usize,
    #[command(flatten)]
    work: WorkloadArgs,
    #[arg(long, default_value_t = 10)]
    size_ratio: u64,
    #[arg(long, default_value_t = 4.0)]
    buffer_mb: f64,
    #[arg(long, default_value_t = 10)]
    bloom_bpk: u32,
    #[arg(long, default_value_t = 4096)]
    block_bytes: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parent directory for per-point engine data; a temporary directory
    /// when absent.
    #[arg(long, env = "LSM_BENCH_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// ε per level, level 1 first.
    #[arg(long, value_delimiter = ',')]
    per_level_epsilon: Vec<u64>,
    /// sorted or shuffled
    #[arg(long, default_value = "sorted")]
    load_order: String,
    #[arg(long, default_value_t = 1)]
    repetitions: u32,
    #[arg(long, default_value_t = 4096)]
    max_points: usize,
    #[arg(long)]
    keep_data: bool,
}

fn mib_to_bytes(flag: &str, mib: f64) -> Result<u64> {
    let bytes = (mib * MIB).round();
    if !bytes.is_finite() || bytes < 1.0 || bytes > u64::MAX as f64 {
        return Err(BenchError::Config(format!("--{flag} out of range: {mib}")));
    }
    Ok(bytes as u64)
}

impl BenchArgs {
    fn experiment(&self, data_dir: PathBuf) -> Result<ExperimentConfig> {
        let mut engine = EngineConfig::new(data_dir);
        engine.size_ratio = self.size_ratio;
        engine.write_buffer_bytes = mib_to_bytes("buffer-mb", self.buffer_mb)?;
        engine.value_size = self.value_size;
        engine.block_bytes = self.block_bytes;
        engine.bloom_bits_per_key = self.bloom_bpk;
        engine.granularity = self.granularity.parse::<Granularity>()?;
        engine.compaction = self.compaction.parse::<CompactionStyle>()?;
        engine.per_level_epsilon = self.per_level_epsilon.clone();

        let dataset = self.data.spec()?;
        let workload = self.work.spec(self.data.seed)?;
        let mut config = ExperimentConfig::new(engine, dataset, workload);
        config.index_kinds =
            self.index.iter().map(|s| s.parse::<IndexKind>()).collect::<learned_lsm::Result<_>>()?;
        config.boundaries = self.boundary.clone();
        config.sstable_bytes =
            self.sstable_mb.iter().map(|&mb| mib_to_bytes("sstable-mb", mb)).collect::<Result<_>>()?;
        config.epsilon = self.epsilon;
        config.leaf_count = self.leaf_count;
        config.load_order = self.load_order.parse()?;
        config.repetitions = self.repetitions;
        config.max_points = self.max_points;
        config.keep_data = self.keep_data;
        config.output = self.out.clone();
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100_000)]
    n: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Oracle runs per (index kind, granularity).
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long, env = "LSM_BENCH_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    work: WorkloadArgs,
    /// Write the keys as an SOSD binary file.
    #[arg(long)]
    keys_out: Option<PathBuf>,
    /// Write the operation stream as text.
    #[arg(long)]
    ops_out: Option<PathBuf>,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Bench(args) => bench(&args),
        Command::Verify(args) => verify(&args),
        Command::Gen(args) => gen(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// The given directory, or a fresh temporary one kept alive by the guard.
fn resolve_dir(dir: &Option<PathBuf>) -> Result<(PathBuf, Option<tempfile::TempDir>)> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok((dir.clone(), None))
        }
        None => {
            let tmp = tempfile::Builder::new().prefix("lsm-bench").tempdir()?;
            Ok((tmp.path().to_path_buf(), Some(tmp)))
        }
    }
}

fn bench(args: &BenchArgs) -> Result<i32> {
    // Validate before touching the filesystem.
    args.experiment(PathBuf::new())?;
    let (dir, _guard) = resolve_dir(&args.data_dir)?;
    let config = args.experiment(dir)?;
    let reports = run_experiment(&config)?;
    if config.output.is_none() {
        write_csv(&reports, io::stdout().lock())?;
    }
    let mut code = EXIT_OK;
    for r in reports.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} boundary {}: {}", r.index_kind, r.boundary, r.status());
        code = EXIT_RUNTIME;
    }
    Ok(code)
}

fn verify(args: &VerifyArgs) -> Result<i32> {
    if args.n < 2 {
        return Err(BenchError::Config("--n must be >= 2".to_string()));
    }
    let (dir, _guard) = resolve_dir(&args.data_dir)?;
    let mut opts = VerifyOptions::new(args.n, args.seed, dir);
    opts.oracle_runs = args.runs;
    let report = verify_all(&opts)?;
    print!("{report}");
    Ok(if report.ok() { EXIT_OK } else { EXIT_VERIFY })
}

fn gen(args: &GenArgs) -> Result<i32> {
    let spec = args.data.spec()?;
    let workload = args.work.spec(spec.seed)?;
    let keys = gen_keys(&spec)?;
    if let Some(path) = &args.keys_out {
        write_sosd(path, &keys)?;
    }
    if let Some(path) = &args.ops_out {
        let ops = gen_ops(&workload, &keys)?;
        let mut out = BufWriter::new(File::create(path)?);
        dump_ops(&ops, &mut out)?;
        out.flush()?;
    }
    println!(
        "dataset {} n={} min={} max={}",
        spec.kind.label(),
        keys.len(),
        keys.first().copied().unwrap_or(0),
        keys.last().copied().unwrap_or(0)
    );
    if args.ops_out.is_some() {
        println!("workload {} ops={}", workload.kind.label(), workload.n_ops);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> BenchArgs {
        let argv = ["lsm-bench", "bench"].iter().chain(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Bench(b) => b,
            _ => unreachable!(),
        }
    }

    #[test]
    fn lists_and_units_parse() {
        let b = parse(&["--index", "pgm,fp,rmi", "--boundary", "8,256", "--sstable-mb", "0.5,64"]);
        let config = b.experiment(PathBuf::from("/tmp/x")).unwrap();
        assert_eq!(config.index_kinds, vec![IndexKind::Pgm, IndexKind::FencePointer, IndexKind::Rmi]);
        assert_eq!(config.boundaries, vec![8, 256]);
        assert_eq!(config.sstable_bytes, vec![512 << 10, 64 << 20]);
        assert_eq!(config.engine.write_buffer_bytes, 4 << 20);
        assert_eq!(config.points().unwrap().len(), 12);
    }

    #[test]
    fn config_errors_are_classified() {
        let level = parse(&["--granularity", "level"]).experiment(PathBuf::new()).unwrap_err();
        assert!(level.is_config(), "{level}");
        assert!(parse(&["--index", "btree"]).experiment(PathBuf::new()).unwrap_err().is_config());
        assert!(parse(&["--boundary", "1"]).experiment(PathBuf::new()).unwrap_err().is_config());
        assert!(parse(&["--sstable-mb", "0"]).experiment(PathBuf::new()).unwrap_err().is_config());
        let ok = parse(&["--granularity", "level", "--compaction", "full"]);
        assert!(ok.experiment(PathBuf::new()).is_ok());
    }

    #[test]
    fn usage_errors_exit_with_config_code() {
        assert_eq!(cli_main(["lsm-bench", "bench", "--no-such-flag"]), EXIT_CONFIG);
        assert_eq!(cli_main(["lsm-bench"]), EXIT_CONFIG);
        assert_eq!(cli_main(["lsm-bench", "--help"]), EXIT_OK);
    }
}
