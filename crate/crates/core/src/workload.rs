//! Reproducible key sets and operation streams.
//!
//! Every generator draws from `Xoshiro256PlusPlus::seed_from_u64(seed)`
//! (xoshiro256++ seeded through splitmix64), so a spec maps to exactly one
//! output on every platform.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, LogNormal, Pareto, Zipf};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::config::Key;
use crate::error::{Error, Result};

/// Skew of `ZipfPick` and `LatestPick`.
pub const ZIPF_THETA: f64 = 0.99;
pub const DEFAULT_SEGMENTS: u32 = 10;
/// Synthetic keys stay below 2^63.
const KEY_LIMIT: u64 = 1 << 63;

fn rng_for(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetKind {
    Uniform,
    /// Piecewise-linear CDF with this many pieces.
    Segmented(u32),
    Lognormal,
    ParetoGaps,
    /// SOSD binary file.
    FromFile(PathBuf),
}

impl DatasetKind {
    pub fn label(&self) -> String {
        match self {
            DatasetKind::Uniform => "uniform".to_string(),
            DatasetKind::Segmented(k) => format!("segmented{k}"),
            DatasetKind::Lognormal => "lognormal".to_string(),
            DatasetKind::ParetoGaps => "pareto".to_string(),
            DatasetKind::FromFile(path) => format!(
                "file:{}",
                path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
            ),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    /// `uniform`, `segmented` or `segmented:<k>`, `lognormal`, `pareto`,
    /// `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(DatasetKind::FromFile(PathBuf::from(path)));
        }
        if let Some(k) = lower.strip_prefix("segmented:") {
            let k = k
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::InvalidConfig(format!("bad segment count in {s:?}")))?;
            return Ok(DatasetKind::Segmented(k));
        }
        match lower.as_str() {
            "uniform" | "random" => Ok(DatasetKind::Uniform),
            "segmented" | "segment" => Ok(DatasetKind::Segmented(DEFAULT_SEGMENTS)),
            "lognormal" => Ok(DatasetKind::Lognormal),
            "pareto" | "paretogaps" => Ok(DatasetKind::ParetoGaps),
            _ => Err(Error::InvalidConfig(format!("unknown dataset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: u64,
    pub seed: u64,
}

/// Sorted, distinct keys for `spec`. Synthetic kinds return exactly `n`
/// keys; a file with more than `n` distinct keys is sampled at an even
/// stride, one with fewer is returned whole.
pub fn gen_keys(spec: &DatasetSpec) -> Result<Vec<Key>> {
    if spec.n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".to_string()));
    }
    let n = spec.n as usize;
    let mut rng = rng_for(spec.seed);
    match &spec.kind {
        DatasetKind::Uniform => Ok(fill_distinct(n, &mut rng, |r| r.random_range(0..KEY_LIMIT))),
        DatasetKind::Segmented(k) => Ok(segmented(n, *k, &mut rng)),
        DatasetKind::Lognormal => {
            let dist = LogNormal::new(0.0, 2.0).expect("valid lognormal");
            Ok(fill_distinct(n, &mut rng, |r| {
                let x: f64 = dist.sample(r) * 1e9;
                (x as u64).min(KEY_LIMIT - 1)
            }))
        }
        DatasetKind::ParetoGaps => {
            let dist = Pareto::new(1.0, 1.5).expect("valid pareto");
            let mut key = 0u64;
            let mut keys = Vec::with_capacity(n);
            for _ in 0..n {
                let gap: f64 = dist.sample(&mut rng) * 1000.0;
                key = key.saturating_add((gap.ceil() as u64).max(1));
                keys.push(key);
            }
            if key == u64::MAX {
                return Err(Error::InvalidConfig("pareto keys overflow u64".to_string()));
            }
            Ok(keys)
        }
        DatasetKind::FromFile(path) => {
            let keys = read_sosd(path)?;
            if keys.len() <= n {
                return Ok(keys);
            }
            Ok((0..n).map(|i| keys[(i as u128 * keys.len() as u128 / n as u128) as usize]).collect())
        }
    }
}

/// Draws until `n` distinct values exist, then sorts them.
fn fill_distinct(
    n: usize,
    rng: &mut Xoshiro256PlusPlus,
    mut draw: impl FnMut(&mut Xoshiro256PlusPlus) -> Key,
) -> Vec<Key> {
    let mut keys: Vec<Key> = (0..n).map(|_| draw(rng)).collect();
    loop {
        keys.sort_unstable();
        keys.dedup();
        if keys.len() == n {
            return keys;
        }
        let missing = n - keys.len();
        keys.extend((0..missing).map(|_| draw(rng)));
    }
}

/// `k` adjacent key intervals of random width, each filled uniformly at a
/// random density, so the CDF is `k` lines of random slope. Neighbouring
/// densities differ by at least 2x so every break is visible.
fn segmented(n: usize, k: u32, rng: &mut Xoshiro256PlusPlus) -> Vec<Key> {
    let k = (k.max(1) as usize).min(n);
    let widths: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5f64)).collect();
    let width_total: f64 = widths.iter().sum();
    let mut cuts = vec![0u64];
    let mut acc = 0.0;
    for w in &widths[..k - 1] {
        acc += w / width_total;
        cuts.push((acc * KEY_LIMIT as f64) as u64);
    }
    cuts.push(KEY_LIMIT);

    let mut densities: Vec<f64> = Vec::with_capacity(k);
    for _ in 0..k {
        let d = loop {
            let d = 2f64.powf(rng.random_range(0.0..6.0));
            match densities.last() {
                Some(&prev) if (d / prev).max(prev / d) < 2.0 => continue,
                _ => break d,
            }
        };
        densities.push(d);
    }
    let mass: Vec<f64> = widths.iter().zip(&densities).map(|(w, d)| w * d).collect();
    let total: f64 = mass.iter().sum();
    let mut counts: Vec<usize> = mass.iter().map(|m| ((m / total) * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    for i in 0..n - assigned {
        counts[i % k] += 1;
    }
    let mut keys = Vec::with_capacity(n);
    for (i, &count) in counts.iter().enumerate() {
        let (lo, hi) = (cuts[i], cuts[i + 1]);
        keys.extend(fill_distinct(count, rng, |r| r.random_range(lo..hi)));
    }
    keys
}

/// SOSD binary layout: u64 count, then `count` little-endian u64 keys.
/// Returns the keys sorted and deduplicated.
pub fn read_sosd(path: &Path) -> Result<Vec<Key>> {
    let bytes = fs::read(path).map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() < 8 {
        return Err(Error::Ingest(format!("{} has no count header", path.display())));
    }
    let count = u64::from_le_bytes(bytes[..8].try_into().unwrap());
    let body = &bytes[8..];
    if (body.len() as u64) < count.saturating_mul(8) {
        return Err(Error::Ingest(format!(
            "{} declares {count} keys but holds {}",
            path.display(),
            body.len() / 8
        )));
    }
    let mut keys: Vec<Key> = body
        .chunks_exact(8)
        .take(count as usize)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    if keys.is_empty() {
        return Err(Error::Ingest(format!("{} holds no keys", path.display())));
    }
    Ok(keys)
}

pub fn write_sosd(path: &Path, keys: &[Key]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + keys.len() * 8);
    out.extend_from_slice(&(keys.len() as u64).to_le_bytes());
    for k in keys {
        out.extend_from_slice(&k.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    PointOnly,
    WriteOnly,
    RangeOnly(u64),
    YcsbA,
    YcsbB,
    YcsbC,
    YcsbD,
    YcsbE,
    YcsbF,
}

impl WorkloadKind {
    pub fn label(&self) -> String {
        match self {
            WorkloadKind::PointOnly => "point".to_string(),
            WorkloadKind::WriteOnly => "write".to_string(),
            WorkloadKind::RangeOnly(len) => format!("range:{len}"),
            WorkloadKind::YcsbA => "ycsb-a".to_string(),
            WorkloadKind::YcsbB => "ycsb-b".to_string(),
            WorkloadKind::YcsbC => "ycsb-c".to_string(),
            WorkloadKind::YcsbD => "ycsb-d".to_string(),
            WorkloadKind::YcsbE => "ycsb-e".to_string(),
            WorkloadKind::YcsbF => "ycsb-f".to_string(),
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for WorkloadKind {
    type Err = Error;

    /// `point`, `write`, `range:<len>`, `ycsb-a` … `ycsb-f` (or `a` … `f`).
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if let Some(len) = lower.strip_prefix("range:").or_else(|| lower.strip_prefix("range-")) {
            let len = len
                .parse()
                .ok()
                .filter(|&l| l >= 1)
                .ok_or_else(|| Error::InvalidConfig(format!("bad range length in {s:?}")))?;
            return Ok(WorkloadKind::RangeOnly(len));
        }
        let name = lower.strip_prefix("ycsb-").or_else(|| lower.strip_prefix("ycsb")).unwrap_or(&lower);
        match name {
            "point" | "read" => Ok(WorkloadKind::PointOnly),
            "write" | "writeonly" => Ok(WorkloadKind::WriteOnly),
            "range" => Ok(WorkloadKind::RangeOnly(100)),
            "a" => Ok(WorkloadKind::YcsbA),
            "b" => Ok(WorkloadKind::YcsbB),
            "c" => Ok(WorkloadKind::YcsbC),
            "d" => Ok(WorkloadKind::YcsbD),
            "e" => Ok(WorkloadKind::YcsbE),
            "f" => Ok(WorkloadKind::YcsbF),
            _ => Err(Error::InvalidConfig(format!("unknown workload {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyDistribution {
    UniformPick,
    ZipfPick,
    LatestPick,
}

impl FromStr for KeyDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(KeyDistribution::UniformPick),
            "zipf" | "zipfian" => Ok(KeyDistribution::ZipfPick),
            "latest" => Ok(KeyDistribution::LatestPick),
            _ => Err(Error::InvalidConfig(format!("unknown key distribution {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub n_ops: u64,
    pub seed: u64,
    pub key_distribution: KeyDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    /// Value bytes are `value_from_hash(value_hash, value_size)`.
    Put {
        key: Key,
        value_hash: u64,
    },
    Delete {
        key: Key,
    },
    Read {
        key: Key,
    },
    Scan {
        key: Key,
        len: u64,
    },
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Put { key, value_hash } => write!(f, "P {key} {value_hash}"),
            Op::Delete { key } => write!(f, "D {key}"),
            Op::Read { key } => write!(f, "R {key}"),
            Op::Scan { key, len } => write!(f, "S {key} {len}"),
        }
    }
}

impl FromStr for Op {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("malformed op line {line:?}"));
        let mut words = line.split_whitespace();
        let tag = words.next().ok_or_else(bad)?;
        let mut num = || -> Result<u64> { words.next().ok_or_else(bad)?.parse().map_err(|_| bad()) };
        let op = match tag {
            "P" => Op::Put { key: num()?, value_hash: num()? },
            "D" => Op::Delete { key: num()? },
            "R" => Op::Read { key: num()? },
            "S" => Op::Scan { key: num()?, len: num()? },
            _ => return Err(bad()),
        };
        if words.next().is_some() {
            return Err(bad());
        }
        Ok(op)
    }
}

/// Deterministic value bytes for a `Put`.
pub fn value_from_hash(value_hash: u64, size: usize) -> Vec<u8> {
    let mut rng = rng_for(value_hash);
    let mut out = vec![0u8; size];
    rng.fill(&mut out[..]);
    out
}

pub fn dump_ops(ops: &[Op], out: &mut impl Write) -> Result<()> {
    for op in ops {
        writeln!(out, "{op}")?;
    }
    Ok(())
}

pub fn parse_ops(text: &str) -> Result<Vec<Op>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(str::parse).collect()
}

fn scramble(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Picker<'a> {
    dataset: &'a [Key],
    /// Dataset keys in the order they were written, then fresh inserts.
    written: Vec<Key>,
    known: HashSet<Key>,
    distribution: KeyDistribution,
}

impl Picker<'_> {
    fn zipf_rank(rng: &mut Xoshiro256PlusPlus, n: usize) -> usize {
        if n <= 1 {
            return 0;
        }
        let zipf = Zipf::new(n as f64, ZIPF_THETA).expect("valid zipf");
        (zipf.sample(rng) as usize).clamp(1, n) - 1
    }

    fn existing(&self, rng: &mut Xoshiro256PlusPlus, distribution: KeyDistribution) -> Key {
        match distribution {
            KeyDistribution::UniformPick => self.dataset[rng.random_range(0..self.dataset.len())],
            KeyDistribution::ZipfPick => {
                let rank = Self::zipf_rank(rng, self.dataset.len());
                self.dataset[(scramble(rank as u64) % self.dataset.len() as u64) as usize]
            }
            KeyDistribution::LatestPick => {
                let rank = Self::zipf_rank(rng, self.written.len());
                self.written[self.written.len() - 1 - rank]
            }
        }
    }

    fn fresh(&mut self, rng: &mut Xoshiro256PlusPlus) -> Key {
        loop {
            let key = rng.random_range(0..KEY_LIMIT);
            if self.known.insert(key) {
                self.written.push(key);
                return key;
            }
        }
    }
}

/// Operation stream for `spec` over the loaded `dataset`. YCSB-F emits a
/// `Read` followed by a `Put` of the same key for each read-modify-write,
/// so its stream is longer than `n_ops`.
pub fn gen_ops(spec: &WorkloadSpec, dataset: &[Key]) -> Result<Vec<Op>> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("workload needs a non-empty dataset".to_string()));
    }
    let mut rng = rng_for(spec.seed);
    let mut picker = Picker {
        dataset,
        written: dataset.to_vec(),
        known: dataset.iter().copied().collect(),
        distribution: spec.key_distribution,
    };
    let dist = picker.distribution;
    let mut ops = Vec::with_capacity(spec.n_ops as usize);
    for _ in 0..spec.n_ops {
        let roll: f64 = rng.random();
        match spec.kind {
            WorkloadKind::PointOnly | WorkloadKind::YcsbC => {
                ops.push(Op::Read { key: picker.existing(&mut rng, dist) });
            }
            WorkloadKind::WriteOnly => {
                let key = picker.fresh(&mut rng);
                ops.push(Op::Put { key, value_hash: rng.random() });
            }
            WorkloadKind::RangeOnly(len) => {
                ops.push(Op::Scan { key: picker.existing(&mut rng, dist), len });
            }
            WorkloadKind::YcsbA | WorkloadKind::YcsbB => {
                let read_share = if spec.kind == WorkloadKind::YcsbA { 0.5 } else { 0.95 };
                let key = picker.existing(&mut rng, dist);
                if roll < read_share {
                    ops.push(Op::Read { key });
                } else {
                    ops.push(Op::Put { key, value_hash: rng.random() });
                }
            }
            WorkloadKind::YcsbD => {
                if roll < 0.95 {
                    ops.push(Op::Read { key: picker.existing(&mut rng, KeyDistribution::LatestPick) });
                } else {
                    let key = picker.fresh(&mut rng);
                    ops.push(Op::Put { key, value_hash: rng.random() });
                }
            }
            WorkloadKind::YcsbE => {
                if roll < 0.95 {
                    let key = picker.existing(&mut rng, dist);
                    ops.push(Op::Scan { key, len: rng.random_range(1..100) });
                } else {
                    let key = picker.fresh(&mut rng);
                    ops.push(Op::Put { key, value_hash: rng.random() });
                }
            }
            WorkloadKind::YcsbF => {
                let key = picker.existing(&mut rng, dist);
                ops.push(Op::Read { key });
                if roll >= 0.5 {
                    ops.push(Op::Put { key, value_hash: rng.random() });
                }
            }
        }
    }
    Ok(ops)
}
