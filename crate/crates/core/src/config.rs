//! Domain types shared by every layer, the engine configuration and the
//! closed-form LSM sizing formulas.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Sort key and model input. Ordered as an unsigned integer.
pub type Key = u64;

pub const KEY_BYTES: usize = 8;
/// Bytes of the packed `seq << 1 | kind` word that follows every key.
pub const SEQ_BYTES: usize = 8;
pub const ENTRY_HEADER_BYTES: usize = KEY_BYTES + SEQ_BYTES;

pub const MAX_SEQ: u64 = (1 << 63) - 1;

pub fn encode_key(key: Key) -> [u8; KEY_BYTES] {
    key.to_le_bytes()
}

pub fn decode_key(bytes: &[u8]) -> Key {
    let mut buf = [0u8; KEY_BYTES];
    buf.copy_from_slice(&bytes[..KEY_BYTES]);
    u64::from_le_bytes(buf)
}

/// Maps an external byte key (e.g. a 24-byte benchmark key) onto the numeric
/// key domain via its big-endian 8-byte prefix. Lossy: keys sharing a prefix
/// collide.
pub fn key_from_bytes_prefix(bytes: &[u8]) -> Key {
    let mut buf = [0u8; KEY_BYTES];
    let n = bytes.len().min(KEY_BYTES);
    buf[..n].copy_from_slice(&bytes[..n]);
    u64::from_be_bytes(buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    Put,
    Delete,
}

/// One versioned record. Encoded as `key (8) | seq<<1|kind (8) | value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: Key,
    pub seq: u64,
    pub kind: EntryKind,
    pub value: Vec<u8>,
}

impl Entry {
    pub fn put(key: Key, seq: u64, value: Vec<u8>) -> Self {
        Entry { key, seq, kind: EntryKind::Put, value }
    }

    pub fn delete(key: Key, seq: u64) -> Self {
        Entry { key, seq, kind: EntryKind::Delete, value: Vec::new() }
    }

    pub fn is_tombstone(&self) -> bool {
        self.kind == EntryKind::Delete
    }

    /// Appends exactly `ENTRY_HEADER_BYTES + value_size` bytes. Short values
    /// (tombstones) are zero-filled; longer values are rejected.
    pub fn encode_into(&self, out: &mut Vec<u8>, value_size: usize) -> Result<()> {
        if self.value.len() > value_size {
            return Err(Error::InvalidInput(format!(
                "value of {} bytes exceeds value_size {}",
                self.value.len(),
                value_size
            )));
        }
        if self.seq > MAX_SEQ {
            return Err(Error::InvalidInput(format!("sequence {} exceeds 63 bits", self.seq)));
        }
        let word = (self.seq << 1) | u64::from(self.kind == EntryKind::Delete);
        out.extend_from_slice(&encode_key(self.key));
        out.extend_from_slice(&word.to_le_bytes());
        out.extend_from_slice(&self.value);
        out.resize(out.len() + value_size - self.value.len(), 0);
        Ok(())
    }

    pub fn decode(bytes: &[u8], value_size: usize) -> Result<Entry> {
        let size = ENTRY_HEADER_BYTES + value_size;
        if bytes.len() < size {
            return Err(Error::CorruptTable(format!("entry needs {size} bytes, got {}", bytes.len())));
        }
        let key = decode_key(bytes);
        let word = decode_key(&bytes[KEY_BYTES..]);
        let kind = if word & 1 == 1 { EntryKind::Delete } else { EntryKind::Put };
        let value = match kind {
            EntryKind::Put => bytes[ENTRY_HEADER_BYTES..size].to_vec(),
            EntryKind::Delete => Vec::new(),
        };
        Ok(Entry { key, seq: word >> 1, kind, value })
    }
}

/// Index family used for every table of an engine instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    FencePointer,
    Plr,
    FitingTree,
    Pgm,
    RadixSpline,
    Rmi,
}

impl IndexKind {
    pub const ALL: [IndexKind; 6] = [
        IndexKind::FencePointer,
        IndexKind::Plr,
        IndexKind::FitingTree,
        IndexKind::Pgm,
        IndexKind::RadixSpline,
        IndexKind::Rmi,
    ];

    pub const LEARNED: [IndexKind; 5] =
        [IndexKind::Plr, IndexKind::FitingTree, IndexKind::Pgm, IndexKind::RadixSpline, IndexKind::Rmi];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::FencePointer => "fp",
            IndexKind::Plr => "plr",
            IndexKind::FitingTree => "fit",
            IndexKind::Pgm => "pgm",
            IndexKind::RadixSpline => "rs",
            IndexKind::Rmi => "rmi",
        }
    }

    /// Kinds whose window is derived from a user error bound.
    pub fn uses_epsilon(self) -> bool {
        matches!(self, IndexKind::Plr | IndexKind::FitingTree | IndexKind::Pgm | IndexKind::RadixSpline)
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fp" | "fence" | "fencepointer" => IndexKind::FencePointer,
            "plr" => IndexKind::Plr,
            "fit" | "ft" | "fitingtree" | "fiting-tree" => IndexKind::FitingTree,
            "pgm" => IndexKind::Pgm,
            "rs" | "radixspline" | "radix-spline" => IndexKind::RadixSpline,
            "rmi" => IndexKind::Rmi,
            other => return Err(Error::InvalidConfig(format!("unknown index kind {other:?}"))),
        })
    }
}

/// Parameters for all index kinds; only those of the selected kind matter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexParams {
    pub epsilon: u64,
    pub epsilon_recursive: u64,
    pub radix_bits: u32,
    pub leaf_count: u64,
    /// When set, RMI doubles `leaf_count` per table until its widest window
    /// fits this many entries.
    pub rmi_target_boundary: Option<u64>,
    pub fp_block_bytes: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            epsilon: 32,
            epsilon_recursive: 4,
            radix_bits: 1,
            leaf_count: 1024,
            rmi_target_boundary: None,
            fp_block_bytes: 4096,
        }
    }
}

impl IndexParams {
    pub fn validate(&self, kind: IndexKind) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{kind}: {what}")));
        match kind {
            IndexKind::Plr | IndexKind::FitingTree if self.epsilon < 1 => bad("epsilon must be >= 1"),
            IndexKind::Pgm if self.epsilon < 1 || self.epsilon_recursive < 1 => {
                bad("epsilon and epsilon_recursive must be >= 1")
            }
            IndexKind::RadixSpline if self.epsilon < 1 => bad("epsilon must be >= 1"),
            IndexKind::RadixSpline if !(1..=30).contains(&self.radix_bits) => {
                bad("radix_bits must be in 1..=30")
            }
            IndexKind::Rmi if self.leaf_count < 1 => bad("leaf_count must be >= 1"),
            IndexKind::Rmi if self.rmi_target_boundary == Some(0) => bad("target boundary must be >= 1"),
            IndexKind::FencePointer if self.fp_block_bytes < 1 => bad("fp_block_bytes must be >= 1"),
            _ => Ok(()),
        }
    }
}

/// The unit one index spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    PerFile,
    PerLevel,
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::PerFile => "file",
            Granularity::PerLevel => "level",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "file" | "per-file" => Ok(Granularity::PerFile),
            "level" | "per-level" => Ok(Granularity::PerLevel),
            other => Err(Error::InvalidConfig(format!("unknown granularity {other:?}"))),
        }
    }
}

/// How much of an over-full level a compaction moves down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompactionStyle {
    /// One table plus its overlaps in the next level.
    Partial,
    /// The whole level.
    Full,
}

impl fmt::Display for CompactionStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompactionStyle::Partial => "partial",
            CompactionStyle::Full => "full",
        })
    }
}

impl FromStr for CompactionStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partial" => Ok(CompactionStyle::Partial),
            "full" => Ok(CompactionStyle::Full),
            other => Err(Error::InvalidConfig(format!("unknown compaction style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// T
    pub size_ratio: u64,
    /// F
    pub write_buffer_bytes: u64,
    pub sstable_target_bytes: u64,
    pub value_size: usize,
    /// B
    pub block_bytes: u64,
    pub bloom_bits_per_key: u32,
    pub index_kind: IndexKind,
    pub index_params: IndexParams,
    pub granularity: Granularity,
    pub compaction: CompactionStyle,
    /// Optional epsilon per level (index 0 is level 1); levels past the end
    /// use `index_params.epsilon`.
    pub per_level_epsilon: Vec<u64>,
    pub data_dir: PathBuf,
}

impl EngineConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        EngineConfig {
            size_ratio: 10,
            write_buffer_bytes: 4 << 20,
            sstable_target_bytes: 4 << 20,
            value_size: 100,
            block_bytes: 4096,
            bloom_bits_per_key: 10,
            index_kind: IndexKind::Pgm,
            index_params: IndexParams::default(),
            granularity: Granularity::PerFile,
            compaction: CompactionStyle::Partial,
            per_level_epsilon: Vec::new(),
            data_dir: data_dir.into(),
        }
    }

    /// e: bytes per packed entry.
    pub fn entry_size(&self) -> u64 {
        (ENTRY_HEADER_BYTES + self.value_size) as u64
    }

    /// Index parameters for tables written into `level` (1-based).
    pub fn params_for_level(&self, level: u32) -> IndexParams {
        let mut params = self.index_params.clone();
        if let Some(&eps) = self.per_level_epsilon.get(level.saturating_sub(1) as usize) {
            params.epsilon = eps;
        }
        params
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        if self.size_ratio < 2 {
            return bad(format!("size_ratio must be >= 2, got {}", self.size_ratio));
        }
        if !self.block_bytes.is_power_of_two() {
            return bad(format!("block_bytes must be a power of two, got {}", self.block_bytes));
        }
        if self.sstable_target_bytes < self.block_bytes {
            return bad(format!(
                "sstable_target_bytes {} below block_bytes {}",
                self.sstable_target_bytes, self.block_bytes
            ));
        }
        if self.write_buffer_bytes < self.entry_size() {
            return bad(format!(
                "write_buffer_bytes {} below entry size {}",
                self.write_buffer_bytes,
                self.entry_size()
            ));
        }
        if self.granularity == Granularity::PerLevel && self.compaction == CompactionStyle::Partial {
            return bad(
                "per-level index granularity requires full-level compaction (--compaction full)".to_string()
            );
        }
        if self.per_level_epsilon.iter().any(|&e| e < 1) {
            return bad("per-level epsilon values must be >= 1".to_string());
        }
        self.index_params.validate(self.index_kind)
    }
}

/// Inclusive window of entry positions that must contain a built key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PositionRange {
    pub lo: u64,
    pub hi: u64,
}

impl PositionRange {
    pub fn new(lo: u64, hi: u64) -> Self {
        debug_assert!(lo <= hi);
        PositionRange { lo, hi }
    }

    /// Builds `[center - below, center + above]` clamped to `[0, n)`.
    pub fn around(center: i64, below: u64, above: u64, n: u64) -> Self {
        debug_assert!(n > 0);
        let last = (n - 1) as i128;
        let lo = (center as i128 - below as i128).clamp(0, last);
        let hi = (center as i128 + above as i128).clamp(0, last);
        PositionRange { lo: lo as u64, hi: hi as u64 }
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, pos: u64) -> bool {
        self.lo <= pos && pos <= self.hi
    }
}

/// L = ⌈log_T(N·e / F)⌉, at least 1.
pub fn levels_needed(
    n_entries: u64,
    entry_size: u64,
    write_buffer_bytes: u64,
    size_ratio: u64,
) -> Result<u32> {
    if size_ratio < 2 {
        return Err(Error::InvalidConfig(format!("size_ratio must be >= 2, got {size_ratio}")));
    }
    if n_entries == 0 || entry_size == 0 || write_buffer_bytes == 0 {
        return Err(Error::InvalidConfig("levels_needed inputs must be >= 1".to_string()));
    }
    // Smallest L >= 1 with F·T^L >= N·e, in exact integer arithmetic.
    let data = n_entries as u128 * entry_size as u128;
    let mut capacity = write_buffer_bytes as u128 * size_ratio as u128;
    let mut levels = 1;
    while capacity < data {
        capacity *= size_ratio as u128;
        levels += 1;
    }
    Ok(levels)
}

/// F · T^level.
pub fn level_capacity_bytes(level: u32, config: &EngineConfig) -> Result<u64> {
    if level < 1 {
        return Err(Error::InvalidConfig("levels are 1-based".to_string()));
    }
    let overflow = || Error::InvalidConfig(format!("capacity of level {level} overflows u64"));
    let factor = config.size_ratio.checked_pow(level).ok_or_else(overflow)?;
    config.write_buffer_bytes.checked_mul(factor).ok_or_else(overflow)
}

/// Upper bound on blocks fetched for one window of `position_boundary`
/// entries: ⌈boundary·e / B⌉ + 1.
pub fn boundary_blocks(position_boundary: u64, entry_size: u64, block_bytes: u64) -> u64 {
    (position_boundary * entry_size).div_ceil(block_bytes) + 1
}
