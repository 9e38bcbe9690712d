//! Immutable sorted table files: packed fixed-size entries, a serialized
//! index, a Bloom filter and a 64-byte footer.
//!
//! Lookups fetch whole logical blocks of `block_bytes` starting at the first
//! byte of the predicted window, so a window of `w` entries costs exactly
//! `⌈w·e / B⌉` blocks.

mod bloom;
mod iter;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use bloom::BloomFilter;
pub use iter::TableIterator;

use crate::config::{
    boundary_blocks, decode_key, EngineConfig, Entry, EntryKind, Key, ENTRY_HEADER_BYTES, KEY_BYTES,
};
use crate::error::{Error, Result};
use crate::index::{build_index, LearnedIndex};
use crate::metrics::{nanos_since, BuildStats, ReadStats};

pub const FOOTER_BYTES: usize = 64;
const TABLE_MAGIC: &[u8; 4] = b"LSMT";

/// `data_dir/L{level}/{file_id:06}.lit`
pub fn table_path(data_dir: &Path, level: u32, file_id: u64) -> PathBuf {
    data_dir.join(format!("L{level}")).join(format!("{file_id:06}.lit"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Footer {
    data_offset: u32,
    entry_size: u32,
    index_offset: u64,
    index_len: u32,
    bloom_len: u32,
    bloom_offset: u64,
    entry_count: u64,
    min_key: Key,
    max_key: Key,
    level: u32,
}

impl Footer {
    fn encode(&self) -> [u8; FOOTER_BYTES] {
        let mut out = [0u8; FOOTER_BYTES];
        out[0..4].copy_from_slice(&self.data_offset.to_le_bytes());
        out[4..8].copy_from_slice(&self.entry_size.to_le_bytes());
        out[8..16].copy_from_slice(&self.index_offset.to_le_bytes());
        out[16..20].copy_from_slice(&self.index_len.to_le_bytes());
        out[20..24].copy_from_slice(&self.bloom_len.to_le_bytes());
        out[24..32].copy_from_slice(&self.bloom_offset.to_le_bytes());
        out[32..40].copy_from_slice(&self.entry_count.to_le_bytes());
        out[40..48].copy_from_slice(&self.min_key.to_le_bytes());
        out[48..56].copy_from_slice(&self.max_key.to_le_bytes());
        out[56..60].copy_from_slice(&self.level.to_le_bytes());
        out[60..64].copy_from_slice(TABLE_MAGIC);
        out
    }

    fn decode(bytes: &[u8; FOOTER_BYTES]) -> Result<Footer> {
        if &bytes[60..64] != TABLE_MAGIC {
            return Err(Error::CorruptTable("bad footer magic".to_string()));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        Ok(Footer {
            data_offset: u32_at(0),
            entry_size: u32_at(4),
            index_offset: u64_at(8),
            index_len: u32_at(16),
            bloom_len: u32_at(20),
            bloom_offset: u64_at(24),
            entry_count: u64_at(32),
            min_key: u64_at(40),
            max_key: u64_at(48),
            level: u32_at(56),
        })
    }
}

/// Result of a point probe against one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableLookup {
    Found { seq: u64, value: Vec<u8> },
    Tombstone { seq: u64 },
    NotFound,
}

/// An open table: immutable, shareable across threads, read with positioned
/// I/O only.
#[derive(Debug)]
pub struct TableHandle {
    file_id: u64,
    level: u32,
    min_key: Key,
    max_key: Key,
    entry_count: u64,
    data_offset: u64,
    entry_size: u64,
    block_bytes: u64,
    file_bytes: u64,
    index: LearnedIndex,
    bloom: BloomFilter,
    path: PathBuf,
    file: File,
}

/// Streams sorted entries into a new table file.
pub struct TableBuilder {
    config_block_bytes: u64,
    bloom_bits_per_key: u32,
    kind: crate::config::IndexKind,
    params: crate::config::IndexParams,
    entry_size: u64,
    value_size: usize,
    level: u32,
    file_id: u64,
    path: PathBuf,
    out: BufWriter<File>,
    keys: Vec<Key>,
    scratch: Vec<u8>,
}

impl TableBuilder {
    pub fn create(config: &EngineConfig, level: u32, file_id: u64) -> Result<Self> {
        let path = table_path(&config.data_dir, level, file_id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = File::create(&path)?;
        Ok(TableBuilder {
            config_block_bytes: config.block_bytes,
            bloom_bits_per_key: config.bloom_bits_per_key,
            kind: config.index_kind,
            params: config.params_for_level(level),
            entry_size: config.entry_size(),
            value_size: config.value_size,
            level,
            file_id,
            path,
            out: BufWriter::with_capacity(1 << 16, file),
            keys: Vec::new(),
            scratch: Vec::with_capacity(config.entry_size() as usize),
        })
    }

    pub fn entry_count(&self) -> u64 {
        self.keys.len() as u64
    }

    pub fn data_bytes(&self) -> u64 {
        self.keys.len() as u64 * self.entry_size
    }

    pub fn last_key(&self) -> Option<Key> {
        self.keys.last().copied()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn push_key(&mut self, key: Key) -> Result<()> {
        if let Some(&last) = self.keys.last() {
            if key <= last {
                return Err(Error::InvalidInput(format!(
                    "table entries must be strictly increasing: {key} after {last}"
                )));
            }
        }
        self.keys.push(key);
        Ok(())
    }

    pub fn add(&mut self, entry: &Entry) -> Result<()> {
        self.push_key(entry.key)?;
        self.scratch.clear();
        entry.encode_into(&mut self.scratch, self.value_size)?;
        self.out.write_all(&self.scratch)?;
        Ok(())
    }

    /// Appends an already encoded entry of exactly `entry_size` bytes.
    pub fn add_record(&mut self, record: &[u8]) -> Result<()> {
        if record.len() as u64 != self.entry_size {
            return Err(Error::InvalidInput(format!(
                "record of {} bytes, expected {}",
                record.len(),
                self.entry_size
            )));
        }
        self.push_key(decode_key(record))?;
        self.out.write_all(record)?;
        Ok(())
    }

    /// Trains the index, writes index, filter and footer, and reopens the
    /// result as a handle.
    pub fn finish(mut self) -> Result<(TableHandle, BuildStats)> {
        let mut stats = BuildStats { entries: self.keys.len() as u64, ..BuildStats::default() };
        if self.keys.is_empty() {
            drop(self.out);
            let _ = fs::remove_file(&self.path);
            return Err(Error::InvalidInput("cannot build a table with no entries".to_string()));
        }

        let train = Instant::now();
        let index = build_index(self.kind, &self.params, &self.keys, self.entry_size)?;
        stats.index_train_ns = nanos_since(train);

        let index_write = Instant::now();
        let index_bytes = index.serialize();
        self.out.write_all(&index_bytes)?;
        stats.index_write_ns = nanos_since(index_write);

        let tail = Instant::now();
        let bloom = BloomFilter::build(&self.keys, self.bloom_bits_per_key);
        let bloom_bytes = bloom.serialize();
        self.out.write_all(&bloom_bytes)?;
        let data_len = self.keys.len() as u64 * self.entry_size;
        let footer = Footer {
            data_offset: 0,
            entry_size: self.entry_size as u32,
            index_offset: data_len,
            index_len: index_bytes.len() as u32,
            bloom_len: bloom_bytes.len() as u32,
            bloom_offset: data_len + index_bytes.len() as u64,
            entry_count: self.keys.len() as u64,
            min_key: self.keys[0],
            max_key: *self.keys.last().unwrap(),
            level: self.level,
        };
        self.out.write_all(&footer.encode())?;
        let file = self.out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.sync_data()?;
        drop(file);
        let file = File::open(&self.path)?;
        let file_bytes = footer.bloom_offset + bloom_bytes.len() as u64 + FOOTER_BYTES as u64;
        stats.data_write_ns = nanos_since(tail);

        let handle = TableHandle {
            file_id: self.file_id,
            level: self.level,
            min_key: footer.min_key,
            max_key: footer.max_key,
            entry_count: footer.entry_count,
            data_offset: 0,
            entry_size: self.entry_size,
            block_bytes: self.config_block_bytes,
            file_bytes,
            index,
            bloom,
            path: self.path,
            file,
        };
        Ok((handle, stats))
    }
}

/// Writes `entries` (strictly increasing by key) as one table.
pub fn build_table(
    entries: impl IntoIterator<Item = Entry>,
    config: &EngineConfig,
    level: u32,
    file_id: u64,
) -> Result<(TableHandle, BuildStats)> {
    let mut builder = TableBuilder::create(config, level, file_id)?;
    for entry in entries {
        if let Err(err) = builder.add(&entry) {
            let path = builder.path().to_path_buf();
            drop(builder);
            let _ = fs::remove_file(path);
            return Err(err);
        }
    }
    builder.finish()
}

impl TableHandle {
    /// Reopens a table written by [`TableBuilder`].
    pub fn open(path: &Path, file_id: u64, config: &EngineConfig) -> Result<TableHandle> {
        let file = File::open(path)?;
        let file_bytes = file.metadata()?.len();
        if file_bytes < FOOTER_BYTES as u64 {
            return Err(Error::CorruptTable(format!("{} is too short", path.display())));
        }
        let mut raw = [0u8; FOOTER_BYTES];
        file.read_exact_at(&mut raw, file_bytes - FOOTER_BYTES as u64)?;
        let footer = Footer::decode(&raw)?;
        let corrupt = |what: &str| Error::CorruptTable(format!("{}: {what}", path.display()));
        if u64::from(footer.entry_size) != config.entry_size() {
            return Err(corrupt("entry size differs from configuration"));
        }
        let data_len = footer.entry_count * u64::from(footer.entry_size);
        if footer.entry_count == 0
            || footer.index_offset != u64::from(footer.data_offset) + data_len
            || footer.bloom_offset != footer.index_offset + u64::from(footer.index_len)
            || footer.bloom_offset + u64::from(footer.bloom_len) + FOOTER_BYTES as u64 != file_bytes
        {
            return Err(corrupt("footer offsets inconsistent with file size"));
        }
        let mut index_bytes = vec![0u8; footer.index_len as usize];
        file.read_exact_at(&mut index_bytes, footer.index_offset)?;
        let index = LearnedIndex::deserialize(&index_bytes)?;
        if index.len() != footer.entry_count {
            return Err(corrupt("index size differs from entry count"));
        }
        let mut bloom_bytes = vec![0u8; footer.bloom_len as usize];
        file.read_exact_at(&mut bloom_bytes, footer.bloom_offset)?;
        let bloom = BloomFilter::deserialize(&bloom_bytes)?;
        Ok(TableHandle {
            file_id,
            level: footer.level,
            min_key: footer.min_key,
            max_key: footer.max_key,
            entry_count: footer.entry_count,
            data_offset: u64::from(footer.data_offset),
            entry_size: u64::from(footer.entry_size),
            block_bytes: config.block_bytes,
            file_bytes,
            index,
            bloom,
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn file_id(&self) -> u64 {
        self.file_id
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn min_key(&self) -> Key {
        self.min_key
    }

    pub fn max_key(&self) -> Key {
        self.max_key
    }

    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    pub fn entry_size(&self) -> u64 {
        self.entry_size
    }

    pub fn block_bytes(&self) -> u64 {
        self.block_bytes
    }

    pub fn data_bytes(&self) -> u64 {
        self.entry_count * self.entry_size
    }

    pub fn file_bytes(&self) -> u64 {
        self.file_bytes
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn index(&self) -> &LearnedIndex {
        &self.index
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    pub fn overlaps(&self, lo: Key, hi: Key) -> bool {
        self.min_key <= hi && lo <= self.max_key
    }

    /// Largest number of blocks a single probe of this table may read.
    pub fn probe_block_bound(&self) -> u64 {
        boundary_blocks(self.index.position_boundary(), self.entry_size, self.block_bytes)
    }

    /// Reads `n_blocks` logical blocks starting at byte `offset` of the data
    /// region. The final block is cut short at the end of the data region.
    pub fn read_blocks_at(&self, offset: u64, n_blocks: u64, stats: &mut ReadStats) -> Result<Vec<u8>> {
        let data_len = self.data_bytes();
        if n_blocks == 0 {
            return Ok(Vec::new());
        }
        if offset >= data_len {
            return Err(Error::Range { first: offset, count: n_blocks, available: data_len });
        }
        let len = (n_blocks * self.block_bytes).min(data_len - offset);
        let mut buf = vec![0u8; len as usize];
        self.file.read_exact_at(&mut buf, self.data_offset + offset)?;
        stats.record_blocks(n_blocks, self.block_bytes);
        Ok(buf)
    }

    /// Reads aligned data blocks `[first_block, first_block + n_blocks)`.
    pub fn read_block_span(&self, first_block: u64, n_blocks: u64, stats: &mut ReadStats) -> Result<Vec<u8>> {
        let total = self.data_bytes().div_ceil(self.block_bytes);
        if n_blocks == 0 {
            return Ok(Vec::new());
        }
        if first_block.checked_add(n_blocks).is_none_or(|end| end > total) {
            return Err(Error::Range { first: first_block, count: n_blocks, available: total });
        }
        self.read_blocks_at(first_block * self.block_bytes, n_blocks, stats)
    }

    /// Whole data region, as read by compaction.
    pub fn read_all(&self, stats: &mut ReadStats) -> Result<Vec<u8>> {
        self.read_blocks_at(0, self.data_bytes().div_ceil(self.block_bytes), stats)
    }

    /// Reads the predicted window `[lo, hi]` and returns the bytes together
    /// with the position of their first entry and the number of entries
    /// fully contained in them.
    fn read_window(&self, lo: u64, hi: u64, stats: &mut ReadStats) -> Result<(Vec<u8>, u64)> {
        let span = (hi - lo + 1) * self.entry_size;
        let blocks = span.div_ceil(self.block_bytes);
        let buf = self.read_blocks_at(lo * self.entry_size, blocks, stats)?;
        let whole = (buf.len() as u64 / self.entry_size).min(self.entry_count - lo);
        Ok((buf, whole))
    }

    fn key_at(&self, buf: &[u8], i: u64) -> Key {
        let at = (i * self.entry_size) as usize;
        decode_key(&buf[at..at + KEY_BYTES])
    }

    /// Number of entries among the first `count` of `buf` with key < target.
    fn lower_bound_in(&self, buf: &[u8], count: u64, target: Key) -> u64 {
        let (mut lo, mut hi) = (0u64, count);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.key_at(buf, mid) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Bloom check, predict, read the window, binary search it.
    pub fn get(&self, key: Key, stats: &mut ReadStats) -> Result<TableLookup> {
        let t = Instant::now();
        if key < self.min_key || key > self.max_key {
            stats.t_table_lookup_ns += nanos_since(t);
            return Ok(TableLookup::NotFound);
        }
        let pass = self.bloom.may_contain(key);
        stats.t_table_lookup_ns += nanos_since(t);
        if !pass {
            stats.bloom_negatives += 1;
            return Ok(TableLookup::NotFound);
        }

        let t = Instant::now();
        let range = self.index.predict(key)?;
        stats.t_predict_ns += nanos_since(t);

        let t = Instant::now();
        let before = stats.blocks_read;
        let (buf, whole) = self.read_window(range.lo, range.hi, stats)?;
        let blocks = stats.blocks_read - before;
        stats.t_io_ns += nanos_since(t);
        stats.table_probes += 1;
        stats.max_probe_blocks = stats.max_probe_blocks.max(blocks);
        if blocks > self.probe_block_bound() {
            stats.io_bound_violations += 1;
        }

        let t = Instant::now();
        let count = (range.hi - range.lo + 1).min(whole);
        let pos = self.lower_bound_in(&buf, count, key);
        let result = if pos < count && self.key_at(&buf, pos) == key {
            let at = (pos * self.entry_size) as usize;
            let record = &buf[at..at + self.entry_size as usize];
            let word = decode_key(&record[KEY_BYTES..]);
            if word & 1 == 1 {
                TableLookup::Tombstone { seq: word >> 1 }
            } else {
                TableLookup::Found { seq: word >> 1, value: record[ENTRY_HEADER_BYTES..].to_vec() }
            }
        } else {
            TableLookup::NotFound
        };
        stats.t_bsearch_ns += nanos_since(t);
        Ok(result)
    }

    /// Iterator positioned at the first entry with key >= `target`.
    pub fn seek(self: &std::sync::Arc<Self>, target: Key, mut stats: ReadStats) -> Result<TableIterator> {
        let n = self.entry_count;
        if target <= self.min_key {
            return Ok(TableIterator::new(self.clone(), 0, Vec::new(), 0, stats));
        }
        if target > self.max_key {
            return Ok(TableIterator::new(self.clone(), n, Vec::new(), 0, stats));
        }
        let t = Instant::now();
        let range = self.index.predict(target)?;
        stats.t_predict_ns += nanos_since(t);

        // The answer lies in [known_lo, known_hi]; each read narrows it.
        let (mut known_lo, mut known_hi) = (0u64, n);
        let (mut lo, mut hi) = (range.lo, range.hi);
        let mut width = range.len();
        loop {
            let t = Instant::now();
            let (buf, whole) = self.read_window(lo, hi, &mut stats)?;
            stats.t_io_ns += nanos_since(t);
            let t = Instant::now();
            let local = self.lower_bound_in(&buf, whole, target);
            stats.t_bsearch_ns += nanos_since(t);
            let candidate = lo + local;
            if local > 0 || lo == 0 {
                known_lo = known_lo.max(candidate);
            }
            if local < whole || lo + whole == n {
                known_hi = known_hi.min(candidate);
            }
            if known_lo == known_hi {
                let pos = known_lo;
                if pos < lo + whole {
                    return Ok(TableIterator::new(self.clone(), pos, buf, lo * self.entry_size, stats));
                }
                return Ok(TableIterator::new(self.clone(), pos, Vec::new(), 0, stats));
            }
            width *= 2;
            if local == 0 {
                hi = lo - 1;
                lo = lo.saturating_sub(width).max(known_lo);
            } else {
                lo += whole;
                hi = (lo + width - 1).min(known_hi).min(n - 1);
            }
        }
    }

    /// Iterator over the whole table from its first entry.
    pub fn iter(self: &std::sync::Arc<Self>, stats: ReadStats) -> TableIterator {
        TableIterator::new(self.clone(), 0, Vec::new(), 0, stats)
    }

    pub fn remove_file(&self) -> Result<()> {
        fs::remove_file(&self.path)?;
        Ok(())
    }
}

/// Decodes the kind bit of an encoded entry.
pub fn record_kind(record: &[u8]) -> EntryKind {
    if record[KEY_BYTES] & 1 == 1 {
        EntryKind::Delete
    } else {
        EntryKind::Put
    }
}
