use std::sync::Arc;

use crate::config::Key;
use crate::sstable::TableHandle;

/// One sorted run: tables ordered by key with disjoint ranges.
#[derive(Debug, Clone, Default)]
pub struct Level {
    pub tables: Vec<Arc<TableHandle>>,
}

impl Level {
    pub fn bytes(&self) -> u64 {
        self.tables.iter().map(|t| t.data_bytes()).sum()
    }

    pub fn entry_count(&self) -> u64 {
        self.tables.iter().map(|t| t.entry_count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// The only table whose range can hold `key`.
    pub fn candidate(&self, key: Key) -> Option<&Arc<TableHandle>> {
        let i = self.tables.partition_point(|t| t.max_key() < key);
        self.tables.get(i).filter(|t| t.min_key() <= key)
    }

    /// Index of the first table with `max_key >= key`.
    pub fn first_reaching(&self, key: Key) -> usize {
        self.tables.partition_point(|t| t.max_key() < key)
    }

    /// Contiguous index range of tables overlapping `[lo, hi]`.
    pub fn overlapping(&self, lo: Key, hi: Key) -> std::ops::Range<usize> {
        let start = self.tables.partition_point(|t| t.max_key() < lo);
        let end = self.tables.partition_point(|t| t.min_key() <= hi);
        start..end.max(start)
    }

    pub fn key_range(&self) -> Option<(Key, Key)> {
        Some((self.tables.first()?.min_key(), self.tables.last()?.max_key()))
    }

    pub fn is_disjoint_sorted(&self) -> bool {
        self.tables.windows(2).all(|w| w[0].max_key() < w[1].min_key())
    }
}

/// Immutable set of live tables. Readers clone the `Arc` and keep reading a
/// consistent view while newer versions are installed.
#[derive(Debug, Clone, Default)]
pub struct Version {
    /// `levels[0]` is level 1.
    pub levels: Vec<Level>,
}

impl Version {
    pub fn level(&self, level: u32) -> Option<&Level> {
        self.levels.get(level as usize - 1)
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    /// True when some level deeper than `level` holds data.
    pub fn has_data_below(&self, level: u32) -> bool {
        self.levels.iter().skip(level as usize).any(|l| !l.is_empty())
    }

    pub fn tables(&self) -> impl Iterator<Item = &Arc<TableHandle>> {
        self.levels.iter().flat_map(|l| l.tables.iter())
    }

    pub fn table_count(&self) -> usize {
        self.levels.iter().map(|l| l.tables.len()).sum()
    }

    pub fn index_bytes_per_level(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.tables.iter().map(|t| t.index().memory_bytes()).sum()).collect()
    }

    pub fn bloom_bytes(&self) -> u64 {
        self.tables().map(|t| t.bloom().memory_bytes()).sum()
    }

    pub fn entry_count(&self) -> u64 {
        self.levels.iter().map(Level::entry_count).sum()
    }
}
