//! Counters and timers filled in by reads, table builds and compactions.

use std::time::Instant;

/// Per-level share of read work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelReadStats {
    /// Lookups that reached this level.
    pub lookups: u64,
    /// Tables whose filter let the lookup through.
    pub probes: u64,
    pub blocks: u64,
    pub time_ns: u64,
}

/// Logical I/O and phase timers accumulated by point and range reads. Each
/// reader owns its own instance, so no synchronization is involved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadStats {
    pub blocks_read: u64,
    pub bytes_read: u64,
    /// Table reads that got past the Bloom filter.
    pub table_probes: u64,
    pub bloom_negatives: u64,
    /// Largest block count of a single table probe.
    pub max_probe_blocks: u64,
    /// Table probes whose block count exceeded `boundary_blocks` of the
    /// table's own index boundary.
    pub io_bound_violations: u64,
    pub t_table_lookup_ns: u64,
    pub t_predict_ns: u64,
    pub t_io_ns: u64,
    pub t_bsearch_ns: u64,
    /// Indexed by level - 1.
    pub per_level: Vec<LevelReadStats>,
}

impl ReadStats {
    pub fn record_blocks(&mut self, blocks: u64, block_bytes: u64) {
        self.blocks_read += blocks;
        self.bytes_read += blocks * block_bytes;
    }

    pub fn level_mut(&mut self, level: u32) -> &mut LevelReadStats {
        let idx = level as usize - 1;
        if self.per_level.len() <= idx {
            self.per_level.resize(idx + 1, LevelReadStats::default());
        }
        &mut self.per_level[idx]
    }

    pub fn phase_total_ns(&self) -> u64 {
        self.t_table_lookup_ns + self.t_predict_ns + self.t_io_ns + self.t_bsearch_ns
    }

    pub fn merge(&mut self, other: &ReadStats) {
        self.blocks_read += other.blocks_read;
        self.bytes_read += other.bytes_read;
        self.table_probes += other.table_probes;
        self.bloom_negatives += other.bloom_negatives;
        self.max_probe_blocks = self.max_probe_blocks.max(other.max_probe_blocks);
        self.io_bound_violations += other.io_bound_violations;
        self.t_table_lookup_ns += other.t_table_lookup_ns;
        self.t_predict_ns += other.t_predict_ns;
        self.t_io_ns += other.t_io_ns;
        self.t_bsearch_ns += other.t_bsearch_ns;
        if self.per_level.len() < other.per_level.len() {
            self.per_level.resize(other.per_level.len(), LevelReadStats::default());
        }
        for (mine, theirs) in self.per_level.iter_mut().zip(&other.per_level) {
            mine.lookups += theirs.lookups;
            mine.probes += theirs.probes;
            mine.blocks += theirs.blocks;
            mine.time_ns += theirs.time_ns;
        }
    }
}

/// Time spent writing one table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub entries: u64,
    /// Bloom filter, footer and sync.
    pub data_write_ns: u64,
    pub index_train_ns: u64,
    pub index_write_ns: u64,
}

impl BuildStats {
    pub fn add(&mut self, other: &BuildStats) {
        self.entries += other.entries;
        self.data_write_ns += other.data_write_ns;
        self.index_train_ns += other.index_train_ns;
        self.index_write_ns += other.index_write_ns;
    }
}

/// One flush (`from_level == 0`) or compaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompactionRecord {
    pub from_level: u32,
    pub to_level: u32,
    pub input_tables: Vec<u64>,
    pub output_tables: Vec<u64>,
    pub input_entries: u64,
    pub output_entries: u64,
    pub total_ns: u64,
    pub read_ns: u64,
    pub merge_write_ns: u64,
    pub index_train_ns: u64,
    pub index_write_ns: u64,
}

/// Elapsed nanoseconds since `start`, saturating.
pub(crate) fn nanos_since(start: Instant) -> u64 {
    start.elapsed().as_nanos().min(u64::MAX as u128) as u64
}
