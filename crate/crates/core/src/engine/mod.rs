//! The LSM-tree: a write buffer flushed straight into level 1, leveled
//! compaction with a round-robin pick, point lookups level by level and
//! merging range scans.
//!
//! Readers take a snapshot `Arc<Version>` and never block on compaction.
//! Writes, flushes and compactions are serialized by one writer lock and
//! run inline on the writing thread.

mod compaction;
pub mod manifest;
pub mod memtable;
mod scan;
pub mod version;

use std::collections::HashSet;
use std::fs;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};

use crate::config::{
    level_capacity_bytes, CompactionStyle, EngineConfig, EntryKind, Granularity, Key, MAX_SEQ,
};
use crate::error::{Error, Result};
use crate::metrics::{nanos_since, CompactionRecord, ReadStats};
use crate::sstable::{table_path, TableHandle, TableLookup};
use compaction::{merge_runs, read_run, OutputWriter};
use manifest::{Manifest, TableRecord};
use memtable::{MemTable, MemValue};
use scan::{merge_scan, LevelIter};
use version::{Level, Version};

struct WriterState {
    next_seq: u64,
    next_file_id: u64,
    /// Per level: max key of the table picked last.
    cursors: Vec<Option<Key>>,
    records: Vec<CompactionRecord>,
}

pub struct Db {
    config: EngineConfig,
    mem: RwLock<MemTable>,
    version: RwLock<Arc<Version>>,
    writer: Mutex<WriterState>,
}

/// Inputs of one merge into `to_level`.
struct Job {
    from_level: u32,
    to_level: u32,
    newer: Vec<Arc<TableHandle>>,
    older: Vec<Arc<TableHandle>>,
    /// Index range of `older` inside the destination level.
    older_range: std::ops::Range<usize>,
    /// Index range of `newer` inside the source level (unused for flushes).
    newer_range: std::ops::Range<usize>,
}

impl Db {
    /// Opens the engine in `config.data_dir`, reopening every table listed
    /// in the manifest and deleting table files it does not list.
    pub fn open(config: EngineConfig) -> Result<Db> {
        config.validate()?;
        fs::create_dir_all(&config.data_dir)?;
        let manifest = Manifest::load(&config.data_dir)?.unwrap_or(Manifest {
            next_seq: 1,
            next_file_id: 1,
            tables: Vec::new(),
        });

        let mut version = Version::default();
        let mut live = HashSet::new();
        for record in &manifest.tables {
            let path = table_path(&config.data_dir, record.level, record.file_id);
            let table = TableHandle::open(&path, record.file_id, &config)?;
            if (table.min_key(), table.max_key(), table.entry_count(), table.level())
                != (record.min_key, record.max_key, record.entry_count, record.level)
            {
                return Err(Error::CorruptTable(format!(
                    "{} does not match its manifest record",
                    path.display()
                )));
            }
            while version.depth() < record.level {
                version.levels.push(Level::default());
            }
            version.levels[record.level as usize - 1].tables.push(Arc::new(table));
            live.insert(path);
        }
        for level in &mut version.levels {
            level.tables.sort_by_key(|t| t.min_key());
            if !level.is_disjoint_sorted() {
                return Err(Error::CorruptTable("manifest lists overlapping tables".to_string()));
            }
        }
        remove_orphans(&config, &live)?;

        let depth = version.depth() as usize;
        Ok(Db {
            mem: RwLock::new(MemTable::new(config.entry_size())),
            version: RwLock::new(Arc::new(version)),
            writer: Mutex::new(WriterState {
                next_seq: manifest.next_seq.max(1),
                next_file_id: manifest.next_file_id.max(1),
                cursors: vec![None; depth],
                records: Vec::new(),
            }),
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Stores `value`, zero-padded to `value_size` bytes.
    pub fn put(&self, key: Key, value: &[u8]) -> Result<()> {
        if value.len() > self.config.value_size {
            return Err(Error::InvalidInput(format!(
                "value of {} bytes exceeds value_size {}",
                value.len(),
                self.config.value_size
            )));
        }
        let mut padded = value.to_vec();
        padded.resize(self.config.value_size, 0);
        self.write(key, EntryKind::Put, padded)
    }

    pub fn delete(&self, key: Key) -> Result<()> {
        self.write(key, EntryKind::Delete, Vec::new())
    }

    fn write(&self, key: Key, kind: EntryKind, value: Vec<u8>) -> Result<()> {
        let mut w = self.writer.lock();
        if w.next_seq > MAX_SEQ {
            return Err(Error::InvalidInput("sequence numbers exhausted".to_string()));
        }
        let seq = w.next_seq;
        w.next_seq += 1;
        let full = {
            let mut mem = self.mem.write();
            mem.insert(key, MemValue { seq, kind, value });
            mem.bytes() >= self.config.write_buffer_bytes
        };
        if full {
            self.flush_locked(&mut w)?;
            self.compact_locked(&mut w)?;
        }
        Ok(())
    }

    /// Flushes a non-empty write buffer and compacts until every level fits.
    pub fn flush(&self) -> Result<()> {
        let mut w = self.writer.lock();
        self.flush_locked(&mut w)?;
        self.compact_locked(&mut w)?;
        Ok(())
    }

    /// Runs compactions until no level exceeds its capacity and returns the
    /// records of the compactions performed.
    pub fn maybe_compact(&self) -> Result<Vec<CompactionRecord>> {
        let mut w = self.writer.lock();
        let before = w.records.len();
        self.compact_locked(&mut w)?;
        Ok(w.records[before..].to_vec())
    }

    pub fn get(&self, key: Key) -> Result<Option<Vec<u8>>> {
        self.get_with_stats(key, &mut ReadStats::default())
    }

    /// Memtable first, then each level's single candidate table.
    pub fn get_with_stats(&self, key: Key, stats: &mut ReadStats) -> Result<Option<Vec<u8>>> {
        {
            let mem = self.mem.read();
            if let Some(v) = mem.get(key) {
                return Ok(match v.kind {
                    EntryKind::Put => Some(v.value.clone()),
                    EntryKind::Delete => None,
                });
            }
        }
        let version = self.version();
        for (i, level) in version.levels.iter().enumerate() {
            let level_no = i as u32 + 1;
            let t = Instant::now();
            let candidate = level.candidate(key);
            stats.t_table_lookup_ns += nanos_since(t);
            let Some(table) = candidate else { continue };
            let (blocks, probes, time) = (stats.blocks_read, stats.table_probes, stats.phase_total_ns());
            let result = table.get(key, stats)?;
            let per_level = ReadStatsDelta {
                blocks: stats.blocks_read - blocks,
                probes: stats.table_probes - probes,
                time_ns: stats.phase_total_ns() - time,
            };
            let slot = stats.level_mut(level_no);
            slot.lookups += 1;
            slot.probes += per_level.probes;
            slot.blocks += per_level.blocks;
            slot.time_ns += per_level.time_ns;
            match result {
                TableLookup::Found { value, .. } => return Ok(Some(value)),
                TableLookup::Tombstone { .. } => return Ok(None),
                TableLookup::NotFound => {}
            }
        }
        Ok(None)
    }

    pub fn scan(&self, from: Key, n: usize) -> Result<Vec<(Key, Vec<u8>)>> {
        self.scan_with_stats(from, n, &mut ReadStats::default())
    }

    /// Up to `n` live entries with key >= `from`, in key order.
    pub fn scan_with_stats(&self, from: Key, n: usize, stats: &mut ReadStats) -> Result<Vec<(Key, Vec<u8>)>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let mem = self.mem.read();
        let version = self.version();
        let mut levels = Vec::with_capacity(version.levels.len());
        for (i, level) in version.levels.iter().enumerate() {
            levels.push(LevelIter::seek(i as u32 + 1, level, from, stats)?);
        }
        merge_scan(mem.range_from(from), levels, n, stats)
    }

    /// Current set of live tables.
    pub fn version(&self) -> Arc<Version> {
        self.version.read().clone()
    }

    pub fn memtable_bytes(&self) -> u64 {
        self.mem.read().bytes()
    }

    pub fn memtable_len(&self) -> usize {
        self.mem.read().len()
    }

    pub fn compaction_records(&self) -> Vec<CompactionRecord> {
        self.writer.lock().records.clone()
    }

    pub fn take_compaction_records(&self) -> Vec<CompactionRecord> {
        std::mem::take(&mut self.writer.lock().records)
    }

    fn flush_locked(&self, w: &mut WriterState) -> Result<()> {
        let start = Instant::now();
        let version = self.version();
        let read_start = Instant::now();
        let (newer_run, lo, hi) = {
            let mem = self.mem.read();
            let (Some(lo), Some(hi)) = (mem.first_key(), mem.last_key()) else {
                return Ok(());
            };
            let mut run = Vec::with_capacity(mem.bytes() as usize);
            for entry in mem.entries() {
                entry.encode_into(&mut run, self.config.value_size)?;
            }
            (run, lo, hi)
        };
        let empty = Level::default();
        let l1 = version.level(1).unwrap_or(&empty);
        let older_range = match self.config.granularity {
            Granularity::PerLevel => 0..l1.tables.len(),
            Granularity::PerFile => l1.overlapping(lo, hi),
        };
        let job = Job {
            from_level: 0,
            to_level: 1,
            newer: Vec::new(),
            older: l1.tables[older_range.clone()].to_vec(),
            older_range,
            newer_range: 0..0,
        };
        self.run_job(w, &version, job, Some(newer_run), start, read_start)
    }

    fn compact_locked(&self, w: &mut WriterState) -> Result<()> {
        loop {
            let version = self.version();
            let mut over = None;
            for (i, level) in version.levels.iter().enumerate() {
                let level_no = i as u32 + 1;
                if level.bytes() > level_capacity_bytes(level_no, &self.config)? {
                    over = Some(level_no);
                    break;
                }
            }
            let Some(level_no) = over else { return Ok(()) };
            self.compact_level(w, &version, level_no)?;
        }
    }

    fn compact_level(&self, w: &mut WriterState, version: &Arc<Version>, level_no: u32) -> Result<()> {
        let start = Instant::now();
        let source = version.level(level_no).expect("over-full level exists");
        let newer_range = match self.config.compaction {
            CompactionStyle::Full => 0..source.tables.len(),
            CompactionStyle::Partial => {
                let slot = level_no as usize - 1;
                if w.cursors.len() <= slot {
                    w.cursors.resize(slot + 1, None);
                }
                let pick = match w.cursors[slot] {
                    Some(cursor) => source.tables.partition_point(|t| t.min_key() <= cursor),
                    None => 0,
                };
                let pick = if pick >= source.tables.len() { 0 } else { pick };
                w.cursors[slot] = Some(source.tables[pick].max_key());
                pick..pick + 1
            }
        };
        let newer = source.tables[newer_range.clone()].to_vec();
        let lo = newer.first().expect("non-empty pick").min_key();
        let hi = newer.last().expect("non-empty pick").max_key();
        let empty = Level::default();
        let dest = version.level(level_no + 1).unwrap_or(&empty);
        let older_range = match self.config.granularity {
            Granularity::PerLevel => 0..dest.tables.len(),
            Granularity::PerFile => dest.overlapping(lo, hi),
        };
        let job = Job {
            from_level: level_no,
            to_level: level_no + 1,
            newer,
            older: dest.tables[older_range.clone()].to_vec(),
            older_range,
            newer_range,
        };
        self.run_job(w, version, job, None, start, Instant::now())
    }

    /// Merges the job's inputs, writes the outputs, installs the new version
    /// and deletes the inputs. `mem_run` replaces the newer tables for a
    /// flush.
    fn run_job(
        &self,
        w: &mut WriterState,
        version: &Arc<Version>,
        job: Job,
        mem_run: Option<Vec<u8>>,
        start: Instant,
        read_start: Instant,
    ) -> Result<()> {
        let newer_run = match mem_run {
            Some(run) => run,
            None => read_run(&job.newer)?,
        };
        let older_run = read_run(&job.older)?;
        let read_ns = nanos_since(read_start);

        let merge_start = Instant::now();
        let drop_tombstones = !version.has_data_below(job.to_level);
        let split = self.config.granularity == Granularity::PerFile;
        let mut next_file_id = w.next_file_id;
        let mut writer = OutputWriter::new(&self.config, job.to_level, split, &mut next_file_id);
        let merged = merge_runs(
            &newer_run,
            &older_run,
            self.config.entry_size() as usize,
            drop_tombstones,
            |record| writer.add(record),
        );
        if let Err(e) = merged {
            writer.discard();
            return Err(e);
        }
        let (outputs, build) = writer.finish()?;
        w.next_file_id = next_file_id;
        let merge_write_ns =
            nanos_since(merge_start).saturating_sub(build.index_train_ns + build.index_write_ns);
        let outputs: Vec<Arc<TableHandle>> = outputs.into_iter().map(Arc::new).collect();

        let mut next = Version::clone(version);
        while next.depth() < job.to_level {
            next.levels.push(Level::default());
        }
        if job.from_level > 0 {
            next.levels[job.from_level as usize - 1].tables.drain(job.newer_range.clone());
        }
        let dest = &mut next.levels[job.to_level as usize - 1].tables;
        dest.splice(job.older_range.clone(), outputs.iter().cloned());
        debug_assert!(next.levels.iter().all(Level::is_disjoint_sorted));

        if let Err(e) = self.install(w, next, job.from_level == 0) {
            for t in &outputs {
                let _ = t.remove_file();
            }
            return Err(e);
        }
        for t in job.newer.iter().chain(&job.older) {
            let _ = t.remove_file();
        }

        let entries = |tables: &[Arc<TableHandle>]| tables.iter().map(|t| t.entry_count()).sum::<u64>();
        let input_entries = entries(&job.newer)
            + entries(&job.older)
            + if job.from_level == 0 { newer_run.len() as u64 / self.config.entry_size() } else { 0 };
        w.records.push(CompactionRecord {
            from_level: job.from_level,
            to_level: job.to_level,
            input_tables: job.newer.iter().chain(&job.older).map(|t| t.file_id()).collect(),
            output_tables: outputs.iter().map(|t| t.file_id()).collect(),
            input_entries,
            output_entries: entries(&outputs),
            total_ns: nanos_since(start),
            read_ns,
            merge_write_ns,
            index_train_ns: build.index_train_ns,
            index_write_ns: build.index_write_ns,
        });
        Ok(())
    }

    /// Persists the manifest, then publishes `next` (and empties the write
    /// buffer after a flush) atomically with respect to readers.
    fn install(&self, w: &WriterState, next: Version, clear_mem: bool) -> Result<()> {
        let manifest = Manifest {
            next_seq: w.next_seq,
            next_file_id: w.next_file_id,
            tables: next
                .tables()
                .map(|t| TableRecord {
                    level: t.level(),
                    file_id: t.file_id(),
                    min_key: t.min_key(),
                    max_key: t.max_key(),
                    entry_count: t.entry_count(),
                })
                .collect(),
        };
        manifest.store(&self.config.data_dir)?;
        let mut mem = self.mem.write();
        let mut current = self.version.write();
        *current = Arc::new(next);
        if clear_mem {
            mem.clear();
        }
        Ok(())
    }
}

struct ReadStatsDelta {
    blocks: u64,
    probes: u64,
    time_ns: u64,
}

fn remove_orphans(config: &EngineConfig, live: &HashSet<std::path::PathBuf>) -> Result<()> {
    for dir in fs::read_dir(&config.data_dir)? {
        let dir = dir?;
        let name = dir.file_name();
        let is_level = name.to_str().is_some_and(|n| {
            n.strip_prefix('L').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
        });
        if !is_level || !dir.file_type()?.is_dir() {
            continue;
        }
        for file in fs::read_dir(dir.path())? {
            let path = file?.path();
            if path.extension().is_some_and(|e| e == "lit") && !live.contains(&path) {
                fs::remove_file(&path)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
