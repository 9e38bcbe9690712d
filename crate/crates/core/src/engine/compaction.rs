use std::path::PathBuf;
use std::sync::Arc;

use crate::config::{decode_key, EngineConfig};
use crate::error::Result;
use crate::metrics::{BuildStats, ReadStats};
use crate::sstable::{record_kind, TableBuilder, TableHandle};

/// Concatenated data regions of key-ordered, disjoint tables.
pub(crate) fn read_run(tables: &[Arc<TableHandle>]) -> Result<Vec<u8>> {
    let mut scratch = ReadStats::default();
    let total: u64 = tables.iter().map(|t| t.data_bytes()).sum();
    let mut run = Vec::with_capacity(total as usize);
    for t in tables {
        run.extend_from_slice(&t.read_all(&mut scratch)?);
    }
    Ok(run)
}

/// Two-way merge of sorted encoded runs. On equal keys the record from
/// `newer` wins. Tombstones are emitted unless `drop_tombstones` is set.
pub(crate) fn merge_runs(
    newer: &[u8],
    older: &[u8],
    entry_size: usize,
    drop_tombstones: bool,
    mut emit: impl FnMut(&[u8]) -> Result<()>,
) -> Result<()> {
    let mut newer = newer.chunks_exact(entry_size).peekable();
    let mut older = older.chunks_exact(entry_size).peekable();
    loop {
        let record = match (newer.peek(), older.peek()) {
            (None, None) => return Ok(()),
            (Some(_), None) => newer.next().unwrap(),
            (None, Some(_)) => older.next().unwrap(),
            (Some(a), Some(b)) => {
                let (ka, kb) = (decode_key(a), decode_key(b));
                if ka < kb {
                    newer.next().unwrap()
                } else if kb < ka {
                    older.next().unwrap()
                } else {
                    older.next();
                    newer.next().unwrap()
                }
            }
        };
        if drop_tombstones && record_kind(record) == crate::config::EntryKind::Delete {
            continue;
        }
        emit(record)?;
    }
}

/// Slices a merged stream into output tables of one level.
pub(crate) struct OutputWriter<'a> {
    config: &'a EngineConfig,
    level: u32,
    /// One table per level when false.
    split: bool,
    next_file_id: &'a mut u64,
    current: Option<TableBuilder>,
    done: Vec<TableHandle>,
    created: Vec<PathBuf>,
    stats: BuildStats,
}

impl<'a> OutputWriter<'a> {
    pub(crate) fn new(config: &'a EngineConfig, level: u32, split: bool, next_file_id: &'a mut u64) -> Self {
        OutputWriter {
            config,
            level,
            split,
            next_file_id,
            current: None,
            done: Vec::new(),
            created: Vec::new(),
            stats: BuildStats::default(),
        }
    }

    fn start_table(&mut self) -> Result<()> {
        let id = *self.next_file_id;
        *self.next_file_id += 1;
        let builder = TableBuilder::create(self.config, self.level, id)?;
        self.created.push(builder.path().to_path_buf());
        self.current = Some(builder);
        Ok(())
    }

    fn finish_current(&mut self) -> Result<()> {
        if let Some(builder) = self.current.take() {
            let (table, stats) = builder.finish()?;
            self.stats.add(&stats);
            self.done.push(table);
        }
        Ok(())
    }

    pub(crate) fn add(&mut self, record: &[u8]) -> Result<()> {
        let full = match &self.current {
            None => true,
            Some(b) => {
                self.split
                    && b.entry_count() > 0
                    && b.data_bytes() + self.config.entry_size() > self.config.sstable_target_bytes
            }
        };
        if full {
            self.finish_current()?;
            self.start_table()?;
        }
        self.current.as_mut().unwrap().add_record(record)
    }

    pub(crate) fn finish(mut self) -> Result<(Vec<TableHandle>, BuildStats)> {
        match self.finish_current() {
            Ok(()) => Ok((std::mem::take(&mut self.done), self.stats)),
            Err(e) => {
                self.discard();
                Err(e)
            }
        }
    }

    /// Removes every file this writer created.
    pub(crate) fn discard(&mut self) {
        self.current = None;
        self.done.clear();
        for path in self.created.drain(..) {
            let _ = std::fs::remove_file(path);
        }
    }
}
