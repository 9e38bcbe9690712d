use std::sync::Arc;
use std::time::Instant;

use super::TableHandle;
use crate::config::{decode_key, Entry, EntryKind, Key, ENTRY_HEADER_BYTES, KEY_BYTES};
use crate::error::Result;
use crate::metrics::{nanos_since, ReadStats};

/// Forward cursor over one table. Holds the bytes of the blocks read so far
/// and fetches one more block whenever the next entry is not fully buffered.
#[derive(Debug)]
pub struct TableIterator {
    table: Arc<TableHandle>,
    pos: u64,
    buf: Vec<u8>,
    /// Data-region offset of `buf[0]`.
    buf_start: u64,
    stats: ReadStats,
}

impl TableIterator {
    pub(super) fn new(
        table: Arc<TableHandle>,
        pos: u64,
        buf: Vec<u8>,
        buf_start: u64,
        stats: ReadStats,
    ) -> Self {
        TableIterator { table, pos, buf, buf_start, stats }
    }

    pub fn table(&self) -> &Arc<TableHandle> {
        &self.table
    }

    /// Position of the entry the next call to `next` yields.
    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn is_exhausted(&self) -> bool {
        self.pos >= self.table.entry_count()
    }

    pub fn stats(&self) -> &ReadStats {
        &self.stats
    }

    pub fn into_stats(self) -> ReadStats {
        self.stats
    }

    fn ensure_buffered(&mut self) -> Result<()> {
        let e = self.table.entry_size();
        let start = self.pos * e;
        let end = start + e;
        let buf_end = self.buf_start + self.buf.len() as u64;
        if start >= self.buf_start && end <= buf_end {
            return Ok(());
        }
        let contiguous = start >= self.buf_start && start <= buf_end && !self.buf.is_empty();
        let read_from = if contiguous { buf_end } else { start };
        let blocks = (end - read_from).div_ceil(self.table.block_bytes());
        let t = Instant::now();
        let fresh = self.table.read_blocks_at(read_from, blocks, &mut self.stats)?;
        self.stats.t_io_ns += nanos_since(t);
        if contiguous {
            self.buf.drain(..(start - self.buf_start) as usize);
            self.buf.extend_from_slice(&fresh);
            self.buf_start = start;
        } else {
            self.buf = fresh;
            self.buf_start = start;
        }
        Ok(())
    }

    fn record(&self) -> &[u8] {
        let at = (self.pos * self.table.entry_size() - self.buf_start) as usize;
        &self.buf[at..at + self.table.entry_size() as usize]
    }

    /// Key of the next entry without consuming it.
    pub fn peek_key(&mut self) -> Result<Option<Key>> {
        if self.is_exhausted() {
            return Ok(None);
        }
        self.ensure_buffered()?;
        Ok(Some(decode_key(self.record())))
    }

    /// Yields the next entry with its value decoded.
    pub fn next_entry(&mut self) -> Result<Option<Entry>> {
        if self.is_exhausted() {
            return Ok(None);
        }
        self.ensure_buffered()?;
        let record = self.record();
        let key = decode_key(record);
        let word = decode_key(&record[KEY_BYTES..]);
        let entry = if word & 1 == 1 {
            Entry { key, seq: word >> 1, kind: EntryKind::Delete, value: Vec::new() }
        } else {
            Entry { key, seq: word >> 1, kind: EntryKind::Put, value: record[ENTRY_HEADER_BYTES..].to_vec() }
        };
        self.pos += 1;
        Ok(Some(entry))
    }
}

impl Iterator for TableIterator {
    type Item = Result<Entry>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_entry().transpose()
    }
}
