use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use super::memtable::MemValue;
use super::version::Level;
use crate::config::{Entry, EntryKind, Key};
use crate::error::Result;
use crate::metrics::{nanos_since, ReadStats};
use crate::sstable::{TableHandle, TableIterator};

/// Chains table iterators across one level, starting at the first entry
/// with key >= `from`.
pub(crate) struct LevelIter {
    level: u32,
    tables: Vec<Arc<TableHandle>>,
    next_table: usize,
    current: Option<TableIterator>,
}

impl LevelIter {
    pub(crate) fn seek(level_no: u32, level: &Level, from: Key, stats: &mut ReadStats) -> Result<Self> {
        let t = Instant::now();
        let start = level.first_reaching(from);
        stats.t_table_lookup_ns += nanos_since(t);
        let tables = level.tables[start..].to_vec();
        let mut it = LevelIter { level: level_no, tables, next_table: 0, current: None };
        if let Some(first) = it.tables.first() {
            it.current = Some(first.seek(from, ReadStats::default())?);
            it.next_table = 1;
        }
        Ok(it)
    }

    fn retire(&mut self, stats: &mut ReadStats) {
        if let Some(done) = self.current.take() {
            let s = done.into_stats();
            let level = stats.level_mut(self.level);
            level.blocks += s.blocks_read;
            level.time_ns += s.phase_total_ns();
            stats.merge(&ReadStats { per_level: Vec::new(), ..s });
        }
    }

    pub(crate) fn next_entry(&mut self, stats: &mut ReadStats) -> Result<Option<Entry>> {
        loop {
            let Some(current) = self.current.as_mut() else { return Ok(None) };
            if let Some(entry) = current.next_entry()? {
                return Ok(Some(entry));
            }
            self.retire(stats);
            if let Some(table) = self.tables.get(self.next_table) {
                self.current = Some(table.iter(ReadStats::default()));
                self.next_table += 1;
            }
        }
    }

    pub(crate) fn finish(mut self, stats: &mut ReadStats) {
        self.retire(stats);
    }
}

/// K-way merge of the memtable and one iterator per level. Sources are
/// ordered newest first, so on equal keys the lowest source index wins.
pub(crate) fn merge_scan<'m>(
    mem: impl Iterator<Item = (&'m Key, &'m MemValue)>,
    mut levels: Vec<LevelIter>,
    n: usize,
    stats: &mut ReadStats,
) -> Result<Vec<(Key, Vec<u8>)>> {
    let mut mem = mem.map(|(&key, v)| Entry { key, seq: v.seq, kind: v.kind, value: v.value.clone() });
    let mut heads: Vec<Option<Entry>> = Vec::with_capacity(levels.len() + 1);
    let mut heap = BinaryHeap::new();
    heads.push(mem.next());
    for level in &mut levels {
        heads.push(level.next_entry(stats)?);
    }
    for (i, head) in heads.iter().enumerate() {
        if let Some(e) = head {
            heap.push(Reverse((e.key, i)));
        }
    }

    let mut out = Vec::with_capacity(n.min(1 << 16));
    let mut last: Option<Key> = None;
    while out.len() < n {
        let Some(Reverse((key, src))) = heap.pop() else { break };
        let entry = heads[src].take().expect("heap entry has a head");
        let next = if src == 0 { mem.next() } else { levels[src - 1].next_entry(stats)? };
        if let Some(e) = &next {
            heap.push(Reverse((e.key, src)));
        }
        heads[src] = next;
        if last == Some(key) {
            continue;
        }
        last = Some(key);
        if entry.kind == EntryKind::Put {
            out.push((key, entry.value));
        }
    }
    for level in levels {
        level.finish(stats);
    }
    Ok(out)
}
