use std::collections::BTreeMap;
use std::ops::Bound;

use crate::config::{Entry, EntryKind, Key};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemValue {
    pub seq: u64,
    pub kind: EntryKind,
    pub value: Vec<u8>,
}

/// Write buffer: newest version of each recently written key. Its size is
/// counted in packed entries, exactly what a flush will write.
#[derive(Debug, Default)]
pub struct MemTable {
    map: BTreeMap<Key, MemValue>,
    entry_size: u64,
}

impl MemTable {
    pub fn new(entry_size: u64) -> Self {
        MemTable { map: BTreeMap::new(), entry_size }
    }

    pub fn insert(&mut self, key: Key, value: MemValue) {
        self.map.insert(key, value);
    }

    pub fn get(&self, key: Key) -> Option<&MemValue> {
        self.map.get(&key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.map.len() as u64 * self.entry_size
    }

    pub fn first_key(&self) -> Option<Key> {
        self.map.keys().next().copied()
    }

    pub fn last_key(&self) -> Option<Key> {
        self.map.keys().next_back().copied()
    }

    pub fn range_from(&self, from: Key) -> impl Iterator<Item = (&Key, &MemValue)> {
        self.map.range((Bound::Included(from), Bound::Unbounded))
    }

    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        self.map.iter().map(|(&key, v)| Entry { key, seq: v.seq, kind: v.kind, value: v.value.clone() })
    }

    pub fn clear(&mut self) {
        self.map.clear();
    }
}
