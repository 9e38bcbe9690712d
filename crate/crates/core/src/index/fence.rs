//! Classic fence pointers: the first key of every fixed-size block.

use crate::config::{Key, PositionRange};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FencePointerIndex {
    pub(crate) n: u64,
    pub(crate) entries_per_block: u64,
    /// (first_key, block ordinal)
    pub(crate) fences: Vec<(Key, u64)>,
}

impl FencePointerIndex {
    pub fn build(keys: &[Key], entries_per_block: u64) -> Self {
        let per_block = entries_per_block.max(1);
        let fences =
            keys.chunks(per_block as usize).enumerate().map(|(b, chunk)| (chunk[0], b as u64)).collect();
        FencePointerIndex { n: keys.len() as u64, entries_per_block: per_block, fences }
    }

    pub fn fences(&self) -> &[(Key, u64)] {
        &self.fences
    }

    pub fn entries_per_block(&self) -> u64 {
        self.entries_per_block
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        let slot = self.fences.partition_point(|&(k, _)| k <= key).saturating_sub(1);
        let block = self.fences[slot].1;
        let lo = block * self.entries_per_block;
        let hi = ((block + 1) * self.entries_per_block).min(self.n) - 1;
        PositionRange::new(lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_fence_per_block() {
        let keys: Vec<Key> = (0..1000).map(|i| i * 3).collect();
        let fp = FencePointerIndex::build(&keys, 100);
        assert_eq!(fp.fences.len(), 10);
        assert_eq!(fp.predict(0), PositionRange::new(0, 99));
        assert_eq!(fp.predict(301), PositionRange::new(100, 199));
        assert_eq!(fp.predict(u64::MAX), PositionRange::new(900, 999));
        let partial = FencePointerIndex::build(&keys[..150], 100);
        assert_eq!(partial.predict(449), PositionRange::new(100, 149));
    }
}
