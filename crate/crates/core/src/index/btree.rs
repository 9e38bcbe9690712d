//! FITing-Tree: greedy segments with a bulk-loaded B+-tree over their first
//! keys as the inner index.

use super::segment::{epsilon_window, locate, segment_greedy, Segment};
use crate::config::{Key, PositionRange};
use crate::error::Result;

pub const FANOUT: usize = 64;
/// One node holds `FANOUT` (key, child) pairs.
pub const NODE_BYTES: u64 = (FANOUT * 16) as u64;

/// Static B+-tree stored level by level. `levels[0]` holds one separator
/// per segment; `levels[i + 1][j]` is the first key of node `j` of
/// `levels[i]`. The top level fits in a single root node.
#[derive(Debug, Clone, PartialEq)]
pub struct BPlusTree {
    levels: Vec<Vec<Key>>,
}

impl BPlusTree {
    pub fn bulk_load(first_keys: Vec<Key>) -> Self {
        let mut levels = vec![first_keys];
        while levels.last().unwrap().len() > FANOUT {
            let below = levels.last().unwrap();
            let next: Vec<Key> = below.chunks(FANOUT).map(|node| node[0]).collect();
            levels.push(next);
        }
        BPlusTree { levels }
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self) -> u64 {
        self.levels.iter().map(|l| l.len().div_ceil(FANOUT) as u64).sum()
    }

    /// Descends from the root, taking the last child whose separator is
    /// `<= key` (the first child when none is).
    pub fn find(&self, key: Key) -> usize {
        let mut node = 0usize;
        for level in self.levels.iter().rev() {
            let start = node * FANOUT;
            let end = (start + FANOUT).min(level.len());
            let slot = level[start..end].partition_point(|&k| k <= key).saturating_sub(1);
            node = start + slot;
        }
        node
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitingTreeIndex {
    pub(crate) n: u64,
    pub(crate) epsilon: u64,
    pub(crate) segments: Vec<Segment>,
    pub(crate) tree: BPlusTree,
}

impl FitingTreeIndex {
    pub fn build(keys: &[Key], epsilon: u64) -> Result<Self> {
        let segments = segment_greedy(keys, epsilon)?;
        Ok(Self::from_segments(keys.len() as u64, epsilon, segments))
    }

    pub(crate) fn from_segments(n: u64, epsilon: u64, segments: Vec<Segment>) -> Self {
        let tree = BPlusTree::bulk_load(segments.iter().map(|s| s.first_key).collect());
        FitingTreeIndex { n, epsilon, segments, tree }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tree(&self) -> &BPlusTree {
        &self.tree
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        let seg = &self.segments[self.tree.find(key)];
        epsilon_window(seg.predict(key), self.epsilon, self.n)
    }

    /// Segment chosen by plain binary search, for cross-checking the tree.
    pub fn find_by_search(&self, key: Key) -> usize {
        locate(&self.segments, key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::segment::tests::random_keys;

    #[test]
    fn tree_shape() {
        let t = BPlusTree::bulk_load((0..10).collect());
        assert_eq!((t.height(), t.node_count()), (1, 1));
        let t = BPlusTree::bulk_load((0..65).collect());
        assert_eq!((t.height(), t.node_count()), (2, 3));
        let t = BPlusTree::bulk_load((0..64 * 64 + 1).collect());
        assert_eq!(t.height(), 3);
    }

    #[test]
    fn tree_descent_agrees_with_binary_search() {
        for n in [1usize, 2, 63, 64, 65, 4096, 4097, 10_000] {
            let keys: Vec<Key> = (0..n as u64).map(|i| i * 10 + 5).collect();
            let tree = BPlusTree::bulk_load(keys.clone());
            for probe in 0..(n as u64 * 10 + 20) {
                let expect = keys.partition_point(|&k| k <= probe).saturating_sub(1);
                assert_eq!(tree.find(probe), expect, "n={n} probe={probe}");
            }
        }
    }

    #[test]
    fn index_tree_matches_segment_search() {
        let keys = random_keys(200_000, 21, 1 << 50);
        let idx = FitingTreeIndex::build(&keys, 2).unwrap();
        assert!(idx.segments.len() > FANOUT * FANOUT / 4);
        let probes = random_keys(20_000, 22, 1 << 50);
        for k in probes.into_iter().chain(keys.iter().step_by(7).copied()) {
            assert_eq!(idx.tree.find(k), idx.find_by_search(k));
        }
    }
}
