//! PGM: optimal segmentation applied recursively. Level 0 approximates the
//! keys; each higher level approximates the first keys of the level below,
//! until a single root segment remains.

use super::segment::{epsilon_window, locate_near, segment_optimal, Segment};
use crate::config::{Key, PositionRange};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PgmIndex {
    pub(crate) n: u64,
    pub(crate) epsilon: u64,
    pub(crate) epsilon_recursive: u64,
    /// `levels[0]` is the leaf level; the last level has one segment.
    pub(crate) levels: Vec<Vec<Segment>>,
}

impl PgmIndex {
    pub fn build(keys: &[Key], epsilon: u64, epsilon_recursive: u64) -> Result<Self> {
        let mut levels = vec![segment_optimal(keys, epsilon)?];
        while levels.last().unwrap().len() > 1 {
            let firsts: Vec<Key> = levels.last().unwrap().iter().map(|s| s.first_key).collect();
            // Any two points share a segment, so each level at least halves.
            levels.push(segment_optimal(&firsts, epsilon_recursive)?);
        }
        Ok(PgmIndex { n: keys.len() as u64, epsilon, epsilon_recursive, levels })
    }

    pub fn levels(&self) -> &[Vec<Segment>] {
        &self.levels
    }

    pub fn segment_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Leaf segment for `key`, found by descending the levels and searching
    /// within `2ε_r` of each internal prediction.
    pub fn find_leaf(&self, key: Key) -> usize {
        let mut idx = 0usize;
        for depth in (1..self.levels.len()).rev() {
            let seg = &self.levels[depth][idx];
            let below = &self.levels[depth - 1];
            let w = epsilon_window(seg.predict(key), self.epsilon_recursive, below.len() as u64);
            idx = locate_near(below, key, w.lo, w.hi);
        }
        idx
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        let seg = &self.levels[0][self.find_leaf(key)];
        epsilon_window(seg.predict(key), self.epsilon, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::segment::locate;
    use crate::index::segment::tests::{assert_segments_valid, random_keys};

    #[test]
    fn levels_shrink_to_single_root() {
        let keys = random_keys(1_000_000, 1, 1 << 63);
        let idx = PgmIndex::build(&keys, 32, 4).unwrap();
        assert_eq!(idx.levels.last().unwrap().len(), 1);
        for w in idx.levels.windows(2) {
            assert!(w[1].len() < w[0].len());
        }
        assert_segments_valid(&keys, &idx.levels[0], 32);
        for depth in 1..idx.levels.len() {
            let firsts: Vec<Key> = idx.levels[depth - 1].iter().map(|s| s.first_key).collect();
            assert_segments_valid(&firsts, &idx.levels[depth], 4);
        }
    }

    #[test]
    fn descent_finds_same_leaf_as_binary_search() {
        let keys = random_keys(300_000, 2, 1 << 40);
        let idx = PgmIndex::build(&keys, 4, 1).unwrap();
        assert!(idx.levels.len() >= 3);
        let probes = random_keys(30_000, 3, 1 << 41);
        for k in probes.into_iter().chain(keys.iter().step_by(3).copied()) {
            assert_eq!(idx.find_leaf(k), locate(&idx.levels[0], k));
        }
    }
}
