//! Per-table indexes over an immutable sorted key array.
//!
//! Every variant answers [`LearnedIndex::predict`] with a [`PositionRange`]
//! that is guaranteed to contain the position of any key the index was
//! built from. Error-bounded kinds return exactly `2ε` positions (before
//! clamping at the array edges); the RMI returns its routed leaf's recorded
//! window and fence pointers return one block.

pub mod btree;
mod codec;
pub mod fence;
pub mod pgm;
pub mod rmi;
pub mod segment;
pub mod spline;

pub use btree::{BPlusTree, FitingTreeIndex};
pub use fence::FencePointerIndex;
pub use pgm::PgmIndex;
pub use rmi::{RmiIndex, RmiLeaf};
pub use segment::{segment_greedy, segment_optimal, Segment};
pub use spline::{fit_spline, RadixSplineIndex, SplinePoint};

use crate::config::{IndexKind, IndexParams, Key, PositionRange};
use crate::error::{Error, Result};

/// Fixed accounting charge per index (kind tag and parameter block).
pub const INDEX_HEADER_BYTES: u64 = 32;
pub const FENCE_BYTES: u64 = 16;
pub const SPLINE_POINT_BYTES: u64 = 16;
pub const RADIX_SLOT_BYTES: u64 = 8;
pub const RMI_TOP_BYTES: u64 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct PlrIndex {
    pub(crate) n: u64,
    pub(crate) epsilon: u64,
    pub(crate) segments: Vec<Segment>,
}

impl PlrIndex {
    pub fn build(keys: &[Key], epsilon: u64) -> Result<Self> {
        Ok(PlrIndex { n: keys.len() as u64, epsilon, segments: segment_greedy(keys, epsilon)? })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        let seg = &self.segments[segment::locate(&self.segments, key)];
        segment::epsilon_window(seg.predict(key), self.epsilon, self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnedIndex {
    /// Built over zero keys; every lookup fails.
    Empty,
    FencePointer(FencePointerIndex),
    Plr(PlrIndex),
    FitingTree(FitingTreeIndex),
    Pgm(PgmIndex),
    RadixSpline(RadixSplineIndex),
    Rmi(RmiIndex),
}

/// Builds the index of `kind` over strictly increasing `keys`. `entry_size`
/// converts the fence pointer block size from bytes to entries.
pub fn build_index(
    kind: IndexKind,
    params: &IndexParams,
    keys: &[Key],
    entry_size: u64,
) -> Result<LearnedIndex> {
    params.validate(kind)?;
    if keys.is_empty() {
        return Ok(LearnedIndex::Empty);
    }
    segment::check_sorted(keys)?;
    Ok(match kind {
        IndexKind::FencePointer => {
            let per_block = (params.fp_block_bytes / entry_size.max(1)).max(1);
            LearnedIndex::FencePointer(FencePointerIndex::build(keys, per_block))
        }
        IndexKind::Plr => LearnedIndex::Plr(PlrIndex::build(keys, params.epsilon)?),
        IndexKind::FitingTree => LearnedIndex::FitingTree(FitingTreeIndex::build(keys, params.epsilon)?),
        IndexKind::Pgm => LearnedIndex::Pgm(PgmIndex::build(keys, params.epsilon, params.epsilon_recursive)?),
        IndexKind::RadixSpline => {
            LearnedIndex::RadixSpline(RadixSplineIndex::build(keys, params.epsilon, params.radix_bits)?)
        }
        IndexKind::Rmi => LearnedIndex::Rmi(match params.rmi_target_boundary {
            Some(target) => RmiIndex::build_for_boundary(keys, target),
            None => RmiIndex::build(keys, params.leaf_count),
        }),
    })
}

impl LearnedIndex {
    pub fn kind(&self) -> Option<IndexKind> {
        Some(match self {
            LearnedIndex::Empty => return None,
            LearnedIndex::FencePointer(_) => IndexKind::FencePointer,
            LearnedIndex::Plr(_) => IndexKind::Plr,
            LearnedIndex::FitingTree(_) => IndexKind::FitingTree,
            LearnedIndex::Pgm(_) => IndexKind::Pgm,
            LearnedIndex::RadixSpline(_) => IndexKind::RadixSpline,
            LearnedIndex::Rmi(_) => IndexKind::Rmi,
        })
    }

    /// Number of keys the index was built over.
    pub fn len(&self) -> u64 {
        match self {
            LearnedIndex::Empty => 0,
            LearnedIndex::FencePointer(i) => i.n,
            LearnedIndex::Plr(i) => i.n,
            LearnedIndex::FitingTree(i) => i.n,
            LearnedIndex::Pgm(i) => i.n,
            LearnedIndex::RadixSpline(i) => i.n,
            LearnedIndex::Rmi(i) => i.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn predict(&self, key: Key) -> Result<PositionRange> {
        Ok(match self {
            LearnedIndex::Empty => return Err(Error::EmptyIndex),
            LearnedIndex::FencePointer(i) => i.predict(key),
            LearnedIndex::Plr(i) => i.predict(key),
            LearnedIndex::FitingTree(i) => i.predict(key),
            LearnedIndex::Pgm(i) => i.predict(key),
            LearnedIndex::RadixSpline(i) => i.predict(key),
            LearnedIndex::Rmi(i) => i.predict(key),
        })
    }

    /// Longest window `predict` can return.
    pub fn position_boundary(&self) -> u64 {
        match self {
            LearnedIndex::Empty => 0,
            LearnedIndex::FencePointer(i) => i.entries_per_block,
            LearnedIndex::Plr(i) => 2 * i.epsilon,
            LearnedIndex::FitingTree(i) => 2 * i.epsilon,
            LearnedIndex::Pgm(i) => 2 * i.epsilon,
            LearnedIndex::RadixSpline(i) => 2 * i.epsilon,
            LearnedIndex::Rmi(i) => i.max_window(),
        }
    }

    /// Analytic in-memory footprint; identical on every platform.
    pub fn memory_bytes(&self) -> u64 {
        let seg = Segment::ENCODED_BYTES as u64;
        INDEX_HEADER_BYTES
            + match self {
                LearnedIndex::Empty => 0,
                LearnedIndex::FencePointer(i) => FENCE_BYTES * i.fences.len() as u64,
                LearnedIndex::Plr(i) => seg * i.segments.len() as u64,
                LearnedIndex::FitingTree(i) => {
                    seg * i.segments.len() as u64 + btree::NODE_BYTES * i.tree.node_count()
                }
                LearnedIndex::Pgm(i) => seg * i.segment_count() as u64,
                LearnedIndex::RadixSpline(i) => {
                    SPLINE_POINT_BYTES * i.points.len() as u64 + RADIX_SLOT_BYTES * i.table.len() as u64
                }
                LearnedIndex::Rmi(i) => RMI_TOP_BYTES + RmiLeaf::ENCODED_BYTES as u64 * i.leaves.len() as u64,
            }
    }

    /// Number of models (segments, spline intervals, leaves or fences).
    pub fn model_count(&self) -> u64 {
        match self {
            LearnedIndex::Empty => 0,
            LearnedIndex::FencePointer(i) => i.fences.len() as u64,
            LearnedIndex::Plr(i) => i.segments.len() as u64,
            LearnedIndex::FitingTree(i) => i.segments.len() as u64,
            LearnedIndex::Pgm(i) => i.levels[0].len() as u64,
            LearnedIndex::RadixSpline(i) => i.points.len().saturating_sub(1).max(1) as u64,
            LearnedIndex::Rmi(i) => i.leaves.len() as u64,
        }
    }
}
