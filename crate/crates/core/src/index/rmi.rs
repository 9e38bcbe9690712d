//! Two-level recursive model index: an equal-width linear router over
//! `[min_key, max_key]` feeding least-squares linear leaves. Each leaf
//! records its worst under- and over-prediction on the build keys.

use super::segment::{key_delta, round_half_up};
use crate::config::{Key, PositionRange};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmiLeaf {
    pub slope: f64,
    pub intercept: f64,
    /// Largest `pred - pos` over the leaf's keys.
    pub err_lo: u64,
    /// Largest `pos - pred` over the leaf's keys.
    pub err_hi: u64,
}

impl RmiLeaf {
    pub const ENCODED_BYTES: usize = 32;

    pub fn window(&self) -> u64 {
        self.err_lo + self.err_hi + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmiIndex {
    pub(crate) n: u64,
    pub(crate) min_key: Key,
    pub(crate) top_slope: f64,
    pub(crate) top_intercept: f64,
    pub(crate) leaves: Vec<RmiLeaf>,
}

/// Leaf counts never exceed this many per key (or 2^26 overall).
const MAX_LEAVES_PER_KEY: u64 = 4;
const MAX_LEAVES: u64 = 1 << 26;

impl RmiIndex {
    pub fn build(keys: &[Key], leaf_count: u64) -> Self {
        let xs = Self::offsets(keys);
        Self::build_within(keys, &xs, leaf_count, u64::MAX).expect("unbounded build")
    }

    fn offsets(keys: &[Key]) -> Vec<f64> {
        keys.iter().map(|&k| key_delta(keys[0], k)).collect()
    }

    /// Builds with `leaf_count` leaves, giving up as soon as a leaf window
    /// exceeds `limit`.
    fn build_within(keys: &[Key], xs: &[f64], leaf_count: u64, limit: u64) -> Option<Self> {
        let n = keys.len();
        let min_key = keys[0];
        let range = (keys[n - 1] - min_key) as f64 + 1.0;
        let mut rmi = RmiIndex {
            n: n as u64,
            min_key,
            top_slope: leaf_count as f64 / range,
            top_intercept: 0.0,
            leaves: Vec::with_capacity(leaf_count as usize),
        };

        let mut start = 0usize;
        for leaf in 0..leaf_count as usize {
            let mut moments = Moments::default();
            let x0 = xs.get(start).copied().unwrap_or(0.0);
            let mut end = start;
            while end < n && rmi.route_x(xs[end], leaf_count) <= leaf {
                moments.add(xs[end] - x0, (end - start) as f64);
                end += 1;
            }
            let model = fit_leaf(&xs[start..end], start, x0, &moments, limit)?;
            rmi.leaves.push(model);
            start = end;
        }
        debug_assert_eq!(start, n);
        Some(rmi)
    }

    /// Smallest power-of-two leaf count whose widest leaf window fits
    /// `target` entries. The search starts from a low size estimate and
    /// doubles; candidates that miss the target are abandoned at their first
    /// oversized leaf. Stops at the leaf cap and returns the best effort if
    /// the target is unreachable.
    pub fn build_for_boundary(keys: &[Key], target: u64) -> Self {
        let n = keys.len() as u64;
        let xs = Self::offsets(keys);
        let cap = (n * MAX_LEAVES_PER_KEY).next_power_of_two().min(MAX_LEAVES);
        // A least-squares leaf over m roughly uniform keys has a window of
        // at least about sqrt(m), so target^2 keys per leaf is a low estimate.
        let per_leaf = target.saturating_mul(target).max(1);
        let mut count = match n / per_leaf {
            0 => 1,
            c => (c + 1).next_power_of_two() / 2,
        }
        .min(cap);

        if let Some(mut rmi) = Self::build_within(keys, &xs, count, target) {
            while count > 1 {
                match Self::build_within(keys, &xs, count / 2, target) {
                    Some(smaller) => {
                        rmi = smaller;
                        count /= 2;
                    }
                    None => break,
                }
            }
            return rmi;
        }
        while count < cap {
            count *= 2;
            if let Some(rmi) = Self::build_within(keys, &xs, count, target) {
                return rmi;
            }
        }
        Self::build_within(keys, &xs, cap, u64::MAX).expect("unbounded build")
    }

    fn route_x(&self, x: f64, leaf_count: u64) -> usize {
        let leaf = self.top_slope * x + self.top_intercept;
        if leaf < 1.0 {
            0
        } else {
            (leaf as u64).min(leaf_count - 1) as usize
        }
    }

    fn leaf_x(&self, key: Key) -> f64 {
        key_delta(self.min_key, key)
    }

    pub fn leaves(&self) -> &[RmiLeaf] {
        &self.leaves
    }

    /// Widest window over all leaves, i.e. the achieved position boundary.
    pub fn max_window(&self) -> u64 {
        self.leaves.iter().map(RmiLeaf::window).max().unwrap_or(1)
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        let leaf = &self.leaves[self.route_x(self.leaf_x(key), self.leaves.len() as u64)];
        let pred = round_half_up(leaf.slope * self.leaf_x(key) + leaf.intercept);
        PositionRange::around(pred, leaf.err_lo, leaf.err_hi, self.n)
    }
}

/// Running sums over a leaf, with `x` taken relative to the leaf's first
/// key and `y` relative to its first position.
#[derive(Default)]
struct Moments {
    m: f64,
    sx: f64,
    sxx: f64,
    sxy: f64,
    sy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.m += 1.0;
        self.sx += x;
        self.sxx += x * x;
        self.sxy += x * y;
        self.sy += y;
    }
}

/// Least-squares leaf with its exact error bounds, or `None` as soon as the
/// window exceeds `limit`.
fn fit_leaf(xs: &[f64], first_pos: usize, x0: f64, mo: &Moments, limit: u64) -> Option<RmiLeaf> {
    if xs.is_empty() {
        return Some(RmiLeaf { slope: 0.0, intercept: first_pos as f64, err_lo: 0, err_hi: 0 });
    }
    let mean_x = mo.sx / mo.m;
    let mean_y = mo.sy / mo.m;
    let sxx = mo.sxx - mo.sx * mean_x;
    let sxy = mo.sxy - mo.sx * mean_y;
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = first_pos as f64 + mean_y - slope * (x0 + mean_x);
    let mut leaf = RmiLeaf { slope, intercept, err_lo: 0, err_hi: 0 };
    for (i, &x) in xs.iter().enumerate() {
        let pred = round_half_up(leaf.slope * x + leaf.intercept);
        let pos = (first_pos + i) as i64;
        if pred > pos {
            leaf.err_lo = leaf.err_lo.max((pred - pos) as u64);
        } else {
            leaf.err_hi = leaf.err_hi.max((pos - pred) as u64);
        }
        if leaf.window() > limit {
            return None;
        }
    }
    Some(leaf)
}
