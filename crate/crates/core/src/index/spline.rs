//! RadixSpline: an error-bounded linear spline over (key, position) plus a
//! radix table on key prefixes that narrows the spline point search.

use super::segment::{epsilon_window, scaled_tolerance, validate, Pt, Slope, Y_SCALE};
use crate::config::{Key, PositionRange};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplinePoint {
    pub key: Key,
    pub pos: u64,
}

/// Greedy spline corridor. The corridor is the intersection of the error
/// cones from the last spline point to every later point; when a point
/// falls outside it, the previous point becomes a spline point. The first
/// and last keys are always spline points.
pub fn fit_spline(keys: &[Key], epsilon: u64) -> Result<Vec<SplinePoint>> {
    validate(keys, epsilon)?;
    let n = keys.len();
    let mut points = vec![SplinePoint { key: keys[0], pos: 0 }];
    if n == 1 {
        return Ok(points);
    }
    let tol = scaled_tolerance(epsilon);
    let at = |i: usize| Pt { x: keys[i], y: i as i64 * Y_SCALE };
    let shifted = |p: Pt, dy: i64| Pt { x: p.x, y: p.y + dy };

    let mut base = at(0);
    let mut upper = shifted(at(1), tol);
    let mut lower = shifted(at(1), -tol);
    for i in 2..n {
        let c = at(i);
        let to_c = Slope::between(base, c);
        if to_c.gt(Slope::between(base, upper)) || to_c.lt(Slope::between(base, lower)) {
            points.push(SplinePoint { key: keys[i - 1], pos: (i - 1) as u64 });
            base = at(i - 1);
            upper = shifted(c, tol);
            lower = shifted(c, -tol);
            continue;
        }
        let up = shifted(c, tol);
        if Slope::between(base, up).lt(Slope::between(base, upper)) {
            upper = up;
        }
        let down = shifted(c, -tol);
        if Slope::between(base, down).gt(Slope::between(base, lower)) {
            lower = down;
        }
    }
    points.push(SplinePoint { key: keys[n - 1], pos: (n - 1) as u64 });
    Ok(points)
}

/// Linear interpolation between two spline points.
pub(crate) fn interpolate(a: SplinePoint, b: SplinePoint, key: Key) -> f64 {
    let dx = (key - a.key) as f64;
    let span = (b.key - a.key) as f64;
    a.pos as f64 + dx * (b.pos - a.pos) as f64 / span
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadixSplineIndex {
    pub(crate) n: u64,
    pub(crate) epsilon: u64,
    pub(crate) radix_bits: u32,
    pub(crate) shift: u32,
    pub(crate) min_key: Key,
    pub(crate) points: Vec<SplinePoint>,
    /// `table[p]` is the first spline point whose prefix is `>= p`.
    pub(crate) table: Vec<u64>,
}

impl RadixSplineIndex {
    pub fn build(keys: &[Key], epsilon: u64, radix_bits: u32) -> Result<Self> {
        let points = fit_spline(keys, epsilon)?;
        let min_key = keys[0];
        let range = keys[keys.len() - 1] - min_key;
        let bit_width = 64 - range.leading_zeros();
        let shift = bit_width.saturating_sub(radix_bits);
        let table = Self::radix_table(&points, min_key, shift, radix_bits);
        Ok(RadixSplineIndex { n: keys.len() as u64, epsilon, radix_bits, shift, min_key, points, table })
    }

    fn radix_table(points: &[SplinePoint], min_key: Key, shift: u32, radix_bits: u32) -> Vec<u64> {
        let slots = (1usize << radix_bits) + 1;
        let mut table = Vec::with_capacity(slots);
        let mut next = 0usize;
        for prefix in 0..slots as u64 {
            while next < points.len() && (points[next].key - min_key) >> shift < prefix {
                next += 1;
            }
            table.push(next as u64);
        }
        table
    }

    pub fn points(&self) -> &[SplinePoint] {
        &self.points
    }

    pub fn radix_table_entries(&self) -> &[u64] {
        &self.table
    }

    /// Fractional position estimate for `key`.
    pub fn estimate(&self, key: Key) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if key <= first.key {
            return first.pos as f64;
        }
        if key >= last.key {
            return last.pos as f64;
        }
        let prefix = ((key - self.min_key) >> self.shift) as usize;
        let last_idx = self.points.len() - 1;
        let begin = self.table[prefix] as usize;
        let end = (self.table[prefix + 1] as usize).min(last_idx);
        let idx = begin + self.points[begin..=end].partition_point(|p| p.key < key);
        let hit = self.points[idx];
        if hit.key == key {
            return hit.pos as f64;
        }
        interpolate(self.points[idx - 1], hit, key)
    }

    pub fn predict(&self, key: Key) -> PositionRange {
        epsilon_window(self.estimate(key), self.epsilon, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::segment::round_half_up;
    use crate::index::segment::tests::random_keys;
    use rand::SeedableRng;
    use rand_distr::{Distribution, LogNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn lognormal_keys(n: usize, seed: u64) -> Vec<Key> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let dist = LogNormal::new(0.0, 2.0).unwrap();
        let mut keys: Vec<Key> = (0..n).map(|_| (dist.sample(&mut rng) * 1e9) as u64).collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    }

    /// Interpolates directly between bracketing spline points, bypassing the
    /// radix table, and checks every key.
    fn assert_spline_bounded(keys: &[Key], points: &[SplinePoint], eps: u64) {
        assert_eq!(points[0].key, keys[0]);
        assert_eq!(points.last().unwrap().key, *keys.last().unwrap());
        let mut s = 0;
        for (p, &k) in keys.iter().enumerate() {
            while s + 1 < points.len() && points[s + 1].key < k {
                s += 1;
            }
            let est = if points[s].key == k {
                points[s].pos as f64
            } else {
                interpolate(points[s], points[s + 1], k)
            };
            let c = round_half_up(est);
            assert!(
                c - eps as i64 <= p as i64 && p as i64 <= c + eps as i64 - 1,
                "key {k} pos {p} est {est}"
            );
        }
    }

    #[test]
    fn linear_keys_need_only_endpoints() {
        let keys: Vec<Key> = (0..1000).map(|i| 7 + i * 3).collect();
        let pts = fit_spline(&keys, 1).unwrap();
        assert_eq!(pts, vec![SplinePoint { key: 7, pos: 0 }, SplinePoint { key: 7 + 999 * 3, pos: 999 }]);
        assert_eq!(fit_spline(&[1, 9], 4).unwrap().len(), 2);
        assert_eq!(fit_spline(&[5], 4).unwrap().len(), 1);
    }

    #[test]
    fn lognormal_interpolation_within_epsilon() {
        let keys = lognormal_keys(10_000, 4);
        let pts = fit_spline(&keys, 16).unwrap();
        assert!(pts.len() > 2);
        assert_spline_bounded(&keys, &pts, 16);
    }

    #[test]
    fn radix_table_is_monotone_and_brackets() {
        for bits in [1, 4, 12] {
            let keys = random_keys(50_000, bits as u64, 1 << 45);
            let idx = RadixSplineIndex::build(&keys, 8, bits).unwrap();
            assert_eq!(idx.table.len(), (1 << bits) + 1);
            assert!(idx.table.windows(2).all(|w| w[0] <= w[1]));
            for (p, &k) in keys.iter().enumerate() {
                assert!(idx.predict(k).contains(p as u64));
            }
        }
    }

    #[test]
    fn tiny_range_uses_zero_shift() {
        let keys = [10, 11, 13];
        let idx = RadixSplineIndex::build(&keys, 1, 8).unwrap();
        assert_eq!(idx.shift, 0);
        for (p, &k) in keys.iter().enumerate() {
            assert!(idx.predict(k).contains(p as u64));
        }
    }
}
