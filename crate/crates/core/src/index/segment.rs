//! Error-bounded piecewise linear segmentation of a sorted key array.
//!
//! Positions are scaled by [`Y_SCALE`] so the hull and corridor tests run in
//! exact integer arithmetic. Every model is fit to a vertical tolerance of
//! `ε - 1/2 - 1/Y_SCALE`, which makes `[c - ε, c + ε - 1]` (with `c` the
//! half-up rounded prediction) a window of exactly `2ε` positions that
//! provably contains the true position.

use crate::config::{Key, PositionRange};
use crate::error::{Error, Result};

pub(crate) const Y_SCALE: i64 = 2048;

/// Largest supported error bound and key count; together they keep scaled
/// coordinates within `i64`.
pub const MAX_EPSILON: u64 = 1 << 40;
pub const MAX_KEYS: u64 = 1 << 50;

/// Scaled vertical tolerance for an error bound `1 <= epsilon <= MAX_EPSILON`.
pub(crate) fn scaled_tolerance(epsilon: u64) -> i64 {
    Y_SCALE * epsilon as i64 - Y_SCALE / 2 - 1
}

/// `to - from` as a float, for keys on either side of `from`.
pub(crate) fn key_delta(from: Key, to: Key) -> f64 {
    if to >= from {
        (to - from) as f64
    } else {
        -((from - to) as f64)
    }
}

/// `floor(x + 0.5)` saturated to `i64`, computed by truncation so it stays
/// branch-cheap on targets without a native floor instruction.
pub(crate) fn round_half_up(x: f64) -> i64 {
    let y = x + 0.5;
    let t = y as i64;
    if (t as f64) > y {
        t.saturating_sub(1)
    } else {
        t
    }
}

/// Window of `2ε` positions around a fractional prediction.
pub(crate) fn epsilon_window(prediction: f64, epsilon: u64, n: u64) -> PositionRange {
    PositionRange::around(round_half_up(prediction), epsilon, epsilon - 1, n)
}

pub(crate) fn check_sorted(keys: &[Key]) -> Result<()> {
    if let Some(w) = keys.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "keys must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Linear model over a contiguous run of positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub first_key: Key,
    /// Positions per key unit.
    pub slope: f64,
    /// Predicted position at `first_key`.
    pub intercept: f64,
    pub start_pos: u64,
    pub len: u64,
}

impl Segment {
    pub const ENCODED_BYTES: usize = 40;

    pub fn predict(&self, key: Key) -> f64 {
        self.intercept + self.slope * key_delta(self.first_key, key)
    }

    pub fn predict_rounded(&self, key: Key) -> i64 {
        round_half_up(self.predict(key))
    }

    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.first_key.to_le_bytes());
        out.extend_from_slice(&self.slope.to_le_bytes());
        out.extend_from_slice(&self.intercept.to_le_bytes());
        out.extend_from_slice(&self.start_pos.to_le_bytes());
        out.extend_from_slice(&self.len.to_le_bytes());
    }

    pub(crate) fn decode(b: &[u8]) -> Segment {
        let word = |i: usize| {
            let mut w = [0u8; 8];
            w.copy_from_slice(&b[i * 8..i * 8 + 8]);
            w
        };
        Segment {
            first_key: u64::from_le_bytes(word(0)),
            slope: f64::from_le_bytes(word(1)),
            intercept: f64::from_le_bytes(word(2)),
            start_pos: u64::from_le_bytes(word(3)),
            len: u64::from_le_bytes(word(4)),
        }
    }
}

/// Slope-cone greedy segmentation. Each segment's line passes through its
/// first point; the feasible slope interval shrinks with every new point and
/// the segment closes when it empties.
pub fn segment_greedy(keys: &[Key], epsilon: u64) -> Result<Vec<Segment>> {
    validate(keys, epsilon)?;
    let tol = scaled_tolerance(epsilon) as f64;
    let scale = Y_SCALE as f64;
    let mut segments = Vec::new();

    let mut start = 0usize;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let close = |start: usize, end: usize, lo: f64, hi: f64, out: &mut Vec<Segment>| {
        let slope = if end - start == 1 { 0.0 } else { (lo + hi) / 2.0 / scale };
        out.push(Segment {
            first_key: keys[start],
            slope,
            intercept: start as f64,
            start_pos: start as u64,
            len: (end - start) as u64,
        });
    };

    for i in 1..keys.len() {
        let dx = (keys[i] - keys[start]) as f64;
        let dy = ((i - start) as i64 * Y_SCALE) as f64;
        let new_lo = lo.max((dy - tol) / dx);
        let new_hi = hi.min((dy + tol) / dx);
        if new_lo > new_hi {
            close(start, i, lo, hi, &mut segments);
            start = i;
            lo = f64::NEG_INFINITY;
            hi = f64::INFINITY;
        } else {
            lo = new_lo;
            hi = new_hi;
        }
    }
    close(start, keys.len(), lo, hi, &mut segments);
    Ok(segments)
}

/// Optimal streaming segmentation: keeps the upper and lower convex hulls of
/// the current segment's error intervals and closes it only when no line of
/// vertical error within the tolerance can pass through all of them.
pub fn segment_optimal(keys: &[Key], epsilon: u64) -> Result<Vec<Segment>> {
    validate(keys, epsilon)?;
    let mut model = OptimalPla::new(scaled_tolerance(epsilon));
    let mut segments = Vec::new();
    let mut start = 0usize;
    for (i, &key) in keys.iter().enumerate() {
        let y = i as i64 * Y_SCALE;
        if !model.add_point(key, y) {
            segments.push(model.segment(keys[start], start as u64, (i - start) as u64));
            start = i;
            let accepted = model.add_point(key, y);
            debug_assert!(accepted);
        }
    }
    segments.push(model.segment(keys[start], start as u64, (keys.len() - start) as u64));
    Ok(segments)
}

pub(crate) fn validate(keys: &[Key], epsilon: u64) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::InvalidInput("cannot segment an empty key array".to_string()));
    }
    if !(1..=MAX_EPSILON).contains(&epsilon) {
        return Err(Error::InvalidInput(format!("epsilon must be in 1..={MAX_EPSILON}")));
    }
    if keys.len() as u64 > MAX_KEYS {
        return Err(Error::InvalidInput(format!("at most {MAX_KEYS} keys per segmentation")));
    }
    check_sorted(keys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pt {
    pub(crate) x: Key,
    pub(crate) y: i64,
}

/// Direction between two points: `dx` as a magnitude plus sign, `dy`
/// signed. Products of one `dy` and one magnitude always fit in `i128`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slope {
    dx_mag: u64,
    dx_neg: bool,
    dy: i64,
}

impl Slope {
    pub(crate) fn between(from: Pt, to: Pt) -> Slope {
        let dy = to.y - from.y;
        if to.x >= from.x {
            Slope { dx_mag: to.x - from.x, dx_neg: false, dy }
        } else {
            Slope { dx_mag: from.x - to.x, dx_neg: true, dy }
        }
    }

    fn dx(self) -> i128 {
        if self.dx_neg {
            -(self.dx_mag as i128)
        } else {
            self.dx_mag as i128
        }
    }

    /// `dy·other.dx` and `other.dy·dx` with the dx signs factored out. Compared
    /// slopes never have strictly opposite dx signs, so one shared flip
    /// restores the signed comparison.
    fn cross_terms(self, other: Slope) -> (i128, i128, bool) {
        let a = self.dy as i128 * other.dx_mag as i128;
        let b = other.dy as i128 * self.dx_mag as i128;
        (a, b, self.dx_neg || other.dx_neg)
    }

    pub(crate) fn lt(self, other: Slope) -> bool {
        let (a, b, flip) = self.cross_terms(other);
        if flip {
            a > b
        } else {
            a < b
        }
    }

    pub(crate) fn gt(self, other: Slope) -> bool {
        let (a, b, flip) = self.cross_terms(other);
        if flip {
            a < b
        } else {
            a > b
        }
    }

    fn as_f64(self) -> f64 {
        self.dy as f64 / self.dx() as f64
    }
}

fn cross(o: Pt, a: Pt, b: Pt) -> i128 {
    let dx = |p: Pt| p.x as i128 - o.x as i128;
    let dy = |p: Pt| (p.y - o.y) as i128;
    dx(a) * dy(b) - dy(a) * dx(b)
}

/// Streaming optimal piecewise linear model in scaled integer coordinates.
struct OptimalPla {
    tol: i64,
    // [0]/[2] span the minimum feasible slope, [1]/[3] the maximum.
    rect: [Pt; 4],
    // Slopes of rect[0]->rect[2] and rect[1]->rect[3].
    min_slope: Slope,
    max_slope: Slope,
    upper: Vec<Pt>,
    lower: Vec<Pt>,
    upper_start: usize,
    lower_start: usize,
    points: usize,
}

impl OptimalPla {
    fn new(tol: i64) -> Self {
        let zero = Pt { x: 0, y: 0 };
        OptimalPla {
            tol,
            rect: [zero; 4],
            min_slope: Slope::between(zero, zero),
            max_slope: Slope::between(zero, zero),
            upper: Vec::new(),
            lower: Vec::new(),
            upper_start: 0,
            lower_start: 0,
            points: 0,
        }
    }

    fn add_point(&mut self, x: Key, y: i64) -> bool {
        let p1 = Pt { x, y: y + self.tol };
        let p2 = Pt { x, y: y - self.tol };

        if self.points == 0 {
            self.rect[0] = p1;
            self.rect[1] = p2;
            self.upper.clear();
            self.lower.clear();
            self.upper.push(p1);
            self.lower.push(p2);
            self.upper_start = 0;
            self.lower_start = 0;
            self.points = 1;
            return true;
        }
        if self.points == 1 {
            self.rect[2] = p2;
            self.rect[3] = p1;
            self.min_slope = Slope::between(self.rect[0], p2);
            self.max_slope = Slope::between(self.rect[1], p1);
            self.upper.push(p1);
            self.lower.push(p2);
            self.points = 2;
            return true;
        }

        let slope1 = self.min_slope;
        let slope2 = self.max_slope;
        let outside_line1 = Slope::between(self.rect[2], p1).lt(slope1);
        let outside_line2 = Slope::between(self.rect[3], p2).gt(slope2);
        if outside_line1 || outside_line2 {
            self.points = 0;
            return false;
        }

        if Slope::between(self.rect[1], p1).lt(slope2) {
            // New maximum slope: pivot on the lower hull point that gives the
            // smallest slope towards p1.
            let mut min = Slope::between(p1, self.lower[self.lower_start]);
            let mut min_i = self.lower_start;
            for i in self.lower_start + 1..self.lower.len() {
                let val = Slope::between(p1, self.lower[i]);
                if val.gt(min) {
                    break;
                }
                min = val;
                min_i = i;
            }
            self.rect[1] = self.lower[min_i];
            self.rect[3] = p1;
            self.max_slope = Slope::between(self.rect[1], p1);
            self.lower_start = min_i;

            let mut end = self.upper.len();
            while end >= self.upper_start + 2 && cross(self.upper[end - 2], self.upper[end - 1], p1) <= 0 {
                end -= 1;
            }
            self.upper.truncate(end);
            self.upper.push(p1);
        }

        if Slope::between(self.rect[0], p2).gt(slope1) {
            let mut max = Slope::between(p2, self.upper[self.upper_start]);
            let mut max_i = self.upper_start;
            for i in self.upper_start + 1..self.upper.len() {
                let val = Slope::between(p2, self.upper[i]);
                if val.lt(max) {
                    break;
                }
                max = val;
                max_i = i;
            }
            self.rect[0] = self.upper[max_i];
            self.rect[2] = p2;
            self.min_slope = Slope::between(self.rect[0], p2);
            self.upper_start = max_i;

            let mut end = self.lower.len();
            while end >= self.lower_start + 2 && cross(self.lower[end - 2], self.lower[end - 1], p2) >= 0 {
                end -= 1;
            }
            self.lower.truncate(end);
            self.lower.push(p2);
        }

        self.points += 1;
        true
    }

    /// Line through the intersection of the rectangle's diagonals with the
    /// mean of the extreme feasible slopes.
    fn segment(&self, first_key: Key, start_pos: u64, len: u64) -> Segment {
        let scale = Y_SCALE as f64;
        if self.points == 1 {
            let mid = (self.rect[0].y + self.rect[1].y) / 2;
            return Segment { first_key, slope: 0.0, intercept: mid as f64 / scale, start_pos, len };
        }
        let [r0, r1, r2, r3] = self.rect;
        let s1 = Slope::between(r0, r2);
        let s2 = Slope::between(r1, r3);
        let denom = s1.dx() * s2.dy as i128 - s1.dy as i128 * s2.dx();
        let x0 = key_delta(first_key, r0.x);
        let (ix, iy) = if denom == 0 {
            // Parallel extremes: the minimum-slope line itself is feasible.
            (x0, r0.y as f64)
        } else {
            let num = (r1.x as i128 - r0.x as i128) * s2.dy as i128 - (r1.y - r0.y) as i128 * s2.dx();
            let t = num as f64 / denom as f64;
            (x0 + t * s1.dx() as f64, r0.y as f64 + t * s1.dy as f64)
        };
        let slope = if denom == 0 { s1.as_f64() } else { (s1.as_f64() + s2.as_f64()) / 2.0 };
        let intercept = iy - ix * slope;
        Segment { first_key, slope: slope / scale, intercept: intercept / scale, start_pos, len }
    }
}

/// Index of the segment whose key run would contain `key`: the last segment
/// with `first_key <= key`, or 0 when `key` precedes every segment.
pub(crate) fn locate(segments: &[Segment], key: Key) -> usize {
    segments.partition_point(|s| s.first_key <= key).saturating_sub(1)
}

/// Like [`locate`], but searches the window `[lo, hi]` first and only falls
/// back to the whole array when the window cannot certify the answer.
pub(crate) fn locate_near(segments: &[Segment], key: Key, lo: u64, hi: u64) -> usize {
    let last = segments.len() - 1;
    let lo = (lo as usize).min(last);
    let hi = (hi as usize).clamp(lo, last);
    let idx = lo + segments[lo..=hi].partition_point(|s| s.first_key <= key);
    let left_ok = idx > lo || lo == 0;
    let right_ok = idx <= hi || hi == last || segments[hi + 1].first_key > key;
    if left_ok && right_ok {
        idx.saturating_sub(1)
    } else {
        locate(segments, key)
    }
}
