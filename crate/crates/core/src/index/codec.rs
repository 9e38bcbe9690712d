//! Binary index layout, little-endian:
//!
//! ```text
//! "LIDX" | version u16 | kind u8 | params 4 x u64 | payload_len u64 | payload | crc32(payload) u32
//! ```
//!
//! The params block always starts with the key count. Payloads:
//! PLR/FIT `count u64, segments`; PGM `levels u8, (count u64, segments)*`;
//! RS `count u64, (key u64, pos u64)*, min_key u64, slots u64, slot u64*`;
//! RMI `leaves u64, top (slope f64, intercept f64), (slope, intercept, err_lo, err_hi)*`;
//! FP `count u64, (first_key u64, block u64)*`.

use super::{
    FencePointerIndex, FitingTreeIndex, LearnedIndex, PgmIndex, PlrIndex, RadixSplineIndex, RmiIndex,
    RmiLeaf, Segment, SplinePoint,
};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LIDX";
const VERSION: u16 = 1;
const PREAMBLE_BYTES: usize = 4 + 2 + 1 + 32 + 8;

const TAG_EMPTY: u8 = 0;
const TAG_FP: u8 = 1;
const TAG_PLR: u8 = 2;
const TAG_FIT: u8 = 3;
const TAG_PGM: u8 = 4;
const TAG_RS: u8 = 5;
const TAG_RMI: u8 = 6;

fn corrupt(what: impl Into<String>) -> Error {
    Error::CorruptIndex(what.into())
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_segments(out: &mut Vec<u8>, segments: &[Segment]) {
    put_u64(out, segments.len() as u64);
    for s in segments {
        s.encode(out);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt("truncated payload"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// Reads a count and checks that `count * item_bytes` more bytes exist.
    fn count(&mut self, item_bytes: usize) -> Result<usize> {
        let count = self.u64()?;
        let needed = count.checked_mul(item_bytes as u64).ok_or_else(|| corrupt("count overflow"))?;
        if needed > (self.buf.len() - self.pos) as u64 {
            return Err(corrupt(format!("count {count} exceeds payload")));
        }
        Ok(count as usize)
    }

    fn segments(&mut self) -> Result<Vec<Segment>> {
        let count = self.count(Segment::ENCODED_BYTES)?;
        if count == 0 {
            return Err(corrupt("empty segment array"));
        }
        let bytes = self.take(count * Segment::ENCODED_BYTES)?;
        Ok(bytes.chunks_exact(Segment::ENCODED_BYTES).map(Segment::decode).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(corrupt("trailing bytes in payload"));
        }
        Ok(())
    }
}

impl LearnedIndex {
    pub fn serialize(&self) -> Vec<u8> {
        let mut params = [0u64; 4];
        params[0] = self.len();
        let mut payload = Vec::new();
        let tag = match self {
            LearnedIndex::Empty => TAG_EMPTY,
            LearnedIndex::FencePointer(i) => {
                params[1] = i.entries_per_block;
                put_u64(&mut payload, i.fences.len() as u64);
                for &(key, block) in &i.fences {
                    put_u64(&mut payload, key);
                    put_u64(&mut payload, block);
                }
                TAG_FP
            }
            LearnedIndex::Plr(i) => {
                params[1] = i.epsilon;
                put_segments(&mut payload, &i.segments);
                TAG_PLR
            }
            LearnedIndex::FitingTree(i) => {
                params[1] = i.epsilon;
                put_segments(&mut payload, &i.segments);
                TAG_FIT
            }
            LearnedIndex::Pgm(i) => {
                params[1] = i.epsilon;
                params[2] = i.epsilon_recursive;
                payload.push(i.levels.len() as u8);
                for level in &i.levels {
                    put_segments(&mut payload, level);
                }
                TAG_PGM
            }
            LearnedIndex::RadixSpline(i) => {
                params[1] = i.epsilon;
                params[2] = u64::from(i.radix_bits);
                params[3] = u64::from(i.shift);
                put_u64(&mut payload, i.points.len() as u64);
                for p in &i.points {
                    put_u64(&mut payload, p.key);
                    put_u64(&mut payload, p.pos);
                }
                put_u64(&mut payload, i.min_key);
                put_u64(&mut payload, i.table.len() as u64);
                for &slot in &i.table {
                    put_u64(&mut payload, slot);
                }
                TAG_RS
            }
            LearnedIndex::Rmi(i) => {
                params[1] = i.min_key;
                put_u64(&mut payload, i.leaves.len() as u64);
                put_f64(&mut payload, i.top_slope);
                put_f64(&mut payload, i.top_intercept);
                for leaf in &i.leaves {
                    put_f64(&mut payload, leaf.slope);
                    put_f64(&mut payload, leaf.intercept);
                    put_u64(&mut payload, leaf.err_lo);
                    put_u64(&mut payload, leaf.err_hi);
                }
                TAG_RMI
            }
        };

        let mut out = Vec::with_capacity(PREAMBLE_BYTES + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(tag);
        for p in params {
            put_u64(&mut out, p);
        }
        put_u64(&mut out, payload.len() as u64);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<LearnedIndex> {
        if bytes.len() < PREAMBLE_BYTES + 4 {
            return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let tag = bytes[6];
        let mut head = Reader { buf: &bytes[7..PREAMBLE_BYTES], pos: 0 };
        let params = [head.u64()?, head.u64()?, head.u64()?, head.u64()?];
        let payload_len = head.u64()?;
        let expected = (PREAMBLE_BYTES as u64).checked_add(payload_len).and_then(|v| v.checked_add(4));
        if expected != Some(bytes.len() as u64) {
            return Err(corrupt(format!("payload length {payload_len} does not match buffer")));
        }
        let payload = &bytes[PREAMBLE_BYTES..bytes.len() - 4];
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("payload checksum mismatch"));
        }

        let n = params[0];
        if (tag == TAG_EMPTY) != (n == 0) {
            return Err(corrupt("key count inconsistent with kind"));
        }
        let mut r = Reader { buf: payload, pos: 0 };
        let epsilon = || {
            if params[1] == 0 {
                Err(corrupt("epsilon must be >= 1"))
            } else {
                Ok(params[1])
            }
        };
        let index = match tag {
            TAG_EMPTY => LearnedIndex::Empty,
            TAG_FP => {
                let count = r.count(16)?;
                if count == 0 || params[1] == 0 {
                    return Err(corrupt("fence pointer index without fences"));
                }
                let fences = (0..count).map(|_| Ok((r.u64()?, r.u64()?))).collect::<Result<_>>()?;
                LearnedIndex::FencePointer(FencePointerIndex { n, entries_per_block: params[1], fences })
            }
            TAG_PLR => LearnedIndex::Plr(PlrIndex { n, epsilon: epsilon()?, segments: r.segments()? }),
            TAG_FIT => LearnedIndex::FitingTree(FitingTreeIndex::from_segments(n, epsilon()?, r.segments()?)),
            TAG_PGM => {
                let depth = r.u8()?;
                if depth == 0 {
                    return Err(corrupt("PGM without levels"));
                }
                let levels = (0..depth).map(|_| r.segments()).collect::<Result<Vec<_>>>()?;
                if levels.last().map(Vec::len) != Some(1) {
                    return Err(corrupt("PGM root level must hold one segment"));
                }
                if params[2] == 0 {
                    return Err(corrupt("epsilon_recursive must be >= 1"));
                }
                LearnedIndex::Pgm(PgmIndex { n, epsilon: epsilon()?, epsilon_recursive: params[2], levels })
            }
            TAG_RS => {
                let count = r.count(16)?;
                if count == 0 {
                    return Err(corrupt("spline without points"));
                }
                let points = (0..count)
                    .map(|_| Ok(SplinePoint { key: r.u64()?, pos: r.u64()? }))
                    .collect::<Result<Vec<_>>>()?;
                let min_key = r.u64()?;
                let slots = r.count(8)?;
                let radix_bits = u32::try_from(params[2]).map_err(|_| corrupt("radix bits"))?;
                if !(1..=30).contains(&radix_bits) || slots != (1usize << radix_bits) + 1 {
                    return Err(corrupt("radix table size does not match radix bits"));
                }
                let table = (0..slots).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                if table.iter().any(|&t| t > count as u64) || params[3] > 63 {
                    return Err(corrupt("radix table out of range"));
                }
                LearnedIndex::RadixSpline(RadixSplineIndex {
                    n,
                    epsilon: epsilon()?,
                    radix_bits,
                    shift: params[3] as u32,
                    min_key,
                    points,
                    table,
                })
            }
            TAG_RMI => {
                let count = r.count(RmiLeaf::ENCODED_BYTES)?;
                if count == 0 {
                    return Err(corrupt("RMI without leaves"));
                }
                let top_slope = r.f64()?;
                let top_intercept = r.f64()?;
                let leaves = (0..count)
                    .map(|_| {
                        Ok(RmiLeaf {
                            slope: r.f64()?,
                            intercept: r.f64()?,
                            err_lo: r.u64()?,
                            err_hi: r.u64()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                LearnedIndex::Rmi(RmiIndex { n, min_key: params[1], top_slope, top_intercept, leaves })
            }
            other => return Err(corrupt(format!("unknown kind tag {other}"))),
        };
        r.finish()?;
        Ok(index)
    }
}
