use crate::config::Key;
use crate::error::{Error, Result};

/// Bloom filter with double hashing over a 64-bit mix of the key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    bit_len: u64,
    k: u32,
    bits: Vec<u8>,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hashes(key: Key) -> (u64, u64) {
    let h1 = mix64(key);
    let h2 = mix64(key ^ 0x9e37_79b9_7f4a_7c15) | 1;
    (h1, h2)
}

impl BloomFilter {
    /// ⌈bits_per_key · n⌉ bits and k = round(bits_per_key · ln 2) probes.
    pub fn new(expected_keys: u64, bits_per_key: u32) -> Self {
        let bit_len = (u64::from(bits_per_key) * expected_keys).max(64);
        let k = ((f64::from(bits_per_key) * std::f64::consts::LN_2).round() as u32).clamp(1, 30);
        BloomFilter { bit_len, k, bits: vec![0; bit_len.div_ceil(8) as usize] }
    }

    pub fn build(keys: &[Key], bits_per_key: u32) -> Self {
        let mut filter = Self::new(keys.len() as u64, bits_per_key);
        for &key in keys {
            filter.insert(key);
        }
        filter
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn insert(&mut self, key: Key) {
        let (h1, h2) = hashes(key);
        for i in 0..u64::from(self.k) {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.bit_len;
            self.bits[(bit / 8) as usize] |= 1 << (bit % 8);
        }
    }

    pub fn may_contain(&self, key: Key) -> bool {
        let (h1, h2) = hashes(key);
        (0..u64::from(self.k)).all(|i| {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.bit_len;
            self.bits[(bit / 8) as usize] & (1 << (bit % 8)) != 0
        })
    }

    pub fn memory_bytes(&self) -> u64 {
        self.bits.len() as u64
    }

    /// `bit_len u64 | k u32 | bits`
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.bits.len());
        out.extend_from_slice(&self.bit_len.to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::CorruptTable("bloom filter truncated".to_string()));
        }
        let bit_len = u64::from_le_bytes(bytes[..8].try_into().unwrap());
        let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let bits = bytes[12..].to_vec();
        if bit_len == 0 || k == 0 || bits.len() as u64 != bit_len.div_ceil(8) {
            return Err(Error::CorruptTable("bloom filter size mismatch".to_string()));
        }
        Ok(BloomFilter { bit_len, k, bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_false_negatives_and_bounded_fpr() {
        let keys: Vec<Key> = (0..100_000u64).map(|i| mix64(i) | 1).collect();
        let f = BloomFilter::build(&keys, 10);
        assert_eq!(f.hash_count(), 7);
        assert!(keys.iter().all(|&k| f.may_contain(k)));
        let fp = (0..100_000u64).filter(|&i| f.may_contain(mix64(i) & !1)).count();
        let theory = (1.0 - (-7.0 * 100_000.0 / 1_000_000.0f64).exp()).powi(7);
        assert!((fp as f64 / 100_000.0) <= 2.0 * theory, "fpr {}", fp as f64 / 1e5);
    }

    #[test]
    fn serialization_round_trip() {
        let f = BloomFilter::build(&[1, 5, 9], 10);
        let back = BloomFilter::deserialize(&f.serialize()).unwrap();
        assert_eq!(back, f);
        assert!(BloomFilter::deserialize(&f.serialize()[..13]).is_err());
    }
}
