//! Dense integer sets over an offset range, with shift-OR sum and
//! difference (correlation) kernels.

use crate::error::{Error, Result};

/// Bits above this many are refused (about 512 MiB of words).
pub(crate) const MAX_BITS: u64 = 1 << 32;
/// Upper limit on `set bits × words` for a single sum/difference.
pub(crate) const MAX_WORK: u64 = 20_000_000_000;

/// Set of integers in `[offset, offset + len)`; bit `i` stands for
/// `offset + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct IntBitSet {
    offset: i64,
    len: usize,
    words: Vec<u64>,
}

impl IntBitSet {
    fn empty(offset: i64, len: u64) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::ResourceLimit(format!(
                "integer range of {len} values exceeds the {MAX_BITS}-bit workspace limit"
            )));
        }
        let len = len as usize;
        Ok(Self {
            offset,
            len,
            words: vec![0; len.div_ceil(64)],
        })
    }

    pub(crate) fn from_values(values: &[i64]) -> Result<Self> {
        let lo = *values
            .iter()
            .min()
            .ok_or_else(|| Error::domain("empty integer set"))?;
        let hi = *values.iter().max().unwrap();
        let mut set = Self::empty(lo, (hi - lo) as u64 + 1)?;
        for &v in values {
            set.insert(v);
        }
        Ok(set)
    }

    fn insert(&mut self, v: i64) {
        let i = (v - self.offset) as usize;
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[cfg(test)]
    pub(crate) fn contains(&self, v: i64) -> bool {
        if v < self.offset {
            return false;
        }
        let i = (v - self.offset) as u64;
        if i >= self.len as u64 {
            return false;
        }
        let i = i as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub(crate) fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn bit_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    pub(crate) fn values(&self) -> Vec<i64> {
        self.bit_indices().map(|i| self.offset + i as i64).collect()
    }

    fn min_value(&self) -> i64 {
        self.offset + self.bit_indices().next().unwrap_or(0) as i64
    }

    fn max_value(&self) -> i64 {
        for (wi, &w) in self.words.iter().enumerate().rev() {
            if w != 0 {
                return self.offset + (wi * 64 + 63 - w.leading_zeros() as usize) as i64;
            }
        }
        self.offset
    }

    /// ORs `src` into `self` shifted up by `shift` bits.
    fn or_shifted(&mut self, src: &IntBitSet, shift: usize) {
        let ws = shift / 64;
        let bs = shift % 64;
        let dst = &mut self.words;
        if bs == 0 {
            for (i, &w) in src.words.iter().enumerate() {
                dst[i + ws] |= w;
            }
        } else {
            for (i, &w) in src.words.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                dst[i + ws] |= w << bs;
                if let Some(next) = dst.get_mut(i + ws + 1) {
                    *next |= w >> (64 - bs);
                }
            }
        }
    }

    fn check_work(&self, other: &IntBitSet) -> Result<()> {
        let work = other.count().saturating_mul(self.words.len() as u64);
        if work > MAX_WORK {
            return Err(Error::ResourceLimit(format!(
                "correlation needs ~{work} word operations (limit {MAX_WORK})"
            )));
        }
        Ok(())
    }

    /// `{a + b : a ∈ self, b ∈ other}`.
    pub(crate) fn sum(&self, other: &IntBitSet) -> Result<IntBitSet> {
        let (big, small) = if self.count() >= other.count() {
            (self, other)
        } else {
            (other, self)
        };
        big.check_work(small)?;
        let mut out = Self::empty(big.offset + small.offset, (big.len + small.len - 1) as u64)?;
        for j in small.bit_indices() {
            out.or_shifted(big, j);
        }
        Ok(out.trimmed())
    }

    /// `{a − b : a ∈ self, b ∈ other}`.
    pub(crate) fn difference(&self, other: &IntBitSet) -> Result<IntBitSet> {
        self.check_work(other)?;
        let n = other.len;
        let mut out = Self::empty(
            self.offset - (other.offset + n as i64 - 1),
            (self.len + n - 1) as u64,
        )?;
        for j in other.bit_indices() {
            out.or_shifted(self, n - 1 - j);
        }
        Ok(out.trimmed())
    }

    pub(crate) fn negated(&self) -> IntBitSet {
        let values: Vec<i64> = self.values().into_iter().map(|v| -v).collect();
        IntBitSet::from_values(&values).expect("negation keeps the range size")
    }

    pub(crate) fn union(&self, other: &IntBitSet) -> Result<IntBitSet> {
        let lo = self.min_value().min(other.min_value());
        let hi = self.max_value().max(other.max_value());
        let mut out = Self::empty(lo, (hi - lo) as u64 + 1)?;
        out.or_shifted(self, (self.offset - lo) as usize);
        out.or_shifted(other, (other.offset - lo) as usize);
        Ok(out)
    }

    /// Drops empty space at both ends so offsets stay tight.
    fn trimmed(self) -> IntBitSet {
        if self.count() == 0 {
            return self;
        }
        let lo = self.min_value();
        let hi = self.max_value();
        if lo == self.offset && hi == self.offset + self.len as i64 - 1 {
            return self;
        }
        let mut out = Self::empty(lo, (hi - lo) as u64 + 1).expect("trim never grows");
        let skip = (lo - self.offset) as usize;
        for i in self.bit_indices() {
            let j = i - skip;
            out.words[j / 64] |= 1 << (j % 64);
        }
        out
    }
}
