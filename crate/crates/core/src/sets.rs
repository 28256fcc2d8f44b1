//! Finite index sets over `{0, .., dim-1}` stored as bitmasks.
//!
//! Internally indices are 0-based; serialization and display use the
//! 1-based convention of the basis `x_1, .., x_n`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MAX_DIM: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndexSet(u64);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);

    pub fn from_bits(bits: u64) -> Self {
        IndexSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn full(dim: usize) -> Self {
        if dim >= 64 {
            IndexSet(u64::MAX)
        } else {
            IndexSet((1u64 << dim) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(1u64 << i)
    }

    /// Builds a set from 0-based indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        IndexSet(indices.into_iter().fold(0u64, |acc, i| acc | (1u64 << i)))
    }

    /// Builds a set from 1-based indices, checking the range.
    pub fn from_one_based(indices: &[usize], dim: usize) -> crate::Result<Self> {
        let mut bits = 0u64;
        for &i in indices {
            if i == 0 || i > dim {
                return Err(crate::Error::IndexOutOfRange { index: i, dim });
            }
            bits |= 1u64 << (i - 1);
        }
        Ok(IndexSet(bits))
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u64 << i;
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn union(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 & other.0)
    }

    #[inline]
    pub fn minus(self, other: IndexSet) -> IndexSet {
        IndexSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_disjoint(self, other: IndexSet) -> bool {
        self.0 & other.0 == 0
    }

    #[inline]
    pub fn is_subset(self, other: IndexSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn complement(self, dim: usize) -> IndexSet {
        IndexSet(!self.0 & IndexSet::full(dim).0)
    }

    pub fn max_index(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }

    pub fn min_index(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// `self < other` in the block order: every index of `self` precedes
    /// every index of `other`. Vacuously true when either set is empty.
    pub fn precedes(self, other: IndexSet) -> bool {
        match (self.max_index(), other.min_index()) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        }
    }

    /// Ascending 0-based indices.
    pub fn iter(self) -> Indices {
        Indices(self.0)
    }

    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// Every subset of `{0..dim}` in increasing bitmask order.
    pub fn all_subsets(dim: usize) -> impl Iterator<Item = IndexSet> {
        assert!(dim < 64, "subset enumeration requires dim < 64");
        (0..(1u64 << dim)).map(IndexSet)
    }

    /// Every subset of `self` in increasing bitmask order.
    pub fn subsets(self) -> Submasks {
        Submasks {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Subsets of `self` with exactly `k` elements, in lexicographic order
    /// of their ascending index lists.
    pub fn subsets_of_size(self, k: usize) -> Vec<IndexSet> {
        let elems: Vec<usize> = self.iter().collect();
        let mut out = Vec::new();
        if k > elems.len() {
            return out;
        }
        let n = elems.len();
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            out.push(IndexSet::from_indices(pick.iter().map(|&p| elems[p])));
            let mut i = k;
            while i > 0 && pick[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                return out;
            }
            pick[i - 1] += 1;
            for j in i..k {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }
}

pub struct Indices(u64);

impl Iterator for Indices {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

pub struct Submasks {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Submasks {
    type Item = IndexSet;

    fn next(&mut self) -> Option<IndexSet> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            Some(((cur | !self.mask).wrapping_add(1)) & self.mask)
        };
        Some(IndexSet(cur))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

impl Serialize for IndexSet {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.collect_seq(self.iter().map(|i| i + 1))
    }
}

impl<'de> Deserialize<'de> for IndexSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if v.iter().any(|&i| i == 0 || i > MAX_DIM) {
            return Err(serde::de::Error::custom("index out of range 1..=64"));
        }
        Ok(IndexSet::from_indices(v.into_iter().map(|i| i - 1)))
    }
}
