//! Compact sets of def-use pair indices.

use serde::{Serialize, Serializer};

/// Bitset over indices into [`DupSets::pairs`](crate::dataflow::DupSets).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PairSet {
    words: Vec<u64>,
    len: usize,
}

impl PairSet {
    pub fn new(len: usize) -> PairSet {
        PairSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Universe size.
    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) -> bool {
        assert!(i < self.len, "pair index {i} out of range {}", self.len);
        let (w, b) = (i / 64, i % 64);
        let fresh = self.words[w] & (1 << b) == 0;
        self.words[w] |= 1 << b;
        fresh
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Size of the intersection with `other`.
    pub fn count_common(&self, other: &PairSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Adds every member of `other`; returns how many were new.
    pub fn union_with(&mut self, other: &PairSet) -> usize {
        let mut added = 0;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            added += (b & !*a).count_ones() as usize;
            *a |= b;
        }
        added
    }

    pub fn is_subset(&self, other: &PairSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.contains(i))
    }
}

impl FromIterator<usize> for PairSet {
    /// Universe is sized to the largest index; prefer [`PairSet::new`] plus inserts.
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let items: Vec<usize> = iter.into_iter().collect();
        let mut set = PairSet::new(items.iter().max().map_or(0, |m| m + 1));
        for i in items {
            set.insert(i);
        }
        set
    }
}

impl Serialize for PairSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}
