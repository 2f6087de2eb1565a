//! Fixed-width bitset backing both hypotheses (one bit per domain point) and
//! member sets (one bit per hypothesis of an ambient class).

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitSet {
    len: usize,
    words: Words,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitSet {
    pub fn empty(len: usize) -> Self {
        BitSet {
            len,
            words: smallvec::smallvec![0; word_count(len)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        for w in s.words.iter_mut() {
            *w = u64::MAX;
        }
        s.trim();
        s
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    fn trim(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        if value {
            self.insert(i)
        } else {
            self.remove(i)
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn intersection(&self, other: &BitSet) -> BitSet {
        debug_assert_eq!(self.len, other.len);
        BitSet {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn union(&self, other: &BitSet) -> BitSet {
        debug_assert_eq!(self.len, other.len);
        BitSet {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    #[inline]
    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    #[inline]
    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    /// Smallest index at which the two sets differ.
    pub fn first_difference(&self, other: &BitSet) -> Option<usize> {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .enumerate()
            .find_map(|(i, (a, b))| {
                let x = a ^ b;
                (x != 0).then(|| i * 64 + x.trailing_zeros() as usize)
            })
    }

    pub fn complement(&self) -> BitSet {
        let mut s = BitSet {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        s.trim();
        s
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_is_trimmed() {
        let s = BitSet::full(70);
        assert_eq!(s.count(), 70);
        assert_eq!(s.complement().count(), 0);
    }

    #[test]
    fn ones_and_difference() {
        let a = BitSet::from_indices(130, [0, 5, 64, 129]);
        assert_eq!(a.ones().collect::<Vec<_>>(), vec![0, 5, 64, 129]);
        let mut b = a.clone();
        b.remove(64);
        assert_eq!(a.first_difference(&b), Some(64));
        assert_eq!(a.first_difference(&a), None);
        assert!(b.is_subset(&a));
        assert!(!a.is_subset(&b));
    }
}
