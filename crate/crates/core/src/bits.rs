use serde::{Deserialize, Serialize};

/// Fixed-length bitset over minipatch indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        BitSet {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, k: usize) {
        debug_assert!(k < self.len);
        self.words[k / 64] |= 1 << (k % 64);
    }

    pub fn contains(&self, k: usize) -> bool {
        k < self.len && self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Size of the intersection with `other`.
    pub fn count_and(&self, other: &BitSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn ones(&self) -> Ones<'_> {
        Ones::new(&self.words, None)
    }

    /// Indices set in both `self` and `other`, ascending.
    pub fn and_ones<'a>(&'a self, other: &'a BitSet) -> Ones<'a> {
        debug_assert_eq!(self.len, other.len);
        Ones::new(&self.words, Some(&other.words))
    }
}

pub struct Ones<'a> {
    a: &'a [u64],
    b: Option<&'a [u64]>,
    word_idx: usize,
    current: u64,
}

impl<'a> Ones<'a> {
    fn new(a: &'a [u64], b: Option<&'a [u64]>) -> Self {
        let mut it = Ones {
            a,
            b,
            word_idx: 0,
            current: 0,
        };
        if !a.is_empty() {
            it.current = it.word(0);
        }
        it
    }

    fn word(&self, i: usize) -> u64 {
        match self.b {
            Some(b) => self.a[i] & b[i],
            None => self.a[i],
        }
    }
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * 64 + bit);
            }
            self.word_idx += 1;
            if self.word_idx >= self.a.len() {
                return None;
            }
            self.current = self.word(self.word_idx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ones_and_intersection() {
        let mut a = BitSet::new(130);
        let mut b = BitSet::new(130);
        for k in [0, 5, 64, 65, 129] {
            a.insert(k);
        }
        for k in [5, 65, 100, 129] {
            b.insert(k);
        }
        assert_eq!(a.ones().collect::<Vec<_>>(), vec![0, 5, 64, 65, 129]);
        assert_eq!(a.and_ones(&b).collect::<Vec<_>>(), vec![5, 65, 129]);
        assert_eq!(a.count_and(&b), 3);
        assert_eq!(a.count(), 5);
        assert!(a.contains(64) && !a.contains(63) && !a.contains(500));
    }

    #[test]
    fn empty_set() {
        let a = BitSet::new(0);
        assert_eq!(a.ones().count(), 0);
        assert!(a.is_empty());
    }
}
