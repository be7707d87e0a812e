//! Directed edge subsets of the ordered-pair set `{(i, j) : i != j}`.
//!
//! Pairs are stored in a bitset using the canonical lexicographic order on `(i, j)`:
//! row `i` occupies indices `i*(n-1) .. (i+1)*(n-1)` with column `j` skipping the diagonal.
//! This order is part of the on-disk schedule format and does not change.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    n: usize,
    bits: FixedBitSet,
}

/// Number of ordered pairs without self-loops.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1)
}

/// Canonical index of the ordered pair `(i, j)`, `i != j`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < n && j < n && i != j);
    i * (n - 1) + if j > i { j - 1 } else { j }
}

/// Inverse of [`pair_index`].
pub fn pair_at(n: usize, index: usize) -> (usize, usize) {
    let i = index / (n - 1);
    let c = index % (n - 1);
    (i, if c >= i { c + 1 } else { c })
}

impl EdgeSet {
    pub fn empty(n: usize) -> Self {
        Self { n, bits: FixedBitSet::with_capacity(pair_count(n)) }
    }

    /// The full pair set `A`.
    pub fn complete(n: usize) -> Self {
        let mut e = Self::empty(n);
        e.bits.insert_range(..);
        e
    }

    /// All ordered pairs within `agents`.
    pub fn clique(n: usize, agents: &[usize]) -> Result<Self> {
        let mut e = Self::empty(n);
        for &i in agents {
            for &j in agents {
                if i != j {
                    e.insert(i, j)?;
                }
            }
        }
        Ok(e)
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut e = Self::empty(n);
        for (i, j) in pairs {
            e.insert(i, j)?;
        }
        Ok(e)
    }

    pub fn from_indices(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut e = Self::empty(n);
        let total = pair_count(n);
        for idx in indices {
            if idx >= total {
                return Err(Error::Domain(format!(
                    "edge index {idx} out of range for {n} agents ({total} ordered pairs)"
                )));
            }
            e.bits.insert(idx);
        }
        Ok(e)
    }

    /// Builds an edge set from a raw bit pattern: bit `k` of `mask` is canonical pair `k`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let total = pair_count(n);
        assert!(total <= 64, "mask form supports at most 64 ordered pairs");
        let mut e = Self::empty(n);
        for k in 0..total {
            if mask >> k & 1 == 1 {
                e.bits.insert(k);
            }
        }
        e
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        for index in [i, j] {
            if index >= self.n {
                return Err(Error::AgentOutOfRange { index, n: self.n });
            }
        }
        if i == j {
            return Err(Error::Domain(format!("self-loop ({i}, {i}) is not an admissible edge")));
        }
        self.bits.insert(pair_index(self.n, i, j));
        Ok(())
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && i < self.n && j < self.n && self.bits.contains(pair_index(self.n, i, j))
    }

    pub(crate) fn contains_index(&self, index: usize) -> bool {
        self.bits.contains(index)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    /// Canonical indices of the contained pairs, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    /// Contained pairs in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.bits.ones().map(move |k| pair_at(n, k))
    }

    pub fn union_with(&mut self, other: &EdgeSet) {
        debug_assert_eq!(self.n, other.n);
        self.bits.union_with(&other.bits);
    }

    pub fn is_disjoint(&self, other: &EdgeSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    /// Whether every pair has both endpoints inside `agents`.
    pub fn within(&self, agents: &[usize]) -> bool {
        self.pairs().all(|(i, j)| agents.contains(&i) && agents.contains(&j))
    }

    pub(crate) fn insert_index(&mut self, index: usize) {
        self.bits.insert(index);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_order_is_lexicographic() {
        let n = 4;
        let mut expected = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    expected.push((i, j));
                }
            }
        }
        let got: Vec<_> = EdgeSet::complete(n).pairs().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        let mut e = EdgeSet::empty(3);
        assert!(e.insert(1, 1).is_err());
        assert!(e.insert(0, 3).is_err());
        assert!(EdgeSet::from_indices(3, [6]).is_err());
    }

    #[test]
    fn clique_has_all_internal_pairs() {
        let e = EdgeSet::clique(5, &[1, 3, 4]).unwrap();
        assert_eq!(e.len(), 6);
        assert!(e.within(&[1, 3, 4]));
        assert!(!e.contains(0, 1));
    }

    proptest! {
        #[test]
        fn pair_index_roundtrip(n in 2usize..40, seed in any::<u64>()) {
            let k = (seed as usize) % pair_count(n);
            let (i, j) = pair_at(n, k);
            prop_assert!(i != j && i < n && j < n);
            prop_assert_eq!(pair_index(n, i, j), k);
        }
    }
}
