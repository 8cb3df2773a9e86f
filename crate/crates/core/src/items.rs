use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest item universe an [`ItemSet`] can address.
pub const MAX_ITEMS: usize = 64;

/// A bundle of items, stored as a bit mask over `{0, .., m-1}`.
///
/// Ordering is lexicographic on the sorted member lists, so `{0} < {0,1} <
/// {0,2} < {1}`. This is the canonical bundle order used for LP columns and
/// demand-query tie-breaking.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ItemSet(u64);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn from_bits(bits: u64) -> Self {
        ItemSet(bits)
    }

    pub fn full(m: usize) -> Self {
        debug_assert!(m <= MAX_ITEMS);
        if m == MAX_ITEMS {
            ItemSet(u64::MAX)
        } else {
            ItemSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(item: usize) -> Self {
        ItemSet(1u64 << item)
    }

    /// Builds a set from item indices, rejecting indices `>= m`.
    pub fn from_items(items: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let mut bits = 0u64;
        for j in items {
            if j >= m {
                return Err(Error::Parse(format!("item {j} outside universe of {m} items")));
            }
            bits |= 1u64 << j;
        }
        Ok(ItemSet(bits))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 & (1u64 << item) != 0
    }

    pub fn insert(&mut self, item: usize) {
        self.0 |= 1u64 << item;
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & other.0)
    }

    pub fn difference(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: ItemSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Fits inside a universe of `m` items.
    pub fn within(self, m: usize) -> bool {
        self.is_subset(ItemSet::full(m))
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// All subsets of `self` (including the empty set and `self`), in
    /// increasing bit-mask order.
    pub fn subsets(self) -> impl Iterator<Item = ItemSet> {
        let mask = self.0;
        let mut cur = 0u64;
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let out = ItemSet(cur);
            if cur == mask {
                done = true;
            } else {
                cur = (cur.wrapping_sub(mask)) & mask;
            }
            Some(out)
        })
    }

    /// Every subset of a universe of `m` items in increasing bit-mask order.
    pub fn all(m: usize) -> impl Iterator<Item = ItemSet> {
        ItemSet::full(m).subsets()
    }

    /// Nonempty subsets of `{0, .., m-1}` in canonical (lexicographic) order.
    pub fn nonempty_sorted(m: usize) -> Vec<ItemSet> {
        let mut sets: Vec<ItemSet> = ItemSet::all(m).filter(|s| !s.is_empty()).collect();
        sets.sort();
        sets
    }
}

impl Ord for ItemSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.iter().cmp(other.iter())
    }
}

impl PartialOrd for ItemSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, j) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        f.write_str("}")
    }
}

// Serialized as the sorted list of item indices.
impl Serialize for ItemSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        ItemSet::from_items(items, MAX_ITEMS).map_err(serde::de::Error::custom)
    }
}
