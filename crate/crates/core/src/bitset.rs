use std::fmt;

/// A set of type indices drawn from a lattice of at most 32 elements.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TypeSet(u32);

impl TypeSet {
    pub const EMPTY: TypeSet = TypeSet(0);

    pub fn from_bits(bits: u32) -> Self {
        TypeSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn singleton(a: usize) -> Self {
        debug_assert!(a < 32);
        TypeSet(1 << a)
    }

    /// All indices `0..n`.
    pub fn full(n: usize) -> Self {
        if n >= 32 {
            TypeSet(u32::MAX)
        } else {
            TypeSet((1u32 << n) - 1)
        }
    }

    pub fn contains(self, a: usize) -> bool {
        a < 32 && self.0 & (1 << a) != 0
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1 << a;
    }

    pub fn remove(&mut self, a: usize) {
        self.0 &= !(1 << a);
    }

    pub fn with(self, a: usize) -> Self {
        TypeSet(self.0 | (1 << a))
    }

    pub fn without(self, a: usize) -> Self {
        TypeSet(self.0 & !(1 << a))
    }

    pub fn union(self, other: Self) -> Self {
        TypeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        TypeSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        TypeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn first(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    pub fn iter(self) -> TypeSetIter {
        TypeSetIter(self.0)
    }
}

impl FromIterator<usize> for TypeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = TypeSet::EMPTY;
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl IntoIterator for TypeSet {
    type Item = usize;
    type IntoIter = TypeSetIter;

    fn into_iter(self) -> TypeSetIter {
        self.iter()
    }
}

pub struct TypeSetIter(u32);

impl Iterator for TypeSetIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let a = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(a)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for TypeSetIter {}

impl fmt::Debug for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_is_ascending() {
        let s: TypeSet = [5, 1, 3].into_iter().collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3, 5]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(3) && !s.contains(2));
    }

    #[test]
    fn full_word() {
        assert_eq!(TypeSet::full(32).len(), 32);
        assert_eq!(TypeSet::full(3).bits(), 0b111);
    }
}
