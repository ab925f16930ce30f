//! Finite type lattices.
//!
//! Types are dense indices `0..n` with `0` the passive type. The order is
//! stored as one up-set bitset per element and the join as a dense table, so
//! every query in the simulation loop is a single lookup.
//!
//! Besides the order and the join, a lattice knows its primitive types (active
//! types that are not the join of two strictly different types) and, for every
//! type, the colour combinations that decompose it.

use std::fmt;

use thiserror::Error;

use crate::bitset::TypeSet;

/// Largest number of elements a lattice may have; subsets must fit in a `u32`.
pub const MAX_TYPES: usize = 32;

/// Upper bound on the number of decompositions enumerated for one type.
const MAX_DECOMPOSITIONS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("a type lattice needs at least the passive type")]
    Empty,
    #[error("lattice has {0} elements; at most {MAX_TYPES} are supported")]
    TooLarge(usize),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate type label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown type label {0:?}")]
    UnknownLabel(String),
    #[error("poset violation ({axiom}): witness {witness:?}")]
    PosetViolation {
        axiom: &'static str,
        witness: Vec<usize>,
    },
    #[error("join violation ({axiom}): witness {witness:?}")]
    JoinViolation {
        axiom: &'static str,
        witness: Vec<usize>,
    },
    #[error("type {0} has more than {MAX_DECOMPOSITIONS} decompositions")]
    TooManyDecompositions(usize),
}

/// Checks the partial-order and join axioms on explicit tables.
///
/// Returns the first violated axiom together with the witnessing pair or
/// triple of type indices.
pub fn validate_lattice(order: &[Vec<bool>], join: &[Vec<usize>]) -> Result<(), LatticeError> {
    let n = order.len();
    if n == 0 {
        return Err(LatticeError::Empty);
    }
    if n > MAX_TYPES {
        return Err(LatticeError::TooLarge(n));
    }
    if join.len() != n {
        return Err(LatticeError::Shape(format!(
            "order has {n} rows, join has {}",
            join.len()
        )));
    }
    for (a, (orow, jrow)) in order.iter().zip(join).enumerate() {
        if orow.len() != n || jrow.len() != n {
            return Err(LatticeError::Shape(format!("row {a} is not of length {n}")));
        }
        if let Some(&j) = jrow.iter().find(|&&j| j >= n) {
            return Err(LatticeError::Shape(format!("join entry {j} out of range")));
        }
    }
    let poset = |axiom, witness| Err(LatticeError::PosetViolation { axiom, witness });
    let joinv = |axiom, witness| Err(LatticeError::JoinViolation { axiom, witness });

    for a in 0..n {
        if !order[a][a] {
            return poset("reflexivity", vec![a]);
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if order[a][b] && order[b][a] {
                return poset("antisymmetry", vec![a, b]);
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            if !order[a][b] {
                continue;
            }
            for c in 0..n {
                if order[b][c] && !order[a][c] {
                    return poset("transitivity", vec![a, b, c]);
                }
            }
        }
    }
    for a in 0..n {
        if !order[0][a] {
            return poset("passive minimum", vec![0, a]);
        }
    }
    for a in 0..n {
        if join[a][a] != a {
            return joinv("idempotence", vec![a]);
        }
        for b in a + 1..n {
            if join[a][b] != join[b][a] {
                return joinv("commutativity", vec![a, b]);
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let j = join[a][b];
            if !order[a][j] || !order[b][j] {
                return joinv("upper bound", vec![a, b]);
            }
            for c in 0..n {
                if order[a][c] && order[b][c] && !order[j][c] {
                    return joinv("least upper bound", vec![a, b, c]);
                }
            }
        }
    }
    Ok(())
}

/// A set of pairwise incomparable primitive types.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColourCombination(TypeSet);

impl ColourCombination {
    /// Wraps `members` after checking it is an antichain of primitives of `lattice`.
    pub fn new(lattice: &TypeLattice, members: TypeSet) -> Option<Self> {
        if !members.is_subset(lattice.primitives()) {
            return None;
        }
        for a in members {
            for b in members {
                if a != b && lattice.leq(a, b) {
                    return None;
                }
            }
        }
        Some(ColourCombination(members))
    }

    pub(crate) fn from_set_unchecked(members: TypeSet) -> Self {
        ColourCombination(members)
    }

    pub fn members(self) -> TypeSet {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.len()
    }

    pub fn is_empty(self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(self, a: usize) -> bool {
        self.0.contains(a)
    }
}

impl fmt::Debug for ColourCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{:?}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct TypeLattice {
    labels: Vec<String>,
    up: Vec<TypeSet>,
    down: Vec<TypeSet>,
    join: Vec<u8>,
    primitives: TypeSet,
    decompositions: Vec<Vec<ColourCombination>>,
}

impl fmt::Debug for TypeLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeLattice")
            .field("labels", &self.labels)
            .field("covers", &self.covers())
            .finish()
    }
}

impl TypeLattice {
    /// Builds a lattice from explicit order and join tables, validating both.
    pub fn new(
        labels: Vec<String>,
        order: &[Vec<bool>],
        join: &[Vec<usize>],
    ) -> Result<Self, LatticeError> {
        validate_lattice(order, join)?;
        let n = order.len();
        if labels.len() != n {
            return Err(LatticeError::Shape(format!(
                "{} labels for {n} types",
                labels.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(LatticeError::DuplicateLabel(l.clone()));
            }
        }
        let mut up = vec![TypeSet::EMPTY; n];
        let mut down = vec![TypeSet::EMPTY; n];
        for a in 0..n {
            for b in 0..n {
                if order[a][b] {
                    up[a].insert(b);
                    down[b].insert(a);
                }
            }
        }
        let mut jt = vec![0u8; n * n];
        for a in 0..n {
            for b in 0..n {
                jt[a * n + b] = join[a][b] as u8;
            }
        }
        let mut lattice = TypeLattice {
            labels,
            up,
            down,
            join: jt,
            primitives: TypeSet::EMPTY,
            decompositions: Vec::new(),
        };
        lattice.primitives = (1..n).filter(|&a| lattice.primitive_by_join(a)).collect();
        lattice.decompositions = (0..n)
            .map(|b| lattice.enumerate_decompositions(b))
            .collect::<Result<_, _>>()?;
        Ok(lattice)
    }

    /// Builds a lattice from an order table, deriving the join as the least
    /// upper bound. Fails if some pair has no least upper bound.
    pub fn from_order(labels: Vec<String>, order: &[Vec<bool>]) -> Result<Self, LatticeError> {
        let n = order.len();
        if n == 0 {
            return Err(LatticeError::Empty);
        }
        if n > MAX_TYPES {
            return Err(LatticeError::TooLarge(n));
        }
        if order.iter().any(|r| r.len() != n) {
            return Err(LatticeError::Shape("order table is not square".into()));
        }
        let mut join = vec![vec![0usize; n]; n];
        for a in 0..n {
            for b in 0..n {
                let ub: Vec<usize> = (0..n).filter(|&c| order[a][c] && order[b][c]).collect();
                let least = ub.iter().copied().find(|&u| ub.iter().all(|&c| order[u][c]));
                match least {
                    Some(u) => join[a][b] = u,
                    None => {
                        // Let the validator name the precise order axiom if the
                        // table is not even a partial order.
                        validate_lattice(order, &vec![vec![0; n]; n]).or_else(|e| match e {
                            LatticeError::PosetViolation { .. } => Err(e),
                            _ => Ok(()),
                        })?;
                        return Err(LatticeError::JoinViolation {
                            axiom: "no least upper bound",
                            witness: vec![a, b],
                        });
                    }
                }
            }
        }
        Self::new(labels, order, &join)
    }

    /// Builds a lattice from covering relations `(lower, upper)`; the order is
    /// the reflexive-transitive closure, with `0` below everything.
    pub fn from_covers(labels: Vec<String>, covers: &[(usize, usize)]) -> Result<Self, LatticeError> {
        let n = labels.len();
        if n == 0 {
            return Err(LatticeError::Empty);
        }
        if n > MAX_TYPES {
            return Err(LatticeError::TooLarge(n));
        }
        let mut order = vec![vec![false; n]; n];
        for a in 0..n {
            order[a][a] = true;
            order[0][a] = true;
        }
        for &(a, b) in covers {
            if a >= n || b >= n {
                return Err(LatticeError::Shape(format!("cover ({a}, {b}) out of range")));
            }
            order[a][b] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if order[i][k] {
                    for j in 0..n {
                        if order[k][j] {
                            order[i][j] = true;
                        }
                    }
                }
            }
        }
        Self::from_order(labels, &order)
    }

    /// The chain `0 < 1 < ... < n_active`.
    pub fn chain(n_active: usize) -> Self {
        let n = n_active + 1;
        let labels = (0..n).map(|i| i.to_string()).collect();
        let order: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| a <= b).collect()).collect();
        let join: Vec<Vec<usize>> = (0..n).map(|a| (0..n).map(|b| a.max(b)).collect()).collect();
        Self::new(labels, &order, &join).expect("chains are lattices")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn active(&self) -> TypeSet {
        TypeSet::full(self.size()).without(0)
    }

    #[inline]
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.up[a].contains(b)
    }

    #[inline]
    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq(a, b)
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.leq(a, b) || self.leq(b, a)
    }

    pub fn incomparable(&self, a: usize, b: usize) -> bool {
        !self.comparable(a, b)
    }

    #[inline]
    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a * self.size() + b] as usize
    }

    /// Join of a set of types; the empty join is the passive type.
    pub fn join_all<I: IntoIterator<Item = usize>>(&self, types: I) -> usize {
        types.into_iter().fold(0, |acc, a| self.join(acc, a))
    }

    /// `{b : a ≤ b}`.
    pub fn up_set(&self, a: usize) -> TypeSet {
        self.up[a]
    }

    /// `{b : b ≤ a}`.
    pub fn down_set(&self, a: usize) -> TypeSet {
        self.down[a]
    }

    /// The largest element, the join of every type.
    pub fn top(&self) -> usize {
        self.join_all(0..self.size())
    }

    pub fn order_table(&self) -> Vec<Vec<bool>> {
        let n = self.size();
        (0..n).map(|a| (0..n).map(|b| self.leq(a, b)).collect()).collect()
    }

    pub fn join_table(&self) -> Vec<Vec<usize>> {
        let n = self.size();
        (0..n).map(|a| (0..n).map(|b| self.join(a, b)).collect()).collect()
    }

    /// Covering pairs `(a, b)`: `a < b` with nothing strictly between.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let n = self.size();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.lt(a, b) && !(0..n).any(|c| self.lt(a, c) && self.lt(c, b)) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn primitive_by_join(&self, a: usize) -> bool {
        let n = self.size();
        for b in 0..n {
            for c in 0..n {
                if b != a && c != a && self.join(b, c) == a {
                    return false;
                }
            }
        }
        true
    }

    /// Active types that are not the join of two strictly different types.
    pub fn primitives(&self) -> TypeSet {
        self.primitives
    }

    pub fn is_primitive(&self, a: usize) -> bool {
        self.primitives.contains(a)
    }

    fn enumerate_decompositions(&self, b: usize) -> Result<Vec<ColourCombination>, LatticeError> {
        if b == 0 {
            return Ok(Vec::new());
        }
        let cands: Vec<usize> = self.primitives.intersection(self.down[b]).iter().collect();
        let mut out = Vec::new();
        let mut stack: Vec<(usize, TypeSet, usize)> = vec![(0, TypeSet::EMPTY, 0)];
        while let Some((i, set, j)) = stack.pop() {
            if i == cands.len() {
                if !set.is_empty() && j == b {
                    out.push(ColourCombination(set));
                    if out.len() > MAX_DECOMPOSITIONS {
                        return Err(LatticeError::TooManyDecompositions(b));
                    }
                }
                continue;
            }
            let a = cands[i];
            stack.push((i + 1, set, j));
            if set.iter().all(|c| self.incomparable(a, c)) {
                stack.push((i + 1, set.with(a), self.join(j, a)));
            }
        }
        out.sort();
        Ok(out)
    }

    /// All colour combinations whose join is `b`. Empty only for the passive type.
    pub fn decompositions(&self, b: usize) -> &[ColourCombination] {
        &self.decompositions[b]
    }

    /// The unique decomposition `C(b)`, if `b` has exactly one.
    pub fn decomposition(&self, b: usize) -> Option<ColourCombination> {
        match self.decompositions[b].as_slice() {
            [c] => Some(*c),
            _ => None,
        }
    }

    /// Every compound type has exactly one decomposition.
    pub fn is_multi_colour(&self) -> bool {
        (1..self.size()).all(|b| self.decompositions[b].len() == 1)
    }

    /// `⋁ C`, the type a colour combination stands for.
    pub fn combination_join(&self, c: ColourCombination) -> usize {
        self.join_all(c.members())
    }

    /// `{a ∈ E : a ≯ b for every b ∈ E}`.
    pub fn minimal(&self, e: TypeSet) -> TypeSet {
        e.iter()
            .filter(|&a| !e.iter().any(|b| self.lt(b, a)))
            .collect()
    }

    /// `{a ∈ E : a ≮ b for every b ∈ E}`.
    pub fn maximal(&self, e: TypeSet) -> TypeSet {
        e.iter()
            .filter(|&a| !e.iter().any(|b| self.lt(a, b)))
            .collect()
    }

    /// Maximal elements of `C ∪ C'`.
    pub fn colour_join(&self, c: ColourCombination, d: ColourCombination) -> ColourCombination {
        ColourCombination(self.maximal(c.members().union(d.members())))
    }

    /// `C ≤ C'` iff every member of `C` lies below some member of `C'`.
    pub fn combination_leq(&self, c: ColourCombination, d: ColourCombination) -> bool {
        c.members()
            .iter()
            .all(|a| d.members().iter().any(|b| self.leq(a, b)))
    }

    /// `C(c) ≻ C(b)`: some member of `c` dominates some member of `b`.
    pub fn dominates(&self, c: ColourCombination, b: ColourCombination) -> bool {
        c.members()
            .iter()
            .any(|x| b.members().iter().any(|y| self.leq(y, x)))
    }

    /// Minimal elements of `C ∪ C'`; `None` (passive) only when both are empty.
    pub fn square_join(
        &self,
        c: ColourCombination,
        d: ColourCombination,
    ) -> Option<ColourCombination> {
        let u = c.members().union(d.members());
        if u.is_empty() {
            None
        } else {
            Some(ColourCombination(self.minimal(u)))
        }
    }

    /// Layers `E₁ = min E`, `Eᵢ = min(E − E₁ − … − Eᵢ₋₁)`.
    pub fn layer_partition(&self, e: TypeSet) -> Vec<TypeSet> {
        let mut rest = e;
        let mut layers = Vec::new();
        while !rest.is_empty() {
            let layer = self.minimal(rest);
            rest = rest.difference(layer);
            layers.push(layer);
        }
        layers
    }

    /// Human-readable name for a set of types, e.g. `{1,2}`.
    pub fn set_label(&self, s: TypeSet) -> String {
        let names: Vec<&str> = s.iter().map(|a| self.label(a)).collect();
        format!("{{{}}}", names.join(","))
    }

    /// Finds an order isomorphism `self → other`, as a vector indexed by
    /// `self`'s types. Joins are determined by the order, so this is a lattice
    /// isomorphism.
    pub fn isomorphisms_to(&self, other: &TypeLattice) -> Vec<Vec<usize>> {
        let n = self.size();
        let mut out = Vec::new();
        if n != other.size() {
            return out;
        }
        let mut assign = vec![usize::MAX; n];
        let mut used = vec![false; n];
        assign[0] = 0;
        used[0] = true;
        self.extend_iso(other, 1, &mut assign, &mut used, &mut out);
        out
    }

    fn extend_iso(
        &self,
        other: &TypeLattice,
        a: usize,
        assign: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let n = self.size();
        if a == n {
            out.push(assign.clone());
            return;
        }
        for b in 1..n {
            if used[b] {
                continue;
            }
            let consistent = (0..a).all(|c| {
                self.leq(c, a) == other.leq(assign[c], b) && self.leq(a, c) == other.leq(b, assign[c])
            });
            if consistent {
                assign[a] = b;
                used[b] = true;
                self.extend_iso(other, a + 1, assign, used, out);
                used[b] = false;
                assign[a] = usize::MAX;
            }
        }
    }
}

/// Named lattices used throughout the examples.
pub mod named {
    use super::TypeLattice;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// `F = {0,1,2,3,4}` with `0 < 1,2,3 < 4`.
    pub fn diamond() -> TypeLattice {
        TypeLattice::from_covers(
            labels(&["0", "1", "2", "3", "4"]),
            &[(1, 4), (2, 4), (3, 4)],
        )
        .expect("diamond is a lattice")
    }

    /// The diamond with `1 < 2` added.
    pub fn diamond_with_1_below_2() -> TypeLattice {
        TypeLattice::from_covers(
            labels(&["0", "1", "2", "3", "4"]),
            &[(1, 2), (2, 4), (3, 4)],
        )
        .expect("lattice")
    }

    /// `{0, m, f, m∨f}` with `m` and `f` incomparable.
    pub fn bipartite() -> TypeLattice {
        TypeLattice::from_covers(labels(&["0", "m", "f", "mf"]), &[(1, 3), (2, 3)])
            .expect("bipartite lattice")
    }
}
