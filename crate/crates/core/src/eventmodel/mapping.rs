use std::fmt;

use serde::{Deserialize, Serialize};

use super::EventError;
use crate::typelattice::TypeLattice;

/// Largest mapping table accepted, in entries (`|F|^|T|`).
pub const MAX_TABLE_ENTRIES: usize = 1 << 20;

/// The sites a mapping acts on, in a fixed order.
///
/// Translation-invariant models use integer offsets that are translated to
/// every site of a torus; general-graph models name their sites directly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteTemplate {
    Offsets(Vec<Vec<i64>>),
    Sites(Vec<usize>),
}

impl SiteTemplate {
    pub fn len(&self) -> usize {
        match self {
            SiteTemplate::Offsets(o) => o.len(),
            SiteTemplate::Sites(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_translation_invariant(&self) -> bool {
        matches!(self, SiteTemplate::Offsets(_))
    }

    /// Spatial dimension of an offset template.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            SiteTemplate::Offsets(o) => o.first().map(Vec::len),
            SiteTemplate::Sites(_) => None,
        }
    }

    /// Site coordinates as integer vectors, uniform across both kinds.
    pub fn keys(&self) -> Vec<Vec<i64>> {
        match self {
            SiteTemplate::Offsets(o) => o.clone(),
            SiteTemplate::Sites(s) => s.iter().map(|&x| vec![x as i64]).collect(),
        }
    }

    /// Largest absolute offset coordinate (zero for explicit sites).
    pub fn range(&self) -> i64 {
        match self {
            SiteTemplate::Offsets(o) => o.iter().flatten().map(|c| c.abs()).max().unwrap_or(0),
            SiteTemplate::Sites(_) => 0,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), EventError> {
        if self.is_empty() {
            return Err(EventError::EmptyTemplate);
        }
        let keys = self.keys();
        for i in 0..keys.len() {
            if keys[..i].contains(&keys[i]) {
                return Err(EventError::RepeatedSite(format!("{:?}", keys[i])));
            }
        }
        if let SiteTemplate::Offsets(o) = self {
            let d = o[0].len();
            if d == 0 || o.iter().any(|v| v.len() != d) {
                return Err(EventError::RepeatedSite(
                    "offsets must share one positive dimension".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical ordering of the template: sites sorted and, for offsets,
    /// translated so the first offset is the origin. Returns the new template
    /// and `perm` with `new[i] = old[perm[i]]`.
    pub fn canonical(&self) -> (SiteTemplate, Vec<usize>) {
        let keys = self.keys();
        let mut perm: Vec<usize> = (0..keys.len()).collect();
        perm.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        let t = match self {
            SiteTemplate::Offsets(o) => {
                let base = o[perm[0]].clone();
                SiteTemplate::Offsets(
                    perm.iter()
                        .map(|&i| o[i].iter().zip(&base).map(|(x, b)| x - b).collect())
                        .collect(),
                )
            }
            SiteTemplate::Sites(s) => SiteTemplate::Sites(perm.iter().map(|&i| s[i]).collect()),
        };
        (t, perm)
    }
}

/// A total function `F^T → F^T` stored as a dense table over the
/// little-endian mixed-radix encoding of local configurations.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MapTable {
    n_types: usize,
    arity: usize,
    table: Vec<u32>,
}

impl fmt::Debug for MapTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for code in 0..self.len() {
            let out = self.table[code] as usize;
            if out != code {
                m.entry(&self.decode(code), &self.decode(out));
            }
        }
        m.finish()
    }
}

impl MapTable {
    fn check_size(n_types: usize, arity: usize) -> Result<usize, EventError> {
        let mut len: usize = 1;
        for _ in 0..arity {
            len = len
                .checked_mul(n_types)
                .filter(|&l| l <= MAX_TABLE_ENTRIES)
                .ok_or(EventError::TableTooLarge { n_types, arity })?;
        }
        Ok(len)
    }

    pub fn identity(n_types: usize, arity: usize) -> Result<Self, EventError> {
        let len = Self::check_size(n_types, arity)?;
        Ok(MapTable {
            n_types,
            arity,
            table: (0..len as u32).collect(),
        })
    }

    /// Tabulates `f` over every local configuration.
    pub fn from_fn<F>(n_types: usize, arity: usize, mut f: F) -> Result<Self, EventError>
    where
        F: FnMut(&[u8]) -> Vec<u8>,
    {
        let len = Self::check_size(n_types, arity)?;
        let mut table = Vec::with_capacity(len);
        let mut phi = vec![0u8; arity];
        for code in 0..len {
            decode_into(code, n_types, &mut phi);
            let out = f(&phi);
            if out.len() != arity {
                return Err(EventError::ArityMismatch {
                    expected: arity,
                    got: out.len(),
                });
            }
            if let Some(&bad) = out.iter().find(|&&t| t as usize >= n_types) {
                return Err(EventError::TypeOutOfRange(bad as usize));
            }
            table.push(encode(&out, n_types) as u32);
        }
        Ok(MapTable {
            n_types,
            arity,
            table,
        })
    }

    /// Wraps a raw table, checking its length and entries.
    pub fn from_codes(n_types: usize, arity: usize, table: Vec<u32>) -> Result<Self, EventError> {
        let len = Self::check_size(n_types, arity)?;
        if table.len() != len {
            return Err(EventError::TableShape {
                expected: len,
                got: table.len(),
            });
        }
        if let Some(&bad) = table.iter().find(|&&c| c as usize >= len) {
            return Err(EventError::TableShape {
                expected: len,
                got: bad as usize,
            });
        }
        Ok(MapTable {
            n_types,
            arity,
            table,
        })
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Number of local configurations, `|F|^|T|`.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn codes(&self) -> &[u32] {
        &self.table
    }

    pub fn encode(&self, phi: &[u8]) -> usize {
        encode(phi, self.n_types)
    }

    pub fn decode(&self, code: usize) -> Vec<u8> {
        let mut phi = vec![0u8; self.arity];
        decode_into(code, self.n_types, &mut phi);
        phi
    }

    #[inline]
    pub fn apply_code(&self, code: usize) -> usize {
        self.table[code] as usize
    }

    pub fn apply(&self, phi: &[u8]) -> Result<Vec<u8>, EventError> {
        if phi.len() != self.arity {
            return Err(EventError::ArityMismatch {
                expected: self.arity,
                got: phi.len(),
            });
        }
        if let Some(&bad) = phi.iter().find(|&&t| t as usize >= self.n_types) {
            return Err(EventError::TypeOutOfRange(bad as usize));
        }
        Ok(self.decode(self.apply_code(self.encode(phi))))
    }

    /// The local configuration with `a` at position `x` and passive elsewhere.
    pub fn single(&self, x: usize, a: usize) -> Vec<u8> {
        let mut phi = vec![0u8; self.arity];
        phi[x] = a as u8;
        phi
    }

    /// `e(δ_x(a))`.
    pub fn image_of_single(&self, x: usize, a: usize) -> Vec<u8> {
        self.decode(self.apply_code(a * self.n_types.pow(x as u32)))
    }

    pub fn fixes_passive(&self) -> bool {
        self.table[0] == 0
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().enumerate().all(|(i, &c)| i == c as usize)
    }

    fn join_codes(&self, lattice: &TypeLattice, p: usize, q: usize) -> usize {
        let n = self.n_types;
        let (mut p, mut q) = (p, q);
        let mut out = 0;
        let mut w = 1;
        for _ in 0..self.arity {
            out += lattice.join(p % n, q % n) * w;
            p /= n;
            q /= n;
            w *= n;
        }
        out
    }

    fn leq_codes(&self, lattice: &TypeLattice, p: usize, q: usize) -> bool {
        let n = self.n_types;
        let (mut p, mut q) = (p, q);
        for _ in 0..self.arity {
            if !lattice.leq(p % n, q % n) {
                return false;
            }
            p /= n;
            q /= n;
        }
        true
    }

    /// Exhaustive monotonicity check; returns a pair `φ ≤ φ'` with
    /// `e(φ) ≰ e(φ')` on failure.
    pub fn is_attractive(&self, lattice: &TypeLattice) -> Result<(), Counterexample> {
        for p in 0..self.len() {
            for q in 0..self.len() {
                if self.leq_codes(lattice, p, q)
                    && !self.leq_codes(lattice, self.apply_code(p), self.apply_code(q))
                {
                    return Err(Counterexample {
                        phi: self.decode(p),
                        psi: self.decode(q),
                    });
                }
            }
        }
        Ok(())
    }

    /// Exhaustive check of `e(φ∨φ') = e(φ)∨e(φ')`; returns a failing pair.
    pub fn is_additive(&self, lattice: &TypeLattice) -> Result<(), Counterexample> {
        for p in 0..self.len() {
            for q in p + 1..self.len() {
                let lhs = self.apply_code(self.join_codes(lattice, p, q));
                let rhs = self.join_codes(lattice, self.apply_code(p), self.apply_code(q));
                if lhs != rhs {
                    return Err(Counterexample {
                        phi: self.decode(p),
                        psi: self.decode(q),
                    });
                }
            }
        }
        Ok(())
    }

    /// Reorders the sites: the result `g` satisfies
    /// `g(φ ∘ perm) = e(φ) ∘ perm`, i.e. position `i` of `g` is position
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> MapTable {
        let mut table = vec![0u32; self.len()];
        let mut phi = vec![0u8; self.arity];
        let mut new_phi = vec![0u8; self.arity];
        for code in 0..self.len() {
            decode_into(code, self.n_types, &mut phi);
            for (i, &p) in perm.iter().enumerate() {
                new_phi[i] = phi[p];
            }
            let out = self.decode(self.apply_code(code));
            let new_out: Vec<u8> = perm.iter().map(|&p| out[p]).collect();
            table[encode(&new_phi, self.n_types)] = encode(&new_out, self.n_types) as u32;
        }
        MapTable {
            n_types: self.n_types,
            arity: self.arity,
            table,
        }
    }

    /// Applies a type relabelling `σ` to inputs and outputs:
    /// the result maps `σ∘φ` to `σ∘e(φ)`.
    pub fn relabelled(&self, sigma: &[usize]) -> MapTable {
        let mut table = vec![0u32; self.len()];
        for code in 0..self.len() {
            let phi: Vec<u8> = self.decode(code).iter().map(|&a| sigma[a as usize] as u8).collect();
            let out: Vec<u8> = self
                .decode(self.apply_code(code))
                .iter()
                .map(|&a| sigma[a as usize] as u8)
                .collect();
            table[encode(&phi, self.n_types)] = encode(&out, self.n_types) as u32;
        }
        MapTable {
            n_types: self.n_types,
            arity: self.arity,
            table,
        }
    }
}

pub fn encode(phi: &[u8], n_types: usize) -> usize {
    phi.iter().rev().fold(0, |acc, &a| acc * n_types + a as usize)
}

pub fn decode_into(mut code: usize, n_types: usize, out: &mut [u8]) {
    for slot in out.iter_mut() {
        *slot = (code % n_types) as u8;
        code /= n_types;
    }
}

/// A pair of local configurations witnessing a failed structural check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub phi: Vec<u8>,
    pub psi: Vec<u8>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.phi, self.psi)
    }
}

/// One event type: a local mapping on a site template, fired at `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMapping {
    pub label: String,
    pub sites: SiteTemplate,
    pub table: MapTable,
    pub rate: f64,
}

impl LocalMapping {
    pub fn new(
        label: impl Into<String>,
        sites: SiteTemplate,
        table: MapTable,
        rate: f64,
    ) -> Result<Self, EventError> {
        let label = label.into();
        sites.validate()?;
        if sites.len() != table.arity() {
            return Err(EventError::ArityMismatch {
                expected: sites.len(),
                got: table.arity(),
            });
        }
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(EventError::InvalidRate { label, rate });
        }
        Ok(LocalMapping {
            label,
            sites,
            table,
            rate,
        })
    }

    /// Builds the mapping from a rule on local configurations.
    pub fn from_fn<F>(
        label: impl Into<String>,
        sites: SiteTemplate,
        n_types: usize,
        rate: f64,
        f: F,
    ) -> Result<Self, EventError>
    where
        F: FnMut(&[u8]) -> Vec<u8>,
    {
        let table = MapTable::from_fn(n_types, sites.len(), f)?;
        Self::new(label, sites, table, rate)
    }

    pub fn apply(&self, phi: &[u8]) -> Result<Vec<u8>, EventError> {
        self.table.apply(phi)
    }

    pub fn is_attractive(&self, lattice: &TypeLattice) -> Result<(), Counterexample> {
        self.table.is_attractive(lattice)
    }

    pub fn is_additive(&self, lattice: &TypeLattice) -> Result<(), Counterexample> {
        self.table.is_additive(lattice)
    }

    /// Site-order-independent form used to compare mappings structurally.
    pub fn canonical(&self) -> (SiteTemplate, MapTable) {
        let (sites, perm) = self.sites.canonical();
        (sites, self.table.permuted(&perm))
    }
}
