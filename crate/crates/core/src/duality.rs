//! Dual types, dual mappings and dual models, the double dual, and
//! self-duality detection.

use std::sync::Arc;

use thiserror::Error;

use crate::bitset::TypeSet;
use crate::eventmodel::{encode, Counterexample, EventError, GrowthModel, LocalMapping, MapTable};
use crate::typelattice::{LatticeError, TypeLattice, MAX_TYPES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("mapping {label:?} is not additive: {witness}")]
    NotAdditive {
        label: String,
        witness: Counterexample,
    },
    #[error("dual of {label:?} at {theta:?} gives {set}, which is not a dual type")]
    NotDualType {
        label: String,
        theta: Vec<u8>,
        set: String,
    },
    #[error("dual of {label:?} breaks compatibility at φ={phi:?}, θ={theta:?}")]
    CompatibilityFailure {
        label: String,
        phi: Vec<u8>,
        theta: Vec<u8>,
    },
    #[error("lattice is not multi-colour")]
    NotMultiColour,
    #[error("{0} dual types exceed the lattice size cap")]
    TooManyDualTypes(usize),
    #[error("union of dual types {0} and {1} is not a dual type")]
    UnionNotClosed(String, String),
    #[error("identification of types with dual types failed: {0}")]
    IdentificationFailure(String),
}

/// The dual types of a lattice, themselves forming a lattice under inclusion
/// with union as join. Index 0 is the passive (empty) dual type.
#[derive(Debug, Clone)]
pub struct DualLattice {
    base: Arc<TypeLattice>,
    types: Vec<TypeSet>,
    lattice: Arc<TypeLattice>,
    identification: Option<Vec<usize>>,
}

pub fn is_increasing(lat: &TypeLattice, e: TypeSet) -> bool {
    e.iter().all(|a| lat.up_set(a).is_subset(e))
}

pub fn is_decomposable(lat: &TypeLattice, e: TypeSet) -> bool {
    let n = lat.size();
    (0..n).all(|a| {
        e.contains(a)
            || (a..n).all(|b| e.contains(b) || !e.contains(lat.join(a, b)))
    })
}

pub fn is_dual_type(lat: &TypeLattice, e: TypeSet) -> bool {
    !e.contains(0) && is_increasing(lat, e) && is_decomposable(lat, e)
}

/// `E_b = {c : C(c) ≻ C(b)}` in a multi-colour lattice.
pub fn dominance_set(lat: &TypeLattice, b: usize) -> TypeSet {
    let cb = lat.decomposition(b).expect("multi-colour lattice");
    lat.active()
        .iter()
        .filter(|&c| lat.dominates(lat.decomposition(c).unwrap(), cb))
        .collect()
}

/// Enumerates all dual types: increasing sets are generated top-down along a
/// linear extension, then filtered for decomposability.
pub fn enumerate_dual_types(lattice: &TypeLattice) -> Result<DualLattice, DualityError> {
    enumerate_dual_types_arc(Arc::new(lattice.clone()))
}

pub fn enumerate_dual_types_arc(base: Arc<TypeLattice>) -> Result<DualLattice, DualityError> {
    let lat = &*base;
    let mut order: Vec<usize> = lat.active().iter().collect();
    order.sort_by_key(|&a| std::cmp::Reverse(lat.down_set(a).len()));
    let mut found = Vec::new();
    upsets(lat, &order, 0, TypeSet::EMPTY, &mut found);
    let mut types: Vec<TypeSet> = found
        .into_iter()
        .filter(|&e| !e.is_empty() && is_decomposable(lat, e))
        .collect();
    types.push(TypeSet::EMPTY);
    types.sort_by_key(|s| (s.len(), s.bits()));
    if types.len() > MAX_TYPES {
        return Err(DualityError::TooManyDualTypes(types.len()));
    }

    let n = types.len();
    let index = |s: TypeSet| types.iter().position(|&t| t == s);
    let mut join = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in 0..n {
            join[i][j] = index(types[i].union(types[j])).ok_or_else(|| {
                DualityError::UnionNotClosed(lat.set_label(types[i]), lat.set_label(types[j]))
            })?;
        }
    }
    let order: Vec<Vec<bool>> = types
        .iter()
        .map(|&e| types.iter().map(|&f| e.is_subset(f)).collect())
        .collect();
    let labels = types
        .iter()
        .map(|&e| if e.is_empty() { "0".to_string() } else { lat.set_label(e) })
        .collect();
    let lattice = Arc::new(TypeLattice::new(labels, &order, &join)?);

    let identification = if lat.is_multi_colour() {
        let mut ident = vec![0usize; lat.size()];
        for b in lat.active() {
            let eb = dominance_set(lat, b);
            ident[b] = index(eb).ok_or_else(|| {
                DualityError::IdentificationFailure(format!(
                    "E_{} = {} is not a dual type",
                    lat.label(b),
                    lat.set_label(eb)
                ))
            })?;
        }
        let mut seen = ident.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != n {
            return Err(DualityError::IdentificationFailure(
                "b ↦ E_b is not a bijection onto the dual types".into(),
            ));
        }
        Some(ident)
    } else {
        None
    };

    Ok(DualLattice {
        base,
        types,
        lattice,
        identification,
    })
}

fn upsets(lat: &TypeLattice, order: &[usize], k: usize, cur: TypeSet, out: &mut Vec<TypeSet>) {
    if k == order.len() {
        out.push(cur);
        return;
    }
    let a = order[k];
    upsets(lat, order, k + 1, cur, out);
    if lat.up_set(a).without(a).is_subset(cur) {
        upsets(lat, order, k + 1, cur.with(a), out);
    }
}

impl DualLattice {
    pub fn base(&self) -> &TypeLattice {
        &self.base
    }

    pub fn lattice(&self) -> &TypeLattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> Arc<TypeLattice> {
        Arc::clone(&self.lattice)
    }

    pub fn size(&self) -> usize {
        self.types.len()
    }

    pub fn dual_type(&self, i: usize) -> TypeSet {
        self.types[i]
    }

    pub fn types(&self) -> &[TypeSet] {
        &self.types
    }

    pub fn index_of(&self, e: TypeSet) -> Option<usize> {
        self.types.iter().position(|&t| t == e)
    }

    /// For multi-colour lattices, `b ↦` index of `E_b` (passive to passive).
    pub fn identification(&self) -> Option<&[usize]> {
        self.identification.as_deref()
    }

    /// `φ ~ θ`: some site carries an active type in the dual set there.
    pub fn compatible(&self, phi: &[u8], theta: &[u8]) -> bool {
        phi.iter()
            .zip(theta)
            .any(|(&a, &t)| a != 0 && self.types[t as usize].contains(a as usize))
    }

    /// Configuration-level compatibility over any sites.
    pub fn compatible_configs(&self, eta: &[u8], zeta: &[u8]) -> bool {
        self.compatible(eta, zeta)
    }

    /// `ẽ(θ)(x) = {a : e(δ_x(a)) ~ θ}`, verified exhaustively against the
    /// compatibility relation before it is returned.
    pub fn dual_mapping(&self, e: &LocalMapping) -> Result<LocalMapping, DualityError> {
        e.is_additive(&self.base)
            .map_err(|witness| DualityError::NotAdditive {
                label: e.label.clone(),
                witness,
            })?;
        let arity = e.sites.len();
        let n = self.base.size();
        let images: Vec<Vec<Vec<u8>>> = (0..arity)
            .map(|x| (0..n).map(|a| e.table.image_of_single(x, a)).collect())
            .collect();
        let mut bad = None;
        let table = MapTable::from_fn(self.size(), arity, |theta| {
            (0..arity)
                .map(|x| {
                    let set: TypeSet = (1..n)
                        .filter(|&a| self.compatible(&images[x][a], theta))
                        .collect();
                    self.index_of(set).unwrap_or_else(|| {
                        bad.get_or_insert((theta.to_vec(), set));
                        0
                    }) as u8
                })
                .collect()
        })?;
        if let Some((theta, set)) = bad {
            return Err(DualityError::NotDualType {
                label: e.label.clone(),
                theta,
                set: self.base.set_label(set),
            });
        }
        for p in 0..e.table.len() {
            let phi = e.table.decode(p);
            let ephi = e.table.decode(e.table.apply_code(p));
            for q in 0..table.len() {
                let theta = table.decode(q);
                let etheta = table.decode(table.apply_code(q));
                if self.compatible(&ephi, &theta) != self.compatible(&phi, &etheta) {
                    return Err(DualityError::CompatibilityFailure {
                        label: e.label.clone(),
                        phi,
                        theta,
                    });
                }
            }
        }
        Ok(LocalMapping::new(format!("~{}", e.label), e.sites.clone(), table, e.rate)?)
    }
}

/// The dual model over the dual lattice, mapping for mapping.
pub fn dual_model(m: &GrowthModel) -> Result<(GrowthModel, DualLattice), DualityError> {
    let d = enumerate_dual_types_arc(m.lattice_arc())?;
    let maps = m
        .mappings()
        .iter()
        .map(|e| d.dual_mapping(e))
        .collect::<Result<Vec<_>, _>>()?;
    let dual = m.derived(format!("dual of {}", m.name), d.lattice_arc(), maps)?;
    Ok((dual, d))
}

/// Rate-weighted structural form of an event structure with a relabelling
/// applied; zero-rate mappings are dropped.
fn signature(maps: &[LocalMapping], sigma: Option<&[usize]>) -> Vec<(crate::eventmodel::SiteTemplate, MapTable, f64)> {
    let mut out: Vec<_> = maps
        .iter()
        .filter(|m| m.rate > 0.0)
        .map(|m| {
            let table = match sigma {
                Some(s) => m.table.relabelled(s),
                None => m.table.clone(),
            };
            let (sites, perm) = m.sites.canonical();
            (sites, table.permuted(&perm), m.rate)
        })
        .collect();
    out.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)).then(a.2.total_cmp(&b.2)));
    out
}

fn same_signature(
    a: &[(crate::eventmodel::SiteTemplate, MapTable, f64)],
    b: &[(crate::eventmodel::SiteTemplate, MapTable, f64)],
) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.0 == y.0 && x.1 == y.1 && (x.2 - y.2).abs() <= 1e-12 * x.2.abs().max(y.2.abs())
        })
}

/// Looks for a lattice isomorphism `σ: F̃ → F` under which the dual event
/// structure equals the original, rate for rate. Returns `σ` indexed by
/// dual type.
pub fn is_self_dual(m: &GrowthModel) -> Result<Option<Vec<usize>>, DualityError> {
    let (dual, d) = dual_model(m)?;
    let lat = m.lattice();
    let candidates = if d.size() != lat.size() {
        Vec::new()
    } else if lat.size() <= 12 {
        d.lattice().isomorphisms_to(lat)
    } else {
        // total orders only: the unique order isomorphism
        let chain = |l: &TypeLattice| (0..l.size()).all(|a| (0..l.size()).all(|b| l.comparable(a, b)));
        if chain(lat) && chain(d.lattice()) {
            let rank = |l: &TypeLattice, a: usize| l.down_set(a).len();
            let mut sigma = vec![0; d.size()];
            for i in 0..d.size() {
                sigma[i] = (0..lat.size())
                    .find(|&a| rank(lat, a) == rank(d.lattice(), i))
                    .unwrap();
            }
            vec![sigma]
        } else {
            Vec::new()
        }
    };
    let want = signature(m.mappings(), None);
    for sigma in candidates {
        if same_signature(&signature(dual.mappings(), Some(&sigma)), &want) {
            return Ok(Some(sigma));
        }
    }
    Ok(None)
}

/// Report of the double-dual verification.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleDualReport {
    /// `b ↦` index of `λ_b` in the double dual lattice.
    pub identification: Vec<usize>,
    pub symmetry_holds: bool,
    pub commutes: bool,
}

impl DoubleDualReport {
    pub fn holds(&self) -> bool {
        self.symmetry_holds && self.commutes
    }
}

/// Builds the double dual and checks `φ ~ θ ⟺ θ ~ Ξ_φ` and `ē(Ξ_φ) = Ξ_{e(φ)}`
/// exhaustively on every template.
pub fn double_dual_check(m: &GrowthModel) -> Result<DoubleDualReport, DualityError> {
    let lat = m.lattice();
    if !lat.is_multi_colour() {
        return Err(DualityError::NotMultiColour);
    }
    let (dual, d1) = dual_model(m)?;
    let (ddual, d2) = dual_model(&dual)?;
    let e_of = d1.identification().unwrap();

    // λ_b = {E : E ⊇ E_a for some a ∈ C(b)}
    let mut xi = vec![0usize; lat.size()];
    for b in lat.active() {
        let cb = lat.decomposition(b).unwrap();
        let lambda: TypeSet = (1..d1.size())
            .filter(|&i| {
                cb.members()
                    .iter()
                    .any(|a| d1.dual_type(e_of[a]).is_subset(d1.dual_type(i)))
            })
            .collect();
        xi[b] = d2.index_of(lambda).ok_or_else(|| {
            DualityError::IdentificationFailure(format!(
                "λ_{} is not a double dual type",
                lat.label(b)
            ))
        })?;
    }

    let mut symmetry_holds = true;
    let mut commutes = true;
    let n = lat.size();
    for ((e, de), dde) in m.mappings().iter().zip(dual.mappings()).zip(ddual.mappings()) {
        let arity = e.sites.len();
        for p in 0..e.table.len() {
            let phi = e.table.decode(p);
            let xi_phi: Vec<u8> = phi.iter().map(|&a| xi[a as usize] as u8).collect();
            for q in 0..de.table.len() {
                let theta = de.table.decode(q);
                if d1.compatible(&phi, &theta) != d2.compatible(&theta, &xi_phi) {
                    symmetry_holds = false;
                }
            }
            let lhs = dde.table.apply_code(encode(&xi_phi, d2.size()));
            let ephi = e.table.decode(e.table.apply_code(p));
            let rhs: Vec<u8> = ephi.iter().map(|&a| xi[a as usize] as u8).collect();
            if lhs != encode(&rhs, d2.size()) {
                commutes = false;
            }
        }
        debug_assert_eq!(e.table.len(), n.pow(arity as u32));
    }
    Ok(DoubleDualReport {
        identification: xi,
        symmetry_holds,
        commutes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventmodel::SiteTemplate;
    use crate::typelattice::named;

    fn off(v: &[i64]) -> SiteTemplate {
        SiteTemplate::Offsets(v.iter().map(|&x| vec![x]).collect())
    }

    #[test]
    fn chain_dual_types() {
        for n in 1..=4 {
            let d = enumerate_dual_types(&TypeLattice::chain(n)).unwrap();
            assert_eq!(d.size(), n + 1);
            for j in 1..=n {
                let ej: TypeSet = (j..=n).collect();
                assert!(d.index_of(ej).is_some());
            }
        }
    }

    #[test]
    fn bipartite_and_diamond_dual_types() {
        let lat = named::bipartite();
        let d = enumerate_dual_types(&lat).unwrap();
        // E_m, E_f and E_m ∪ E_f = E_{m∨f}, plus passive
        assert_eq!(d.size(), 4);
        let brute = (1u32..8)
            .map(|b| TypeSet::from_bits(b << 1))
            .filter(|&e| is_dual_type(&lat, e))
            .count();
        assert_eq!(brute, 3);
        let id = d.identification().unwrap();
        assert_eq!(d.dual_type(id[3]), d.dual_type(id[1]).union(d.dual_type(id[2])));
        assert!(d.lattice().is_multi_colour());

        let lat = named::diamond();
        let brute: Vec<TypeSet> = (0u32..16)
            .map(|b| TypeSet::from_bits(b << 1))
            .filter(|&e| !e.is_empty() && is_dual_type(&lat, e))
            .collect();
        let d = enumerate_dual_types(&lat).unwrap();
        assert!(d.identification().is_none());
        assert_eq!(d.size() - 1, brute.len());
        assert!(brute.iter().all(|&e| d.index_of(e).is_some()));
    }

    #[test]
    fn compatibility_examples() {
        let d = enumerate_dual_types(&TypeLattice::chain(2)).unwrap();
        let e1 = d.index_of(TypeSet::from_iter([1, 2])).unwrap() as u8;
        let e2 = d.index_of(TypeSet::from_iter([2])).unwrap() as u8;
        assert!(d.compatible(&[1], &[e1]));
        assert!(!d.compatible(&[1], &[e2]));
        assert!(!d.compatible(&[0, 0], &[e1, e2]));
        assert!(!d.compatible(&[2, 1], &[0, 0]));
    }

    #[test]
    fn onset_dualises_to_reverse_onset() {
        let lat = TypeLattice::chain(2);
        let d = enumerate_dual_types(&lat).unwrap();
        let onset = LocalMapping::from_fn("onset", off(&[0]), 3, 0.5, |p| {
            vec![if p[0] == 1 { 2 } else { p[0] }]
        })
        .unwrap();
        let dual = d.dual_mapping(&onset).unwrap();
        let e1 = d.index_of(TypeSet::from_iter([1, 2])).unwrap() as u8;
        let e2 = d.index_of(TypeSet::from_iter([2])).unwrap() as u8;
        assert_eq!(dual.apply(&[e2]).unwrap(), vec![e1]);
        assert_eq!(dual.apply(&[e1]).unwrap(), vec![e1]);
        assert_eq!(dual.rate, 0.5);
    }

    #[test]
    fn dual_types_closed_under_union_and_order_reversing() {
        for lat in [named::bipartite(), TypeLattice::chain(3), named::diamond_with_1_below_2()] {
            let lat = if lat.is_multi_colour() {
                lat
            } else {
                crate::colour::expand(&lat).unwrap().star().clone()
            };
            let d = enumerate_dual_types(&lat).unwrap();
            let id = d.identification().unwrap();
            for a in lat.primitives() {
                for b in lat.primitives() {
                    let (ea, eb) = (d.dual_type(id[a]), d.dual_type(id[b]));
                    assert_eq!(lat.lt(a, b), eb.is_subset(ea) && ea != eb);
                    let sq = lat
                        .square_join(lat.decomposition(a).unwrap(), lat.decomposition(b).unwrap())
                        .unwrap();
                    let formula: TypeSet = lat
                        .active()
                        .iter()
                        .filter(|&c| lat.dominates(lat.decomposition(c).unwrap(), sq))
                        .collect();
                    assert_eq!(formula, ea.union(eb));
                }
            }
            let prim: TypeSet = lat.primitives().iter().map(|a| id[a]).collect();
            assert_eq!(d.lattice().primitives(), prim);
        }
    }
}
