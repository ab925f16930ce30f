//! Multi-colour expansion of a type lattice and the lift of additive models.

use std::sync::Arc;

use thiserror::Error;

use crate::bitset::TypeSet;
use crate::eventmodel::{Counterexample, EventError, GrowthModel, LocalMapping, MapTable};
use crate::typelattice::{ColourCombination, LatticeError, TypeLattice};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ColourError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("mapping {label:?} is not additive: {witness}")]
    NotAdditive {
        label: String,
        witness: Counterexample,
    },
    #[error("lift of {label:?} does not commute with the projection at {phi:?}")]
    CommutationFailure { label: String, phi: Vec<u8> },
}

/// The expansion `F₊`: colour combinations of `F` ordered by domination,
/// with the projection `π(C) = ⋁C`.
#[derive(Debug, Clone)]
pub struct Expansion {
    base: Arc<TypeLattice>,
    star: Arc<TypeLattice>,
    combos: Vec<ColourCombination>,
    projection: Vec<usize>,
}

/// Builds `F₊`. Elements are ordered passive first, then by size and members,
/// so primitive singletons come right after `0`.
pub fn expand(lattice: &TypeLattice) -> Result<Expansion, ColourError> {
    expand_arc(Arc::new(lattice.clone()))
}

pub fn expand_arc(base: Arc<TypeLattice>) -> Result<Expansion, ColourError> {
    let prims: Vec<usize> = base.primitives().iter().collect();
    let mut sets = vec![TypeSet::EMPTY];
    antichains(&base, &prims, 0, TypeSet::EMPTY, &mut sets, 1 << 16)?;
    sets.sort_by_key(|s| (s.len(), s.iter().collect::<Vec<_>>()));
    if sets.len() > crate::typelattice::MAX_TYPES {
        return Err(LatticeError::TooLarge(sets.len()).into());
    }
    let combos: Vec<ColourCombination> = sets
        .iter()
        .map(|&s| ColourCombination::from_set_unchecked(s))
        .collect();
    let n = combos.len();
    let index = |s: TypeSet| sets.iter().position(|&t| t == s).unwrap();
    let order: Vec<Vec<bool>> = combos
        .iter()
        .map(|&c| combos.iter().map(|&d| base.combination_leq(c, d)).collect())
        .collect();
    let join: Vec<Vec<usize>> = combos
        .iter()
        .map(|&c| {
            combos
                .iter()
                .map(|&d| index(base.colour_join(c, d).members()))
                .collect()
        })
        .collect();
    let labels = sets
        .iter()
        .map(|&s| match s.len() {
            0 => base.label(0).to_string(),
            1 => base.label(s.first().unwrap()).to_string(),
            _ => s.iter().map(|a| base.label(a)).collect::<Vec<_>>().join("+"),
        })
        .collect();
    let star = TypeLattice::new(labels, &order, &join)?;
    let projection = (0..n).map(|i| base.join_all(sets[i].iter())).collect();
    Ok(Expansion {
        base,
        star: Arc::new(star),
        combos,
        projection,
    })
}

fn antichains(
    lat: &TypeLattice,
    prims: &[usize],
    from: usize,
    cur: TypeSet,
    out: &mut Vec<TypeSet>,
    cap: usize,
) -> Result<(), LatticeError> {
    for (k, &a) in prims.iter().enumerate().skip(from) {
        if cur.iter().all(|b| lat.incomparable(a, b)) {
            let next = cur.with(a);
            out.push(next);
            if out.len() > cap {
                return Err(LatticeError::TooLarge(out.len()));
            }
            antichains(lat, prims, k + 1, next, out, cap)?;
        }
    }
    Ok(())
}

impl Expansion {
    pub fn base(&self) -> &TypeLattice {
        &self.base
    }

    pub fn star(&self) -> &TypeLattice {
        &self.star
    }

    pub fn star_arc(&self) -> Arc<TypeLattice> {
        Arc::clone(&self.star)
    }

    pub fn size(&self) -> usize {
        self.combos.len()
    }

    /// The colour combination behind element `i` of `F₊`.
    pub fn combination(&self, i: usize) -> ColourCombination {
        self.combos[i]
    }

    pub fn index_of(&self, c: ColourCombination) -> Option<usize> {
        self.combos.iter().position(|&d| d == c)
    }

    /// The element `{a}` of `F₊` for a primitive `a` of `F`.
    pub fn singleton(&self, a: usize) -> Option<usize> {
        self.combos.iter().position(|c| c.members() == TypeSet::singleton(a))
    }

    pub fn project(&self, i: usize) -> usize {
        self.projection[i]
    }

    pub fn projection(&self) -> &[usize] {
        &self.projection
    }

    pub fn project_configuration(&self, xi: &[u8]) -> Vec<u8> {
        xi.iter().map(|&v| self.projection[v as usize] as u8).collect()
    }

    /// `π⁻¹(b)` as indices into `F₊`.
    pub fn preimage(&self, b: usize) -> Vec<usize> {
        (0..self.size()).filter(|&i| self.projection[i] == b).collect()
    }

    /// `⋁π⁻¹(b)` in `F₊`.
    pub fn preimage_join(&self, b: usize) -> usize {
        self.star.join_all(self.preimage(b))
    }

    /// Lifts an additive mapping on `F` to one on `F₊`, checking additivity
    /// of the result and `π∘e₊ = e∘π` exhaustively.
    pub fn lift_mapping(&self, e: &LocalMapping) -> Result<LocalMapping, ColourError> {
        e.is_additive(&self.base)
            .map_err(|witness| ColourError::NotAdditive {
                label: e.label.clone(),
                witness,
            })?;
        let arity = e.sites.len();
        let star = &self.star;
        let join_cfg = |p: &[u8], q: &[u8]| -> Vec<u8> {
            p.iter()
                .zip(q)
                .map(|(&a, &b)| star.join(a as usize, b as usize) as u8)
                .collect()
        };
        let lift_cfg = |psi: Vec<u8>| -> Vec<u8> {
            psi.iter().map(|&b| self.preimage_join(b as usize) as u8).collect()
        };

        // single[x][i] = e₊(δ_x(i)) for every element i of F₊
        let mut single = vec![vec![vec![0u8; arity]; self.size()]; arity];
        for x in 0..arity {
            for layer in self.base.layer_partition(self.base.primitives()) {
                for a in layer {
                    let mut img = lift_cfg(e.table.image_of_single(x, a));
                    for lower in self.base.primitives().iter().filter(|&c| self.base.lt(c, a)) {
                        let li = self.singleton(lower).unwrap();
                        img = join_cfg(&img, &single[x][li]);
                    }
                    single[x][self.singleton(a).unwrap()] = img;
                }
            }
            for i in 0..self.size() {
                let members = self.combos[i].members();
                if members.len() > 1 {
                    let mut img = vec![0u8; arity];
                    for a in members {
                        img = join_cfg(&img, &single[x][self.singleton(a).unwrap()]);
                    }
                    single[x][i] = img;
                }
            }
        }

        let table = MapTable::from_fn(self.size(), arity, |phi| {
            let mut out = vec![0u8; arity];
            for (x, &v) in phi.iter().enumerate() {
                out = join_cfg(&out, &single[x][v as usize]);
            }
            out
        })?;
        for code in 0..table.len() {
            let xi = table.decode(code);
            let lhs = self.project_configuration(&table.decode(table.apply_code(code)));
            let rhs = e.table.apply(&self.project_configuration(&xi))?;
            if lhs != rhs {
                return Err(ColourError::CommutationFailure {
                    label: e.label.clone(),
                    phi: xi,
                });
            }
        }
        table
            .is_additive(star)
            .map_err(|witness| ColourError::NotAdditive {
                label: e.label.clone(),
                witness,
            })?;
        Ok(LocalMapping::new(e.label.clone(), e.sites.clone(), table, e.rate)?)
    }
}

/// The lifted model over `F₊`, mapping for mapping, with its expansion.
pub fn lift_model(m: &GrowthModel) -> Result<(GrowthModel, Expansion), ColourError> {
    let x = expand_arc(m.lattice_arc())?;
    let maps = m
        .mappings()
        .iter()
        .map(|e| x.lift_mapping(e))
        .collect::<Result<Vec<_>, _>>()?;
    let lifted = m.derived(format!("{} (lift)", m.name), x.star_arc(), maps)?;
    Ok((lifted, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventmodel::SiteTemplate;
    use crate::typelattice::named;

    #[test]
    fn diamond_expansions() {
        let x = expand(&named::diamond()).unwrap();
        assert_eq!(x.size(), 8);
        assert!(x.star().is_multi_colour());
        assert_eq!(x.preimage(4), vec![4, 5, 6, 7]);
        let y = expand(&named::diamond_with_1_below_2()).unwrap();
        assert_eq!(y.size(), 6);
        assert_eq!(y.preimage(4).len(), 2);
    }

    #[test]
    fn projection_preserves_order_and_join() {
        for lat in [named::diamond(), named::diamond_with_1_below_2(), named::bipartite()] {
            let x = expand(&lat).unwrap();
            let s = x.star();
            for i in 0..x.size() {
                for j in 0..x.size() {
                    assert_eq!(x.project(s.join(i, j)), lat.join(x.project(i), x.project(j)));
                    if s.leq(i, j) {
                        assert!(lat.leq(x.project(i), x.project(j)));
                    }
                }
            }
            let mut image: Vec<usize> = x.projection().to_vec();
            image.sort_unstable();
            image.dedup();
            assert_eq!(image.len(), lat.size());
            for a in lat.primitives() {
                assert_eq!(x.preimage(a), vec![x.singleton(a).unwrap()]);
            }
        }
    }

    #[test]
    fn multi_colour_input_is_reproduced() {
        let lat = named::bipartite();
        let x = expand(&lat).unwrap();
        assert_eq!(x.size(), lat.size());
        let iso = x.projection().to_vec();
        for i in 0..x.size() {
            for j in 0..x.size() {
                assert_eq!(x.star().leq(i, j), lat.leq(iso[i], iso[j]));
            }
        }
    }

    #[test]
    fn expansion_is_idempotent_up_to_isomorphism() {
        let x = expand(&named::diamond()).unwrap();
        let xx = expand(x.star()).unwrap();
        assert!(!xx.star().isomorphisms_to(x.star()).is_empty());
    }

    #[test]
    fn three_type_birth_distinguishes_joins() {
        let lat = named::diamond();
        let x = expand(&lat).unwrap();
        let birth2 = LocalMapping::from_fn(
            "birth 2",
            SiteTemplate::Offsets(vec![vec![0], vec![1]]),
            5,
            1.0,
            |p| vec![p[0], if p[0] == 0 { p[1] } else { lat.join(p[1] as usize, 2) as u8 }],
        )
        .unwrap();
        let lifted = x.lift_mapping(&birth2).unwrap();
        let two = x.singleton(2).unwrap() as u8;
        let three = x.singleton(3).unwrap() as u8;
        let out = lifted.apply(&[two, three]).unwrap();
        let c23 = x
            .index_of(ColourCombination::from_set_unchecked(TypeSet::from_iter([2, 3])))
            .unwrap();
        assert_eq!(out, vec![two, c23 as u8]);
        assert_eq!(x.project(c23), 4);
    }

    #[test]
    fn identity_lifts_to_identity() {
        let x = expand(&named::diamond_with_1_below_2()).unwrap();
        let id = LocalMapping::new(
            "id",
            SiteTemplate::Offsets(vec![vec![0]]),
            MapTable::identity(5, 1).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(x.lift_mapping(&id).unwrap().table.is_identity());
    }

    #[test]
    fn non_additive_mapping_refused() {
        let x = expand(&TypeLattice::chain(2)).unwrap();
        let e = LocalMapping::from_fn("recover 2", SiteTemplate::Offsets(vec![vec![0]]), 3, 1.0, |p| {
            vec![if p[0] == 2 { 0 } else { p[0] }]
        })
        .unwrap();
        assert!(matches!(x.lift_mapping(&e), Err(ColourError::NotAdditive { .. })));
    }
}
