//! Production relation, wax/wane classification, positive correlations and
//! the preconditions for complete convergence.

use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::eventmodel::{GrowthModel, LocalMapping, MapTable, SiteTemplate};
use crate::typelattice::TypeLattice;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcError {
    #[error("lattice is not multi-colour")]
    NotMultiColour,
}

/// An organism: a primitive type at a template position.
pub type Organism = (usize, usize);

/// `(x,a)` produces `(y,b)` under mapping `mapping`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductionRecord {
    pub mapping: usize,
    pub source: Organism,
    pub product: Organism,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Waxes,
    Wanes,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Persistence,
    Movement,
    Birth,
    Death,
    Promotion,
    Demotion,
    DeathWithDispersal,
    NeighbourAssistedSurvival,
    Transmutation,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrganismFate {
    pub organism: Organism,
    pub waxes: bool,
    pub wanes: bool,
    /// `Waxes` whenever the organism waxes, persistence included.
    pub verdict: Verdict,
    pub category: Category,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingClass {
    Productive,
    Destructive,
    Mixed,
}

fn config_leq(lat: &TypeLattice, p: &[u8], q: &[u8]) -> bool {
    p.iter().zip(q).all(|(&a, &b)| lat.leq(a as usize, b as usize))
}

/// All `(y,b)` with `b ∈ C(e(δ_x(a))(y))`.
pub fn produces(
    lat: &TypeLattice,
    table: &MapTable,
    x: usize,
    a: usize,
) -> Result<BTreeSet<Organism>, PcError> {
    if !lat.is_multi_colour() {
        return Err(PcError::NotMultiColour);
    }
    let img = table.image_of_single(x, a);
    Ok(img
        .iter()
        .enumerate()
        .flat_map(|(y, &b)| {
            lat.decomposition(b as usize)
                .map(|c| c.members().iter().map(move |b| (y, b)).collect::<Vec<_>>())
                .unwrap_or_default()
        })
        .collect())
}

/// Every production record of every mapping with positive rate.
pub fn production_records(m: &GrowthModel) -> Result<Vec<ProductionRecord>, PcError> {
    let lat = m.lattice();
    let mut out = Vec::new();
    for (i, e) in m.mappings().iter().enumerate().filter(|(_, e)| e.rate > 0.0) {
        for x in 0..e.sites.len() {
            for a in lat.primitives() {
                for product in produces(lat, &e.table, x, a)? {
                    out.push(ProductionRecord {
                        mapping: i,
                        source: (x, a),
                        product,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Wax/wane verdict and a descriptive category for `(x,a)` under `table`.
pub fn classify_organism(
    lat: &TypeLattice,
    table: &MapTable,
    x: usize,
    a: usize,
) -> Result<OrganismFate, PcError> {
    let prod = produces(lat, table, x, a)?;
    let single = table.single(x, a);
    let img = table.image_of_single(x, a);
    let waxes = config_leq(lat, &single, &img);
    let wanes = config_leq(lat, &img, &single);
    let verdict = if waxes {
        Verdict::Waxes
    } else if wanes {
        Verdict::Wanes
    } else {
        Verdict::Neither
    };

    let here: Vec<usize> = prod.iter().filter(|p| p.0 == x).map(|p| p.1).collect();
    let away: Vec<Organism> = prod.iter().filter(|p| p.0 != x).copied().collect();
    let category = match (here.as_slice(), away.is_empty()) {
        ([], true) => Category::Death,
        ([b], true) if *b == a => Category::Persistence,
        ([b], true) if lat.lt(a, *b) => Category::Promotion,
        ([b], true) if lat.lt(*b, a) => Category::Demotion,
        ([_], true) => Category::Transmutation,
        ([], false) if away.len() == 1 && away[0].1 == a => Category::Movement,
        ([], false) => Category::DeathWithDispersal,
        ([b], false) if *b == a => {
            let rescued = away.iter().all(|&(y, c)| {
                let alone = table.image_of_single(y, c);
                !lat.leq(c, alone[y] as usize)
            });
            if rescued {
                Category::NeighbourAssistedSurvival
            } else {
                Category::Birth
            }
        }
        _ => Category::Other,
    };
    Ok(OrganismFate {
        organism: (x, a),
        waxes,
        wanes,
        verdict,
        category,
    })
}

pub fn classify_mapping(lat: &TypeLattice, e: &LocalMapping) -> Result<MappingClass, PcError> {
    let mut all_wax = true;
    let mut all_wane = true;
    for x in 0..e.sites.len() {
        for a in lat.primitives() {
            let f = classify_organism(lat, &e.table, x, a)?;
            all_wax &= f.waxes;
            all_wane &= f.wanes;
        }
    }
    Ok(if all_wax {
        MappingClass::Productive
    } else if all_wane {
        MappingClass::Destructive
    } else {
        MappingClass::Mixed
    })
}

/// Why a model fails the PC criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcFailure {
    /// An organism that neither waxes nor wanes.
    Unclassified { mapping: usize, organism: Organism },
    /// A waxing organism that neither compensates for a waning one nor stays
    /// within their joint configuration.
    Uncompensated {
        mapping: usize,
        waxing: Organism,
        waning: Organism,
    },
}

/// The PC criterion, per mapping with positive rate: every organism waxes or
/// wanes, and for each strictly waxing `w` and strictly waning `(y,b)` that can
/// occur together, either `w` produces `(y,b)` or `e(δ_w) ≤ δ_w ∨ δ_(y,b)`.
///
/// Waxing and waning are read in the order: `e(δ_x(a)) ≥ δ_x(a)` and
/// `e(δ_x(a)) ≤ δ_x(a)` respectively, so promotion waxes and demotion wanes.
pub fn pc_witness(m: &GrowthModel) -> Result<Option<PcFailure>, PcError> {
    let lat = m.lattice();
    if !lat.is_multi_colour() {
        return Err(PcError::NotMultiColour);
    }
    for (i, e) in m.mappings().iter().enumerate().filter(|(_, e)| e.rate > 0.0) {
        let mut waxing = Vec::new();
        let mut waning = Vec::new();
        for x in 0..e.sites.len() {
            for a in lat.primitives() {
                let f = classify_organism(lat, &e.table, x, a)?;
                match (f.waxes, f.wanes) {
                    (false, false) => {
                        return Ok(Some(PcFailure::Unclassified {
                            mapping: i,
                            organism: (x, a),
                        }))
                    }
                    (true, false) => waxing.push((x, a)),
                    (false, true) => waning.push((x, a)),
                    (true, true) => {}
                }
            }
        }
        for &(x, a) in &waxing {
            let img = e.table.image_of_single(x, a);
            for &(y, b) in &waning {
                if x == y && lat.comparable(a, b) {
                    continue;
                }
                if lat.leq(b, img[y] as usize) {
                    continue;
                }
                let mut joint = e.table.single(x, a);
                joint[y] = lat.join(joint[y] as usize, b) as u8;
                if config_leq(lat, &img, &joint) {
                    continue;
                }
                return Ok(Some(PcFailure::Uncompensated {
                    mapping: i,
                    waxing: (x, a),
                    waning: (y, b),
                }));
            }
        }
    }
    Ok(None)
}

pub fn has_pc(m: &GrowthModel) -> Result<bool, PcError> {
    Ok(pc_witness(m)?.is_none())
}

/// Brute-force criterion: every mapping with positive rate sends each local
/// configuration to a comparable one.
pub fn comparable_transitions(m: &GrowthModel) -> bool {
    let lat = m.lattice();
    m.mappings().iter().filter(|e| e.rate > 0.0).all(|e| {
        (0..e.table.len()).all(|p| {
            let phi = e.table.decode(p);
            let out = e.table.decode(e.table.apply_code(p));
            config_leq(lat, &phi, &out) || config_leq(lat, &out, &phi)
        })
    })
}

/// Every mapping with positive rate is productive or destructive.
pub fn is_simple(m: &GrowthModel) -> Result<bool, PcError> {
    for e in m.mappings().iter().filter(|e| e.rate > 0.0) {
        if classify_mapping(m.lattice(), e)? == MappingClass::Mixed {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Pass,
    Fail,
    Inconclusive,
}

impl Check {
    pub fn passed(self) -> bool {
        self == Check::Pass
    }

    fn from_bool(b: bool) -> Self {
        if b {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcReport {
    pub irreducible: Check,
    pub translation_invariant: Check,
    pub symmetric: Check,
    pub simple: Check,
}

impl CcReport {
    pub fn all_pass(&self) -> bool {
        self.failures().is_empty()
    }

    /// Names of the conditions that did not pass.
    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("irreducible", self.irreducible),
            ("translation invariant", self.translation_invariant),
            ("symmetric", self.symmetric),
            ("simple", self.simple),
        ]
        .into_iter()
        .filter(|(_, c)| !c.passed())
        .map(|(n, _)| n)
        .collect()
    }
}

/// Irreducibility, translation invariance, reflection symmetry and simplicity.
pub fn check_cc_conditions(m: &GrowthModel) -> Result<CcReport, PcError> {
    let simple = Check::from_bool(is_simple(m)?);
    if !m.is_translation_invariant() || m.mappings().is_empty() {
        return Ok(CcReport {
            irreducible: Check::Inconclusive,
            translation_invariant: Check::from_bool(m.is_translation_invariant() && !m.mappings().is_empty()),
            symmetric: Check::Fail,
            simple,
        });
    }
    Ok(CcReport {
        irreducible: irreducibility(m)?,
        translation_invariant: Check::Pass,
        symmetric: Check::from_bool(is_symmetric(m)),
        simple,
    })
}

fn reflect(sites: &SiteTemplate, k: usize) -> SiteTemplate {
    match sites {
        SiteTemplate::Offsets(o) => SiteTemplate::Offsets(
            o.iter()
                .map(|v| {
                    let mut v = v.clone();
                    v[k] = -v[k];
                    v
                })
                .collect(),
        ),
        SiteTemplate::Sites(s) => SiteTemplate::Sites(s.clone()),
    }
}

/// The rate-weighted mapping set is closed under each coordinate reflection.
fn is_symmetric(m: &GrowthModel) -> bool {
    let live: Vec<&LocalMapping> = m.mappings().iter().filter(|e| e.rate > 0.0).collect();
    let keys: Vec<_> = live.iter().map(|e| (e.canonical(), e.rate.to_bits())).collect();
    let d = m.dimension().unwrap_or(1);
    (0..d).all(|k| {
        live.iter().all(|e| {
            let mut r = (*e).clone();
            r.sites = reflect(&e.sites, k);
            keys.contains(&(r.canonical(), e.rate.to_bits()))
        })
    })
}

/// Strong connectivity of the production graph on primitive types, plus
/// reachability of each unit shift in both directions by composing
/// productions. Shifts that no production moves toward fail outright; shifts
/// not found within the search depth are inconclusive.
fn irreducibility(m: &GrowthModel) -> Result<Check, PcError> {
    let lat = m.lattice();
    let prims: Vec<usize> = lat.primitives().iter().collect();
    let d = m.dimension().unwrap_or(1);
    let mut edges: Vec<(usize, usize, Vec<i64>)> = Vec::new();
    for r in production_records(m)? {
        let keys = m.mappings()[r.mapping].sites.keys();
        let shift: Vec<i64> = keys[r.product.0]
            .iter()
            .zip(&keys[r.source.0])
            .map(|(p, s)| p - s)
            .collect();
        let edge = (r.source.1, r.product.1, shift);
        if !edges.contains(&edge) {
            edges.push(edge);
        }
    }

    for &a in &prims {
        let mut seen: HashSet<usize> = HashSet::from([a]);
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            for (s, t, _) in &edges {
                if *s == u && seen.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        if prims.iter().any(|b| !seen.contains(b)) {
            return Ok(Check::Fail);
        }
    }
    for k in 0..d {
        for sign in [1i64, -1] {
            if !edges.iter().any(|(_, _, z)| sign * z[k] > 0) {
                return Ok(Check::Fail);
            }
        }
    }

    let range = m.range() as usize;
    let depth = lat.size() * (2 * range + 1).pow(d as u32);
    let a0 = prims[0];
    let mut targets: Vec<Vec<i64>> = Vec::new();
    for k in 0..d {
        for sign in [1i64, -1] {
            let mut z = vec![0i64; d];
            z[k] = sign;
            targets.push(z);
        }
    }
    let start = (a0, vec![0i64; d]);
    let mut seen: HashSet<(usize, Vec<i64>)> = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (u, z) in &frontier {
            for (s, t, dz) in &edges {
                if s == u {
                    let w: Vec<i64> = z.iter().zip(dz).map(|(a, b)| a + b).collect();
                    let node = (*t, w);
                    if seen.insert(node.clone()) {
                        next.push(node);
                    }
                }
            }
        }
        if targets.iter().all(|z| seen.contains(&(a0, z.clone()))) {
            return Ok(Check::Pass);
        }
        if next.is_empty() {
            return Ok(Check::Fail);
        }
        frontier = next;
    }
    Ok(Check::Inconclusive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn off(v: &[i64]) -> SiteTemplate {
        SiteTemplate::Offsets(v.iter().map(|&x| vec![x]).collect())
    }

    fn two_state() -> Arc<TypeLattice> {
        Arc::new(TypeLattice::chain(1))
    }

    fn transmission(dir: i64, rate: f64) -> LocalMapping {
        LocalMapping::from_fn(format!("infect {dir}"), off(&[0, dir]), 2, rate, |p| {
            vec![p[0], p[0].max(p[1])]
        })
        .unwrap()
    }

    fn death() -> LocalMapping {
        LocalMapping::from_fn("death", off(&[0]), 2, 1.0, |_| vec![0]).unwrap()
    }

    #[test]
    fn productions() {
        let lat = TypeLattice::chain(1);
        let t = transmission(1, 1.0);
        assert_eq!(
            produces(&lat, &t.table, 0, 1).unwrap(),
            BTreeSet::from([(0, 1), (1, 1)])
        );
        assert!(produces(&lat, &death().table, 0, 1).unwrap().is_empty());
        let chain2 = TypeLattice::chain(2);
        let onset = MapTable::from_fn(3, 1, |p| vec![if p[0] == 1 { 2 } else { p[0] }]).unwrap();
        assert_eq!(produces(&chain2, &onset, 0, 1).unwrap(), BTreeSet::from([(0, 2)]));
        let f = classify_organism(&chain2, &onset, 0, 1).unwrap();
        assert_eq!(f.category, Category::Promotion);
        assert_eq!(f.verdict, Verdict::Waxes);
    }

    #[test]
    fn non_multi_colour_rejected() {
        let lat = crate::typelattice::named::diamond();
        let id = MapTable::identity(5, 1).unwrap();
        assert_eq!(produces(&lat, &id, 0, 1), Err(PcError::NotMultiColour));
    }

    #[test]
    fn organism_categories() {
        let lat = TypeLattice::chain(1);
        let id = MapTable::identity(2, 2).unwrap();
        let f = classify_organism(&lat, &id, 0, 1).unwrap();
        assert_eq!((f.category, f.verdict), (Category::Persistence, Verdict::Waxes));
        assert!(f.wanes);

        // x dies and occupies both targets
        let dandelion = MapTable::from_fn(2, 3, |p| {
            if p[0] == 1 {
                vec![0, 1, 1]
            } else {
                p.to_vec()
            }
        })
        .unwrap();
        let f = classify_organism(&lat, &dandelion, 0, 1).unwrap();
        assert_eq!((f.category, f.verdict), (Category::DeathWithDispersal, Verdict::Neither));
        assert_eq!(
            classify_mapping(&lat, &LocalMapping::new("d", SiteTemplate::Sites(vec![0, 1, 2]), dandelion, 1.0).unwrap())
                .unwrap(),
            MappingClass::Mixed
        );

        let mover = MapTable::from_fn(2, 2, |p| if p[0] == 1 { vec![0, 1] } else { p.to_vec() }).unwrap();
        assert_eq!(classify_organism(&lat, &mover, 0, 1).unwrap().category, Category::Movement);

        let helper = MapTable::from_fn(2, 2, |p| vec![p[1], p[1]]).unwrap();
        assert_eq!(
            classify_organism(&lat, &helper, 1, 1).unwrap().category,
            Category::NeighbourAssistedSurvival
        );
        assert_eq!(classify_organism(&lat, &helper, 0, 1).unwrap().category, Category::Death);
        assert_eq!(
            classify_organism(&lat, &transmission(1, 1.0).table, 0, 1).unwrap().category,
            Category::Birth
        );
    }

    #[test]
    fn contact_is_simple_with_pc_and_cc_conditions() {
        let m = GrowthModel::new(
            "contact",
            two_state(),
            vec![death(), transmission(1, 2.0), transmission(-1, 2.0)],
        )
        .unwrap();
        assert_eq!(classify_mapping(m.lattice(), &m.mappings()[1]).unwrap(), MappingClass::Productive);
        assert_eq!(classify_mapping(m.lattice(), &m.mappings()[0]).unwrap(), MappingClass::Destructive);
        assert!(is_simple(&m).unwrap());
        assert!(has_pc(&m).unwrap());
        assert!(comparable_transitions(&m));
        let r = check_cc_conditions(&m).unwrap();
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn one_directional_transmission_is_not_symmetric() {
        let m = GrowthModel::new("right", two_state(), vec![death(), transmission(1, 2.0)]).unwrap();
        let r = check_cc_conditions(&m).unwrap();
        assert_eq!(r.symmetric, Check::Fail);
        assert_eq!(r.irreducible, Check::Fail);
        assert_eq!(r.failures(), vec!["irreducible", "symmetric"]);
    }

    #[test]
    fn uncompensated_death_breaks_pc() {
        // x infects y while y dies: (y,1) wanes, (x,1) does not produce it
        let weird = LocalMapping::from_fn("odd", off(&[0, 1, 2]), 2, 1.0, |p| {
            vec![p[0], p[1], p[2].max(p[0])]
        })
        .unwrap();
        let kill = LocalMapping::from_fn("kill y", off(&[0, 1]), 2, 1.0, |p| {
            vec![p[0].max(p[1]), 0]
        })
        .unwrap();
        let m = GrowthModel::new("m", two_state(), vec![weird, kill]).unwrap();
        // "kill y" moves y's organism to x: neither waxing nor waning
        assert!(matches!(pc_witness(&m).unwrap(), Some(PcFailure::Unclassified { .. })));
        assert!(!comparable_transitions(&m));
    }
}
