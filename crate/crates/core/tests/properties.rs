use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use growthdual::bitset::TypeSet;
use growthdual::colour::{expand, lift_model};
use growthdual::duality::{dominance_set, dual_model, enumerate_dual_types};
use growthdual::engine::{
    dual_system, duality_holds, evolve_forward, sample_event_map, EventStream, System,
};
use growthdual::eventmodel::{
    independent_construction, rates_from_events, Bounds, GeometrySpec, GrowthModel, LocalMapping,
    MapTable, SiteTemplate, Transition, TransitionRateSet,
};
use growthdual::modelfile::ModelFile;
use growthdual::pcclass::{has_pc, is_simple};
use growthdual::typelattice::TypeLattice;

/// Every finite lattice is a union-closed family of sets; build one from a
/// few random generators over a `k`-element ground set.
fn lattice(k: u32, gens: &[u32]) -> TypeLattice {
    let mut family: BTreeSet<u32> = BTreeSet::from([0]);
    for &g in gens {
        let g = g % (1 << k);
        let add: Vec<u32> = family.iter().map(|&s| s | g).collect();
        family.extend(add);
    }
    let mut elems: Vec<u32> = family.into_iter().collect();
    elems.sort_by_key(|&s| (s.count_ones(), s));
    let labels = elems.iter().map(|s| format!("s{s}")).collect();
    let order: Vec<Vec<bool>> =
        elems.iter().map(|&a| elems.iter().map(|&b| a & b == a).collect()).collect();
    TypeLattice::from_order(labels, &order).expect("union-closed families are lattices")
}

fn lattices(max_k: u32) -> impl Strategy<Value = TypeLattice> {
    (1..=max_k, prop::collection::vec(1u32..64, 1..=5)).prop_map(|(k, g)| lattice(k, &g))
}

fn multi_colour_lattices(max_k: u32) -> impl Strategy<Value = TypeLattice> {
    lattices(max_k).prop_filter("multi-colour", |l| l.is_multi_colour())
}

fn join(lat: &TypeLattice, p: &[u8], q: &[u8]) -> Vec<u8> {
    p.iter().zip(q).map(|(&a, &b)| lat.join(a as usize, b as usize) as u8).collect()
}

fn leq(lat: &TypeLattice, p: &[u8], q: &[u8]) -> bool {
    p.iter().zip(q).all(|(&a, &b)| lat.leq(a as usize, b as usize))
}

/// `e(φ) = ∨_x ∨_{a primitive ≤ φ(x)} img[x][a]` for random single-organism
/// images. Additive on multi-colour lattices when each image dominates the
/// images of lower primitives, which is how they are drawn.
fn additive_table(rng: &mut ChaCha8Rng, lat: &TypeLattice, arity: usize) -> MapTable {
    let n = lat.size();
    let mut prims: Vec<usize> = lat.primitives().iter().collect();
    prims.sort_by_key(|&a| lat.down_set(a).len());
    let mut img = vec![vec![vec![0u8; arity]; n]; arity];
    for x in 0..arity {
        for &a in &prims {
            let mut v: Vec<u8> = (0..arity).map(|_| rng.gen_range(0..n) as u8).collect();
            for &b in &prims {
                if lat.lt(b, a) {
                    v = join(lat, &v, &img[x][b]);
                }
            }
            img[x][a] = v;
        }
    }
    MapTable::from_fn(n, arity, |phi| {
        let mut out = vec![0u8; arity];
        for (x, &b) in phi.iter().enumerate() {
            for &a in &prims {
                if lat.leq(a, b as usize) {
                    out = join(lat, &out, &img[x][a]);
                }
            }
        }
        out
    })
    .unwrap()
}

fn random_table(rng: &mut ChaCha8Rng, n: usize, arity: usize) -> MapTable {
    let len = n.pow(arity as u32);
    let codes = (0..len).map(|c| if c == 0 { 0 } else { rng.gen_range(0..len) as u32 }).collect();
    MapTable::from_codes(n, arity, codes).unwrap()
}

const TEMPLATES: [&[i64]; 4] = [&[0], &[0, 1], &[0, -1], &[0, 1, -1]];

fn random_model(lat: TypeLattice, seed: u64, additive: bool) -> Option<GrowthModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = Arc::new(lat);
    let k = rng.gen_range(1..=3);
    let maps = (0..k)
        .map(|i| {
            let offs = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            let table = if additive {
                additive_table(&mut rng, &lat, offs.len())
            } else {
                random_table(&mut rng, lat.size(), offs.len())
            };
            let sites = SiteTemplate::Offsets(offs.iter().map(|&o| vec![o]).collect());
            LocalMapping::new(format!("e{i}"), sites, table, rng.gen_range(0.5..2.0)).unwrap()
        })
        .collect();
    GrowthModel::new("random", lat, maps).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lattice_structure(lat in lattices(4), e in any::<u32>()) {
        let n = lat.size();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    prop_assert_eq!(lat.join(lat.join(a, b), c), lat.join(a, lat.join(b, c)));
                    if lat.is_multi_colour() && lat.is_primitive(a) && lat.leq(a, lat.join(b, c)) {
                        prop_assert!(lat.leq(a, b) || lat.leq(a, c));
                    }
                }
            }
        }
        for b in 1..n {
            prop_assert!(!lat.decompositions(b).is_empty());
        }
        let e = TypeSet::from_bits(e) .intersection(TypeSet::full(n));
        let layers = lat.layer_partition(e);
        let mut union = TypeSet::EMPTY;
        for l in &layers {
            prop_assert!(!l.is_empty());
            prop_assert!(union.is_disjoint(*l));
            union = union.union(*l);
        }
        prop_assert_eq!(union, e);
    }

    #[test]
    fn dual_types_union_closed_and_order_reversing(lat in lattices(3)) {
        let d = enumerate_dual_types(&lat).unwrap();
        let types: BTreeSet<u32> = d.types().iter().map(|t| t.bits()).collect();
        for a in &types {
            for b in &types {
                prop_assert!(types.contains(&(a | b)));
            }
        }
        if lat.is_multi_colour() {
            for a in lat.primitives() {
                for b in lat.primitives() {
                    let (ea, eb) = (dominance_set(&lat, a), dominance_set(&lat, b));
                    prop_assert_eq!(lat.lt(a, b), eb.is_subset(ea) && ea != eb);
                }
            }
        }
    }

    #[test]
    fn expansion_is_idempotent(lat in lattices(3)) {
        let x = expand(&lat).unwrap();
        prop_assert!(x.star().is_multi_colour());
        prop_assert_eq!(expand(x.star()).unwrap().size(), x.size());
    }

    #[test]
    fn additivity_implies_attractiveness(lat in lattices(3), seed in any::<u64>(), arity in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = if lat.is_multi_colour() && rng.gen_bool(0.5) {
            additive_table(&mut rng, &lat, arity)
        } else {
            random_table(&mut rng, lat.size(), arity)
        };
        if t.is_additive(&lat).is_ok() {
            prop_assert!(t.is_attractive(&lat).is_ok());
        }
    }

    #[test]
    fn additive_maps_act_site_by_site(lat in multi_colour_lattices(3), seed in any::<u64>(), arity in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = additive_table(&mut rng, &lat, arity);
        prop_assert!(t.is_additive(&lat).is_ok());
        for code in 0..t.len() {
            let phi = t.decode(code);
            let mut want = vec![0u8; arity];
            for x in 0..arity {
                let mut only = vec![0u8; arity];
                only[x] = phi[x];
                want = join(&lat, &want, &t.apply(&only).unwrap());
            }
            prop_assert_eq!(t.apply(&phi).unwrap(), want);
        }
    }

    #[test]
    fn dual_mappings_are_dual(lat in multi_colour_lattices(3), seed in any::<u64>()) {
        let Some(m) = random_model(lat, seed, true) else { return Ok(()) };
        let (d, dl) = dual_model(&m).unwrap();
        prop_assert!(d.is_additive());
        for (e, f) in m.mappings().iter().zip(d.mappings()) {
            for phi in 0..e.table.len() {
                let p = e.table.decode(phi);
                let ep = e.apply(&p).unwrap();
                for theta in 0..f.table.len() {
                    let q = f.table.decode(theta);
                    prop_assert_eq!(dl.compatible(&ep, &q), dl.compatible(&p, &f.apply(&q).unwrap()));
                }
            }
        }
    }

    #[test]
    fn simple_models_have_pc_and_simple_duals(lat in multi_colour_lattices(3), seed in any::<u64>()) {
        let Some(m) = random_model(lat, seed, true) else { return Ok(()) };
        if is_simple(&m).unwrap() {
            prop_assert!(has_pc(&m).unwrap());
            let (d, _) = dual_model(&m).unwrap();
            prop_assert!(is_simple(&d).unwrap());
        }
    }

    #[test]
    fn independent_construction_recovers_rates(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = TransitionRateSet::new();
        for _ in 0..rng.gen_range(1..6) {
            let offs = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
            let k = offs.len();
            let from: Vec<u8> = (0..k).map(|_| rng.gen_range(0..n) as u8).collect();
            let to: Vec<u8> = (0..k).map(|_| rng.gen_range(0..n) as u8).collect();
            let sites = SiteTemplate::Offsets(offs.iter().map(|&o| vec![o]).collect());
            r.add(Transition { sites, from, to }, rng.gen_range(0.1..3.0));
        }
        let s = independent_construction(&r, n, Bounds::default()).unwrap();
        prop_assert!(rates_from_events(&s).approx_eq(&r, 1e-12));
    }

    #[test]
    fn model_files_round_trip(lat in lattices(3), seed in any::<u64>()) {
        let Some(m) = random_model(lat, seed, false) else { return Ok(()) };
        let f = ModelFile::from_model(&m);
        let back = ModelFile::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(&back, &f);
        let m2 = back.to_model().unwrap();
        prop_assert_eq!(ModelFile::from_model(&m2), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pathwise_invariants(lat in multi_colour_lattices(3), seed in any::<u64>()) {
        let Some(m) = random_model(lat, seed, true) else { return Ok(()) };
        let lat = m.lattice();
        let n = lat.size();
        let sys = System::new(&m, &GeometrySpec::cycle(5)).unwrap();
        let (ds, dl) = dual_system(&m, &sys).unwrap();
        let map = sample_event_map(&sys, 2.0, seed);
        prop_assert_eq!(&map, &sample_event_map(&sys, 2.0, seed));
        let lazy: Vec<_> = EventStream::new(&sys, seed, 2.0).collect();
        prop_assert_eq!(&lazy, &map.events);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..20 {
            let p: Vec<u8> = (0..5).map(|_| rng.gen_range(0..n) as u8).collect();
            let q: Vec<u8> = (0..5).map(|_| rng.gen_range(0..n) as u8).collect();
            let z: Vec<u8> = (0..5).map(|_| rng.gen_range(0..ds.n_types()) as u8).collect();
            let pq = join(lat, &p, &q);
            let (ep, eq, epq) = (
                evolve_forward(&sys, &map.events, &p, 2.0),
                evolve_forward(&sys, &map.events, &q, 2.0),
                evolve_forward(&sys, &map.events, &pq, 2.0),
            );
            prop_assert_eq!(&epq, &join(lat, &ep, &eq));
            prop_assert!(leq(lat, &ep, &epq));
            for t in [0.5, 1.0, 2.0] {
                prop_assert!(duality_holds(&sys, &ds, &dl, &map.events, &p, &z, t));
            }
        }
    }

    #[test]
    fn lift_commutes_pathwise(lat in lattices(3), seed in any::<u64>()) {
        let Some(m) = random_model(lat, seed, false) else { return Ok(()) };
        prop_assume!(m.is_additive());
        let (lifted, x) = lift_model(&m).unwrap();
        let base = System::new(&m, &GeometrySpec::cycle(5)).unwrap();
        let up = System::on(&lifted, base.geometry_arc());
        let pi = x.projection();
        let map = sample_event_map(&base, 2.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let mut xi: Vec<u8> = (0..5).map(|_| rng.gen_range(0..x.size()) as u8).collect();
        let mut eta: Vec<u8> = xi.iter().map(|&v| pi[v as usize] as u8).collect();
        for e in &map.events {
            up.apply(e.instance as usize, &mut xi);
            base.apply(e.instance as usize, &mut eta);
            let projected: Vec<u8> = xi.iter().map(|&v| pi[v as usize] as u8).collect();
            prop_assert_eq!(&projected, &eta);
            prop_assert_eq!(xi.iter().all(|&v| v == 0), eta.iter().all(|&v| v == 0));
        }
    }
}
