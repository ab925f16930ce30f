//! Built-in models. Each constructor returns a validated additive growth
//! model with named rate parameters and a default geometry.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::eventmodel::{
    Attachment, EventError, GeometrySpec, GrowthModel, LocalMapping, Parameter, SiteTemplate,
};
use crate::typelattice::{named, TypeLattice};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZooError {
    #[error("parameter {0} must be a nonnegative real, got {1}")]
    NegativeRate(&'static str, f64),
    #[error("{0}")]
    BadArgument(String),
    #[error(transparent)]
    Event(#[from] EventError),
}

/// Name, parameters with defaults, and a one-line description.
pub struct ZooEntry {
    pub name: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub description: &'static str,
}

pub const CATALOGUE: &[ZooEntry] = &[
    ZooEntry {
        name: "contact",
        params: &[("lambda", 2.0), ("dim", 1.0)],
        description: "contact process: death at rate 1, infection along each directed edge at rate lambda",
    },
    ZooEntry {
        name: "nstage",
        params: &[("n", 2.0), ("lambda", 2.0), ("gamma", 1.0), ("dim", 1.0)],
        description: "N-stage contact process: i -> i+1 at rate gamma, all stages die together at rate 1, stage N infects at rate lambda",
    },
    ZooEntry {
        name: "threetype",
        params: &[("lambda", 2.0), ("dim", 1.0)],
        description: "three primitive types below one compound; each active site dies at rate 1 and places type 1, 2 or 3 on a neighbour at rate lambda/3",
    },
    ZooEntry {
        name: "twostage",
        params: &[("lambda", 2.0), ("gamma", 2.0), ("delta", 0.0), ("dim", 1.0)],
        description: "two-stage contact process: joint recovery at rate 1, juvenile recovery at rate delta, maturation at rate gamma, adults infect at rate lambda",
    },
    ZooEntry {
        name: "bipartite",
        params: &[("lambda", 2.0), ("dim", 1.0)],
        description: "bipartite infection: m and f recover at rate 1 and infect the other sex on the same site or a neighbour at rate lambda",
    },
    ZooEntry {
        name: "household",
        params: &[("n", 2.0), ("lambda", 2.0), ("gamma", 1.0), ("variant", 1.0), ("dim", 1.0)],
        description: "household model: i -> 0 at rate 1, i -> i+1 at rate i*gamma; variant 1 infects from state N at rate lambda, variant 2 at rate lambda times the neighbour's state",
    },
    ZooEntry {
        name: "dandelion",
        params: &[("sites", 6.0), ("lambda", 1.0)],
        description: "dandelion process on a cycle: each occupied site dies at rate 1, or dies and disperses to both neighbours at rate lambda",
    },
    ZooEntry {
        name: "helper",
        params: &[("sites", 6.0), ("lambda", 1.0)],
        description: "helper process on a cycle: each site empties at rate 1, and at rate lambda becomes occupied iff a neighbour is occupied",
    },
];

fn check_rate(name: &'static str, v: f64) -> Result<f64, ZooError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ZooError::NegativeRate(name, v))
    }
}

fn check_dim(dim: usize) -> Result<usize, ZooError> {
    if dim == 0 || dim > 3 {
        Err(ZooError::BadArgument(format!("dimension must be 1, 2 or 3, got {dim}")))
    } else {
        Ok(dim)
    }
}

fn here(dim: usize) -> SiteTemplate {
    SiteTemplate::Offsets(vec![vec![0; dim]])
}

/// Nearest-neighbour directions `±e_k`.
fn directions(dim: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for k in 0..dim {
        for s in [1, -1] {
            let mut v = vec![0; dim];
            v[k] = s;
            out.push(v);
        }
    }
    out
}

fn edge(dim: usize, dir: &[i64]) -> SiteTemplate {
    SiteTemplate::Offsets(vec![vec![0; dim], dir.to_vec()])
}

fn default_torus(dim: usize) -> GeometrySpec {
    let side = match dim {
        1 => 100,
        2 => 20,
        _ => 8,
    };
    GeometrySpec::Torus {
        sides: vec![side; dim],
    }
}

/// Collects mappings together with the parameter coefficient driving each.
struct Builder {
    lattice: Arc<TypeLattice>,
    mappings: Vec<LocalMapping>,
    attach: BTreeMap<&'static str, (f64, Vec<Attachment>)>,
}

impl Builder {
    fn new(lattice: TypeLattice) -> Self {
        Builder {
            lattice: Arc::new(lattice),
            mappings: Vec::new(),
            attach: BTreeMap::new(),
        }
    }

    fn n(&self) -> usize {
        self.lattice.size()
    }

    fn param(&mut self, name: &'static str, value: f64) {
        self.attach.insert(name, (value, Vec::new()));
    }

    fn push<F>(&mut self, label: String, sites: SiteTemplate, rate: f64, f: F) -> Result<(), ZooError>
    where
        F: FnMut(&[u8]) -> Vec<u8>,
    {
        let n = self.n();
        self.mappings.push(LocalMapping::from_fn(label, sites, n, rate, f)?);
        Ok(())
    }

    fn push_param<F>(
        &mut self,
        label: String,
        sites: SiteTemplate,
        param: &'static str,
        coefficient: f64,
        f: F,
    ) -> Result<(), ZooError>
    where
        F: FnMut(&[u8]) -> Vec<u8>,
    {
        let (value, list) = self.attach.get_mut(param).expect("declared parameter");
        let rate = coefficient * *value;
        list.push(Attachment {
            mapping: self.mappings.len(),
            coefficient,
        });
        self.push(label, sites, rate, f)
    }

    fn finish(self, name: &str, geometry: GeometrySpec) -> Result<GrowthModel, ZooError> {
        let params = self
            .attach
            .into_iter()
            .map(|(name, (value, attach))| Parameter {
                name: name.to_string(),
                value,
                attach,
            })
            .collect();
        Ok(GrowthModel::new(name, self.lattice, self.mappings)?
            .with_parameters(params)?
            .with_geometry(geometry))
    }
}

pub fn contact(lambda: f64, dim: usize) -> Result<GrowthModel, ZooError> {
    n_stage(1, lambda, 0.0, dim).map(|mut m| {
        m.name = "contact".into();
        m
    })
}

/// Chain `0 < 1 < … < N`. Deaths are one joint "kill whatever is here"
/// mapping; onset `i → i+1` is one mapping per `i`; stage `N` infects an
/// empty neighbour.
pub fn n_stage(n: usize, lambda: f64, gamma: f64, dim: usize) -> Result<GrowthModel, ZooError> {
    if n == 0 || n > 31 {
        return Err(ZooError::BadArgument(format!("number of stages must be in 1..=31, got {n}")));
    }
    let dim = check_dim(dim)?;
    let lambda = check_rate("lambda", lambda)?;
    let gamma = check_rate("gamma", gamma)?;
    let top = n as u8;
    let mut b = Builder::new(TypeLattice::chain(n));
    b.param("lambda", lambda);
    if n > 1 {
        b.param("gamma", gamma);
    }
    b.push("death".into(), here(dim), 1.0, |_| vec![0])?;
    for i in 1..n as u8 {
        b.push_param(format!("onset {i}->{}", i + 1), here(dim), "gamma", 1.0, move |p| {
            vec![if p[0] == i { i + 1 } else { p[0] }]
        })?;
    }
    for dir in directions(dim) {
        b.push_param(format!("infect {dir:?}"), edge(dim, &dir), "lambda", 1.0, move |p| {
            vec![p[0], if p[0] == top { p[1].max(1) } else { p[1] }]
        })?;
    }
    let name = if n == 1 { "contact".to_string() } else { format!("nstage-{n}") };
    b.finish(&name, default_torus(dim))
}

/// Diamond lattice `0 < 1,2,3 < 4`: joint death, and each active site places
/// a primitive `c` on a neighbour at rate `λ/3`.
pub fn three_type(lambda: f64, dim: usize) -> Result<GrowthModel, ZooError> {
    let dim = check_dim(dim)?;
    let lambda = check_rate("lambda", lambda)?;
    let lat = named::diamond();
    let joins: Vec<Vec<usize>> = lat.join_table();
    let mut b = Builder::new(lat);
    b.param("lambda", lambda);
    b.push("death".into(), here(dim), 1.0, |_| vec![0])?;
    for dir in directions(dim) {
        for c in 1..=3usize {
            let joins = joins.clone();
            b.push_param(format!("place {c} {dir:?}"), edge(dim, &dir), "lambda", 1.0 / 3.0, move |p| {
                vec![p[0], if p[0] != 0 { joins[p[1] as usize][c] as u8 } else { p[1] }]
            })?;
        }
    }
    b.finish("threetype", default_torus(dim))
}

/// Chain `0 < 1 < 2` with joint recovery (1), juvenile recovery (δ), onset
/// (γ) and transmission from adults along each directed edge (λ).
pub fn two_stage(lambda: f64, gamma: f64, delta: f64, dim: usize) -> Result<GrowthModel, ZooError> {
    let dim = check_dim(dim)?;
    let lambda = check_rate("lambda", lambda)?;
    let gamma = check_rate("gamma", gamma)?;
    let delta = check_rate("delta", delta)?;
    let mut b = Builder::new(TypeLattice::chain(2));
    b.param("lambda", lambda);
    b.param("gamma", gamma);
    b.param("delta", delta);
    b.push("recover".into(), here(dim), 1.0, |_| vec![0])?;
    b.push_param("recover juvenile".into(), here(dim), "delta", 1.0, |p| {
        vec![if p[0] == 1 { 0 } else { p[0] }]
    })?;
    b.push_param("onset".into(), here(dim), "gamma", 1.0, |p| {
        vec![if p[0] == 1 { 2 } else { p[0] }]
    })?;
    for dir in directions(dim) {
        b.push_param(format!("infect {dir:?}"), edge(dim, &dir), "lambda", 1.0, |p| {
            vec![p[0], if p[0] == 2 { p[1].max(1) } else { p[1] }]
        })?;
    }
    b.finish("twostage", default_torus(dim))
}

/// Types `0, m, f, mf`. Each transition on primitives gets its own mapping,
/// extended additively to the compound type.
pub fn bipartite(lambda: f64, dim: usize) -> Result<GrowthModel, ZooError> {
    const M: u8 = 1;
    const F: u8 = 2;
    let dim = check_dim(dim)?;
    let lambda = check_rate("lambda", lambda)?;
    let has = |a: u8, x: u8| a & x != 0;
    let mut b = Builder::new(named::bipartite());
    b.param("lambda", lambda);
    // mf is index 3 = M | F, so joins are bitwise or
    b.push("m recovers".into(), here(dim), 1.0, |p| vec![p[0] & !M])?;
    b.push("f recovers".into(), here(dim), 1.0, |p| vec![p[0] & !F])?;
    b.push_param("m infects f".into(), here(dim), "lambda", 1.0, move |p| {
        vec![if has(p[0], M) { p[0] | F } else { p[0] }]
    })?;
    b.push_param("f infects m".into(), here(dim), "lambda", 1.0, move |p| {
        vec![if has(p[0], F) { p[0] | M } else { p[0] }]
    })?;
    for dir in directions(dim) {
        b.push_param(format!("m infects f {dir:?}"), edge(dim, &dir), "lambda", 1.0, move |p| {
            vec![p[0], if has(p[0], M) { p[1] | F } else { p[1] }]
        })?;
        b.push_param(format!("f infects m {dir:?}"), edge(dim, &dir), "lambda", 1.0, move |p| {
            vec![p[0], if has(p[0], F) { p[1] | M } else { p[1] }]
        })?;
    }
    b.finish("bipartite", default_torus(dim))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HouseholdVariant {
    /// Infection from neighbours in state `N` at rate `λ`.
    FromTop,
    /// Infection at rate `λ η(y)`, realised by `N` mappings `e_1..e_N` with
    /// `e_k` firing when `η(y) ≥ k`.
    Proportional,
}

/// Chain `0 < … < N` with joint death, `i → i+1` at rate `iγ`.
pub fn household(
    n: usize,
    lambda: f64,
    gamma: f64,
    variant: HouseholdVariant,
    dim: usize,
) -> Result<GrowthModel, ZooError> {
    if n == 0 || n > 31 {
        return Err(ZooError::BadArgument(format!("household size must be in 1..=31, got {n}")));
    }
    let dim = check_dim(dim)?;
    let lambda = check_rate("lambda", lambda)?;
    let gamma = check_rate("gamma", gamma)?;
    let top = n as u8;
    let mut b = Builder::new(TypeLattice::chain(n));
    b.param("lambda", lambda);
    if n > 1 {
        b.param("gamma", gamma);
    }
    b.push("death".into(), here(dim), 1.0, |_| vec![0])?;
    for i in 1..top {
        b.push_param(format!("grow {i}->{}", i + 1), here(dim), "gamma", i as f64, move |p| {
            vec![if p[0] == i { i + 1 } else { p[0] }]
        })?;
    }
    for dir in directions(dim) {
        let triggers: Vec<u8> = match variant {
            HouseholdVariant::FromTop => vec![top],
            HouseholdVariant::Proportional => (1..=top).collect(),
        };
        for k in triggers {
            b.push_param(format!("infect e{k} {dir:?}"), edge(dim, &dir), "lambda", 1.0, move |p| {
                vec![p[0], if p[0] >= k { p[1].max(1) } else { p[1] }]
            })?;
        }
    }
    let v = match variant {
        HouseholdVariant::FromTop => 1,
        HouseholdVariant::Proportional => 2,
    };
    b.finish(&format!("household-{n}-v{v}"), default_torus(dim))
}

/// `p(x, A)`: at this rate, an occupied `x` dies and occupies every site in `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispersal {
    pub site: usize,
    pub targets: Vec<usize>,
    pub rate: f64,
}

/// `T = (x, A∖{x})` with `x` first.
fn dispersal_template(d: &Dispersal, n_sites: usize) -> Result<(SiteTemplate, bool), ZooError> {
    if d.site >= n_sites || d.targets.iter().any(|&y| y >= n_sites) {
        return Err(ZooError::BadArgument(format!(
            "dispersal from {} to {:?} leaves the {n_sites}-site graph",
            d.site, d.targets
        )));
    }
    let mut sites = vec![d.site];
    for &y in &d.targets {
        if !sites.contains(&y) {
            sites.push(y);
        }
    }
    Ok((SiteTemplate::Sites(sites), d.targets.contains(&d.site)))
}

fn graph_model(
    name: &str,
    n_sites: usize,
    dispersal: &[Dispersal],
    dual: bool,
) -> Result<GrowthModel, ZooError> {
    let mut b = Builder::new(TypeLattice::chain(1));
    for d in dispersal {
        let rate = check_rate("rate", d.rate)?;
        let (sites, keeps) = dispersal_template(d, n_sites)?;
        let label = format!("{} {}->{:?}", if dual { "help" } else { "disperse" }, d.site, d.targets);
        if dual {
            b.push(label, sites, rate, move |p| {
                let mut out = p.to_vec();
                out[0] = (p[1..].contains(&1) || (keeps && p[0] == 1)) as u8;
                out
            })?;
        } else {
            b.push(label, sites, rate, move |p| {
                if p[0] == 0 {
                    return p.to_vec();
                }
                let mut out = vec![1; p.len()];
                out[0] = keeps as u8;
                out
            })?;
        }
    }
    b.finish(name, GeometrySpec::Graph { sites: n_sites })
}

/// Dandelion process on an explicit graph with sites `0..n_sites`.
pub fn dandelion(n_sites: usize, dispersal: &[Dispersal]) -> Result<GrowthModel, ZooError> {
    graph_model("dandelion", n_sites, dispersal, false)
}

/// Helper process: at rate `p(x, A)`, `x` becomes occupied iff some site in
/// `A` is occupied.
pub fn helper(n_sites: usize, dispersal: &[Dispersal]) -> Result<GrowthModel, ZooError> {
    graph_model("helper", n_sites, dispersal, true)
}

/// Death at rate 1 and dispersal to both cycle neighbours at rate `λ`.
pub fn ring_dispersal(n_sites: usize, lambda: f64) -> Result<Vec<Dispersal>, ZooError> {
    if n_sites < 3 {
        return Err(ZooError::BadArgument(format!("a cycle needs at least 3 sites, got {n_sites}")));
    }
    let lambda = check_rate("lambda", lambda)?;
    let mut out = Vec::new();
    for x in 0..n_sites {
        out.push(Dispersal {
            site: x,
            targets: vec![],
            rate: 1.0,
        });
        out.push(Dispersal {
            site: x,
            targets: vec![(x + n_sites - 1) % n_sites, (x + 1) % n_sites],
            rate: lambda,
        });
    }
    Ok(out)
}

fn ring_params(m: GrowthModel, lambda: f64) -> Result<GrowthModel, ZooError> {
    let attach = (0..m.mappings().len())
        .filter(|i| i % 2 == 1)
        .map(|mapping| Attachment {
            mapping,
            coefficient: 1.0,
        })
        .collect();
    Ok(m.with_parameters(vec![Parameter {
        name: "lambda".into(),
        value: lambda,
        attach,
    }])?)
}

/// Builds a catalogue model from `name` and `key=value` overrides.
pub fn by_name(name: &str, overrides: &BTreeMap<String, f64>) -> Result<GrowthModel, ZooError> {
    let entry = CATALOGUE
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ZooError::BadArgument(format!("unknown zoo model {name:?}")))?;
    if let Some(k) = overrides.keys().find(|k| !entry.params.iter().any(|(p, _)| p == k)) {
        return Err(ZooError::BadArgument(format!("model {name} has no parameter {k:?}")));
    }
    let get = |k: &str| {
        overrides
            .get(k)
            .copied()
            .unwrap_or_else(|| entry.params.iter().find(|(p, _)| *p == k).unwrap().1)
    };
    let int = |k: &str| -> Result<usize, ZooError> {
        let v = get(k);
        if v >= 0.0 && v.fract() == 0.0 && v < 1e6 {
            Ok(v as usize)
        } else {
            Err(ZooError::BadArgument(format!("{k} must be a nonnegative integer, got {v}")))
        }
    };
    match name {
        "contact" => contact(get("lambda"), int("dim")?),
        "nstage" => n_stage(int("n")?, get("lambda"), get("gamma"), int("dim")?),
        "threetype" => three_type(get("lambda"), int("dim")?),
        "twostage" => two_stage(get("lambda"), get("gamma"), get("delta"), int("dim")?),
        "bipartite" => bipartite(get("lambda"), int("dim")?),
        "household" => {
            let variant = match int("variant")? {
                1 => HouseholdVariant::FromTop,
                2 => HouseholdVariant::Proportional,
                v => return Err(ZooError::BadArgument(format!("household variant must be 1 or 2, got {v}"))),
            };
            household(int("n")?, get("lambda"), get("gamma"), variant, int("dim")?)
        }
        "dandelion" | "helper" => {
            let n = int("sites")?;
            let d = ring_dispersal(n, get("lambda"))?;
            let m = if name == "dandelion" { dandelion(n, &d)? } else { helper(n, &d)? };
            ring_params(m, get("lambda"))
        }
        _ => unreachable!(),
    }
}
