use std::sync::Arc;

use crate::eventmodel::{GeometrySpec, GrowthModel, SiteTemplate};
use crate::typelattice::TypeLattice;

use super::EngineError;

/// Concrete sites and mapping instances of a model on a finite geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    spec: GeometrySpec,
    n_sites: usize,
    inst_mapping: Vec<u32>,
    inst_start: Vec<u32>,
    inst_sites: Vec<u32>,
}

impl Geometry {
    /// Instantiates every template. On a torus, instance `site·k + i` is mapping
    /// `i` translated to `site` (row-major coordinates); on a graph, instance
    /// `i` is mapping `i`.
    pub fn new(model: &GrowthModel, spec: &GeometrySpec) -> Result<Self, EngineError> {
        let mut g = Geometry {
            spec: spec.clone(),
            n_sites: spec.n_sites(),
            inst_mapping: Vec::new(),
            inst_start: vec![0],
            inst_sites: Vec::new(),
        };
        if g.n_sites == 0 || g.n_sites > u32::MAX as usize {
            return Err(EngineError::Geometry(format!("{spec} has an unusable number of sites")));
        }
        let maps = model.mappings();
        match spec {
            GeometrySpec::Torus { sides } => {
                for m in maps {
                    if m.sites.dimension() != Some(sides.len()) {
                        return Err(EngineError::Geometry(format!(
                            "mapping {:?} does not fit the {}-dimensional {spec}",
                            m.label,
                            sides.len()
                        )));
                    }
                }
                let keys: Vec<Vec<Vec<i64>>> = maps.iter().map(|m| m.sites.keys()).collect();
                let mut coords = vec![0i64; sides.len()];
                let mut buf = Vec::new();
                for site in 0..g.n_sites {
                    g.coords_into(site, &mut coords);
                    for (i, k) in keys.iter().enumerate() {
                        buf.clear();
                        for off in k {
                            let c: Vec<i64> = coords.iter().zip(off).map(|(a, b)| a + b).collect();
                            buf.push(g.index_of(&c) as u32);
                        }
                        if (1..buf.len()).any(|j| buf[..j].contains(&buf[j])) {
                            return Err(EngineError::Geometry(format!(
                                "mapping {:?} wraps onto itself on {spec}",
                                maps[i].label
                            )));
                        }
                        g.push(i, &buf);
                    }
                }
            }
            GeometrySpec::Graph { sites } => {
                for (i, m) in maps.iter().enumerate() {
                    match &m.sites {
                        SiteTemplate::Sites(s) if s.iter().all(|&x| x < *sites) => {
                            let s: Vec<u32> = s.iter().map(|&x| x as u32).collect();
                            g.push(i, &s);
                        }
                        _ => {
                            return Err(EngineError::Geometry(format!(
                                "mapping {:?} does not name sites of {spec}",
                                m.label
                            )))
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    fn push(&mut self, mapping: usize, sites: &[u32]) {
        self.inst_mapping.push(mapping as u32);
        self.inst_sites.extend_from_slice(sites);
        self.inst_start.push(self.inst_sites.len() as u32);
    }

    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_instances(&self) -> usize {
        self.inst_mapping.len()
    }

    pub fn instance_mapping(&self, i: usize) -> usize {
        self.inst_mapping[i] as usize
    }

    pub fn instance_sites(&self, i: usize) -> &[u32] {
        &self.inst_sites[self.inst_start[i] as usize..self.inst_start[i + 1] as usize]
    }

    /// Row-major index of torus coordinates, wrapping each coordinate.
    pub fn index_of(&self, coords: &[i64]) -> usize {
        match &self.spec {
            GeometrySpec::Torus { sides } => coords
                .iter()
                .zip(sides)
                .fold(0, |acc, (&c, &s)| acc * s + c.rem_euclid(s as i64) as usize),
            GeometrySpec::Graph { .. } => coords[0] as usize,
        }
    }

    pub fn coords(&self, site: usize) -> Vec<i64> {
        let d = match &self.spec {
            GeometrySpec::Torus { sides } => sides.len(),
            GeometrySpec::Graph { .. } => 1,
        };
        let mut c = vec![0; d];
        self.coords_into(site, &mut c);
        c
    }

    fn coords_into(&self, mut site: usize, out: &mut [i64]) {
        match &self.spec {
            GeometrySpec::Torus { sides } => {
                for k in (0..sides.len()).rev() {
                    out[k] = (site % sides[k]) as i64;
                    site /= sides[k];
                }
            }
            GeometrySpec::Graph { .. } => out[0] = site as i64,
        }
    }
}

/// A model compiled onto a geometry: flat tables, per-instance rates, and the
/// thinning acceptance used when events are drawn from a faster envelope.
#[derive(Debug, Clone)]
pub struct System {
    lattice: Arc<TypeLattice>,
    geometry: Arc<Geometry>,
    n_types: usize,
    tables: Vec<Vec<u32>>,
    rates: Vec<f64>,
    accept: Vec<f64>,
}

impl System {
    pub fn new(model: &GrowthModel, spec: &GeometrySpec) -> Result<Self, EngineError> {
        let geometry = Arc::new(Geometry::new(model, spec)?);
        Ok(Self::on(model, geometry))
    }

    /// Compiles `model` on an existing geometry; the model's mappings must
    /// correspond to the geometry's mapping indices.
    pub fn on(model: &GrowthModel, geometry: Arc<Geometry>) -> Self {
        let maps = model.mappings();
        System {
            lattice: model.lattice_arc(),
            geometry,
            n_types: model.n_types(),
            tables: maps.iter().map(|m| m.table.codes().to_vec()).collect(),
            rates: maps.iter().map(|m| m.rate).collect(),
            accept: vec![1.0; maps.len()],
        }
    }

    /// This model's events as a thinning of `envelope`'s: an envelope event of
    /// mapping `i` is kept iff its mark is below `rate_i / envelope_rate_i`.
    pub fn thinned_from(model: &GrowthModel, envelope: &System) -> Result<Self, EngineError> {
        let mut s = Self::on(model, Arc::clone(&envelope.geometry));
        for (i, (&r, &env)) in s.rates.iter().zip(&envelope.rates).enumerate() {
            if r > env * (1.0 + 1e-12) {
                return Err(EngineError::BadArgument(format!(
                    "rate {r} of mapping {i} exceeds the envelope rate {env}"
                )));
            }
            s.accept[i] = if env > 0.0 { (r / env).min(1.0) } else { 0.0 };
        }
        s.rates = envelope.rates.clone();
        Ok(s)
    }

    /// Takes over the event rates and thinning of `other`, which must share
    /// the geometry.
    pub fn with_thinning_of(mut self, other: &System) -> Self {
        self.rates = other.rates.clone();
        self.accept = other.accept.clone();
        self
    }

    pub fn lattice(&self) -> &TypeLattice {
        &self.lattice
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn geometry_arc(&self) -> Arc<Geometry> {
        Arc::clone(&self.geometry)
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    /// Rate at which events of instance `i` are drawn.
    pub fn instance_rate(&self, i: usize) -> f64 {
        self.rates[self.geometry.instance_mapping(i)]
    }

    pub fn accepts(&self, instance: usize, mark: f64) -> bool {
        mark < self.accept[self.geometry.instance_mapping(instance)]
    }

    /// Applies instance `i` to `config` in place; returns the change in the
    /// number of active sites.
    #[inline]
    pub fn apply(&self, instance: usize, config: &mut [u8]) -> isize {
        let sites = self.geometry.instance_sites(instance);
        let table = &self.tables[self.geometry.instance_mapping(instance)];
        let n = self.n_types;
        let mut code = 0usize;
        for &s in sites.iter().rev() {
            code = code * n + config[s as usize] as usize;
        }
        let mut out = table[code] as usize;
        if out == code {
            return 0;
        }
        let mut delta = 0isize;
        for &s in sites {
            let v = (out % n) as u8;
            out /= n;
            let old = &mut config[s as usize];
            delta += (v != 0) as isize - (*old != 0) as isize;
            *old = v;
        }
        delta
    }

    /// The configuration holding the lattice's top type everywhere.
    pub fn all_top(&self) -> Vec<u8> {
        vec![self.lattice.top() as u8; self.n_sites()]
    }

    /// `δ_x(a)`.
    pub fn single(&self, x: usize, a: usize) -> Vec<u8> {
        let mut c = vec![0u8; self.n_sites()];
        c[x] = a as u8;
        c
    }
}
