use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EventError, EventStructure, LocalMapping, SiteTemplate};
use crate::typelattice::TypeLattice;

/// Where a model lives: a periodic box for offset templates, or a finite
/// graph whose sites are `0..sites` for explicit templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Torus { sides: Vec<usize> },
    Graph { sites: usize },
}

impl GeometrySpec {
    pub fn cycle(n: usize) -> Self {
        GeometrySpec::Torus { sides: vec![n] }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            GeometrySpec::Torus { sides } => sides.iter().product(),
            GeometrySpec::Graph { sites } => *sites,
        }
    }
}

impl fmt::Display for GeometrySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometrySpec::Torus { sides } => {
                let s: Vec<String> = sides.iter().map(|n| n.to_string()).collect();
                write!(f, "torus:{}", s.join("x"))
            }
            GeometrySpec::Graph { sites } => write!(f, "graph:{sites}"),
        }
    }
}

impl FromStr for GeometrySpec {
    type Err = String;

    /// `torus:NxM...` or `graph:n`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("geometry {s:?}: expected torus:NxM or graph:n"))?;
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("geometry {s:?}: bad size {t:?}"))
        };
        match kind {
            "torus" => Ok(GeometrySpec::Torus {
                sides: rest.split('x').map(num).collect::<Result<_, _>>()?,
            }),
            "graph" => Ok(GeometrySpec::Graph { sites: num(rest)? }),
            _ => Err(format!("geometry {s:?}: unknown kind {kind:?}")),
        }
    }
}

/// A mapping whose rate is `coefficient × value` of some parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub mapping: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub attach: Vec<Attachment>,
}

/// A type lattice with an event structure over it.
#[derive(Debug, Clone)]
pub struct GrowthModel {
    pub name: String,
    lattice: Arc<TypeLattice>,
    events: EventStructure,
    parameters: Vec<Parameter>,
    geometry: Option<GeometrySpec>,
}

impl GrowthModel {
    pub fn new(
        name: impl Into<String>,
        lattice: Arc<TypeLattice>,
        mappings: Vec<LocalMapping>,
    ) -> Result<Self, EventError> {
        let n = lattice.size();
        for m in &mappings {
            if m.table.n_types() != n {
                return Err(EventError::TypeCountMismatch {
                    label: m.label.clone(),
                    expected: n,
                    got: m.table.n_types(),
                });
            }
        }
        if let Some(first) = mappings.first() {
            let kind = |t: &SiteTemplate| (t.is_translation_invariant(), t.dimension());
            if let Some(bad) = mappings.iter().find(|m| kind(&m.sites) != kind(&first.sites)) {
                return Err(EventError::MixedTemplates(format!(
                    "{:?} and {:?}",
                    first.label, bad.label
                )));
            }
        }
        Ok(GrowthModel {
            name: name.into(),
            lattice,
            events: EventStructure::new(mappings)?,
            parameters: Vec::new(),
            geometry: None,
        })
    }

    /// Declares parameters and sets each attached mapping's rate accordingly.
    pub fn with_parameters(mut self, parameters: Vec<Parameter>) -> Result<Self, EventError> {
        for p in &parameters {
            if !(p.value.is_finite() && p.value >= 0.0) {
                return Err(EventError::BadParameter {
                    name: p.name.clone(),
                    detail: format!("value {} is not a nonnegative real", p.value),
                });
            }
            for a in &p.attach {
                if a.mapping >= self.events.len() {
                    return Err(EventError::BadParameter {
                        name: p.name.clone(),
                        detail: format!("no mapping {}", a.mapping),
                    });
                }
            }
        }
        self.parameters = parameters;
        self.apply_parameters()?;
        Ok(self)
    }

    pub fn with_geometry(mut self, g: GeometrySpec) -> Self {
        self.geometry = Some(g);
        self
    }

    /// Same model with one parameter changed.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, EventError> {
        let mut m = self.clone();
        let p = m
            .parameters
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| EventError::UnknownParameter(name.to_string()))?;
        p.value = value;
        let ps = m.parameters.clone();
        m.with_parameters(ps)
    }

    fn apply_parameters(&mut self) -> Result<(), EventError> {
        let mut maps = std::mem::take(&mut self.events).into_mappings();
        for p in &self.parameters {
            for a in &p.attach {
                let rate = a.coefficient * p.value;
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(EventError::InvalidRate {
                        label: maps[a.mapping].label.clone(),
                        rate,
                    });
                }
                maps[a.mapping].rate = rate;
            }
        }
        self.events = EventStructure::new(maps)?;
        Ok(())
    }

    /// A model over another lattice whose mappings correspond index-for-index
    /// to these, keeping parameters and geometry.
    pub fn derived(
        &self,
        name: impl Into<String>,
        lattice: Arc<TypeLattice>,
        mappings: Vec<LocalMapping>,
    ) -> Result<Self, EventError> {
        debug_assert_eq!(mappings.len(), self.events.len());
        let mut m = GrowthModel::new(name, lattice, mappings)?;
        m.parameters = self.parameters.clone();
        m.geometry = self.geometry.clone();
        Ok(m)
    }

    pub fn lattice(&self) -> &TypeLattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> Arc<TypeLattice> {
        Arc::clone(&self.lattice)
    }

    pub fn structure(&self) -> &EventStructure {
        &self.events
    }

    pub fn mappings(&self) -> &[LocalMapping] {
        self.events.mappings()
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn geometry(&self) -> Option<&GeometrySpec> {
        self.geometry.as_ref()
    }

    pub fn n_types(&self) -> usize {
        self.lattice.size()
    }

    /// True for offset templates, false for explicit sites. Empty models count
    /// as translation invariant.
    pub fn is_translation_invariant(&self) -> bool {
        self.mappings()
            .first()
            .is_none_or(|m| m.sites.is_translation_invariant())
    }

    pub fn dimension(&self) -> Option<usize> {
        self.mappings().first().and_then(|m| m.sites.dimension())
    }

    /// Largest template range, at least 1.
    pub fn range(&self) -> i64 {
        self.mappings().iter().map(|m| m.sites.range()).max().unwrap_or(0).max(1)
    }

    pub fn max_rate(&self) -> f64 {
        self.mappings().iter().map(|m| m.rate).fold(0.0, f64::max)
    }

    /// First non-additive mapping, if any.
    pub fn check_additive(&self) -> Result<(), EventError> {
        for m in self.mappings() {
            m.is_additive(&self.lattice)
                .map_err(|witness| EventError::NotAdditive {
                    label: m.label.clone(),
                    witness,
                })?;
        }
        Ok(())
    }

    pub fn is_additive(&self) -> bool {
        self.check_additive().is_ok()
    }

    pub fn is_attractive(&self) -> bool {
        self.mappings().iter().all(|m| m.is_attractive(&self.lattice).is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventmodel::MapTable;

    fn death(rate: f64) -> LocalMapping {
        LocalMapping::new(
            "death",
            SiteTemplate::Offsets(vec![vec![0]]),
            MapTable::from_fn(2, 1, |_| vec![0]).unwrap(),
            rate,
        )
        .unwrap()
    }

    #[test]
    fn geometry_parsing() {
        assert_eq!(
            "torus:4x5".parse::<GeometrySpec>().unwrap(),
            GeometrySpec::Torus { sides: vec![4, 5] }
        );
        assert_eq!("graph:3".parse::<GeometrySpec>(), Ok(GeometrySpec::Graph { sites: 3 }));
        assert!("torus:0".parse::<GeometrySpec>().is_err());
        assert!("ring:3".parse::<GeometrySpec>().is_err());
        let g = GeometrySpec::Torus { sides: vec![3, 3] };
        assert_eq!(g.to_string().parse::<GeometrySpec>().unwrap(), g);
        assert_eq!(g.n_sites(), 9);
    }

    #[test]
    fn parameters_drive_rates() {
        let lat = Arc::new(TypeLattice::chain(1));
        let m = GrowthModel::new("d", lat, vec![death(1.0)])
            .unwrap()
            .with_parameters(vec![Parameter {
                name: "mu".into(),
                value: 2.0,
                attach: vec![Attachment {
                    mapping: 0,
                    coefficient: 1.5,
                }],
            }])
            .unwrap();
        assert_eq!(m.mappings()[0].rate, 3.0);
        let m2 = m.with_parameter("mu", 0.0).unwrap();
        assert_eq!(m2.mappings()[0].rate, 0.0);
        assert!(matches!(
            m.with_parameter("nu", 1.0),
            Err(EventError::UnknownParameter(_))
        ));
    }

    #[test]
    fn type_count_checked() {
        let lat = Arc::new(TypeLattice::chain(2));
        assert!(matches!(
            GrowthModel::new("d", lat, vec![death(1.0)]),
            Err(EventError::TypeCountMismatch { .. })
        ));
    }

    #[test]
    fn mixed_templates_rejected() {
        let lat = Arc::new(TypeLattice::chain(1));
        let other = LocalMapping::new(
            "graph death",
            SiteTemplate::Sites(vec![0]),
            MapTable::from_fn(2, 1, |_| vec![0]).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            GrowthModel::new("d", lat, vec![death(1.0), other]),
            Err(EventError::MixedTemplates(_))
        ));
    }
}
