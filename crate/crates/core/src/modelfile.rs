//! JSON model files.
//!
//! ```json
//! {
//!   "format": "growthdual-model/1",
//!   "name": "contact",
//!   "lattice": { "labels": ["0", "1"], "covers": [["0", "1"]] },
//!   "mappings": [
//!     { "label": "death", "offsets": [[0]], "rate": 1.0, "table": [0, 0] },
//!     { "label": "infect", "offsets": [[0], [1]], "rate": 2.0,
//!       "rule": { "kind": "flip", "cases": [{ "from": ["1", "0"], "to": ["1", "1"] }] } }
//!   ],
//!   "parameters": [{ "name": "lambda", "value": 2.0,
//!                    "attach": [{ "mapping": "infect", "coefficient": 1.0 }] }],
//!   "geometry": "torus:100"
//! }
//! ```
//!
//! Types are referred to by label. Passive must be the first label. An
//! optional `join` table (indices) is checked against the order.
//!
//! A mapping gives its template as `offsets` (translation invariant) or
//! `sites` (explicit graph sites), and its action as one of
//!
//! * `table`: output code for each input code, where a local configuration
//!   `φ` has code `Σ φ[i]·|F|^i`;
//! * `rule` of kind `flip`: each listed configuration `from` goes to `to`,
//!   every other configuration is fixed;
//! * `rule` of kind `additive`: `images` lists `e(δ_x(a))` for primitive `a`
//!   at position `x` (unlisted ones are fixed) and the mapping is the additive
//!   extension `e(φ) = ∨_x ∨_{a ∈ C(φ(x))} e(δ_x(a))`; needs a multi-colour
//!   lattice.
//!
//! A parameter sets the rate of each attached mapping to
//! `coefficient × value`; `mapping` is a label or an index. Saved files always
//! carry explicit tables.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventmodel::{
    encode, Attachment, EventError, GeometrySpec, GrowthModel, LocalMapping, MapTable, Parameter,
    SiteTemplate,
};
use crate::typelattice::{LatticeError, TypeLattice};

pub const FORMAT: &str = "growthdual-model/1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format {0:?}, expected {FORMAT:?}")]
    Format(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelFileError> {
    Err(ModelFileError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub lattice: LatticeSection,
    pub mappings: Vec<MappingSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParameterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<String>,
    /// Projection of each type onto the types of another model, as emitted
    /// for lifted models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub labels: Vec<String>,
    pub covers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingSection {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<Rule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Rule {
    Flip { cases: Vec<FlipCase> },
    Additive { images: Vec<Image> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipCase {
    pub from: Vec<String>,
    pub to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Image {
    pub position: usize,
    #[serde(rename = "type")]
    pub type_label: String,
    pub to: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSection {
    pub name: String,
    pub value: f64,
    pub attach: Vec<AttachSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttachSection {
    pub mapping: MappingRef,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MappingRef {
    Index(usize),
    Label(String),
}

impl ModelFile {
    pub fn from_json(s: &str) -> Result<Self, ModelFileError> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format != FORMAT {
            return Err(ModelFileError::Format(f.format));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model files serialize");
        s.push('\n');
        s
    }

    /// Explicit-table file for `m`.
    pub fn from_model(m: &GrowthModel) -> Self {
        let lat = m.lattice();
        let labels = lat.labels().to_vec();
        let covers = lat
            .covers()
            .into_iter()
            .map(|(a, b)| (labels[a].clone(), labels[b].clone()))
            .collect();
        let maps = m.mappings();
        let unique: BTreeSet<&str> = maps.iter().map(|e| e.label.as_str()).collect();
        let by_label = unique.len() == maps.len();
        let mappings = maps
            .iter()
            .map(|e| {
                let (offsets, sites) = match &e.sites {
                    SiteTemplate::Offsets(o) => (Some(o.clone()), None),
                    SiteTemplate::Sites(s) => (None, Some(s.clone())),
                };
                MappingSection {
                    label: e.label.clone(),
                    offsets,
                    sites,
                    rate: e.rate,
                    table: Some(e.table.codes().to_vec()),
                    rule: None,
                }
            })
            .collect();
        let parameters = m
            .parameters()
            .iter()
            .map(|p| ParameterSection {
                name: p.name.clone(),
                value: p.value,
                attach: p
                    .attach
                    .iter()
                    .map(|a| AttachSection {
                        mapping: if by_label {
                            MappingRef::Label(maps[a.mapping].label.clone())
                        } else {
                            MappingRef::Index(a.mapping)
                        },
                        coefficient: a.coefficient,
                    })
                    .collect(),
            })
            .collect();
        ModelFile {
            format: FORMAT.to_string(),
            name: m.name.clone(),
            description: None,
            lattice: LatticeSection { labels, covers, join: None },
            mappings,
            parameters,
            geometry: m.geometry().map(|g| g.to_string()),
            projection: None,
        }
    }

    pub fn to_lattice(&self) -> Result<TypeLattice, ModelFileError> {
        let l = &self.lattice;
        let idx = |s: &str| {
            l.labels
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| ModelFileError::Lattice(LatticeError::UnknownLabel(s.to_string())))
        };
        let covers = l
            .covers
            .iter()
            .map(|(a, b)| Ok((idx(a)?, idx(b)?)))
            .collect::<Result<Vec<_>, ModelFileError>>()?;
        let lat = TypeLattice::from_covers(l.labels.clone(), &covers)?;
        if let Some(join) = &l.join {
            // checked against the order by the constructor
            TypeLattice::new(l.labels.clone(), &lat.order_table(), join)?;
        }
        Ok(lat)
    }

    pub fn to_model(&self) -> Result<GrowthModel, ModelFileError> {
        let lat = self.to_lattice()?;
        let mut maps = Vec::with_capacity(self.mappings.len());
        for ms in &self.mappings {
            maps.push(self.mapping(&lat, ms)?);
        }
        let mut model = GrowthModel::new(self.name.clone(), Arc::new(lat), maps)?;
        let mut params = Vec::new();
        for p in &self.parameters {
            let mut attach = Vec::new();
            for a in &p.attach {
                let mapping = match &a.mapping {
                    MappingRef::Index(i) => *i,
                    MappingRef::Label(l) => {
                        let hits: Vec<usize> = self
                            .mappings
                            .iter()
                            .enumerate()
                            .filter(|(_, m)| &m.label == l)
                            .map(|(i, _)| i)
                            .collect();
                        match hits[..] {
                            [i] => i,
                            [] => return invalid(format!("parameter {}: no mapping {l:?}", p.name)),
                            _ => return invalid(format!("parameter {}: label {l:?} is ambiguous", p.name)),
                        }
                    }
                };
                attach.push(Attachment { mapping, coefficient: a.coefficient });
            }
            params.push(Parameter { name: p.name.clone(), value: p.value, attach });
        }
        if !params.is_empty() {
            model = model.with_parameters(params)?;
        }
        if let Some(g) = &self.geometry {
            let g: GeometrySpec = g.parse().map_err(ModelFileError::Invalid)?;
            model = model.with_geometry(g);
        }
        if let Some(p) = &self.projection {
            if p.len() != model.n_types() {
                return invalid("projection length differs from the number of types");
            }
        }
        Ok(model)
    }

    fn mapping(&self, lat: &TypeLattice, ms: &MappingSection) -> Result<LocalMapping, ModelFileError> {
        let sites = match (&ms.offsets, &ms.sites) {
            (Some(o), None) => SiteTemplate::Offsets(o.clone()),
            (None, Some(s)) => SiteTemplate::Sites(s.clone()),
            _ => return invalid(format!("mapping {:?}: give exactly one of offsets or sites", ms.label)),
        };
        let n = lat.size();
        let k = sites.len();
        let ty = |s: &String| {
            lat.index_of(s)
                .map(|i| i as u8)
                .ok_or_else(|| ModelFileError::Lattice(LatticeError::UnknownLabel(s.clone())))
        };
        let config = |v: &[String]| -> Result<Vec<u8>, ModelFileError> {
            if v.len() != k {
                return invalid(format!("mapping {:?}: configuration {v:?} has the wrong length", ms.label));
            }
            v.iter().map(ty).collect()
        };
        let table = match (&ms.table, &ms.rule) {
            (Some(t), None) => MapTable::from_codes(n, k, t.clone())?,
            (None, Some(Rule::Flip { cases })) => {
                let mut t = MapTable::identity(n, k)?.codes().to_vec();
                let mut seen = BTreeSet::new();
                for c in cases {
                    let from = encode(&config(&c.from)?, n);
                    if !seen.insert(from) {
                        return invalid(format!("mapping {:?}: {:?} listed twice", ms.label, c.from));
                    }
                    t[from] = encode(&config(&c.to)?, n) as u32;
                }
                MapTable::from_codes(n, k, t)?
            }
            (None, Some(Rule::Additive { images })) => {
                if !lat.is_multi_colour() {
                    return invalid(format!(
                        "mapping {:?}: additive rules need a multi-colour lattice",
                        ms.label
                    ));
                }
                // img[x][a] = e(δ_x(a))
                let mut img: Vec<Vec<Option<Vec<u8>>>> = vec![vec![None; n]; k];
                for im in images {
                    let a = ty(&im.type_label)? as usize;
                    if im.position >= k || !lat.is_primitive(a) {
                        return invalid(format!(
                            "mapping {:?}: ({}, {}) is not a position and primitive type",
                            ms.label, im.position, im.type_label
                        ));
                    }
                    if img[im.position][a].replace(config(&im.to)?).is_some() {
                        return invalid(format!(
                            "mapping {:?}: ({}, {}) listed twice",
                            ms.label, im.position, im.type_label
                        ));
                    }
                }
                MapTable::from_fn(n, k, |phi| {
                    let mut out = vec![0u8; k];
                    for (x, &b) in phi.iter().enumerate() {
                        let Some(c) = lat.decomposition(b as usize) else { continue };
                        for a in c.members().iter() {
                            match &img[x][a] {
                                Some(v) => {
                                    for (o, &w) in out.iter_mut().zip(v) {
                                        *o = lat.join(*o as usize, w as usize) as u8;
                                    }
                                }
                                None => out[x] = lat.join(out[x] as usize, a) as u8,
                            }
                        }
                    }
                    out
                })?
            }
            _ => return invalid(format!("mapping {:?}: give exactly one of table or rule", ms.label)),
        };
        Ok(LocalMapping::new(ms.label.clone(), sites, table, ms.rate)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    const CONTACT: &str = r#"{
      "format": "growthdual-model/1",
      "name": "contact",
      "lattice": { "labels": ["0", "1"], "covers": [["0", "1"]] },
      "mappings": [
        { "label": "death", "offsets": [[0]], "rate": 1.0, "table": [0, 0] },
        { "label": "right", "offsets": [[0], [1]], "rate": 2.0,
          "rule": { "kind": "flip", "cases": [{ "from": ["1", "0"], "to": ["1", "1"] }] } },
        { "label": "left", "offsets": [[0], [-1]], "rate": 2.0,
          "rule": { "kind": "additive", "images": [{ "position": 0, "type": "1", "to": ["1", "1"] }] } }
      ],
      "parameters": [{ "name": "lambda", "value": 2.0,
        "attach": [{ "mapping": "right", "coefficient": 1.0 }, { "mapping": 2, "coefficient": 1.0 }] }],
      "geometry": "torus:100"
    }"#;

    #[test]
    fn rules_expand_to_the_zoo_contact_process() {
        let m = ModelFile::from_json(CONTACT).unwrap().to_model().unwrap();
        let z = zoo::contact(2.0, 1).unwrap();
        assert_eq!(m.mappings().len(), z.mappings().len());
        for (a, b) in m.mappings().iter().zip(z.mappings()) {
            assert_eq!(a.canonical(), b.canonical(), "{}", a.label);
            assert_eq!(a.rate, b.rate);
        }
        assert_eq!(m.geometry(), Some(&GeometrySpec::cycle(100)));
        assert_eq!(m.with_parameter("lambda", 3.0).unwrap().mappings()[2].rate, 3.0);
    }

    #[test]
    fn round_trips() {
        let names = ["contact", "nstage", "threetype", "twostage", "bipartite", "household", "dandelion", "helper"];
        for name in names {
            let m = zoo::by_name(name, &Default::default()).unwrap();
            let f = ModelFile::from_model(&m);
            let text = f.to_json();
            let back = ModelFile::from_json(&text).unwrap();
            assert_eq!(back, f, "{name}");
            let m2 = back.to_model().unwrap();
            assert_eq!(ModelFile::from_model(&m2).to_json(), text, "{name}");
            assert_eq!(m2.parameters(), m.parameters());
        }
    }

    #[test]
    fn rejects_bad_files() {
        let bad = |from: &str, to: &str| {
            let s = CONTACT.replacen(from, to, 1);
            ModelFile::from_json(&s).and_then(|f| f.to_model())
        };
        assert!(matches!(bad("model/1", "model/9"), Err(ModelFileError::Format(_))));
        assert!(bad("[0, 0]", "[0, 0, 0]").is_err());
        assert!(bad("\"rate\": 1.0", "\"rate\": -1.0").is_err());
        assert!(bad("[\"0\", \"1\"]]", "[\"0\", \"2\"]]").is_err());
        assert!(bad("\"mapping\": \"right\"", "\"mapping\": \"nope\"").is_err());
        assert!(bad("torus:100", "torus:0").is_err());
        assert!(bad("\"name\": \"contact\"", "\"name\": \"contact\", \"extra\": 1").is_err());
        assert!(bad("\"lattice\": {", "\"lattice\": { \"join\": [[0, 0], [0, 1]],").is_err());
        assert!(bad("\"lattice\": {", "\"lattice\": { \"join\": [[0, 1], [1, 1]],").is_ok());
    }
}
