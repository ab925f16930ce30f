use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::mapping::{encode, LocalMapping, MapTable, SiteTemplate};
use super::EventError;

/// A family of distinct local mappings with their rates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStructure {
    mappings: Vec<LocalMapping>,
}

impl EventStructure {
    pub fn new(mappings: Vec<LocalMapping>) -> Result<Self, EventError> {
        let keys: Vec<_> = mappings.iter().map(LocalMapping::canonical).collect();
        for i in 0..keys.len() {
            if let Some(j) = keys[..i].iter().position(|k| *k == keys[i]) {
                return Err(EventError::DuplicateMapping(
                    mappings[j].label.clone(),
                    mappings[i].label.clone(),
                ));
            }
        }
        if let Some(m) = mappings.first() {
            let n = m.table.n_types();
            if let Some(bad) = mappings.iter().find(|m| m.table.n_types() != n) {
                return Err(EventError::TypeCountMismatch {
                    label: bad.label.clone(),
                    expected: n,
                    got: bad.table.n_types(),
                });
            }
        }
        Ok(EventStructure { mappings })
    }

    pub fn empty() -> Self {
        EventStructure::default()
    }

    pub fn mappings(&self) -> &[LocalMapping] {
        &self.mappings
    }

    pub fn len(&self) -> usize {
        self.mappings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }

    pub fn into_mappings(self) -> Vec<LocalMapping> {
        self.mappings
    }
}

/// Local transition `φ → ψ` on the sites `T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub sites: SiteTemplate,
    pub from: Vec<u8>,
    pub to: Vec<u8>,
}

impl Transition {
    /// Same transition with the sites in canonical order.
    pub fn canonical(&self) -> Transition {
        let (sites, perm) = self.sites.canonical();
        Transition {
            sites,
            from: perm.iter().map(|&i| self.from[i]).collect(),
            to: perm.iter().map(|&i| self.to[i]).collect(),
        }
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {:?} -> {:?}", self.sites.keys(), self.from, self.to)
    }
}

/// Transition rates `c_T(φ, ψ)`, keyed by canonical transition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionRateSet {
    entries: BTreeMap<Transition, f64>,
}

impl TransitionRateSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `rate` to the transition's entry. Identity transitions and zero
    /// rates are ignored.
    pub fn add(&mut self, t: Transition, rate: f64) {
        if t.from == t.to || rate == 0.0 {
            return;
        }
        *self.entries.entry(t.canonical()).or_insert(0.0) += rate;
    }

    pub fn rate(&self, t: &Transition) -> f64 {
        self.entries.get(&t.canonical()).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Transition, f64)> {
        self.entries.iter().map(|(t, &r)| (t, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same keys, rates within `tol` relative error.
    pub fn approx_eq(&self, other: &TransitionRateSet, tol: f64) -> bool {
        self.len() == other.len()
            && self.entries.iter().all(|(t, &r)| {
                other
                    .entries
                    .get(t)
                    .is_some_and(|&s| (r - s).abs() <= tol * r.abs().max(s.abs()).max(1.0))
            })
    }
}

/// For every mapping and local configuration it moves, credits the mapping's
/// rate to the transition `φ → e(φ)` on the mapping's sites.
pub fn rates_from_events(s: &EventStructure) -> TransitionRateSet {
    let mut out = TransitionRateSet::new();
    for m in s.mappings() {
        for code in 0..m.table.len() {
            let to = m.table.apply_code(code);
            if to != code {
                out.add(
                    Transition {
                        sites: m.sites.clone(),
                        from: m.table.decode(code),
                        to: m.table.decode(to),
                    },
                    m.rate,
                );
            }
        }
    }
    out
}

/// Boundedness constants: at most `max_sites` sites per event and rates at most `max_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub max_sites: usize,
    pub max_rate: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_sites: 8,
            max_rate: 1e6,
        }
    }
}

/// One mapping per transition: `φ ↦ ψ`, everything else fixed, at rate `c_T(φ, ψ)`.
pub fn independent_construction(
    r: &TransitionRateSet,
    n_types: usize,
    bounds: Bounds,
) -> Result<EventStructure, EventError> {
    let mut totals: BTreeMap<&SiteTemplate, f64> = BTreeMap::new();
    for (t, rate) in r.iter() {
        if t.sites.len() > bounds.max_sites {
            return Err(EventError::BoundExceeded(format!(
                "transition {t} involves {} sites (max {})",
                t.sites.len(),
                bounds.max_sites
            )));
        }
        *totals.entry(&t.sites).or_insert(0.0) += rate;
    }
    if let Some((sites, total)) = totals.iter().find(|(_, &c)| c > bounds.max_rate) {
        return Err(EventError::BoundExceeded(format!(
            "total rate {total} on {:?} exceeds {}",
            sites.keys(),
            bounds.max_rate
        )));
    }
    let mut mappings = Vec::with_capacity(r.len());
    for (t, rate) in r.iter() {
        let mut codes: Vec<u32> = (0..n_types.pow(t.sites.len() as u32) as u32).collect();
        codes[encode(&t.from, n_types)] = encode(&t.to, n_types) as u32;
        let table = MapTable::from_codes(n_types, t.sites.len(), codes)?;
        mappings.push(LocalMapping::new(
            format!("flip {:?}->{:?} on {:?}", t.from, t.to, t.sites.keys()),
            t.sites.clone(),
            table,
            rate,
        )?);
    }
    EventStructure::new(mappings)
}

/// Every mapping has at most `max_sites` sites and rate at most `max_rate`.
pub fn check_boundedness(s: &EventStructure, max_sites: usize, max_rate: f64) -> bool {
    s.mappings()
        .iter()
        .all(|m| m.sites.len() <= max_sites && m.rate <= max_rate)
}

/// An event structure together with the transitions it realises and, for each
/// transition, the indices of the mappings assigned to it.
#[derive(Debug, Clone)]
pub struct EventCoupling {
    pub structure: EventStructure,
    pub transitions: Vec<(Transition, f64)>,
    pub assignment: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("malformed coupling: {0}")]
    Malformed(String),
    #[error("mapping {mapping} is assigned to transitions {first} and {second} whose trigger sets overlap")]
    OverlapViolation {
        mapping: usize,
        first: usize,
        second: usize,
    },
    #[error("mapping {mapping} misbehaves on {config:?}: {detail}")]
    SideEffect {
        mapping: usize,
        config: Vec<u8>,
        detail: String,
    },
    #[error("transition {transition}: assigned rates sum to {got}, expected {expected}")]
    RateMismatch {
        transition: usize,
        expected: f64,
        got: f64,
    },
}

impl EventCoupling {
    /// The coupling in which each transition has its own mapping.
    pub fn independent(r: &TransitionRateSet, n_types: usize) -> Result<Self, EventError> {
        let structure = independent_construction(r, n_types, Bounds::default())?;
        let transitions: Vec<_> = r.iter().map(|(t, c)| (t.clone(), c)).collect();
        let assignment = (0..transitions.len()).map(|i| vec![i]).collect();
        Ok(EventCoupling {
            structure,
            transitions,
            assignment,
        })
    }

    /// Checks the restriction, rate-sum and trigger-disjointness conditions,
    /// reporting the first violation.
    pub fn validate(&self) -> Result<(), CouplingError> {
        let maps = self.structure.mappings();
        if self.assignment.len() != self.transitions.len() {
            return Err(CouplingError::Malformed(format!(
                "{} assignments for {} transitions",
                self.assignment.len(),
                self.transitions.len()
            )));
        }
        // positions[j][i]: where transition j's sites sit inside mapping i.
        let mut assigned_to: Vec<Vec<(usize, Vec<usize>)>> = vec![Vec::new(); maps.len()];
        for (j, ((t, _), ids)) in self.transitions.iter().zip(&self.assignment).enumerate() {
            if t.from.len() != t.sites.len() || t.to.len() != t.sites.len() {
                return Err(CouplingError::Malformed(format!("transition {j} has wrong arity")));
            }
            for &i in ids {
                let m = maps.get(i).ok_or_else(|| {
                    CouplingError::Malformed(format!("transition {j} assigned to missing mapping {i}"))
                })?;
                if m.sites.is_translation_invariant() != t.sites.is_translation_invariant() {
                    return Err(CouplingError::Malformed(format!(
                        "transition {j} and mapping {i} use different site kinds"
                    )));
                }
                let mkeys = m.sites.keys();
                let pos: Option<Vec<usize>> = t
                    .sites
                    .keys()
                    .iter()
                    .map(|k| mkeys.iter().position(|mk| mk == k))
                    .collect();
                let pos = pos.ok_or_else(|| {
                    CouplingError::Malformed(format!(
                        "transition {j} sites are not contained in mapping {i}'s sites"
                    ))
                })?;
                assigned_to[i].push((j, pos));
            }
        }

        for (i, list) in assigned_to.iter().enumerate() {
            for (x, (j, _)) in list.iter().enumerate() {
                for (k, _) in &list[..x] {
                    if !self.triggers_disjoint(*j, *k) {
                        return Err(CouplingError::OverlapViolation {
                            mapping: i,
                            first: *k,
                            second: *j,
                        });
                    }
                }
            }
        }

        for (i, list) in assigned_to.iter().enumerate() {
            let m = &maps[i];
            for code in 0..m.table.len() {
                let phi = m.table.decode(code);
                let out = m.table.decode(m.table.apply_code(code));
                let trig = list.iter().find(|(j, pos)| {
                    let t = &self.transitions[*j].0;
                    pos.iter().zip(&t.from).all(|(&p, &f)| phi[p] == f)
                });
                let mut want = phi.clone();
                if let Some((j, pos)) = trig {
                    let t = &self.transitions[*j].0;
                    for (&p, &to) in pos.iter().zip(&t.to) {
                        want[p] = to;
                    }
                }
                if out != want {
                    return Err(CouplingError::SideEffect {
                        mapping: i,
                        config: phi,
                        detail: match trig {
                            Some((j, _)) => format!(
                                "expected {want:?} for transition {j}, mapping gives {out:?}"
                            ),
                            None => format!("no assigned transition, but mapping gives {out:?}"),
                        },
                    });
                }
            }
        }

        for (j, ((_, c), ids)) in self.transitions.iter().zip(&self.assignment).enumerate() {
            let got: f64 = ids.iter().map(|&i| maps[i].rate).sum();
            if (got - c).abs() > 1e-9 * c.abs().max(1.0) {
                return Err(CouplingError::RateMismatch {
                    transition: j,
                    expected: *c,
                    got,
                });
            }
        }
        Ok(())
    }

    /// `{η : η|T_j = φ_j} ∩ {η : η|T_k = φ_k} = ∅`: the triggers disagree on a shared site.
    fn triggers_disjoint(&self, j: usize, k: usize) -> bool {
        let (a, b) = (&self.transitions[j].0, &self.transitions[k].0);
        let (ka, kb) = (a.sites.keys(), b.sites.keys());
        ka.iter().enumerate().any(|(x, key)| {
            kb.iter()
                .position(|other| other == key)
                .is_some_and(|y| a.from[x] != b.from[y])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn off(v: &[i64]) -> SiteTemplate {
        SiteTemplate::Offsets(v.iter().map(|&x| vec![x]).collect())
    }

    fn contact_rates(lambda: f64) -> TransitionRateSet {
        let mut r = TransitionRateSet::new();
        r.add(
            Transition {
                sites: off(&[0]),
                from: vec![1],
                to: vec![0],
            },
            1.0,
        );
        r.add(
            Transition {
                sites: off(&[0, 1]),
                from: vec![1, 0],
                to: vec![1, 1],
            },
            lambda,
        );
        r.add(
            Transition {
                sites: off(&[0, 1]),
                from: vec![0, 1],
                to: vec![1, 1],
            },
            lambda,
        );
        r
    }

    #[test]
    fn empty_round_trips() {
        let s = independent_construction(&TransitionRateSet::new(), 2, Bounds::default()).unwrap();
        assert!(s.is_empty());
        assert!(rates_from_events(&EventStructure::empty()).is_empty());
    }

    #[test]
    fn independent_construction_of_contact() {
        let r = contact_rates(2.0);
        let s = independent_construction(&r, 2, Bounds::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.mappings().iter().filter(|m| m.sites.len() == 1).count(), 1);
        assert!(rates_from_events(&s).approx_eq(&r, 1e-12));
        assert!(EventCoupling::independent(&r, 2).unwrap().validate().is_ok());
    }

    #[test]
    fn bound_exceeded() {
        let r = contact_rates(2.0);
        let tight = Bounds {
            max_sites: 1,
            max_rate: 10.0,
        };
        assert!(matches!(
            independent_construction(&r, 2, tight),
            Err(EventError::BoundExceeded(_))
        ));
        let s = independent_construction(&r, 2, Bounds::default()).unwrap();
        assert!(check_boundedness(&s, 2, 2.0));
        assert!(!check_boundedness(&s, 1, 2.0));
        assert!(!check_boundedness(&s, 2, 1.5));
    }

    #[test]
    fn mirrored_transitions_share_a_key() {
        let mut r = TransitionRateSet::new();
        let t = Transition {
            sites: off(&[0, -1]),
            from: vec![1, 0],
            to: vec![1, 1],
        };
        r.add(t.clone(), 1.5);
        assert_eq!(
            r.rate(&Transition {
                sites: off(&[0, 1]),
                from: vec![0, 1],
                to: vec![1, 1],
            }),
            1.5
        );
    }

    #[test]
    fn household_variant_two_coupling() {
        let n = 3usize;
        let lambda = 0.7;
        let sites = off(&[0, 1]);
        let mappings: Vec<_> = (1..=n)
            .map(|k| {
                LocalMapping::from_fn(format!("e{k}"), sites.clone(), n + 1, lambda, |p| {
                    let fire = p[0] as usize >= k && p[1] == 0;
                    vec![p[0], if fire { 1 } else { p[1] }]
                })
                .unwrap()
            })
            .collect();
        let structure = EventStructure::new(mappings).unwrap();
        let transitions: Vec<_> = (1..=n)
            .map(|i| {
                (
                    Transition {
                        sites: sites.clone(),
                        from: vec![i as u8, 0],
                        to: vec![i as u8, 1],
                    },
                    i as f64 * lambda,
                )
            })
            .collect();
        let assignment = (1..=n).map(|i| (0..i).collect()).collect();
        let c = EventCoupling {
            structure,
            transitions,
            assignment,
        };
        assert_eq!(c.validate(), Ok(()));
    }

    #[test]
    fn disjoint_regions_cannot_share_a_mapping() {
        let both = LocalMapping::from_fn("both", SiteTemplate::Sites(vec![0, 1]), 2, 1.0, |p| {
            vec![p[0].max(1), p[1].max(1)]
        })
        .unwrap();
        let c = EventCoupling {
            structure: EventStructure::new(vec![both]).unwrap(),
            transitions: vec![
                (
                    Transition {
                        sites: SiteTemplate::Sites(vec![0]),
                        from: vec![0],
                        to: vec![1],
                    },
                    1.0,
                ),
                (
                    Transition {
                        sites: SiteTemplate::Sites(vec![1]),
                        from: vec![0],
                        to: vec![1],
                    },
                    1.0,
                ),
            ],
            assignment: vec![vec![0], vec![0]],
        };
        assert!(matches!(c.validate(), Err(CouplingError::OverlapViolation { .. })));
    }

    #[test]
    fn wrong_rate_and_side_effect_detected() {
        let r = contact_rates(1.0);
        let mut c = EventCoupling::independent(&r, 2).unwrap();
        c.transitions[0].1 = 5.0;
        assert!(matches!(c.validate(), Err(CouplingError::RateMismatch { .. })));

        let mut c = EventCoupling::independent(&r, 2).unwrap();
        let mut maps = c.structure.clone().into_mappings();
        let idx = maps.iter().position(|m| m.sites.len() == 1).unwrap();
        maps[idx].table = MapTable::from_fn(2, 1, |_| vec![0]).unwrap();
        let bad_death = maps[idx].clone();
        maps[idx] = LocalMapping::from_fn("kill-or-birth", bad_death.sites, 2, bad_death.rate, |p| {
            vec![1 - p[0]]
        })
        .unwrap();
        c.structure = EventStructure::new(maps).unwrap();
        assert!(matches!(c.validate(), Err(CouplingError::SideEffect { .. })));
    }

    #[test]
    fn duplicate_mappings_rejected() {
        let m = LocalMapping::from_fn("a", SiteTemplate::Sites(vec![0, 1]), 2, 1.0, |p| {
            vec![p[0], p[0].max(p[1])]
        })
        .unwrap();
        let mut swapped = LocalMapping::from_fn("b", SiteTemplate::Sites(vec![1, 0]), 2, 1.0, |p| {
            vec![p[1].max(p[0]), p[1]]
        })
        .unwrap();
        assert!(matches!(
            EventStructure::new(vec![m.clone(), swapped.clone()]),
            Err(EventError::DuplicateMapping(..))
        ));
        swapped.table = MapTable::identity(2, 2).unwrap();
        assert!(EventStructure::new(vec![m, swapped]).is_ok());
    }
}
