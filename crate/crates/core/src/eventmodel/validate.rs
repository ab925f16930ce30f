use std::collections::{HashSet, VecDeque};

use super::{EventStructure, SiteTemplate};
use crate::typelattice::TypeLattice;

/// Default node budget for the reachability search.
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrowthVerdict {
    Ok,
    Fail { reason: String, witness: Vec<u8> },
    Inconclusive { explored: usize },
}

impl GrowthVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, GrowthVerdict::Ok)
    }
}

/// Checks the growth-model axioms: `0` is the lattice minimum, every mapping
/// fixes the all-passive configuration, and from each single primitive the
/// all-passive configuration is reachable on a small ball.
///
/// Reachability is a breadth-first search over configurations of the ball,
/// stepping through every instance of every mapping with positive rate.
/// `Fail` means the search space was exhausted without reaching `0̄`;
/// `Inconclusive` means the budget ran out first.
pub fn validate_growth_model(
    s: &EventStructure,
    lattice: &TypeLattice,
    budget: usize,
) -> GrowthVerdict {
    if let Some(a) = (0..lattice.size()).find(|&a| !lattice.leq(0, a)) {
        return GrowthVerdict::Fail {
            reason: format!("type {} is below the passive type", lattice.label(a)),
            witness: vec![a as u8],
        };
    }
    for m in s.mappings() {
        if !m.table.fixes_passive() {
            return GrowthVerdict::Fail {
                reason: format!("mapping {:?} does not fix the passive configuration", m.label),
                witness: m.table.decode(m.table.apply_code(0)),
            };
        }
    }

    let ball = Ball::new(s);
    let mut explored = 0;
    for start_site in ball.starts.clone() {
        for a in lattice.primitives() {
            let mut start = vec![0u8; ball.n_sites];
            start[start_site] = a as u8;
            match ball.reaches_passive(s, start.clone(), budget, &mut explored) {
                Some(true) => {}
                Some(false) => {
                    return GrowthVerdict::Fail {
                        reason: format!(
                            "passive configuration unreachable from {} at a single site",
                            lattice.label(a)
                        ),
                        witness: start,
                    }
                }
                None => return GrowthVerdict::Inconclusive { explored },
            }
        }
    }
    GrowthVerdict::Ok
}

/// Finite window used by the search: sites and concrete mapping instances.
struct Ball {
    n_sites: usize,
    starts: Vec<usize>,
    instances: Vec<(usize, Vec<usize>)>,
}

impl Ball {
    fn new(s: &EventStructure) -> Self {
        let live: Vec<_> = s.mappings().iter().enumerate().filter(|(_, m)| m.rate > 0.0).collect();
        match s.mappings().first().map(|m| &m.sites) {
            Some(SiteTemplate::Offsets(o)) => {
                let d = o[0].len();
                let r = s.mappings().iter().map(|m| m.sites.range()).max().unwrap_or(1).max(1);
                let side = (2 * r + 1) as usize;
                let n_sites = side.pow(d as u32);
                let index = |c: &[i64]| -> Option<usize> {
                    c.iter().try_fold(0usize, |acc, &x| {
                        (-r..=r).contains(&x).then(|| acc * side + (x + r) as usize)
                    })
                };
                let mut instances = Vec::new();
                for base in 0..n_sites {
                    let mut t = vec![0i64; d];
                    let mut b = base;
                    for k in (0..d).rev() {
                        t[k] = (b % side) as i64 - r;
                        b /= side;
                    }
                    for &(i, m) in &live {
                        let sites: Option<Vec<usize>> = m
                            .sites
                            .keys()
                            .iter()
                            .map(|off| {
                                let c: Vec<i64> = off.iter().zip(&t).map(|(o, x)| o + x).collect();
                                index(&c)
                            })
                            .collect();
                        if let Some(sites) = sites {
                            instances.push((i, sites));
                        }
                    }
                }
                let origin = index(&vec![0; d]).unwrap();
                Ball {
                    n_sites,
                    starts: vec![origin],
                    instances,
                }
            }
            Some(SiteTemplate::Sites(_)) => {
                let mut all: Vec<usize> = s
                    .mappings()
                    .iter()
                    .flat_map(|m| match &m.sites {
                        SiteTemplate::Sites(v) => v.clone(),
                        SiteTemplate::Offsets(_) => Vec::new(),
                    })
                    .collect();
                all.sort_unstable();
                all.dedup();
                let pos = |x: usize| all.binary_search(&x).unwrap();
                let instances = live
                    .iter()
                    .filter_map(|&(i, m)| match &m.sites {
                        SiteTemplate::Sites(v) => Some((i, v.iter().map(|&x| pos(x)).collect())),
                        SiteTemplate::Offsets(_) => None,
                    })
                    .collect();
                Ball {
                    n_sites: all.len(),
                    starts: (0..all.len()).collect(),
                    instances,
                }
            }
            None => Ball {
                n_sites: 1,
                starts: vec![0],
                instances: Vec::new(),
            },
        }
    }

    /// `Some(true)` if `0̄` is reachable, `Some(false)` if provably not,
    /// `None` when the budget runs out.
    fn reaches_passive(
        &self,
        s: &EventStructure,
        start: Vec<u8>,
        budget: usize,
        explored: &mut usize,
    ) -> Option<bool> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back(start);
        let mut local = Vec::new();
        while let Some(cfg) = queue.pop_front() {
            *explored += 1;
            if *explored > budget {
                return None;
            }
            for (i, sites) in &self.instances {
                let table = &s.mappings()[*i].table;
                local.clear();
                local.extend(sites.iter().map(|&x| cfg[x]));
                let out = table.decode(table.apply_code(table.encode(&local)));
                if out == local {
                    continue;
                }
                let mut next = cfg.clone();
                for (&x, &v) in sites.iter().zip(&out) {
                    next[x] = v;
                }
                if next.iter().all(|&v| v == 0) {
                    return Some(true);
                }
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        Some(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventmodel::LocalMapping;

    fn off(v: &[i64]) -> SiteTemplate {
        SiteTemplate::Offsets(v.iter().map(|&x| vec![x]).collect())
    }

    fn contact(lambda: f64) -> EventStructure {
        EventStructure::new(vec![
            LocalMapping::from_fn("death", off(&[0]), 2, 1.0, |_| vec![0]).unwrap(),
            LocalMapping::from_fn("right", off(&[0, 1]), 2, lambda, |p| vec![p[0], p[0].max(p[1])])
                .unwrap(),
            LocalMapping::from_fn("left", off(&[0, -1]), 2, lambda, |p| vec![p[0], p[0].max(p[1])])
                .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn contact_is_a_growth_model() {
        let lat = TypeLattice::chain(1);
        assert_eq!(validate_growth_model(&contact(2.0), &lat, DEFAULT_BUDGET), GrowthVerdict::Ok);
        assert_eq!(validate_growth_model(&contact(0.0), &lat, DEFAULT_BUDGET), GrowthVerdict::Ok);
    }

    #[test]
    fn spontaneous_birth_is_not_absorbing() {
        let lat = TypeLattice::chain(1);
        let s = EventStructure::new(vec![
            LocalMapping::from_fn("birth", off(&[0]), 2, 1.0, |_| vec![1]).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            validate_growth_model(&s, &lat, DEFAULT_BUDGET),
            GrowthVerdict::Fail { .. }
        ));
    }

    #[test]
    fn immortal_particles_fail() {
        let lat = TypeLattice::chain(1);
        let s = EventStructure::new(vec![LocalMapping::from_fn(
            "spread",
            off(&[0, 1]),
            2,
            1.0,
            |p| vec![p[0], p[0].max(p[1])],
        )
        .unwrap()])
        .unwrap();
        let v = validate_growth_model(&s, &lat, DEFAULT_BUDGET);
        assert!(matches!(v, GrowthVerdict::Fail { .. }), "{v:?}");
    }

    #[test]
    fn tiny_budget_is_inconclusive() {
        let lat = TypeLattice::chain(2);
        // only the 1 can die; a 2 must first be demoted
        let s = EventStructure::new(vec![
            LocalMapping::from_fn("kill 1", off(&[0]), 3, 1.0, |p| vec![if p[0] == 1 { 0 } else { p[0] }])
                .unwrap(),
            LocalMapping::from_fn("demote", off(&[0]), 3, 1.0, |p| vec![p[0].min(1)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(validate_growth_model(&s, &lat, DEFAULT_BUDGET), GrowthVerdict::Ok);
        assert!(matches!(
            validate_growth_model(&s, &lat, 1),
            GrowthVerdict::Inconclusive { .. }
        ));
    }
}
