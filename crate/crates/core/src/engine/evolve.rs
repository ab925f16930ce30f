use std::sync::Arc;

use crate::duality::{dual_model, DualLattice};
use crate::eventmodel::GrowthModel;

use super::{EngineError, Event, System};

/// Forward trajectory stored as its initial state plus the list of site
/// changes, so quiet regions cost nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Vec<u8>,
    pub changes: Vec<(f64, u32, u8)>,
}

impl Trajectory {
    /// State at time `t` (changes at exactly `t` included).
    pub fn state_at(&self, t: f64) -> Vec<u8> {
        let mut c = self.initial.clone();
        for &(s, x, v) in &self.changes {
            if s > t {
                break;
            }
            c[x as usize] = v;
        }
        c
    }
}

/// `η_t` from `η_0`, applying in order every accepted event with time in `(0, t]`.
pub fn evolve_forward(sys: &System, events: &[Event], eta0: &[u8], t: f64) -> Vec<u8> {
    let mut c = eta0.to_vec();
    for e in events.iter().take_while(|e| e.time <= t) {
        if sys.accepts(e.instance as usize, e.mark) {
            sys.apply(e.instance as usize, &mut c);
        }
    }
    c
}

pub fn evolve_forward_recorded(sys: &System, events: &[Event], eta0: &[u8], t: f64) -> Trajectory {
    let mut c = eta0.to_vec();
    let mut changes = Vec::new();
    let g = sys.geometry();
    for e in events.iter().take_while(|e| e.time <= t) {
        let i = e.instance as usize;
        if !sys.accepts(i, e.mark) {
            continue;
        }
        let sites = g.instance_sites(i);
        let before: Vec<u8> = sites.iter().map(|&s| c[s as usize]).collect();
        sys.apply(i, &mut c);
        for (&s, b) in sites.iter().zip(before) {
            if c[s as usize] != b {
                changes.push((e.time, s, c[s as usize]));
            }
        }
    }
    Trajectory { initial: eta0.to_vec(), changes }
}

/// `ζ_t` from `ζ_0`: the dual tables applied to the same events in reverse
/// time order, so the dual at time `s` looks back from `t` to `t - s`.
pub fn evolve_dual(dual: &System, events: &[Event], zeta0: &[u8], t: f64) -> Vec<u8> {
    let k = events.partition_point(|e| e.time <= t);
    let mut c = zeta0.to_vec();
    for e in events[..k].iter().rev() {
        if dual.accepts(e.instance as usize, e.mark) {
            dual.apply(e.instance as usize, &mut c);
        }
    }
    c
}

/// The dual model compiled on the geometry of `sys`, with the same event
/// rates and thinning, so both read the same event map.
pub fn dual_system(model: &GrowthModel, sys: &System) -> Result<(System, DualLattice), EngineError> {
    let (d, dl) = dual_model(model)?;
    let ds = System::on(&d, sys.geometry_arc()).with_thinning_of(sys);
    Ok((ds, dl))
}

/// Checks `η_t ~ ζ_0 ⟺ η_0 ~ ζ_t` on one event map.
pub fn duality_holds(
    sys: &System,
    dual: &System,
    dl: &DualLattice,
    events: &[Event],
    eta0: &[u8],
    zeta0: &[u8],
    t: f64,
) -> bool {
    debug_assert!(Arc::ptr_eq(&sys.geometry_arc(), &dual.geometry_arc()));
    let eta_t = evolve_forward(sys, events, eta0, t);
    let zeta_t = evolve_dual(dual, events, zeta0, t);
    dl.compatible(&eta_t, zeta0) == dl.compatible(eta0, &zeta_t)
}

/// Space-time region that can influence `η_t(x)`: each member site with the
/// latest time `s` such that its state on `[0, s]` may matter.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyCone {
    pub t: f64,
    pub sites: Vec<(usize, f64)>,
}

impl DependencyCone {
    pub fn contains(&self, site: usize) -> bool {
        self.sites.iter().any(|&(s, _)| s == site)
    }
}

pub fn dependency_cone(sys: &System, events: &[Event], x: usize, t: f64) -> DependencyCone {
    let k = events.partition_point(|e| e.time <= t);
    let g = sys.geometry();
    let mut until = vec![f64::NEG_INFINITY; sys.n_sites()];
    until[x] = t;
    let mut sites = vec![(x, t)];
    for e in events[..k].iter().rev() {
        let i = e.instance as usize;
        if !sys.accepts(i, e.mark) {
            continue;
        }
        let inst = g.instance_sites(i);
        if inst.iter().any(|&s| until[s as usize] >= e.time) {
            for &s in inst {
                if until[s as usize] == f64::NEG_INFINITY {
                    until[s as usize] = e.time;
                    sites.push((s as usize, e.time));
                }
            }
        }
    }
    DependencyCone { t, sites }
}
