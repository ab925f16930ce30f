use std::collections::VecDeque;

use crate::bitset::TypeSet;
use crate::eventmodel::GrowthModel;
use crate::pcclass::produces;

use super::{EngineError, Event, System};

/// A maximal time interval at one site with no event touching it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub site: u32,
    pub start: f64,
    /// `INFINITY` for segments still open at the graph's time.
    pub end: f64,
}

/// Space-time percolation structure of a multi-colour model: vertical
/// segments carry every primitive colour unchanged, and each event links the
/// colour-`a` segment entering position `x` to the colour-`b` segment leaving
/// position `y` whenever `(x,a)` produces `(y,b)`.
#[derive(Debug, Clone)]
pub struct PercolationGraph {
    pub t: f64,
    pub segments: Vec<Segment>,
    edges: Vec<Vec<(u8, u32, u8)>>,
    first: Vec<u32>,
    open: Vec<u32>,
}

impl PercolationGraph {
    pub fn build(model: &GrowthModel, sys: &System, events: &[Event], t: f64) -> Result<Self, EngineError> {
        let lat = model.lattice();
        let g = sys.geometry();
        // productions[mapping][position] = [(a, y, b)]
        let mut productions = Vec::new();
        for e in model.mappings() {
            let mut per_pos = Vec::new();
            for x in 0..e.sites.len() {
                let mut v = Vec::new();
                for a in lat.primitives() {
                    for (y, b) in produces(lat, &e.table, x, a)? {
                        v.push((a as u8, y, b as u8));
                    }
                }
                per_pos.push(v);
            }
            productions.push(per_pos);
        }

        let n = sys.n_sites();
        let mut segments: Vec<Segment> =
            (0..n).map(|s| Segment { site: s as u32, start: 0.0, end: f64::INFINITY }).collect();
        let mut edges = vec![Vec::new(); n];
        let first: Vec<u32> = (0..n as u32).collect();
        let mut current = first.clone();
        let mut fresh = Vec::new();
        for e in events.iter().take_while(|e| e.time <= t) {
            let i = e.instance as usize;
            if !sys.accepts(i, e.mark) {
                continue;
            }
            let sites = g.instance_sites(i);
            fresh.clear();
            for &s in sites {
                segments[current[s as usize] as usize].end = e.time;
                fresh.push(segments.len() as u32);
                segments.push(Segment { site: s, start: e.time, end: f64::INFINITY });
                edges.push(Vec::new());
            }
            for (x, &s) in sites.iter().enumerate() {
                let from = current[s as usize] as usize;
                for &(a, y, b) in &productions[g.instance_mapping(i)][x] {
                    edges[from].push((a, fresh[y], b));
                }
            }
            for (&s, &f) in sites.iter().zip(&fresh) {
                current[s as usize] = f;
            }
        }
        Ok(PercolationGraph { t, segments, edges, first, open: current })
    }

    /// Coloured edges `(a, target, b)` leaving segment `seg` at its end.
    pub fn edges(&self, seg: usize) -> &[(u8, u32, u8)] {
        &self.edges[seg]
    }

    /// The segment of site `x` starting at time 0.
    pub fn initial_segment(&self, x: usize) -> usize {
        self.first[x] as usize
    }

    /// Whether a colour path leads from `(x, 0)` with primitive colour `a`
    /// to time `t`.
    pub fn percolates(&self, x: usize, a: usize) -> bool {
        let mut seen = vec![TypeSet::EMPTY; self.segments.len()];
        let mut queue = VecDeque::new();
        seen[self.first[x] as usize].insert(a);
        queue.push_back((self.first[x], a as u8));
        while let Some((seg, c)) = queue.pop_front() {
            if self.segments[seg as usize].end == f64::INFINITY {
                debug_assert_eq!(self.open[self.segments[seg as usize].site as usize], seg);
                return true;
            }
            for &(from, to, b) in &self.edges[seg as usize] {
                if from == c && !seen[to as usize].contains(b as usize) {
                    seen[to as usize].insert(b as usize);
                    queue.push_back((to, b));
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{evolve_forward, sample_event_map};
    use crate::eventmodel::GeometrySpec;
    use crate::zoo;

    #[test]
    fn agrees_with_forward_evolution() {
        for m in [
            zoo::contact(1.8, 1).unwrap(),
            zoo::two_stage(2.5, 1.0, 0.3, 1).unwrap(),
            zoo::bipartite(1.5, 1).unwrap(),
        ] {
            let s = System::new(&m, &GeometrySpec::cycle(16)).unwrap();
            for seed in 0..15 {
                let map = sample_event_map(&s, 4.0, seed);
                let g = PercolationGraph::build(&m, &s, &map.events, 4.0).unwrap();
                for a in m.lattice().primitives() {
                    let alive = evolve_forward(&s, &map.events, &s.single(3, a), 4.0)
                        .iter()
                        .any(|&v| v != 0);
                    assert_eq!(g.percolates(3, a), alive, "{} seed {seed} a {a}", m.name);
                }
            }
        }
    }
}
