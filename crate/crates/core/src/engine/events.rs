use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::System;

/// One Poisson arrival: instance `instance` fires at `time`. The mark is a
/// uniform in `[0, 1)` carried along for thinning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub instance: u32,
    pub index: u32,
    pub mark: f64,
}

/// Seed of replicate `r` derived from a base seed.
pub fn replicate_seed(base: u64, r: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(r);
    rng.next_u64()
}

const SLAB: f64 = 1.0;

/// Lazily generated event sequence on `(0, horizon]`, sorted by
/// `(time, instance, index)`. Each instance draws from its own ChaCha stream,
/// so the `k`-th event of an instance depends only on the seed, the instance
/// and `k`.
pub struct EventStream {
    horizon: f64,
    rngs: Vec<ChaCha8Rng>,
    rates: Vec<f64>,
    next: Vec<Event>,
    slab_end: f64,
    buf: Vec<Event>,
    pos: usize,
}

impl EventStream {
    pub fn new(sys: &System, seed: u64, horizon: f64) -> Self {
        let n = sys.geometry().n_instances();
        let mut s = EventStream {
            horizon,
            rngs: Vec::with_capacity(n),
            rates: (0..n).map(|i| sys.instance_rate(i)).collect(),
            next: Vec::with_capacity(n),
            slab_end: 0.0,
            buf: Vec::new(),
            pos: 0,
        };
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            s.rngs.push(rng);
            s.next.push(Event { time: f64::INFINITY, instance: i as u32, index: 0, mark: 0.0 });
            s.draw(i, 0.0);
        }
        s
    }

    fn draw(&mut self, i: usize, from: f64) {
        let r = self.rates[i];
        let e = &mut self.next[i];
        if r <= 0.0 {
            e.time = f64::INFINITY;
            return;
        }
        let rng = &mut self.rngs[i];
        let u: f64 = rng.gen();
        e.time = from - (1.0 - u).ln() / r;
        e.mark = rng.gen();
    }

    fn refill(&mut self) -> bool {
        self.buf.clear();
        self.pos = 0;
        while self.buf.is_empty() && self.slab_end < self.horizon {
            let end = (self.slab_end + SLAB).min(self.horizon);
            for i in 0..self.next.len() {
                while self.next[i].time <= end {
                    let e = self.next[i];
                    self.buf.push(e);
                    self.next[i].index += 1;
                    self.draw(i, e.time);
                }
            }
            self.slab_end = end;
        }
        self.buf.sort_unstable_by(|a, b| {
            a.time
                .total_cmp(&b.time)
                .then(a.instance.cmp(&b.instance))
                .then(a.index.cmp(&b.index))
        });
        !self.buf.is_empty()
    }
}

impl Iterator for EventStream {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.pos == self.buf.len() && !self.refill() {
            return None;
        }
        self.pos += 1;
        Some(self.buf[self.pos - 1])
    }
}

/// A fully materialized event sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMap {
    pub seed: u64,
    pub horizon: f64,
    pub events: Vec<Event>,
}

impl EventMap {
    /// Events with time at most `t`.
    pub fn until(&self, t: f64) -> &[Event] {
        let k = self.events.partition_point(|e| e.time <= t);
        &self.events[..k]
    }
}

pub fn sample_event_map(sys: &System, horizon: f64, seed: u64) -> EventMap {
    EventMap { seed, horizon, events: EventStream::new(sys, seed, horizon).collect() }
}
