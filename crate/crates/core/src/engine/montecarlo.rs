use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::eventmodel::{GeometrySpec, GrowthModel};
use crate::pcclass::check_cc_conditions;

use super::{replicate_seed, EngineError, EventStream, System};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if p == 0.0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEstimate {
    pub replicates: usize,
    pub survivors: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SurvivalEstimate {
    pub fn from_counts(survivors: usize, replicates: usize) -> Self {
        let (ci_low, ci_high) = wilson(survivors, replicates, Z95);
        SurvivalEstimate {
            replicates,
            survivors,
            estimate: if replicates == 0 { 0.0 } else { survivors as f64 / replicates as f64 },
            ci_low,
            ci_high,
        }
    }

    /// Binomial standard error at the estimate.
    pub fn se(&self) -> f64 {
        let p = self.estimate;
        (p * (1.0 - p) / self.replicates.max(1) as f64).sqrt()
    }
}

fn active(c: &[u8]) -> usize {
    c.iter().filter(|&&v| v != 0).count()
}

/// Runs one replicate to `horizon` (stopping early at `0̄`); returns whether
/// the process is still nonzero.
pub fn survives(sys: &System, eta0: &[u8], horizon: f64, seed: u64) -> bool {
    let mut c = eta0.to_vec();
    let mut alive = active(&c) as isize;
    if alive == 0 {
        return false;
    }
    for e in EventStream::new(sys, seed, horizon) {
        if sys.accepts(e.instance as usize, e.mark) {
            alive += sys.apply(e.instance as usize, &mut c);
            if alive == 0 {
                return false;
            }
        }
    }
    true
}

pub fn estimate_survival(
    sys: &System,
    eta0: &[u8],
    horizon: f64,
    replicates: usize,
    seed: u64,
) -> SurvivalEstimate {
    let k = (0..replicates)
        .into_par_iter()
        .filter(|&r| survives(sys, eta0, horizon, replicate_seed(seed, r as u64)))
        .count();
    SurvivalEstimate::from_counts(k, replicates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub t: f64,
    pub a: usize,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub points: Vec<DensityPoint>,
    /// Whether every estimate is at least the next one minus three standard
    /// errors, as expected of a process started from the top.
    pub monotone: bool,
}

/// `P(η_t(site) ≥ a)` for every active `a` at each of `times`, starting from
/// the top type everywhere.
pub fn upper_invariant_density(
    sys: &System,
    site: usize,
    times: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<DensityReport, EngineError> {
    if site >= sys.n_sites() {
        return Err(EngineError::BadArgument(format!("site {site} out of range")));
    }
    if times.windows(2).any(|w| w[0] > w[1]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(EngineError::BadArgument("times must be sorted and nonnegative".into()));
    }
    let lat = sys.lattice();
    let n = sys.n_types();
    let horizon = times.last().copied().unwrap_or(0.0);
    // states[r][k] = η_{times[k]}(site) in replicate r
    let states: Vec<Vec<u8>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut c = sys.all_top();
            let mut out = Vec::with_capacity(times.len());
            let mut k = 0;
            for e in EventStream::new(sys, replicate_seed(seed, r as u64), horizon) {
                while k < times.len() && times[k] < e.time {
                    out.push(c[site]);
                    k += 1;
                }
                if sys.accepts(e.instance as usize, e.mark) {
                    sys.apply(e.instance as usize, &mut c);
                }
            }
            out.resize(times.len(), c[site]);
            out
        })
        .collect();
    let mut points = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        for a in 1..n {
            let hits = states.iter().filter(|s| lat.leq(a, s[k] as usize)).count();
            let p = hits as f64 / replicates.max(1) as f64;
            let se = (p * (1.0 - p) / replicates.max(1) as f64).sqrt();
            points.push(DensityPoint { t, a, estimate: p, se });
        }
    }
    let m = n - 1;
    let monotone = m == 0
        || points.chunks(m).collect::<Vec<_>>().windows(2).all(|w| {
            w[0].iter().zip(w[1]).all(|(p, q)| p.estimate >= q.estimate - 3.0 * p.se.max(q.se))
        });
    Ok(DensityReport { points, monotone })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub window: Vec<usize>,
    pub t: f64,
    pub sigma_hat: f64,
    pub tv: f64,
    pub tolerance: f64,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.tv <= self.tolerance
    }
}

fn window_law(
    sys: &System,
    eta0: &[u8],
    window: &[usize],
    t: f64,
    replicates: std::ops::Range<usize>,
    seed: u64,
) -> (BTreeMap<u64, usize>, usize) {
    let n = sys.n_types() as u64;
    let runs: Vec<(u64, bool)> = replicates
        .into_par_iter()
        .map(|r| {
            let mut c = eta0.to_vec();
            let mut alive = active(&c) as isize;
            for e in EventStream::new(sys, replicate_seed(seed, r as u64), t) {
                if alive == 0 {
                    break;
                }
                if sys.accepts(e.instance as usize, e.mark) {
                    alive += sys.apply(e.instance as usize, &mut c);
                }
            }
            let code = window.iter().rev().fold(0, |acc, &x| acc * n + c[x] as u64);
            (code, alive > 0)
        })
        .collect();
    let mut law = BTreeMap::new();
    for &(code, _) in &runs {
        *law.entry(code).or_insert(0) += 1;
    }
    (law, runs.iter().filter(|r| r.1).count())
}

/// Compares the window law of `η_t` from `eta0` with
/// `(1−σ̂)δ₀ + σ̂·(window law from the top configuration)` in total variation,
/// where `σ̂` is the fraction of runs from `eta0` not at `0̄` at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn complete_convergence_test(
    model: &GrowthModel,
    sys: &System,
    eta0: &[u8],
    window: &[usize],
    t: f64,
    replicates: usize,
    seed: u64,
    tolerance: f64,
) -> Result<ConvergenceReport, EngineError> {
    let report = check_cc_conditions(model)?;
    if !report.all_pass() {
        return Err(EngineError::PreconditionFailed(report.failures().join(", ")));
    }
    if window.is_empty() || window.iter().any(|&x| x >= sys.n_sites()) || replicates == 0 {
        return Err(EngineError::BadArgument("empty or out-of-range window, or no replicates".into()));
    }
    if (sys.n_types() as f64).powi(window.len() as i32) > u64::MAX as f64 {
        return Err(EngineError::BadArgument("window too large".into()));
    }
    let (from_eta, alive) = window_law(sys, eta0, window, t, 0..replicates, seed);
    let (from_top, _) =
        window_law(sys, &sys.all_top(), window, t, replicates..2 * replicates, seed);
    let n = replicates as f64;
    let sigma_hat = alive as f64 / n;
    let mut codes: Vec<u64> = from_eta.keys().chain(from_top.keys()).copied().collect();
    codes.push(0);
    codes.sort_unstable();
    codes.dedup();
    let tv = 0.5
        * codes
            .iter()
            .map(|c| {
                let p = *from_eta.get(c).unwrap_or(&0) as f64 / n;
                let q = *from_top.get(c).unwrap_or(&0) as f64 / n;
                let mix = sigma_hat * q + if *c == 0 { 1.0 - sigma_hat } else { 0.0 };
                (p - mix).abs()
            })
            .sum::<f64>();
    Ok(ConvergenceReport { window: window.to_vec(), t, sigma_hat, tv, tolerance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub value: f64,
    pub survival: SurvivalEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub parameter: String,
    pub points: Vec<ScanPoint>,
    /// `outcomes[r][k]`: replicate `r` survived at grid point `k`.
    pub outcomes: Vec<Vec<bool>>,
    pub threshold: f64,
    /// First parameter value at which the estimate reaches `threshold`,
    /// linearly interpolated between grid points.
    pub crossing: Option<f64>,
}

impl ScanResult {
    /// Whether, in every replicate, survival at a smaller parameter value
    /// implies survival at every larger one.
    pub fn pathwise_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&i, &j| self.points[i].value.total_cmp(&self.points[j].value));
        self.outcomes
            .iter()
            .all(|o| order.windows(2).all(|w| !o[w[0]] || o[w[1]]))
    }
}

/// Survival over a grid of values of one parameter. Every replicate draws a
/// single event stream for the largest grid value and thins it for the
/// others, so all grid points see coupled realizations.
#[allow(clippy::too_many_arguments)]
pub fn critical_scan(
    model: &GrowthModel,
    parameter: &str,
    grid: &[f64],
    geometry: &GeometrySpec,
    eta0: &[u8],
    horizon: f64,
    replicates: usize,
    seed: u64,
    threshold: f64,
) -> Result<ScanResult, EngineError> {
    if grid.is_empty() {
        return Err(EngineError::BadArgument("empty grid".into()));
    }
    let top = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let envelope = System::new(&model.with_parameter(parameter, top)?, geometry)?;
    if eta0.len() != envelope.n_sites() {
        return Err(EngineError::BadArgument("initial configuration does not fit the geometry".into()));
    }
    let systems: Vec<System> = grid
        .iter()
        .map(|&v| System::thinned_from(&model.with_parameter(parameter, v)?, &envelope))
        .collect::<Result<_, _>>()?;
    let start = active(eta0) as isize;
    let outcomes: Vec<Vec<bool>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut configs: Vec<Vec<u8>> = vec![eta0.to_vec(); systems.len()];
            let mut alive = vec![start; systems.len()];
            let mut running = if start > 0 { systems.len() } else { 0 };
            for e in EventStream::new(&envelope, replicate_seed(seed, r as u64), horizon) {
                if running == 0 {
                    break;
                }
                for (k, s) in systems.iter().enumerate() {
                    if alive[k] > 0 && s.accepts(e.instance as usize, e.mark) {
                        alive[k] += s.apply(e.instance as usize, &mut configs[k]);
                        if alive[k] == 0 {
                            running -= 1;
                        }
                    }
                }
            }
            alive.iter().map(|&a| a > 0).collect()
        })
        .collect();
    let points: Vec<ScanPoint> = grid
        .iter()
        .enumerate()
        .map(|(k, &value)| ScanPoint {
            value,
            survival: SurvivalEstimate::from_counts(
                outcomes.iter().filter(|o| o[k]).count(),
                replicates,
            ),
        })
        .collect();
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|p| (p.value, p.survival.estimate)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let crossing = sorted.iter().enumerate().find(|(_, p)| p.1 >= threshold).map(|(i, &(v, p))| {
        if i == 0 {
            v
        } else {
            let (v0, p0) = sorted[i - 1];
            v0 + (v - v0) * (threshold - p0) / (p - p0)
        }
    });
    Ok(ScanResult { parameter: parameter.to_string(), points, outcomes, threshold, crossing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        // textbook value for 30/100
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3, "{lo} {hi}");
        assert_eq!(wilson(0, 10, Z95).0, 0.0);
        assert_eq!(wilson(10, 10, Z95).1, 1.0);
    }

    #[test]
    fn single_site_pure_death_survival() {
        let m = zoo::contact(0.0, 1).unwrap();
        let s = System::new(&m, &GeometrySpec::cycle(3)).unwrap();
        let n = 20000;
        let est = estimate_survival(&s, &s.single(0, 1), 1.0, n, 4);
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((est.estimate - p).abs() < 4.0 * se, "{est:?}");
        assert_eq!(est, estimate_survival(&s, &s.single(0, 1), 1.0, n, 4));
    }

    #[test]
    fn pure_death_density_decays_exponentially() {
        let m = zoo::contact(0.0, 1).unwrap();
        let s = System::new(&m, &GeometrySpec::cycle(3)).unwrap();
        let times = [0.0, 0.5, 1.0, 2.0];
        let r = upper_invariant_density(&s, 0, &times, 20000, 2).unwrap();
        assert!(r.monotone);
        for p in &r.points {
            let want = (-p.t).exp();
            assert!((p.estimate - want).abs() <= 4.0 * p.se.max(1e-3), "{p:?}");
        }
    }

    #[test]
    fn empty_start_converges_trivially() {
        let m = zoo::contact(2.0, 1).unwrap();
        let s = System::new(&m, &GeometrySpec::cycle(20)).unwrap();
        let r = complete_convergence_test(&m, &s, &[0; 20], &[0, 1, 2], 5.0, 200, 1, 0.05).unwrap();
        assert_eq!(r.sigma_hat, 0.0);
        assert_eq!(r.tv, 0.0);
        let dandelion = zoo::by_name("dandelion", &BTreeMap::new()).unwrap();
        let ds = System::new(&dandelion, dandelion.geometry().unwrap()).unwrap();
        assert!(matches!(
            complete_convergence_test(&dandelion, &ds, &ds.all_top(), &[0], 1.0, 10, 1, 0.05),
            Err(EngineError::PreconditionFailed(_))
        ));
    }

    #[test]
    fn scan_is_pathwise_monotone() {
        let m = zoo::contact(1.0, 1).unwrap();
        let g = GeometrySpec::cycle(30);
        let mut eta0 = vec![0; 30];
        eta0[0] = 1;
        let r = critical_scan(&m, "lambda", &[0.0, 1.0, 2.0, 3.0], &g, &eta0, 10.0, 300, 3, 0.5).unwrap();
        assert!(r.pathwise_monotone());
        assert!(r.points[3].survival.estimate > r.points[0].survival.estimate);
        assert!(r.crossing.is_some());
        // thinning a scan point reproduces the same marginal law as direct sampling
        let direct = estimate_survival(&System::new(&m.with_parameter("lambda", 2.0).unwrap(), &g).unwrap(), &eta0, 10.0, 300, 3);
        assert!((direct.estimate - r.points[2].survival.estimate).abs() < 5.0 * direct.se().max(0.02));
    }
}
