//! Command-line front end. [`run`] takes the argument vector and output
//! streams so it can be driven from tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use growthdual::colour::lift_model;
use growthdual::duality::{double_dual_check, dual_model, is_self_dual};
use growthdual::engine::{
    complete_convergence_test, critical_scan, dual_system, duality_holds, estimate_survival,
    evolve_forward, evolve_forward_recorded, sample_event_map, upper_invariant_density,
    PercolationGraph, System,
};
use growthdual::eventmodel::{validate_growth_model, GeometrySpec, GrowthModel, GrowthVerdict, DEFAULT_BUDGET};
use growthdual::modelfile::ModelFile;
use growthdual::pcclass::{check_cc_conditions, pc_witness, is_simple};
use growthdual::zoo;

#[derive(Parser, Debug)]
#[command(name = "growthdual", version, about = "Additive growth models: duality, lifts and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model file, or `zoo:NAME[:k=v,...]`
    model: String,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// `torus:NxM...` or `graph:n`; defaults to the model's geometry
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    /// Worker threads (default: all available)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct OutArg {
    /// Write to this file instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a model and report its structural properties
    Check {
        #[command(flatten)]
        model: ModelArg,
        /// Search for an isomorphism between the model and its dual
        #[arg(long)]
        self_dual: bool,
        /// Check the double-dual identification
        #[arg(long)]
        double_dual: bool,
    },
    /// Emit the dual model
    Dual {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Emit the multi-colour lift and its projection
    Lift {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run one trajectory (site changes as CSV), or the density from the top
    /// configuration with --density
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        /// `top`, `empty`, `single:SITE` or `single:SITE:TYPE`
        #[arg(long, default_value = "top")]
        initial: String,
        #[arg(long)]
        density: bool,
        /// Site whose density is estimated
        #[arg(long, default_value_t = 0)]
        site: usize,
        /// Number of equally spaced sample times in (0, horizon]
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Check the duality relation on sampled event maps over all initial pairs
    DualityTest {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 100)]
        maps: u64,
    },
    /// Compare coloured percolation with survival on sampled event maps
    Percolation {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 100)]
        maps: u64,
    },
    /// Estimate survival to the horizon
    Survival {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "single:0")]
        initial: String,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Survival over a parameter grid with coupled thinning
    Scan {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        param: String,
        /// Comma-separated values, sorted ascending
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value = "single:0")]
        initial: String,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Compare window laws from a start and from the top configuration
    Converge {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated window sites
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<usize>,
        #[arg(long, default_value = "single:0")]
        initial: String,
        #[arg(long, default_value_t = 1000)]
        replicates: usize,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// List built-in models, or export one as a model file
    Zoo {
        name: Option<String>,
        /// Parameter overrides `k=v`
        params: Vec<String>,
        #[command(flatten)]
        out: OutArg,
    },
}

/// A failure with its exit code.
struct Fail(i32, String);

fn usage(msg: impl ToString) -> Fail {
    Fail(2, msg.to_string())
}

fn invalid(msg: impl ToString) -> Fail {
    Fail(1, msg.to_string())
}

type Res<T> = Result<T, Fail>;

/// Runs the command line `argv` (program name first). Returns the exit code:
/// 0 on success, 1 on validation failure, 2 on usage errors.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn load_model(spec: &str) -> Res<GrowthModel> {
    if let Some(rest) = spec.strip_prefix("zoo:") {
        let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
        let overrides = parse_overrides(params.split(',').filter(|s| !s.is_empty()))?;
        return zoo::by_name(name, &overrides).map_err(usage);
    }
    let text = std::fs::read_to_string(spec).map_err(|e| usage(format!("{spec}: {e}")))?;
    ModelFile::from_json(&text).and_then(|f| f.to_model()).map_err(|e| invalid(format!("{spec}: {e}")))
}

fn parse_overrides<'a>(items: impl Iterator<Item = &'a str>) -> Res<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    for kv in items {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("expected k=v, got {kv:?}")))?;
        let v: f64 = v.parse().map_err(|_| usage(format!("{k}: {v:?} is not a number")))?;
        m.insert(k.to_string(), v);
    }
    Ok(m)
}

fn geometry(model: &GrowthModel, arg: &Option<String>) -> Res<GeometrySpec> {
    match arg {
        Some(g) => g.parse().map_err(usage),
        None => model
            .geometry()
            .cloned()
            .ok_or_else(|| usage("the model declares no geometry; pass --geometry")),
    }
}

fn initial(sys: &System, spec: &str) -> Res<Vec<u8>> {
    let lat = sys.lattice();
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[..] {
        ["top"] => Ok(sys.all_top()),
        ["empty"] => Ok(vec![0; sys.n_sites()]),
        ["single", x] | ["single", x, _] => {
            let x: usize = x.parse().map_err(|_| usage(format!("bad site in {spec:?}")))?;
            if x >= sys.n_sites() {
                return Err(usage(format!("site {x} out of range")));
            }
            let a = match parts.get(2) {
                Some(l) => lat.index_of(l).ok_or_else(|| usage(format!("unknown type {l:?}")))?,
                None => lat.top(),
            };
            Ok(sys.single(x, a))
        }
        _ => Err(usage(format!("initial configuration {spec:?}: expected top, empty or single:SITE[:TYPE]"))),
    }
}

fn system(model: &GrowthModel, sim: &SimArgs) -> Res<System> {
    if !(sim.horizon.is_finite() && sim.horizon >= 0.0) {
        return Err(usage("horizon must be a nonnegative number"));
    }
    System::new(model, &geometry(model, &sim.geometry)?).map_err(invalid)
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, text: &str) -> Res<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(invalid),
    }
}

fn with_threads<T: Send>(n: Option<usize>, f: impl FnOnce() -> T + Send) -> Res<T> {
    match n {
        None => Ok(f()),
        Some(0) => Err(usage("--threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(invalid)?;
            Ok(pool.install(f))
        }
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Res<i32> {
    match cmd {
        Command::Check { model, self_dual, double_dual } => {
            let m = load_model(&model.model)?;
            let (report, ok) = check(&m, self_dual, double_dual)?;
            out.write_all(report.as_bytes()).map_err(invalid)?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Dual { model, out: o } => {
            let m = load_model(&model.model)?;
            let (d, _) = dual_model(&m).map_err(invalid)?;
            emit(out, &o.output, &ModelFile::from_model(&d).to_json())?;
            Ok(0)
        }
        Command::Lift { model, out: o } => {
            let m = load_model(&model.model)?;
            let (l, x) = lift_model(&m).map_err(invalid)?;
            let mut f = ModelFile::from_model(&l);
            f.projection = Some(x.projection().to_vec());
            emit(out, &o.output, &f.to_json())?;
            Ok(0)
        }
        Command::Simulate { model, sim, initial: init, density, site, points, replicates, out: o } => {
            let m = load_model(&model.model)?;
            let sys = system(&m, &sim)?;
            let mut csv = String::new();
            if density {
                if points == 0 || replicates == 0 {
                    return Err(usage("--points and --replicates must be positive"));
                }
                let times: Vec<f64> = (1..=points).map(|k| sim.horizon * k as f64 / points as f64).collect();
                let r = with_threads(sim.threads, || upper_invariant_density(&sys, site, &times, replicates, sim.seed))?
                    .map_err(usage)?;
                csv.push_str("t,type,estimate,se\n");
                for p in &r.points {
                    let _ = writeln!(csv, "{:.6},{},{:.6},{:.6}", p.t, m.lattice().label(p.a), p.estimate, p.se);
                }
                if !r.monotone {
                    let _ = writeln!(err, "warning: density estimates are not monotone within 3 SE");
                }
            } else {
                let eta0 = initial(&sys, &init)?;
                let map = sample_event_map(&sys, sim.horizon, sim.seed);
                let traj = evolve_forward_recorded(&sys, &map.events, &eta0, sim.horizon);
                csv.push_str("t,site,type\n");
                for (x, &v) in eta0.iter().enumerate().filter(|(_, v)| **v != 0) {
                    let _ = writeln!(csv, "{:.6},{x},{}", 0.0, m.lattice().label(v as usize));
                }
                for &(t, x, v) in &traj.changes {
                    let _ = writeln!(csv, "{t:.6},{x},{}", m.lattice().label(v as usize));
                }
            }
            emit(out, &o.output, &csv)?;
            Ok(0)
        }
        Command::DualityTest { model, sim, maps } => {
            let m = load_model(&model.model)?;
            let sys = system(&m, &sim)?;
            let (ds, dl) = dual_system(&m, &sys).map_err(invalid)?;
            let n = sys.n_sites();
            let total = (sys.n_types() as f64).powi(n as i32) * (ds.n_types() as f64).powi(n as i32);
            if total > 1e6 {
                return Err(usage(format!("{total:.0} initial pairs is too many for an exhaustive test")));
            }
            let etas = all_configs(sys.n_types(), n);
            let zetas = all_configs(ds.n_types(), n);
            let violations: usize = with_threads(sim.threads, || {
                use rayon::prelude::*;
                (0..maps)
                    .into_par_iter()
                    .map(|s| {
                        let map = sample_event_map(&sys, sim.horizon, sim.seed.wrapping_add(s));
                        etas.iter()
                            .flat_map(|eta| zetas.iter().map(move |zeta| (eta, zeta)))
                            .filter(|(eta, zeta)| !duality_holds(&sys, &ds, &dl, &map.events, eta, zeta, sim.horizon))
                            .count()
                    })
                    .sum()
            })?;
            let _ = writeln!(
                out,
                "checked {} initial pairs on {maps} event maps: {violations} violations",
                etas.len() * zetas.len()
            );
            Ok(if violations == 0 { 0 } else { 1 })
        }
        Command::Percolation { model, sim, maps } => {
            let m = load_model(&model.model)?;
            let sys = system(&m, &sim)?;
            if !m.lattice().is_multi_colour() {
                return Err(invalid("percolation needs a multi-colour lattice"));
            }
            let prims: Vec<usize> = m.lattice().primitives().iter().collect();
            let (checked, mismatches) = with_threads(sim.threads, || {
                use rayon::prelude::*;
                (0..maps)
                    .into_par_iter()
                    .map(|s| {
                        let map = sample_event_map(&sys, sim.horizon, sim.seed.wrapping_add(s));
                        let g = PercolationGraph::build(&m, &sys, &map.events, sim.horizon)
                            .expect("multi-colour lattice");
                        let mut bad = 0;
                        for x in 0..sys.n_sites() {
                            for &a in &prims {
                                let alive = evolve_forward(&sys, &map.events, &sys.single(x, a), sim.horizon)
                                    .iter()
                                    .any(|&v| v != 0);
                                bad += (g.percolates(x, a) != alive) as usize;
                            }
                        }
                        (sys.n_sites() * prims.len(), bad)
                    })
                    .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            })?;
            let _ = writeln!(out, "checked {checked} starts on {maps} event maps: {mismatches} mismatches");
            Ok(if mismatches == 0 { 0 } else { 1 })
        }
        Command::Survival { model, sim, initial: init, replicates, out: o } => {
            let m = load_model(&model.model)?;
            let sys = system(&m, &sim)?;
            let eta0 = initial(&sys, &init)?;
            let s = with_threads(sim.threads, || estimate_survival(&sys, &eta0, sim.horizon, replicates, sim.seed))?;
            let params: Vec<String> = m.parameters().iter().map(|p| format!("{}={:.6}", p.name, p.value)).collect();
            let label = if params.is_empty() { "none".to_string() } else { params.join(";") };
            let mut csv = String::from("parameter,estimate,ci_low,ci_high,replicates\n");
            let _ = writeln!(csv, "{label},{:.6},{:.6},{:.6},{}", s.estimate, s.ci_low, s.ci_high, s.replicates);
            emit(out, &o.output, &csv)?;
            Ok(0)
        }
        Command::Scan { model, sim, param, grid, threshold, initial: init, replicates, out: o } => {
            let m = load_model(&model.model)?;
            if grid.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(usage("--grid must be sorted ascending"));
            }
            if m.parameter(&param).is_none() {
                return Err(usage(format!("model has no parameter {param:?}")));
            }
            let sys = system(&m, &sim)?;
            let eta0 = initial(&sys, &init)?;
            let g = geometry(&m, &sim.geometry)?;
            let r = with_threads(sim.threads, || {
                critical_scan(&m, &param, &grid, &g, &eta0, sim.horizon, replicates, sim.seed, threshold)
            })?
            .map_err(invalid)?;
            let mut csv = String::from("parameter,estimate,ci_low,ci_high,replicates\n");
            for p in &r.points {
                let s = p.survival;
                let _ = writeln!(csv, "{:.6},{:.6},{:.6},{:.6},{}", p.value, s.estimate, s.ci_low, s.ci_high, s.replicates);
            }
            emit(out, &o.output, &csv)?;
            match r.crossing {
                Some(c) => { let _ = writeln!(err, "crossing of {threshold:.6} at {param} = {c:.6}"); }
                None => { let _ = writeln!(err, "no crossing of {threshold:.6} on the grid"); }
            }
            let _ = writeln!(err, "pathwise monotone: {}", yes(r.pathwise_monotone()));
            Ok(0)
        }
        Command::Converge { model, sim, window, initial: init, replicates, tolerance, out: o } => {
            let m = load_model(&model.model)?;
            let sys = system(&m, &sim)?;
            let eta0 = initial(&sys, &init)?;
            let r = with_threads(sim.threads, || {
                complete_convergence_test(&m, &sys, &eta0, &window, sim.horizon, replicates, sim.seed, tolerance)
            })?
            .map_err(invalid)?;
            let w: Vec<String> = r.window.iter().map(|x| x.to_string()).collect();
            let mut csv = String::from("window,t,sigma_hat,tv,tolerance,verdict\n");
            let _ = writeln!(
                csv,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                w.join(";"),
                r.t,
                r.sigma_hat,
                r.tv,
                r.tolerance,
                if r.passed() { "pass" } else { "fail" }
            );
            emit(out, &o.output, &csv)?;
            Ok(if r.passed() { 0 } else { 1 })
        }
        Command::Zoo { name: None, .. } => {
            for e in zoo::CATALOGUE {
                let p: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let _ = writeln!(out, "{:<10} {:<40} {}", e.name, p.join(","), e.description);
            }
            Ok(0)
        }
        Command::Zoo { name: Some(name), params, out: o } => {
            let overrides = parse_overrides(params.iter().map(String::as_str))?;
            let m = zoo::by_name(&name, &overrides).map_err(usage)?;
            let mut f = ModelFile::from_model(&m);
            f.description = zoo::CATALOGUE.iter().find(|e| e.name == name).map(|e| e.description.to_string());
            emit(out, &o.output, &f.to_json())?;
            Ok(0)
        }
    }
}

fn all_configs(n_types: usize, n_sites: usize) -> Vec<Vec<u8>> {
    let total = n_types.pow(n_sites as u32);
    (0..total)
        .map(|mut c| {
            (0..n_sites)
                .map(|_| {
                    let v = (c % n_types) as u8;
                    c /= n_types;
                    v
                })
                .collect()
        })
        .collect()
}

/// Report text and whether every requested check passed.
fn check(m: &GrowthModel, self_dual: bool, double_dual: bool) -> Res<(String, bool)> {
    let lat = m.lattice();
    let mut r = String::new();
    let mut ok = true;
    let _ = writeln!(r, "model: {} ({} types, {} mappings)", m.name, lat.size(), m.mappings().len());
    match m.check_additive() {
        Ok(()) => {
            let _ = writeln!(r, "additive: yes");
        }
        Err(e) => {
            let _ = writeln!(r, "additive: no ({e})");
            return Ok((r, false));
        }
    }
    match validate_growth_model(m.structure(), lat, DEFAULT_BUDGET) {
        GrowthVerdict::Ok => {
            let _ = writeln!(r, "growth model: ok");
        }
        GrowthVerdict::Fail { reason, witness } => {
            ok = false;
            let _ = writeln!(r, "growth model: fail ({reason}; witness {witness:?})");
        }
        GrowthVerdict::Inconclusive { explored } => {
            let _ = writeln!(r, "growth model: inconclusive after {explored} configurations");
        }
    }
    let _ = writeln!(r, "attractive: {}", yes(m.is_attractive()));
    let _ = writeln!(r, "multi-colour: {}", yes(lat.is_multi_colour()));
    if lat.is_multi_colour() {
        let simple = is_simple(m).map_err(invalid)?;
        let _ = writeln!(r, "simple: {}", yes(simple));
        match pc_witness(m).map_err(invalid)? {
            None => {
                let _ = writeln!(r, "positive correlations: yes");
            }
            Some(w) => {
                let _ = writeln!(r, "positive correlations: no ({w:?})");
            }
        }
        let cc = check_cc_conditions(m).map_err(invalid)?;
        if cc.all_pass() {
            let _ = writeln!(r, "complete convergence conditions: pass");
        } else {
            let _ = writeln!(r, "complete convergence conditions: fail ({})", cc.failures().join(", "));
        }
    }
    if self_dual {
        match is_self_dual(m).map_err(invalid)? {
            Some(sigma) => {
                let (d, _) = dual_model(m).map_err(invalid)?;
                let pairs: Vec<String> = sigma
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| format!("{} -> {}", d.lattice().label(i), lat.label(b)))
                    .collect();
                let _ = writeln!(r, "self-dual: yes ({})", pairs.join(", "));
            }
            None => {
                ok = false;
                let _ = writeln!(r, "self-dual: no");
            }
        }
    }
    if double_dual {
        let rep = double_dual_check(m).map_err(invalid)?;
        ok &= rep.holds();
        let _ = writeln!(
            r,
            "double dual: {} (symmetry {}, commutation {})",
            if rep.holds() { "holds" } else { "fails" },
            yes(rep.symmetry_holds),
            yes(rep.commutes)
        );
    }
    Ok((r, ok))
}
