//! Command-line front end: `analyze`, `verify`, `radius`, `steer`, `connect`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::commutator::{default_taylor_step, verify_taylor, TaylorReport};
use crate::error::{Error, Result};
use crate::fields::{BoxDomain, BracketWord, DistributionSpec};
use crate::filtration::{analyze, local_frame, FiltrationReport};
use crate::reach::{
    certified_radius, connect, delta_max, estimate_bounds, formula_radius, probe_targets, steer, ConnectOptions,
    DPath, EndpointMap, PathManifest, SamplingBudget, SteerOptions,
};
use crate::scenario::{load_scenario, Scenario};

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "BRACKET_REACH_SEED";

#[derive(Debug, Parser)]
#[command(name = "bracket-reach", version, about = "Bracket filtrations, commutator flows and path synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Built-in scenario name or path to a scenario file.
    scenario: String,
    /// Override a scenario parameter, e.g. `--param lambda=0.02`.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Emit a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// Flow integration tolerance (local error per unit time).
    #[arg(long)]
    tol: Option<f64>,
    /// Longest bracket word considered.
    #[arg(long)]
    lmax: Option<usize>,
    /// Relative singular-value threshold for numerical ranks.
    #[arg(long = "rank-tol")]
    rank_tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filtration ranks on a sample grid, minimal depth and frame.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Lattice points per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Point at which the frame is selected (default: box centre).
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
    },
    /// Finite-difference Taylor check of commutator flows.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Bracket word such as `1,2`; repeatable. Default: all words up to lmax.
        #[arg(long)]
        word: Vec<String>,
        /// Base point of the Taylor check (default: box centre).
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Finite-difference step (default 0.01).
        #[arg(long)]
        h: Option<f64>,
    },
    /// Bounds, closed-form radius and measured reachable-ball certificate.
    Radius {
        #[command(flatten)]
        common: Common,
        /// Centre of the ball (default: box centre).
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Shift of the commutator families (default: largest admissible).
        #[arg(long)]
        delta: Option<f64>,
        /// Seed for Lipschitz sampling and probe targets.
        #[arg(long)]
        seed: Option<u64>,
        /// Random targets at 0.9 of the radius to steer to.
        #[arg(long, default_value_t = 0)]
        probes: usize,
        /// Lattice points per axis of the bounds neighbourhood.
        #[arg(long)]
        grid: Option<usize>,
        /// Half-width of the box about the centre on which the bounds are sampled.
        #[arg(long, default_value_t = DEFAULT_REGION)]
        region: f64,
        /// Constant K of the closed-form radius.
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        /// Constant K' of the closed-form radius.
        #[arg(long = "k-prime", default_value_t = 1.0)]
        k_prime: f64,
    },
    /// Steer from one point to a nearby target.
    Steer {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long)]
        delta: Option<f64>,
        /// Required endpoint accuracy.
        #[arg(long = "steer-tol")]
        steer_tol: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Directory for `path.csv` and `path.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for Lipschitz sampling.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Join two points through certified waypoints.
    Connect {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "steer-tol")]
        steer_tol: Option<f64>,
        #[arg(long = "min-radius")]
        min_radius: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for Lipschitz sampling.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Either a usage problem (exit 2) or a failed computation (exit 1).
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::UnknownScenario(_)
            | Error::InvalidArgument(_)
            | Error::InvalidIndex { .. }
            | Error::EmptyWord
            | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Runs the command line `args` (program name first), writing reports to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    match dispatch(cli.command, seed_env.as_deref(), out) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Check(msg)) => {
            let _ = writeln!(err, "failed: {msg}");
            EXIT_FAIL
        }
    }
}

/// Formats with 12 significant digits, dropping trailing zeros.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
    format!("({})", parts.join(", "))
}

/// Rounds every float in a JSON value to 12 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn emit_json(out: &mut dyn Write, value: &impl Serialize) -> Outcome {
    let v = serde_json::to_value(value).map_err(|e| Failure::Check(e.to_string()))?;
    let text = serde_json::to_string_pretty(&round_json(v)).map_err(|e| Failure::Check(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(EXIT_OK)
}

fn parse_point(text: &str, dim: usize, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    let values = text
        .trim()
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|_| Failure::Usage(format!("{what}: `{text}` is not a comma-separated list of numbers")))?;
    if values.len() != dim {
        return Err(Failure::Usage(format!("{what}: expected {dim} coordinates, found {}", values.len())));
    }
    Ok(values)
}

struct Loaded {
    scenario: Scenario,
    spec: DistributionSpec,
}

fn load(common: &Common) -> std::result::Result<Loaded, Failure> {
    let mut scenario = load_scenario(&common.scenario)?;
    for p in &common.params {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--param expects NAME=VALUE, got `{p}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("--param {name}: `{value}` is not a number")))?;
        scenario.set_param(name.trim(), value)?;
    }
    let spec = scenario.spec()?;
    Ok(Loaded { scenario, spec })
}

fn resolve_seed(flag: Option<u64>, env: Option<&str>, default: u64) -> std::result::Result<u64, Failure> {
    match env {
        Some(text) => text
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}=`{text}` is not an unsigned integer"))),
        None => Ok(flag.unwrap_or(default)),
    }
}

fn dispatch(command: Command, seed_env: Option<&str>, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Analyze { common, grid, at } => cmd_analyze(&common, grid, at.as_deref(), out),
        Command::Verify { common, word, at, h } => cmd_verify(&common, &word, at.as_deref(), h, out),
        Command::Radius {
            common,
            at,
            delta,
            seed,
            probes,
            grid,
            region,
            k,
            k_prime,
        } => {
            let loaded = load(&common)?;
            let seed = resolve_seed(seed, seed_env, loaded.scenario.defaults.seed)?;
            cmd_radius(&common, loaded, at.as_deref(), delta, seed, probes, (grid, region), (k, k_prime), out)
        }
        Command::Steer {
            common,
            from,
            to,
            delta,
            steer_tol,
            max_iter,
            out: dir,
            seed,
        } => {
            let loaded = load(&common)?;
            let seed = resolve_seed(seed, seed_env, loaded.scenario.defaults.seed)?;
            let mut opts = SteerOptions::default();
            if let Some(t) = steer_tol {
                opts.tol = t;
            }
            if let Some(m) = max_iter {
                opts.max_iter = m;
            }
            cmd_steer(&common, loaded, &from, &to, delta, opts, dir, seed, out)
        }
        Command::Connect {
            common,
            from,
            to,
            delta,
            steer_tol,
            min_radius,
            out: dir,
            seed,
        } => {
            let loaded = load(&common)?;
            let seed = resolve_seed(seed, seed_env, loaded.scenario.defaults.seed)?;
            cmd_connect(&common, loaded, &from, &to, delta, steer_tol, min_radius, dir, seed, out)
        }
    }
}

fn settings(common: &Common, scenario: &Scenario) -> (f64, usize, f64) {
    (
        common.tol.unwrap_or(scenario.defaults.tol),
        common.lmax.unwrap_or(scenario.defaults.lmax),
        common.rank_tol.unwrap_or(scenario.defaults.rank_tol),
    )
}

fn at_point(at: Option<&str>, spec: &DistributionSpec) -> std::result::Result<Vec<f64>, Failure> {
    match at {
        Some(text) => {
            let x = parse_point(text, spec.dim(), "--at")?;
            if !spec.domain().contains(&x) {
                return Err(Failure::Usage(format!("--at {} lies outside the domain box", fmt_point(&x))));
            }
            Ok(x)
        }
        None => Ok(spec.domain().center()),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_analyze(common: &Common, grid: Option<usize>, at: Option<&str>, out: &mut dyn Write) -> Outcome {
    let Loaded { scenario, spec } = load(common)?;
    let (_, lmax, rank_tol) = settings(common, &scenario);
    let grid = grid.unwrap_or(scenario.defaults.grid);
    let frame_point = at_point(at, &spec)?;
    let samples = spec.domain().grid(grid);
    let report = analyze(&spec, &samples, lmax, rank_tol, &frame_point)?;
    if common.json {
        return emit_json(out, &report);
    }
    print_analysis(&report, spec.generator_count(), out)?;
    Ok(EXIT_OK)
}

fn print_analysis(report: &FiltrationReport, p: usize, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "scenario {} (N = {}, p = {p}), {} samples, words up to length {}, rank tol {}",
        report.scenario,
        report.dim,
        report.samples.len(),
        report.lmax,
        fmt_num(report.rank_tol)
    )?;
    writeln!(out, "{:<7} {:<40} {:<12} gap at last level", "sample", "point", "ranks")?;
    for (i, s) in report.samples.iter().enumerate() {
        let ranks: Vec<String> = s.ranks.iter().map(|r| r.to_string()).collect();
        let last = s.ranks.len() - 1;
        let gap = match (s.kept_min[last], s.dropped_max[last]) {
            (Some(k), Some(d)) => format!("{} / {}", fmt_num(k), fmt_num(d)),
            (Some(k), None) => format!("{} / -", fmt_num(k)),
            _ => "-".into(),
        };
        writeln!(out, "{:<7} {:<40} {:<12} {}", i, fmt_point(&s.point), ranks.join(" "), gap)?;
    }
    match report.mu {
        Some(mu) => writeln!(out, "minimal depth: {mu}")?,
        None => writeln!(out, "minimal depth: not stabilized by length {}", report.lmax)?,
    }
    writeln!(out, "uniform: {}", yes_no(report.uniform))?;
    writeln!(out, "rank M: {}", report.rank)?;
    writeln!(out, "bracket generating: {}", yes_no(report.bracket_generating))?;
    if let Some(frame) = &report.frame {
        let words: Vec<String> = frame.words.iter().map(|w| w.to_string()).collect();
        writeln!(
            out,
            "frame at {}: {}  (det {} on rows {:?})",
            fmt_point(&frame.point),
            words.join(" "),
            fmt_num(frame.det),
            frame.rows.iter().map(|r| r + 1).collect::<Vec<_>>()
        )?;
    }
    if let Some(issue) = &report.frame_issue {
        writeln!(out, "no frame {issue}")?;
    }
    Ok(())
}

fn cmd_verify(common: &Common, words: &[String], at: Option<&str>, h: Option<f64>, out: &mut dyn Write) -> Outcome {
    let Loaded { scenario, spec } = load(common)?;
    let (tol, lmax, _) = settings(common, &scenario);
    let x0 = at_point(at, &spec)?;
    let words: Vec<BracketWord> = if words.is_empty() {
        BracketWord::all_up_to(spec.generator_count(), lmax)
    } else {
        words
            .iter()
            .map(|w| w.parse::<BracketWord>())
            .collect::<Result<Vec<_>>>()?
    };
    for w in &words {
        w.validate(spec.generator_count())?;
    }
    let reports = words
        .iter()
        .map(|w| verify_taylor(&spec, w, &x0, h.unwrap_or_else(|| default_taylor_step(w.len())), tol))
        .collect::<Result<Vec<TaylorReport>>>()?;
    let passed = reports.iter().all(TaylorReport::passed);
    if common.json {
        emit_json(out, &json!({ "scenario": spec.name(), "passed": passed, "reports": reports }))?;
    } else {
        for r in &reports {
            writeln!(out, "word {} at {}, step {}", r.word, fmt_point(&r.point), fmt_num(r.step))?;
            writeln!(out, "{:<6} {:<20} {:<20} {:<20} {:<12} result", "order", "|FD value|", "target", "error", "threshold")?;
            for o in &r.orders {
                writeln!(
                    out,
                    "{:<6} {:<20} {:<20} {:<20} {:<12} {}",
                    o.order,
                    fmt_num(o.norm),
                    fmt_num(o.target_norm),
                    fmt_num(o.error),
                    fmt_num(o.threshold),
                    if o.pass { "PASS" } else { "FAIL" }
                )?;
            }
        }
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAIL })
}

/// Default half-width of the bounds neighbourhood.
pub const DEFAULT_REGION: f64 = 0.1;

/// Box of half-width `h` about `y`, clipped to the domain.
fn neighbourhood(spec: &DistributionSpec, y: &[f64], h: f64) -> std::result::Result<BoxDomain, Failure> {
    if !(h > 0.0) {
        return Err(Failure::Usage(format!("--region must be positive, got {h}")));
    }
    let d = spec.domain();
    let lower = y.iter().zip(&d.lower).map(|(v, lo)| (v - h).max(*lo)).collect();
    let upper = y.iter().zip(&d.upper).map(|(v, hi)| (v + h).min(*hi)).collect();
    Ok(BoxDomain::new(lower, upper)?)
}

#[derive(Serialize)]
struct ProbeSummary {
    count: usize,
    steered: usize,
    max_endpoint_error: f64,
    failures: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_radius(
    common: &Common,
    loaded: Loaded,
    at: Option<&str>,
    delta: Option<f64>,
    seed: u64,
    probes: usize,
    (grid, region): (Option<usize>, f64),
    (k, k_prime): (f64, f64),
    out: &mut dyn Write,
) -> Outcome {
    use rayon::prelude::*;

    let Loaded { scenario, spec } = loaded;
    let (tol, lmax, rank_tol) = settings(common, &scenario);
    let y = at_point(at, &spec)?;
    let (mu, frame) = local_frame(&spec, &y, lmax, rank_tol)?;
    let m = frame.len();
    let neighbourhood = neighbourhood(&spec, &y, region)?;
    let bounds = estimate_bounds(
        &spec,
        &frame.words,
        &neighbourhood.grid(grid.unwrap_or(scenario.defaults.grid)),
        mu,
        rank_tol,
    )?;
    let dmax = delta_max(&spec, &frame.words, &frame.rows, &y, bounds.c1, tol)?;
    let formula = formula_radius(bounds.c0, bounds.c1, mu, m, dmax.min(0.999), k, k_prime)?;
    let delta = delta.unwrap_or(dmax);
    let map = EndpointMap::new(&spec, &frame.words, &frame.rows, delta, tol)?;
    let budget = SamplingBudget {
        seed,
        ..Default::default()
    };
    let cert = certified_radius(&map, &y, &budget)?;

    let probe = (probes > 0).then(|| {
        let targets = probe_targets(&y, &frame.rows, 0.9 * cert.radius, probes, seed ^ 0x5eed);
        let results: Vec<std::result::Result<f64, String>> = targets
            .par_iter()
            .map(|t| {
                steer(&map, &y, t, &SteerOptions::default())
                    .map(|s| s.path.endpoint_error)
                    .map_err(|e| e.to_string())
            })
            .collect();
        ProbeSummary {
            count: probes,
            steered: results.iter().filter(|r| r.is_ok()).count(),
            max_endpoint_error: results.iter().filter_map(|r| r.as_ref().ok()).fold(0.0, |a, b| a.max(*b)),
            failures: results.into_iter().filter_map(|r| r.err()).collect(),
        }
    });
    let ok = cert.holds() && probe.as_ref().is_none_or(|p| p.steered == p.count);

    if common.json {
        emit_json(
            out,
            &json!({
                "scenario": spec.name(),
                "center": y,
                "depth": mu,
                "frame": frame,
                "region": neighbourhood,
                "bounds": bounds,
                "delta_max": dmax,
                "formula": formula,
                "certificate": cert,
                "probes": probe,
            }),
        )?;
    } else {
        let words: Vec<String> = frame.words.iter().map(|w| w.to_string()).collect();
        writeln!(out, "center {} in scenario {}", fmt_point(&y), spec.name())?;
        writeln!(out, "depth {mu}, frame {} (det {})", words.join(" "), fmt_num(frame.det))?;
        writeln!(
            out,
            "bounds over {} samples within {} of the centre: C0 = {}, C1 = {} (derivatives up to order {})",
            bounds.samples,
            fmt_num(region),
            fmt_num(bounds.c0),
            fmt_num(bounds.c1),
            bounds.order
        )?;
        writeln!(out, "largest admissible delta: {}", fmt_num(dmax))?;
        writeln!(
            out,
            "closed-form radius (K = {}, K' = {}; non-certified, formula shape only): exponent {}, log10 delta_o = {}, log10 r_o = {}",
            fmt_num(k),
            fmt_num(k_prime),
            formula.exponent,
            fmt_num(formula.log10_delta_o),
            fmt_num(formula.log10_r_o)
        )?;
        writeln!(out, "certified radius at delta {}: {}", fmt_num(delta), fmt_num(cert.radius))?;
        writeln!(
            out,
            "  |J^-1| = {}, Lipschitz {} from {} samples in {} rounds",
            fmt_num(cert.inverse_norm),
            fmt_num(cert.lipschitz),
            cert.lipschitz_samples,
            cert.rounds
        )?;
        writeln!(
            out,
            "  condition 1: {} <= {}; condition 2: {} <= {}",
            fmt_num(cert.preimage_radius),
            fmt_num(cert.preimage_bound),
            fmt_num(cert.lipschitz),
            fmt_num(cert.lipschitz_bound)
        )?;
        if let Some(p) = &probe {
            writeln!(
                out,
                "probes at 0.9 r: {}/{} steered, max endpoint error {}",
                p.steered,
                p.count,
                fmt_num(p.max_endpoint_error)
            )?;
            for f in &p.failures {
                writeln!(out, "  probe failed: {f}")?;
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

fn emit_path(
    common: &Common,
    scenario: &Scenario,
    spec: &DistributionSpec,
    path: &DPath,
    tol: f64,
    certificates: Vec<Value>,
    dir: Option<PathBuf>,
    extra: Value,
    out: &mut dyn Write,
) -> Outcome {
    let check = path.validate(spec, tol)?;
    let manifest = PathManifest {
        scenario: scenario.name.clone(),
        params: scenario.params.clone(),
        tol,
        csv: "path.csv".into(),
        path: path.clone(),
        certificates,
    };
    if let Some(dir) = &dir {
        path.write(dir, "path", &manifest)?;
    }
    if common.json {
        emit_json(
            out,
            &json!({
                "scenario": spec.name(),
                "start": path.start,
                "target": path.target,
                "endpoint": path.endpoint,
                "endpoint_error": path.endpoint_error,
                "arcs": path.arcs,
                "total_time": path.total_time(),
                "validation": check,
                "details": extra,
            }),
        )?;
    } else {
        writeln!(out, "path from {} to {}", fmt_point(&path.start), fmt_point(&path.target))?;
        writeln!(
            out,
            "{} arcs, total time {}, endpoint {}, endpoint error {}",
            path.arcs.len(),
            fmt_num(path.total_time()),
            fmt_point(&path.endpoint),
            fmt_num(path.endpoint_error)
        )?;
        writeln!(
            out,
            "validation: chaining {}, max flow residual {} (bound {}), {}",
            if check.chained { "exact" } else { "BROKEN" },
            fmt_num(check.max_residual),
            fmt_num(check.residual_bound),
            if check.passed() { "PASS" } else { "FAIL" }
        )?;
        writeln!(out, "{:<6} {:<4} {:<20} end", "arc", "k", "duration")?;
        for (i, a) in path.arcs.iter().enumerate() {
            writeln!(out, "{:<6} {:<4} {:<20} {}", i, a.generator, fmt_num(a.duration), fmt_point(&a.end))?;
        }
        if let Some(dir) = &dir {
            writeln!(out, "wrote {} and {}", dir.join("path.csv").display(), dir.join("path.json").display())?;
        }
    }
    Ok(if check.passed() { EXIT_OK } else { EXIT_FAIL })
}

#[allow(clippy::too_many_arguments)]
fn cmd_steer(
    common: &Common,
    loaded: Loaded,
    from: &str,
    to: &str,
    delta: Option<f64>,
    opts: SteerOptions,
    dir: Option<PathBuf>,
    seed: u64,
    out: &mut dyn Write,
) -> Outcome {
    let Loaded { scenario, spec } = loaded;
    let (tol, lmax, rank_tol) = settings(common, &scenario);
    let y = parse_point(from, spec.dim(), "--from")?;
    let target = parse_point(to, spec.dim(), "--to")?;
    for p in [&y, &target] {
        if !spec.domain().contains(p) {
            return Err(Failure::Usage(format!("{} lies outside the domain box", fmt_point(p))));
        }
    }
    let (_, frame) = local_frame(&spec, &y, lmax, rank_tol)?;
    let delta = delta.unwrap_or(scenario.defaults.delta);
    let map = EndpointMap::new(&spec, &frame.words, &frame.rows, delta, tol)?;
    let cert = certified_radius(
        &map,
        &y,
        &SamplingBudget {
            seed,
            ..Default::default()
        },
    )
    .ok();
    let steered = steer(&map, &y, &target, &opts)?;
    let certificates = cert.iter().filter_map(|c| serde_json::to_value(c).ok()).collect();
    let extra = json!({
        "delta": delta,
        "frame": frame,
        "params": steered.params,
        "iterations": steered.iterations,
        "newton_residual": steered.residual,
        "certified_radius": cert.as_ref().map(|c| c.radius),
    });
    if !common.json {
        let words: Vec<String> = frame.words.iter().map(|w| w.to_string()).collect();
        writeln!(
            out,
            "frame {} at delta {}; Newton converged in {} iterations; s = {}",
            words.join(" "),
            fmt_num(delta),
            steered.iterations,
            fmt_point(&steered.params)
        )?;
        if let Some(c) = &cert {
            writeln!(out, "certified radius {} (target at distance {})", fmt_num(c.radius), fmt_num(crate::reach::path::distance(&y, &target)))?;
        }
    }
    emit_path(common, &scenario, &spec, &steered.path, opts.tol, certificates, dir, extra, out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_connect(
    common: &Common,
    loaded: Loaded,
    from: &str,
    to: &str,
    delta: Option<f64>,
    steer_tol: Option<f64>,
    min_radius: Option<f64>,
    dir: Option<PathBuf>,
    seed: u64,
    out: &mut dyn Write,
) -> Outcome {
    let Loaded { scenario, spec } = loaded;
    let (tol, lmax, rank_tol) = settings(common, &scenario);
    let x = parse_point(from, spec.dim(), "--from")?;
    let x2 = parse_point(to, spec.dim(), "--to")?;
    let mut opts = ConnectOptions {
        delta: delta.unwrap_or(scenario.defaults.delta),
        flow_tol: tol,
        rank_tol,
        lmax,
        min_radius: min_radius.unwrap_or(scenario.defaults.min_radius),
        budget: SamplingBudget {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    if let Some(t) = steer_tol {
        opts.steer.tol = t;
    }
    let c = connect(&spec, &x, &x2, &opts)?;
    let certificates = c.certificates.iter().filter_map(|c| serde_json::to_value(c).ok()).collect();
    let radii: Vec<f64> = c.certificates.iter().map(|c| c.radius).collect();
    let extra = json!({ "delta": opts.delta, "waypoints": c.waypoints, "radii": radii });
    if !common.json {
        writeln!(
            out,
            "{} waypoints at delta {}, radii from {} to {}",
            c.waypoints.len(),
            fmt_num(opts.delta),
            fmt_num(radii.iter().copied().fold(f64::INFINITY, f64::min)),
            fmt_num(radii.iter().copied().fold(0.0, f64::max))
        )?;
    }
    emit_path(common, &scenario, &spec, &c.path, opts.steer.tol, certificates, dir, extra, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(-2.0), "-2");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1.5e-9), "1.5e-9");
        assert_eq!(fmt_num(2.0f64.powi(60)), "1.15292150461e18");
    }

    #[test]
    fn seed_environment_wins() {
        assert_eq!(resolve_seed(Some(3), None, 0).ok(), Some(3));
        assert_eq!(resolve_seed(Some(3), Some("9"), 0).ok(), Some(9));
        assert_eq!(resolve_seed(None, None, 4).ok(), Some(4));
        assert!(resolve_seed(None, Some("x"), 0).is_err());
    }
}
