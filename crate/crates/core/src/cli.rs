//! Command-line front end.
//!
//! Every command resolves its settings in three layers: built-in defaults for
//! the chosen system, then an optional `--config` JSON file, then flags. The
//! fully resolved configuration is written next to the main output as
//! `<output>.run.json`, so feeding its `config` object back through
//! `--config` reproduces the run.
//!
//! Exit codes: 0 success, 2 invalid input, 3 simulation divergence, 4
//! discovery divergence.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analyze::stability::stability_report;
use crate::analyze::sweep::{derive_seed, run_sweep, CellStatus, SweepSpec, NOISE_STREAM};
use crate::analyze::{compare_support, l1_error};
use crate::data::Dataset;
use crate::dictionary::{monomials, standard_library, variable_names, Library};
use crate::discover::{discover, pretty_print};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{DiscoveryConfig, Method, Solver};
use crate::simulate::{add_noise, simulate, subsample, System, SystemSpec};
use crate::unroll::{probe_slope, truncation_probe};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SIMULATION_DIVERGED: i32 = 3;
pub const EXIT_DISCOVERY_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "unrolled-sindy", version, about = "Sparse equation discovery with unrolled integrators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a reference dataset.
    Simulate(SimulateArgs),
    /// Fit a sparse model to a dataset.
    Discover(DiscoverArgs),
    /// Run an (h, K, sigma) grid of discoveries.
    Sweep(SweepArgs),
    /// Classify (method, h, K) by absolute stability at a state.
    Stability(StabilityArgs),
    /// Local truncation error of the unrolled schemes on u' = u.
    ProbeTruncation(ProbeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Recording interval.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    substeps: Option<usize>,
    /// ODE initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Use this system's library and report the error against its ground truth.
    #[arg(long)]
    system: Option<String>,
    /// Library JSON file, used when no system is named.
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha_th: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Keep every n-th snapshot.
    #[arg(long)]
    h_stride: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Retry with the gradient solver if the unrolled prediction diverges.
    #[arg(long)]
    fallback_sgd: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record per-cell wall-clock time.
    #[arg(long)]
    runtime: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    state: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "K", value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub system: System,
    pub simulation: SystemSpec,
    pub sigma: f64,
    pub seed: u64,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoverConfig {
    pub dataset: PathBuf,
    pub system: Option<System>,
    pub library: Option<PathBuf>,
    /// Degree of the fallback polynomial library for single-point data.
    pub poly_degree: u32,
    pub h_stride: usize,
    pub discovery: DiscoveryConfig,
    pub fallback_sgd: bool,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub system: System,
    pub simulation: SystemSpec,
    pub h_list: Vec<f64>,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub sigma_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub discovery: DiscoveryConfig,
    pub seed: u64,
    pub record_runtime: bool,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub system: System,
    pub state: Vec<f64>,
    pub methods: Vec<Method>,
    pub h_list: Vec<f64>,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub method: Method,
    pub h: f64,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub output: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SimulationDiverged { .. } => EXIT_SIMULATION_DIVERGED,
        Error::DivergedDuringUnroll { .. } => EXIT_DISCOVERY_DIVERGED,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Discover(a) => cmd_discover(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Stability(a) => cmd_stability(a, out),
        Command::ProbeTruncation(a) => cmd_probe(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::DivergedDuringUnroll { last_alpha, .. } = &e {
                let _ = writeln!(err, "last finite coefficients ({} active)", last_alpha.active_count());
            }
            exit_code(&e)
        }
    }
}

// ---- layering -------------------------------------------------------------

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn read_config(path: Option<&Path>) -> Result<Value> {
    let Some(path) = path else { return Ok(Value::Object(Map::new())) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Error::InvalidConfig("config file must hold a JSON object".into()));
    }
    Ok(v)
}

/// Sets `value` at the dotted `path` of `patch` when present.
fn put<T: Serialize>(patch: &mut Value, path: &str, value: Option<T>) -> Result<()> {
    let Some(value) = value else { return Ok(()) };
    let mut cur = patch;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = cur.as_object_mut().expect("patch objects");
        if parts.peek().is_none() {
            obj.insert(key.into(), serde_json::to_value(value)?);
            return Ok(());
        }
        cur = obj.entry(key).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn parse_name<T: DeserializeOwned>(name: &str, what: &str) -> Result<T> {
    serde_json::from_value(Value::String(name.into()))
        .map_err(|_| Error::InvalidConfig(format!("unknown {what} {name:?}")))
}

fn parse_names<T: DeserializeOwned>(names: Option<Vec<String>>, what: &str) -> Result<Option<Vec<T>>> {
    names.map(|v| v.iter().map(|n| parse_name(n, what)).collect()).transpose()
}

fn system_of(layers: &Value) -> Result<Option<System>> {
    match layers.get("system") {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("unknown system {v}"))),
    }
}

fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, layers: Value) -> Result<T> {
    let mut v = serde_json::to_value(defaults)?;
    merge(&mut v, layers);
    serde_json::from_value(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn companion(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_run<C: Serialize>(output: &Path, config: &C, result: Value) -> Result<()> {
    let record = json!({ "config": config, "result": result });
    std::fs::write(companion(output), serde_json::to_string_pretty(&record)? + "\n")?;
    Ok(())
}

fn check_system(top: System, spec: &SystemSpec) -> Result<()> {
    if spec.system != top {
        return Err(Error::InvalidConfig(format!(
            "simulation.system {} contradicts system {}",
            spec.system, top
        )));
    }
    Ok(())
}

// ---- commands -------------------------------------------------------------

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let mut layers = read_config(a.config.as_deref())?;
    let mut patch = Value::Object(Map::new());
    put(&mut patch, "system", a.system.as_deref().map(|s| parse_name::<System>(s, "system")).transpose()?)?;
    put(&mut patch, "simulation.t_end", a.t_end)?;
    put(&mut patch, "simulation.fine_dt", a.dt)?;
    put(&mut patch, "simulation.substeps", a.substeps)?;
    put(&mut patch, "simulation.initial", a.initial)?;
    put(&mut patch, "sigma", a.sigma)?;
    put(&mut patch, "seed", a.seed)?;
    put(&mut patch, "output", a.out)?;
    merge(&mut layers, patch);
    let system = system_of(&layers)?.ok_or_else(|| Error::InvalidConfig("no system given".into()))?;
    let defaults = SimulateConfig {
        system,
        simulation: SystemSpec::default_for(system),
        sigma: 0.0,
        seed: 0,
        output: PathBuf::from(format!("{system}.dataset")),
    };
    let cfg: SimulateConfig = resolve(&defaults, layers)?;
    check_system(cfg.system, &cfg.simulation)?;
    cfg.simulation.validate()?;
    let clean = simulate(&cfg.simulation)?;
    let mut data = add_noise(&clean, cfg.sigma, derive_seed(cfg.seed, NOISE_STREAM, 0))?;
    data.seed = Some(cfg.seed);
    io::save_dataset(&data, &cfg.output)?;
    let fingerprint = data.fingerprint();
    writeln!(out, "wrote {} ({} snapshots)", cfg.output.display(), data.n_snapshots())?;
    writeln!(out, "fingerprint {fingerprint}")?;
    write_run(
        &cfg.output,
        &cfg,
        json!({ "fingerprint": fingerprint, "shape": data.states().shape() }),
    )
}

fn library_for(cfg: &DiscoverConfig, data: &Dataset) -> Result<Library> {
    if let Some(system) = cfg.system {
        return standard_library(system, data.grid());
    }
    if let Some(path) = &cfg.library {
        let text = std::fs::read_to_string(path)?;
        let lib: Library = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("library file: {e}")))?;
        if lib.grid() != data.grid() {
            return Err(Error::GridMismatch("library grid differs from the dataset grid".into()));
        }
        return Ok(lib);
    }
    if !data.grid().is_point() {
        return Err(Error::InvalidConfig("spatial data needs --system or --library".into()));
    }
    let d = data.n_vars();
    Library::new(variable_names(d), data.grid().clone(), monomials(d, cfg.poly_degree))
}

fn cmd_discover(a: DiscoverArgs, out: &mut dyn Write) -> Result<()> {
    let mut layers = read_config(a.config.as_deref())?;
    let mut patch = Value::Object(Map::new());
    put(&mut patch, "dataset", a.dataset)?;
    put(&mut patch, "system", a.system.as_deref().map(|s| parse_name::<System>(s, "system")).transpose()?)?;
    put(&mut patch, "library", a.library)?;
    put(&mut patch, "h_stride", a.h_stride)?;
    put(&mut patch, "discovery.method", a.method.as_deref().map(|s| parse_name::<Method>(s, "method")).transpose()?)?;
    put(&mut patch, "discovery.solver", a.solver.as_deref().map(|s| parse_name::<Solver>(s, "solver")).transpose()?)?;
    put(&mut patch, "discovery.K", a.k)?;
    put(&mut patch, "discovery.lambda", a.lambda)?;
    put(&mut patch, "discovery.alpha_th", a.alpha_th)?;
    put(&mut patch, "discovery.max_iters", a.max_iters)?;
    put(&mut patch, "discovery.seed", a.seed)?;
    put(&mut patch, "fallback_sgd", a.fallback_sgd.then_some(true))?;
    put(&mut patch, "output", a.out)?;
    merge(&mut layers, patch);
    let system = system_of(&layers)?;
    let defaults = DiscoverConfig {
        dataset: PathBuf::new(),
        system,
        library: None,
        poly_degree: 3,
        h_stride: 1,
        discovery: system.map(DiscoveryConfig::for_system).unwrap_or_default(),
        fallback_sgd: false,
        output: PathBuf::from("model.json"),
    };
    let cfg: DiscoverConfig = resolve(&defaults, layers)?;
    if cfg.dataset.as_os_str().is_empty() {
        return Err(Error::InvalidConfig("no dataset given".into()));
    }
    cfg.discovery.validate()?;
    let data = io::load_dataset(&cfg.dataset).map_err(|e| match e {
        Error::Io(e) => Error::InvalidConfig(format!("{}: {e}", cfg.dataset.display())),
        e => e,
    })?;
    let data = if cfg.h_stride > 1 { subsample(&data, cfg.h_stride)? } else { data };
    let library = library_for(&cfg, &data)?;

    let mut fallback_used = false;
    let model = match discover(&data, &library, &cfg.discovery) {
        Err(e @ Error::DivergedDuringUnroll { .. })
            if cfg.fallback_sgd && cfg.discovery.solver == Solver::ClosedForm =>
        {
            writeln!(out, "{e}; retrying with the gradient solver")?;
            fallback_used = true;
            let sgd = DiscoveryConfig { solver: Solver::Sgd, ..cfg.discovery.clone() };
            discover(&data, &library, &sgd)?
        }
        other => other?,
    };
    io::save_model(&model, &cfg.output)?;
    let equations = pretty_print(&model);
    for line in &equations {
        writeln!(out, "{line}")?;
    }
    let mut result = json!({
        "equations": equations,
        "iterations": model.trace.len(),
        "final_loss": model.trace.last().map(|r| r.loss),
        "fallback_used": fallback_used,
        "dataset_fingerprint": model.dataset_fingerprint,
    });
    if let Some(system) = cfg.system {
        let truth = system.ground_truth(&library)?;
        let l1 = l1_error(&model.coefficients, &truth)?;
        let support = compare_support(&model.coefficients, &truth)?;
        writeln!(out, "l1 error vs {system}: {l1:.6}")?;
        result["l1_error"] = json!(l1);
        result["support"] = serde_json::to_value(support)?;
    }
    write_run(&cfg.output, &cfg, result)
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut layers = read_config(a.config.as_deref())?;
    let mut patch = Value::Object(Map::new());
    put(&mut patch, "system", a.system.as_deref().map(|s| parse_name::<System>(s, "system")).transpose()?)?;
    put(&mut patch, "h_list", a.h)?;
    put(&mut patch, "K_list", a.k)?;
    put(&mut patch, "sigma_list", a.sigma)?;
    put(&mut patch, "methods", parse_names::<Method>(a.method, "method")?)?;
    put(&mut patch, "discovery.solver", a.solver.as_deref().map(|s| parse_name::<Solver>(s, "solver")).transpose()?)?;
    put(&mut patch, "seed", a.seed)?;
    put(&mut patch, "record_runtime", a.runtime.then_some(true))?;
    put(&mut patch, "output", a.out)?;
    merge(&mut layers, patch);
    let system = system_of(&layers)?.ok_or_else(|| Error::InvalidConfig("no system given".into()))?;
    let base = SweepSpec::for_system(system);
    let defaults = SweepConfig {
        system,
        simulation: base.simulation,
        h_list: Vec::new(),
        k_list: vec![1],
        sigma_list: base.sigma_list,
        methods: base.methods,
        discovery: base.discovery,
        seed: 0,
        record_runtime: false,
        output: PathBuf::from(format!("{system}-sweep.csv")),
    };
    let cfg: SweepConfig = resolve(&defaults, layers)?;
    check_system(cfg.system, &cfg.simulation)?;
    if a.jobs == Some(0) {
        return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
    }
    let spec = SweepSpec {
        simulation: cfg.simulation.clone(),
        h_list: cfg.h_list.clone(),
        k_list: cfg.k_list.clone(),
        sigma_list: cfg.sigma_list.clone(),
        methods: cfg.methods.clone(),
        discovery: cfg.discovery.clone(),
        seed: cfg.seed,
        record_runtime: cfg.record_runtime,
    };
    let table = run_sweep(&spec, a.jobs)?;
    table.write_csv(std::io::BufWriter::new(std::fs::File::create(&cfg.output)?))?;
    let count = |s: CellStatus| table.cells.iter().filter(|c| c.status == s).count();
    writeln!(
        out,
        "{} cells: {} ok, {} diverged, {} failed; wrote {}",
        table.cells.len(),
        count(CellStatus::Ok),
        count(CellStatus::Diverged),
        count(CellStatus::Failed),
        cfg.output.display()
    )?;
    write_run(&cfg.output, &cfg, json!({ "cells": table.cells }))
}

fn cmd_stability(a: StabilityArgs, out: &mut dyn Write) -> Result<()> {
    let mut layers = read_config(a.config.as_deref())?;
    let mut patch = Value::Object(Map::new());
    put(&mut patch, "system", a.system.as_deref().map(|s| parse_name::<System>(s, "system")).transpose()?)?;
    put(&mut patch, "state", a.state)?;
    put(&mut patch, "methods", parse_names::<Method>(a.method, "method")?)?;
    put(&mut patch, "h_list", a.h)?;
    put(&mut patch, "K_list", a.k)?;
    put(&mut patch, "output", a.out)?;
    merge(&mut layers, patch);
    let system = system_of(&layers)?.ok_or_else(|| Error::InvalidConfig("no system given".into()))?;
    let defaults = StabilityConfig {
        system,
        state: SystemSpec::default_for(system).initial,
        methods: vec![Method::Euler, Method::Rk4],
        h_list: Vec::new(),
        k_list: vec![1],
        output: PathBuf::from(format!("{system}-stability.csv")),
    };
    let cfg: StabilityConfig = resolve(&defaults, layers)?;
    let report = stability_report(cfg.system, &cfg.state, &cfg.methods, &cfg.h_list, &cfg.k_list)?;
    report.write_csv(std::io::BufWriter::new(std::fs::File::create(&cfg.output)?))?;
    let unstable = report.entries.iter().filter(|e| !e.stable).count();
    for (re, im) in &report.eigenvalues {
        writeln!(out, "eigenvalue {re:.4} {im:+.4}i")?;
    }
    writeln!(out, "{} entries, {unstable} unstable; wrote {}", report.entries.len(), cfg.output.display())?;
    write_run(&cfg.output, &cfg, serde_json::to_value(&report)?)
}

fn cmd_probe(a: ProbeArgs, out: &mut dyn Write) -> Result<()> {
    let mut layers = read_config(a.config.as_deref())?;
    let mut patch = Value::Object(Map::new());
    put(&mut patch, "method", a.method.as_deref().map(|s| parse_name::<Method>(s, "method")).transpose()?)?;
    put(&mut patch, "h", a.h)?;
    put(&mut patch, "K_list", a.k)?;
    put(&mut patch, "output", a.out)?;
    merge(&mut layers, patch);
    let method = match layers.get("method") {
        Some(v) if !v.is_null() => serde_json::from_value(v.clone())
            .map_err(|_| Error::InvalidConfig(format!("unknown method {v}")))?,
        _ => Method::Euler,
    };
    let defaults = ProbeConfig {
        method,
        h: if method == Method::Euler { 0.5 } else { 0.4 },
        k_list: vec![1, 2, 4, 8, 16],
        output: PathBuf::from("probe.csv"),
    };
    let cfg: ProbeConfig = resolve(&defaults, layers)?;
    if cfg.k_list.len() < 2 || cfg.k_list.contains(&0) {
        return Err(Error::InvalidConfig("need at least two positive K values to fit a slope".into()));
    }
    let points = truncation_probe(cfg.method, cfg.h, &cfg.k_list)?;
    let slope = probe_slope(cfg.method, &points)?;
    let mut w = csv::Writer::from_path(&cfg.output)?;
    w.write_record(["method", "h", "K", "error", "fitted_slope"])?;
    let name = if cfg.method == Method::Euler { "euler" } else { "rk4" };
    for p in &points {
        w.write_record([name.to_string(), p.h.to_string(), p.k.to_string(), p.error.to_string(), slope.to_string()])?;
    }
    w.flush()?;
    let axis = if cfg.method == Method::Euler { "log K" } else { "log(h/K)" };
    writeln!(out, "slope of log error against {axis}: {slope:.4}")?;
    write_run(&cfg.output, &cfg, json!({ "points": points, "slope": slope }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_deep_and_flags_win() {
        let mut base = json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge(&mut base, json!({"a": {"c": 5}}));
        assert_eq!(base, json!({"a": {"b": 1, "c": 5}, "d": 3}));
        let mut patch = Value::Object(Map::new());
        put(&mut patch, "a.b.x", Some(1.5)).unwrap();
        put::<f64>(&mut patch, "a.q", None).unwrap();
        assert_eq!(patch, json!({"a": {"b": {"x": 1.5}}}));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let defaults = ProbeConfig {
            method: Method::Euler,
            h: 0.5,
            k_list: vec![1, 2],
            output: "p.csv".into(),
        };
        assert!(resolve(&defaults, json!({"bogus": 1})).is_err());
        assert_eq!(resolve(&defaults, json!({"h": 0.25})).unwrap().h, 0.25);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::SimulationDiverged { time: 1.0 }), 3);
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
    }

    #[test]
    fn companion_path_appends_suffix() {
        assert_eq!(companion(Path::new("out/m.json")), PathBuf::from("out/m.json.run.json"));
    }

    #[test]
    fn help_exits_zero() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with_args(["unrolled-sindy", "--help"], &mut o, &mut e), 0);
        assert!(String::from_utf8_lossy(&o).contains("probe-truncation"));
        assert_eq!(main_with_args(["unrolled-sindy", "nope"], &mut o, &mut e), 2);
    }
}
