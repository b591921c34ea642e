//! Command-line front end: `solve`, `compare` and `simulate`.
//!
//! Settings resolve as flags > config file > defaults. A config file is
//! either flat `key = value` text (`#` starts a comment) or the JSON object
//! that every run writes to `config.json`, so any run can be replayed with
//! `--config <out>/config.json`.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 solver did not converge.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::chain::Grid;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{ControlAction, ModelParams};
use crate::scenarios::{self, Scenario, ScenarioKind};
use crate::sim::{self, GridPolicy, SimConfig, Targets};
use crate::solver::{Acceleration, BaselineKind, ControlSet, Policy, SolverSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Allowance added to `3·std_error` when judging DP/MC agreement.
pub const DEFAULT_MC_TOLERANCE: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(
    name = "bloch-mca",
    version,
    about = "Minimum discounted hitting-time control of a monitored qubit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one strategy; writes value.csv, policy.csv, report.json.
    Solve(Flags),
    /// Solve all three strategies; writes comparison.csv, crossings.json, reports.json.
    Compare(Flags),
    /// Monte Carlo check of a solved policy; writes mc.csv.
    Simulate(Flags),
}

#[derive(Debug, Args, Default)]
struct Flags {
    /// key=value or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// eigenstate | non_eigenstate | custom
    #[arg(long)]
    scenario: Option<String>,
    /// Lower endpoint (custom scenario).
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<String>,
    /// Upper endpoint (custom scenario).
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long = "gamma-max", allow_hyphen_values = true)]
    gamma_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nodes: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    #[arg(long = "max-iters", allow_hyphen_values = true)]
    max_iters: Option<String>,
    /// Comma-separated rotation candidates, or `dense:N`.
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
    /// Comma-separated measurement candidates, or `dense:N`.
    #[arg(long)]
    gammas: Option<String>,
    /// Include the drift-nulling rotation candidate (true/false).
    #[arg(long)]
    kink: Option<String>,
    /// none | policy_evaluation
    #[arg(long)]
    acceleration: Option<String>,
    /// Strategy to solve or simulate: dynamic | fixed_measurement | pure_rotation
    #[arg(long)]
    policy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    paths: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long = "t-max", allow_hyphen_values = true)]
    t_max: Option<String>,
    /// Comma-separated Monte Carlo start angles.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
    #[arg(long = "mc-tol", allow_hyphen_values = true)]
    mc_tol: Option<String>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long)]
    threads: Option<String>,
    /// Read value.csv/policy.csv from a previous `solve` instead of solving.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long)]
    out: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs: [(&'static str, &Option<String>); 22] = [
            ("scenario", &self.scenario),
            ("lo", &self.lo),
            ("hi", &self.hi),
            ("omega", &self.omega),
            ("gamma_max", &self.gamma_max),
            ("beta", &self.beta),
            ("nodes", &self.nodes),
            ("threshold", &self.threshold),
            ("max_iters", &self.max_iters),
            ("alphas", &self.alphas),
            ("gammas", &self.gammas),
            ("kink", &self.kink),
            ("acceleration", &self.acceleration),
            ("policy", &self.policy),
            ("dt", &self.dt),
            ("paths", &self.paths),
            ("seed", &self.seed),
            ("t_max", &self.t_max),
            ("theta0", &self.theta0),
            ("mc_tol", &self.mc_tol),
            ("threads", &self.threads),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
            .collect()
    }
}

const KEYS: [&str; 22] = [
    "scenario",
    "lo",
    "hi",
    "omega",
    "gamma_max",
    "beta",
    "nodes",
    "threshold",
    "max_iters",
    "alphas",
    "gammas",
    "kink",
    "acceleration",
    "policy",
    "dt",
    "paths",
    "seed",
    "t_max",
    "theta0",
    "mc_tol",
    "threads",
    "out",
];

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub lo: f64,
    pub hi: f64,
    pub omega: f64,
    pub gamma_max: f64,
    pub beta: f64,
    pub nodes: usize,
    pub threshold: f64,
    pub max_iters: usize,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub kink: bool,
    pub acceleration: Acceleration,
    pub policy: BaselineKind,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub t_max: f64,
    pub theta0: Vec<f64>,
    pub mc_tol: f64,
    pub threads: usize,
    pub out: String,
}

impl RunConfig {
    /// Resolves raw `key → value` strings against the defaults.
    pub fn resolve(raw: &BTreeMap<String, String>) -> Result<Self> {
        for key in raw.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(config_err(key, "unknown key"));
            }
        }
        let get = |k: &str| raw.get(k).map(|s| s.trim());

        let scenario_kind: ScenarioKind = match get("scenario") {
            Some(s) => s.parse()?,
            None => ScenarioKind::Eigenstate,
        };
        let params = ModelParams {
            omega: parse_or(get("omega"), "omega", 5.0)?,
            gamma_max: parse_or(get("gamma_max"), "gamma_max", 1.0)?,
            beta: parse_or(get("beta"), "beta", 0.1)?,
        };
        params.validate()?;

        let preset = match scenario_kind {
            ScenarioKind::Eigenstate => Scenario::eigenstate(params),
            ScenarioKind::NonEigenstate => Scenario::non_eigenstate(params),
            ScenarioKind::Custom => {
                let lo =
                    get("lo").ok_or_else(|| config_err("lo", "required for custom scenario"))?;
                let hi =
                    get("hi").ok_or_else(|| config_err("hi", "required for custom scenario"))?;
                Scenario::custom(
                    parse_f64(lo, "lo")?,
                    parse_f64(hi, "hi")?,
                    params,
                    scenarios::EIGENSTATE_NODES,
                )
            }
        };
        if scenario_kind != ScenarioKind::Custom {
            for key in ["lo", "hi"] {
                if let Some(v) = get(key) {
                    let fixed = if key == "lo" { preset.lo } else { preset.hi };
                    if parse_f64(v, key)? != fixed {
                        return Err(config_err(key, "only a custom scenario may set the domain"));
                    }
                }
            }
        }
        let nodes = parse_or(get("nodes"), "nodes", preset.nodes)?;
        let scenario = preset.with_nodes(nodes);
        scenario
            .grid()
            .map_err(|e| config_err("nodes", e.to_string()))?;

        let base = ControlSet::vertices(&params);
        let alphas = match get("alphas") {
            Some(s) => parse_candidates(s, "alphas", -params.omega, params.omega)?,
            None => base.alphas.clone(),
        };
        let gammas = match get("gammas") {
            Some(s) => parse_candidates(s, "gammas", 0.0, params.gamma_max)?,
            None => base.gammas.clone(),
        };
        let kink = parse_or(get("kink"), "kink", true)?;
        let controls = ControlSet {
            alphas,
            gammas,
            include_kink: kink,
        };
        controls
            .validate(&params)
            .map_err(|e| config_err("alphas/gammas", e.to_string()))?;

        let acceleration = match get("acceleration") {
            Some(s) => s.parse()?,
            None => Acceleration::default(),
        };
        let policy = match get("policy") {
            Some(s) => s.parse()?,
            None => BaselineKind::Dynamic,
        };
        let solver = SolverSettings {
            threshold: parse_or(
                get("threshold"),
                "threshold",
                crate::solver::DEFAULT_THRESHOLD,
            )?,
            max_iters: parse_or(
                get("max_iters"),
                "max_iters",
                crate::solver::DEFAULT_MAX_ITERS,
            )?,
            acceleration,
            execution: Execution::default(),
        };
        solver.validate()?;

        let sim_defaults = SimConfig::default();
        let sim = SimConfig {
            dt: parse_or(get("dt"), "dt", sim_defaults.dt)?,
            n_paths: parse_or(get("paths"), "paths", sim_defaults.n_paths)?,
            seed: parse_or(get("seed"), "seed", sim_defaults.seed)?,
            t_max: parse_or(get("t_max"), "t_max", sim_defaults.t_max)?,
            execution: Execution::default(),
        };
        sim.validate()?;

        let theta0 = match get("theta0") {
            Some(s) => parse_list(s, "theta0")?,
            None => scenario.probe_points(),
        };
        if let Some(bad) = theta0
            .iter()
            .find(|t| !(**t > scenario.lo && **t < scenario.hi))
        {
            return Err(config_err(
                "theta0",
                format!(
                    "{bad} is not strictly inside ({}, {})",
                    scenario.lo, scenario.hi
                ),
            ));
        }
        let mc_tol = parse_or(get("mc_tol"), "mc_tol", DEFAULT_MC_TOLERANCE)?;
        if !mc_tol.is_finite() || mc_tol < 0.0 {
            return Err(config_err("mc_tol", "must be >= 0"));
        }

        Ok(Self {
            scenario: scenario_kind,
            lo: scenario.lo,
            hi: scenario.hi,
            omega: params.omega,
            gamma_max: params.gamma_max,
            beta: params.beta,
            nodes,
            threshold: solver.threshold,
            max_iters: solver.max_iters,
            alphas: controls.alphas,
            gammas: controls.gammas,
            kink,
            acceleration,
            policy,
            dt: sim.dt,
            paths: sim.n_paths,
            seed: sim.seed,
            t_max: sim.t_max,
            theta0,
            mc_tol,
            threads: parse_or(get("threads"), "threads", 0)?,
            out: get("out").unwrap_or("out").to_string(),
        })
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            omega: self.omega,
            gamma_max: self.gamma_max,
            beta: self.beta,
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            kind: self.scenario,
            lo: self.lo,
            hi: self.hi,
            params: self.params(),
            nodes: self.nodes,
        }
    }

    pub fn controls(&self) -> ControlSet {
        ControlSet {
            alphas: self.alphas.clone(),
            gammas: self.gammas.clone(),
            include_kink: self.kink,
        }
    }

    pub fn execution(&self) -> Execution {
        if self.threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            threshold: self.threshold,
            max_iters: self.max_iters,
            execution: self.execution(),
            acceleration: self.acceleration,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            n_paths: self.paths,
            seed: self.seed,
            t_max: self.t_max,
            execution: self.execution(),
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(s: &str, key: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| config_err(key, format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(config_err(key, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn parse_or<T: std::str::FromStr>(s: Option<&str>, key: &str, default: T) -> Result<T> {
    match s {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| config_err(key, format!("cannot parse `{s}`"))),
    }
}

fn parse_list(s: &str, key: &str) -> Result<Vec<f64>> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_f64(t, key))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(config_err(key, "empty list"));
    }
    Ok(out)
}

/// `a,b,c` or `dense:N` (N evenly spaced points on `[lo, hi]`).
fn parse_candidates(s: &str, key: &str, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut v = if let Some(n) = s.trim().strip_prefix("dense:") {
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| config_err(key, format!("bad lattice size in `{s}`")))?;
        match n {
            0 => return Err(config_err(key, "lattice needs at least one point")),
            1 => vec![hi],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else {
        parse_list(s, key)?
    };
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Reads `key = value` lines or a JSON object into raw strings.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let obj: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.insert(k, s);
        }
        return Ok(out);
    }
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            config_err(
                &format!("{}:{}", path.display(), lineno + 1),
                "expected `key = value`",
            )
        })?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

/// Formats with 12 significant digits, `%g` style.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can bump the exponent (9.99999999999995 -> 10)
    let sci = format!("{:.11e}", x);
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        trim_zeros(&s)
    } else {
        let (mant, e) = sci.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(mant), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn value_csv(grid: &Grid, values: &[f64]) -> String {
    csv(
        ["theta", "value"],
        grid.nodes()
            .iter()
            .zip(values)
            .map(|(t, v)| [fmt_num(*t), fmt_num(*v)]),
    )
}

pub fn policy_csv(grid: &Grid, policy: &Policy) -> String {
    csv(
        ["theta", "alpha", "gamma"],
        grid.interior().map(|i| {
            let a = policy.at_node(i);
            [fmt_num(grid.node(i)), fmt_num(a.alpha), fmt_num(a.gamma)]
        }),
    )
}

pub fn comparison_csv(table: &scenarios::ComparisonTable) -> String {
    csv(
        scenarios::ComparisonTable::HEADER,
        table.rows.iter().map(|r| {
            [
                fmt_num(r.theta),
                fmt_num(r.cost_dynamic),
                fmt_num(r.cost_fixed),
                fmt_num(r.cost_rotation),
                fmt_num(r.alpha_opt),
                fmt_num(r.gamma_opt),
            ]
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub theta0: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n_truncated: usize,
    pub dp_value: f64,
    pub consistent: bool,
}

pub fn mc_csv(rows: &[McRow]) -> String {
    csv(
        [
            "theta0",
            "mean",
            "std_error",
            "n_truncated",
            "dp_value",
            "consistent_flag",
        ],
        rows.iter().map(|r| {
            [
                fmt_num(r.theta0),
                fmt_num(r.mean),
                fmt_num(r.std_error),
                r.n_truncated.to_string(),
                fmt_num(r.dp_value),
                r.consistent.to_string(),
            ]
        }),
    )
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

fn prepare(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out);
    fs::create_dir_all(&dir)?;
    write_json(&dir, "config.json", cfg)?;
    Ok(dir)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    strategy: &'static str,
    report: &'a crate::solver::SolveReport,
}

/// Solves the configured strategy. Returns the exit code.
pub fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let dir = prepare(cfg)?;
    let scenario = cfg.scenario();
    let grid = scenario.grid()?;
    let sol = scenarios::solve_kind(
        &scenario,
        cfg.policy,
        &cfg.controls(),
        &cfg.solver_settings(),
    )?;
    write(&dir, "value.csv", &value_csv(&grid, &sol.values.values))?;
    write(&dir, "policy.csv", &policy_csv(&grid, &sol.policy))?;
    let out = SolveOutput {
        strategy: cfg.policy.name(),
        report: &sol.report,
    };
    write_json(&dir, "report.json", &out)?;
    Ok(if sol.report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

/// Three-strategy comparison. Returns the exit code.
pub fn cmd_compare(cfg: &RunConfig) -> Result<i32> {
    let dir = prepare(cfg)?;
    let run = scenarios::run_scenario(&cfg.scenario(), &cfg.controls(), &cfg.solver_settings())?;
    write(&dir, "comparison.csv", &comparison_csv(&run.table))?;
    let crossings = scenarios::crossings(&run.table, &cfg.params());
    write_json(&dir, "crossings.json", &crossings)?;
    let reports: BTreeMap<&str, _> = BaselineKind::ALL
        .iter()
        .map(|k| (k.name(), run.solution(*k).report))
        .collect();
    write_json(&dir, "reports.json", &reports)?;
    Ok(if run.all_converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

/// Loads a `solve` output directory back into a grid, values and policy.
pub fn load_solution(dir: &Path) -> Result<(Grid, Vec<f64>, Policy)> {
    let values = read_csv(&dir.join("value.csv"), 2)?;
    let policy_rows = read_csv(&dir.join("policy.csv"), 3)?;
    let n = values.len();
    if n < 3 || policy_rows.len() + 2 != n {
        return Err(config_err(
            "from",
            format!(
                "value.csv has {n} rows but policy.csv has {}",
                policy_rows.len()
            ),
        ));
    }
    let grid = Grid::new(values[0][0], values[n - 1][0], n)?;
    let policy = Policy {
        actions: policy_rows
            .iter()
            .map(|r| ControlAction::new(r[1], r[2]))
            .collect(),
    };
    Ok((grid, values.iter().map(|r| r[1]).collect(), policy))
}

fn read_csv(path: &Path, cols: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let key = path.display().to_string();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let row = l
                .split(',')
                .map(|c| parse_f64(c, &key))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != cols {
                return Err(config_err(
                    &key,
                    format!("expected {cols} columns in `{l}`"),
                ));
            }
            Ok(row)
        })
        .collect()
}

/// Monte Carlo cross-check. Returns the exit code.
pub fn cmd_simulate(cfg: &RunConfig, from: Option<&Path>) -> Result<i32> {
    let dir = prepare(cfg)?;
    let params = cfg.params();
    let (grid, values, policy, converged) = match from {
        Some(src) => {
            let (g, v, p) = load_solution(src)?;
            (g, v, p, true)
        }
        None => {
            let scenario = cfg.scenario();
            let sol = scenarios::solve_kind(
                &scenario,
                cfg.policy,
                &cfg.controls(),
                &cfg.solver_settings(),
            )?;
            (
                scenario.grid()?,
                sol.values.values,
                sol.policy,
                sol.report.converged,
            )
        }
    };
    let law = GridPolicy {
        grid: &grid,
        policy: &policy,
    };
    let sim_cfg = cfg.sim_config();
    let rows = cfg
        .theta0
        .iter()
        .map(|&theta0| {
            let est = sim::estimate_cost(theta0, &law, Targets::of(&grid), &params, &sim_cfg)?;
            let dp_value = grid.interpolate(&values, theta0);
            Ok(McRow {
                theta0,
                mean: est.mean,
                std_error: est.std_error,
                n_truncated: est.n_truncated,
                dp_value,
                consistent: (est.mean - dp_value).abs() <= 3.0 * est.std_error + cfg.mc_tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write(&dir, "mc.csv", &mc_csv(&rows))?;
    Ok(if converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 1 {
        // Ignore the error when a global pool already exists (repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (flags, which) = match &cli.command {
        Command::Solve(f) => (f, "solve"),
        Command::Compare(f) => (f, "compare"),
        Command::Simulate(f) => (f, "simulate"),
    };
    let cfg = match load(flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    configure_threads(cfg.threads);
    let result = match which {
        "solve" => cmd_solve(&cfg),
        "compare" => cmd_compare(&cfg),
        _ => cmd_simulate(&cfg, flags.from.as_deref()),
    };
    match result {
        Ok(code) => {
            if code == EXIT_NOT_CONVERGED {
                eprintln!(
                    "warning: value iteration stopped at max_iters before reaching the threshold"
                );
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn load(flags: &Flags) -> Result<RunConfig> {
    let mut raw = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    for (k, v) in flags.overrides() {
        raw.insert(k.to_string(), v.clone());
    }
    RunConfig::resolve(&raw)
}

/// Human-readable summary of a resolved config, one `key = value` per line.
pub fn to_key_values(cfg: &RunConfig) -> Result<String> {
    let value = serde_json::to_value(cfg)?;
    let mut out = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k} = {s}");
        }
    }
    Ok(out)
}
