//! Command line front end.
//!
//! Every subcommand accepts its options as flags or, through the global
//! `--config FILE`, as `key = value` lines named like the long flags. Flags win
//! over the file; keys that the subcommand does not know are rejected.
//!
//! Results are printed as `key=value` lines. Plot data go to whitespace
//! separated two-column files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::coupling::{approx_delta, macro_node_solve, Method};
use crate::layer::{compute_delta, delta_sweep, node_solve, reconstruct_distribution, wellposedness_audit, EdgeCount, LayerOperator};
use crate::netsim::{compare_runs, kinetic_simulate, macro_simulate, profile_points, sample, spectral_delta, NetworkConfig, Snapshot};
use crate::orthopoly::Family;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kinnet", version, about = "Kinetic layer coupling coefficients and star network solvers")]
pub struct Cli {
    /// Plain text file with `key = value` lines; command line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupling coefficient delta and the invariant chain for one N.
    Delta(DeltaArgs),
    /// delta(N) over a range of N with increments.
    Sweep(SweepArgs),
    /// Node layer solve for a Riemann problem at a symmetric node.
    NodeSolve(NodeArgs),
    /// Kinetic (and optionally macroscopic) run on a star network.
    Simulate(SimArgs),
    /// Kinetic versus macroscopic densities outside the layer.
    Compare(SimArgs),
    /// Invertibility and dissipativity checks of the half-space problems.
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[arg(long)]
    pub family: Option<String>,
    /// Number of edges, or `inf`.
    #[arg(long = "n")]
    pub n_edges: Option<String>,
    /// Half the number of discrete velocities.
    #[arg(long = "N")]
    pub n_half: Option<String>,
    /// Two-column file `k delta_k` for the chain.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "n")]
    pub n_edges: Option<String>,
    #[arg(long = "N-min")]
    pub n_min: Option<String>,
    #[arg(long = "N-max")]
    pub n_max: Option<String>,
    /// Two-column file `N delta(N)`.
    #[arg(long)]
    pub delta_out: Option<PathBuf>,
    /// Two-column file `N log10 |delta(N) - delta(N-1)|`.
    #[arg(long)]
    pub increment_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NodeArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N")]
    pub n_half: Option<String>,
    /// Far-field densities, one per edge, comma separated.
    #[arg(long)]
    pub rho_init: Option<String>,
    /// Far-field fluxes, one per edge; zero when omitted.
    #[arg(long)]
    pub q_init: Option<String>,
    /// Write the reconstructed node distribution `v f(v)` of every edge into this directory.
    #[arg(long)]
    pub dist_dir: Option<PathBuf>,
    /// Apply the Fejer filter to the reconstruction.
    #[arg(long)]
    pub filter: bool,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N")]
    pub n_half: Option<String>,
    #[arg(long)]
    pub rho_init: Option<String>,
    #[arg(long)]
    pub q_init: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub dx: Option<String>,
    /// Edge length, shared by all edges.
    #[arg(long)]
    pub length: Option<String>,
    #[arg(long)]
    pub final_time: Option<String>,
    #[arg(long)]
    pub cfl: Option<String>,
    /// Snapshot times, comma separated; the final time is always written.
    #[arg(long)]
    pub times: Option<String>,
    /// Compare on `x > cutoff`; default `10 epsilon`.
    #[arg(long)]
    pub cutoff: Option<String>,
    /// Report the edge densities at this position.
    #[arg(long)]
    pub probe_x: Option<String>,
    /// Directory for profile files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also run the macroscopic model with the spectral delta.
    #[arg(long)]
    pub with_macro: bool,
    /// Also write the spectral node distributions with and without filter.
    #[arg(long)]
    pub node_dist: bool,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long = "N-min")]
    pub n_min: Option<String>,
    #[arg(long = "N-max")]
    pub n_max: Option<String>,
    #[arg(long = "n-min")]
    pub edges_min: Option<String>,
    #[arg(long = "n-max")]
    pub edges_max: Option<String>,
}

/// Values from flags, falling back to the config file.
struct Settings {
    file: BTreeMap<String, String>,
    used: Vec<&'static str>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)?;
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidInput(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
                file.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self { file, used: Vec::new() })
    }

    fn raw(&mut self, key: &'static str, flag: Option<String>) -> Option<String> {
        self.used.push(key);
        flag.or_else(|| self.file.get(key).cloned())
    }

    fn get<T: FromStr>(&mut self, key: &'static str, flag: Option<String>) -> Result<Option<T>> {
        self.raw(key, flag)
            .map(|s| s.parse::<T>().map_err(|_| Error::InvalidInput(format!("invalid value '{s}' for {key}"))))
            .transpose()
    }

    fn require<T: FromStr>(&mut self, key: &'static str, flag: Option<String>) -> Result<T> {
        self.get(key, flag)?.ok_or_else(|| Error::InvalidInput(format!("missing required option --{key}")))
    }

    fn or<T: FromStr>(&mut self, key: &'static str, flag: Option<String>, default: T) -> Result<T> {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    fn flag(&mut self, key: &'static str, flag: bool) -> Result<bool> {
        if flag {
            self.used.push(key);
            return Ok(true);
        }
        Ok(self.get::<bool>(key, None)?.unwrap_or(false))
    }

    fn path(&mut self, key: &'static str, flag: Option<PathBuf>) -> Option<PathBuf> {
        self.raw(key, flag.map(|p| p.to_string_lossy().into_owned())).map(PathBuf::from)
    }

    fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self.file.keys().map(String::as_str).filter(|k| !self.used.contains(k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

/// `x` with 17 significant digits, positional unless very large or small.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..=16).contains(&exp) {
        format!("{:.*}", (16 - exp).max(0) as usize, x)
    } else {
        format!("{x:.16e}")
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("invalid number '{t}' in list"))))
        .collect()
}

fn parse_n_half(s: &mut Settings, flag: Option<String>) -> Result<usize> {
    let n: usize = s.require("N", flag)?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("N must be >= 2, got {n}")));
    }
    Ok(n)
}

fn write_columns(path: &Path, rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut text = String::new();
    for (a, b) in rows {
        writeln!(text, "{} {}", fmt17(a), fmt17(b)).expect("write to string");
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key}={value}").expect("write to string");
}

fn cmd_delta(s: &mut Settings, a: DeltaArgs) -> Result<String> {
    let family: Family = s.require("family", a.family)?;
    let n_edges: EdgeCount = s.require("n", a.n_edges)?;
    let n_half = parse_n_half(s, a.n_half)?;
    let output = s.path("output", a.output);
    s.finish()?;
    let op = LayerOperator::new(family, n_half, n_edges)?;
    let r = compute_delta(&op)?;
    let mut out = String::new();
    kv(&mut out, "family", family);
    kv(&mut out, "n", n_edges);
    kv(&mut out, "N", n_half);
    kv(&mut out, "delta", fmt17(r.delta));
    kv(&mut out, "chain", r.chain.iter().map(|d| fmt17(*d)).collect::<Vec<_>>().join(","));
    for m in [Method::HalfFlux, Method::HalfMoment] {
        kv(&mut out, &format!("delta_{m}"), fmt17(approx_delta(family, n_edges, m)));
    }
    if let Some(path) = output {
        write_columns(&path, r.chain.iter().enumerate().map(|(k, d)| ((k + 1) as f64, *d)))?;
        kv(&mut out, "chain_file", path.display());
    }
    Ok(out)
}

fn cmd_sweep(s: &mut Settings, a: SweepArgs) -> Result<String> {
    let family: Family = s.require("family", a.family)?;
    let n_edges: EdgeCount = s.require("n", a.n_edges)?;
    let n_min: usize = s.or("N-min", a.n_min, 2)?;
    let n_max: usize = s.require("N-max", a.n_max)?;
    let delta_out = s.path("delta-out", a.delta_out);
    let inc_out = s.path("increment-out", a.increment_out);
    s.finish()?;
    if n_min < 2 {
        return Err(Error::InvalidInput(format!("N must be >= 2, got {n_min}")));
    }
    let r = delta_sweep(family, n_edges, n_min, n_max)?;
    let mut out = String::new();
    kv(&mut out, "family", family);
    kv(&mut out, "n", n_edges);
    kv(&mut out, "N_min", n_min);
    kv(&mut out, "N_max", n_max);
    kv(&mut out, "delta", fmt17(r.delta));
    if let Some(&(n, e)) = r.increments.last() {
        kv(&mut out, "last_increment_N", n);
        kv(&mut out, "last_log10_increment", fmt17(e));
    }
    kv(&mut out, "increments_decreasing_beyond_20", r.increments_decreasing_from(21));
    if let Some(path) = delta_out {
        write_columns(&path, r.history.iter().map(|&(n, d)| (n as f64, d)))?;
        kv(&mut out, "delta_file", path.display());
    }
    if let Some(path) = inc_out {
        write_columns(&path, r.increments.iter().map(|&(n, e)| (n as f64, e)))?;
        kv(&mut out, "increment_file", path.display());
    }
    Ok(out)
}

fn far_field(s: &mut Settings, rho: Option<String>, q: Option<String>) -> Result<Vec<(f64, f64)>> {
    let rho = parse_list(&s.require::<String>("rho-init", rho)?)?;
    let q = match s.get::<String>("q-init", q)? {
        Some(q) => parse_list(&q)?,
        None => vec![0.0; rho.len()],
    };
    if q.len() != rho.len() {
        return Err(Error::InvalidInput(format!("{} densities but {} fluxes", rho.len(), q.len())));
    }
    if rho.len() < 2 {
        return Err(Error::InvalidInput("a node needs at least 2 edges".into()));
    }
    Ok(rho.into_iter().zip(q).collect())
}

fn cmd_node(s: &mut Settings, a: NodeArgs) -> Result<String> {
    let family: Family = s.require("family", a.family)?;
    let n_half = parse_n_half(s, a.n_half)?;
    let data = far_field(s, a.rho_init, a.q_init)?;
    let dist_dir = s.path("dist-dir", a.dist_dir);
    let filter = s.flag("filter", a.filter)?;
    s.finish()?;
    let n = data.len();
    let op = LayerOperator::new(family, n_half, EdgeCount::Finite(n))?;
    let speed = op.wave_speed();
    let r_minus: Vec<f64> = data.iter().map(|(rho, q)| q - speed * rho).collect();
    let state = node_solve(&op, &r_minus)?;
    let macro_state = macro_node_solve(n, speed, state.delta, &r_minus)?;
    let mut out = String::new();
    kv(&mut out, "family", family);
    kv(&mut out, "n", n);
    kv(&mut out, "N", n_half);
    kv(&mut out, "delta", fmt17(state.delta));
    kv(&mut out, "cond", fmt17(state.cond));
    for (i, (e, (rho_m, q_m))) in state.edges.iter().zip(&macro_state).enumerate() {
        let k = i + 1;
        kv(&mut out, &format!("D{k}"), fmt17(e.d));
        kv(&mut out, &format!("C{k}"), fmt17(e.c));
        kv(&mut out, &format!("rho{k}_x0"), fmt17(e.rho0));
        kv(&mut out, &format!("rho{k}_macro"), fmt17(*rho_m));
        kv(&mut out, &format!("q{k}_macro"), fmt17(*q_m));
    }
    if let Some(dir) = dist_dir {
        if family != Family::Hermite {
            return Err(Error::InvalidInput("node distributions are available for the Hermite family only".into()));
        }
        let vs: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.01).collect();
        for edge in 0..n {
            let f = reconstruct_distribution(&state, edge, &vs, filter)?;
            let suffix = if filter { "_filtered" } else { "" };
            write_columns(&dir.join(format!("node_dist_edge{}{suffix}.txt", edge + 1)), vs.iter().copied().zip(f))?;
        }
        kv(&mut out, "dist_dir", dir.display());
    }
    Ok(out)
}

fn network_config(s: &mut Settings, a: &mut SimArgs) -> Result<NetworkConfig> {
    let family: Family = s.require("family", a.family.take())?;
    let n_half: usize = s.or("N", a.n_half.take(), 16)?;
    if n_half < 1 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    let data = far_field(s, a.rho_init.take(), a.q_init.take())?;
    let epsilon: f64 = s.require("epsilon", a.epsilon.take())?;
    let mut config = NetworkConfig::symmetric(family, n_half, epsilon, data);
    config.dx = s.or("dx", a.dx.take(), config.dx)?;
    let length: f64 = s.or("length", a.length.take(), 0.5)?;
    config.edge_lengths = vec![length; config.n_edges];
    config.final_time = s.or("final-time", a.final_time.take(), config.final_time)?;
    config.cfl = s.or("cfl", a.cfl.take(), config.cfl)?;
    config.validate()?;
    Ok(config)
}

fn write_snapshots(dir: &Path, prefix: &str, snaps: &[Snapshot], dx: f64) -> Result<()> {
    for snap in snaps {
        for (e, rho) in snap.density.iter().enumerate() {
            let name = format!("{prefix}_edge{}_t{}.txt", e + 1, fmt_time(snap.time));
            write_columns(&dir.join(name), profile_points(rho, dx))?;
        }
    }
    Ok(())
}

fn fmt_time(t: f64) -> String {
    let s = format!("{t}");
    s.replace('.', "p")
}

fn cmd_simulate(s: &mut Settings, mut a: SimArgs, compare: bool) -> Result<String> {
    let config = network_config(s, &mut a)?;
    let mut times = match s.get::<String>("times", a.times.take())? {
        Some(t) => parse_list(&t)?,
        None => Vec::new(),
    };
    times.push(config.final_time);
    let cutoff: f64 = s.or("cutoff", a.cutoff.take(), 10.0 * config.epsilon)?;
    let probe: Option<f64> = s.get("probe-x", a.probe_x.take())?;
    let out_dir = s.path("out-dir", a.out_dir.take());
    let with_macro = compare || s.flag("with-macro", a.with_macro)?;
    let node_dist = s.flag("node-dist", a.node_dist)?;
    s.finish()?;

    let kin = kinetic_simulate(&config, &times)?;
    let mut out = String::new();
    kv(&mut out, "family", config.family);
    kv(&mut out, "n", config.n_edges);
    kv(&mut out, "N", config.n_half);
    kv(&mut out, "epsilon", fmt17(config.epsilon));
    kv(&mut out, "dx", fmt17(config.dx));
    kv(&mut out, "final_time", fmt17(config.final_time));
    kv(&mut out, "steps", kin.steps);
    kv(&mut out, "mass_initial", fmt17(kin.initial_mass));
    kv(&mut out, "mass_final", fmt17(kin.final_mass));
    kv(&mut out, "mass_drift", fmt17(kin.mass_drift()));
    kv(&mut out, "mass_defect", fmt17(kin.mass_defect()));
    if let Some(dir) = &out_dir {
        write_snapshots(dir, "kinetic", &kin.snapshots, config.dx)?;
    }
    let kin_rho: Vec<Vec<f64>> = (0..config.n_edges).map(|e| kin.field.density(e)).collect();
    if let Some(x) = probe {
        for (e, rho) in kin_rho.iter().enumerate() {
            kv(&mut out, &format!("kinetic_rho{}_at_x", e + 1), fmt17(sample(rho, config.dx, x)));
        }
    }
    if with_macro {
        let delta = spectral_delta(&config)?;
        let mac = macro_simulate(&config, delta, &times)?;
        kv(&mut out, "delta", fmt17(delta));
        kv(&mut out, "plateau_edge2", fmt17(1.0 / (1.0 + config.family.wave_speed() * delta)));
        if let Some(dir) = &out_dir {
            write_snapshots(dir, "macro", &mac.snapshots, config.dx)?;
        }
        if let Some(x) = probe {
            for (e, rho) in mac.field.rho.iter().enumerate() {
                kv(&mut out, &format!("macro_rho{}_at_x", e + 1), fmt17(sample(rho, config.dx, x)));
            }
        }
        if compare {
            kv(&mut out, "cutoff", fmt17(cutoff));
            for err in compare_runs(&kin_rho, &mac.field.rho, config.dx, cutoff)? {
                kv(&mut out, &format!("max_error_edge{}", err.edge + 1), fmt17(err.max));
                kv(&mut out, &format!("l1_error_edge{}", err.edge + 1), fmt17(err.l1));
            }
        }
    }
    if node_dist {
        let dir = out_dir.as_deref().ok_or_else(|| Error::InvalidInput("--node-dist needs --out-dir".into()))?;
        if config.family != Family::Hermite {
            return Err(Error::InvalidInput("node distributions are available for the Hermite family only".into()));
        }
        let op = LayerOperator::new(config.family, config.n_half.max(2), EdgeCount::Finite(config.n_edges))?;
        let a = op.wave_speed();
        let r_minus: Vec<f64> = config.initial.iter().map(|(rho, q)| q - a * rho).collect();
        let state = node_solve(&op, &r_minus)?;
        let vs: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.01).collect();
        for edge in 0..config.n_edges {
            for filter in [false, true] {
                let f = reconstruct_distribution(&state, edge, &vs, filter)?;
                let suffix = if filter { "_filtered" } else { "" };
                write_columns(&dir.join(format!("node_dist_edge{}{suffix}.txt", edge + 1)), vs.iter().copied().zip(f))?;
            }
        }
    }
    Ok(out)
}

fn cmd_audit(s: &mut Settings, a: AuditArgs) -> Result<String> {
    let family: Family = s.require("family", a.family)?;
    let n_min: usize = s.or("N-min", a.n_min, 2)?;
    let n_max: usize = s.require("N-max", a.n_max)?;
    let e_min: usize = s.or("n-min", a.edges_min, 2)?;
    let e_max: usize = s.require("n-max", a.edges_max)?;
    s.finish()?;
    if n_min < 2 {
        return Err(Error::InvalidInput(format!("N must be >= 2, got {n_min}")));
    }
    let report = wellposedness_audit(family, n_min..=n_max, e_min..=e_max)?;
    let mut out = String::new();
    for r in &report.rows {
        let dissipative = match r.dissipative() {
            Some(true) => "dissipative",
            Some(false) => "not-dissipative",
            None => "n/a",
        };
        writeln!(
            out,
            "N={} n={} cond_b1={} cond_b2={} {} {}",
            r.n_half,
            r.n_edges,
            fmt17(r.cond_b1),
            fmt17(r.cond_b2),
            if r.invertible { "invertible" } else { "singular" },
            dissipative
        )
        .expect("write to string");
    }
    kv(&mut out, "rows", report.rows.len());
    kv(&mut out, "all_passed", report.all_passed());
    Ok(out)
}

/// Runs one parsed command and returns its report.
pub fn execute(cli: Cli) -> Result<String> {
    let mut s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Delta(a) => cmd_delta(&mut s, a),
        Command::Sweep(a) => cmd_sweep(&mut s, a),
        Command::NodeSolve(a) => cmd_node(&mut s, a),
        Command::Simulate(a) => cmd_simulate(&mut s, a, false),
        Command::Compare(a) => cmd_simulate(&mut s, a, true),
        Command::Audit(a) => cmd_audit(&mut s, a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    match execute(cli) {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}
