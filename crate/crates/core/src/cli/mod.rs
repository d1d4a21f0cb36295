//! The `gibbs-tree` command line.
//!
//! Every run writes `<outdir>/<command>-<timestamp>/manifest.json` plus the
//! CSV and JSON artifacts of the command. Exit codes: 0 success, 2 bad
//! configuration, 3 numeric failure.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Rule;
use crate::kernel::Preset;
use crate::tree::Mode;
use config::{ConfigFile, Params};
use output::{to_json_string, RunDir};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gibbs-tree", version, about = "Splitting Gibbs measures on Cayley trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Zero-mean condition and the band (h_min, h_max)
    KernelCheck,
    /// Translation-invariant fixed points of kA from the standard initial set
    SolveTi,
    /// Empirical Lipschitz constant of A
    Contraction,
    /// Lift a solution from the order-k0 tree to the order-k tree
    Art,
    /// Glue two translation-invariant solutions along the path of r
    Bg,
    /// Level sequence by backward inversion of kA
    Zachary,
    /// Residual and compatibility of a vertex-field dump
    Verify,
    /// Draw configurations from the finite-volume measure
    Sample,
    /// Single-site marginal density
    Marginal,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::SolveTi => "solve-ti",
            Command::Contraction => "contraction",
            Command::Art => "art",
            Command::Bg => "bg",
            Command::Zachary => "zachary",
            Command::Verify => "verify",
            Command::Sample => "sample",
            Command::Marginal => "marginal",
        }
    }

    /// Measures live on the full tree; the constructions on the half-tree.
    fn default_mode(self) -> Mode {
        match self {
            Command::Verify | Command::Sample | Command::Marginal => Mode::Full,
            _ => Mode::Half,
        }
    }
}

/// Flags shared by every subcommand; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config with sections kernel, grid, tree, solver, run
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
    /// xi(t,u) as an expression in t and u; K = exp(J·beta·xi)
    #[arg(long, global = true)]
    pub xi: Option<String>,
    #[arg(long = "J", global = true)]
    pub coupling: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub k0: Option<usize>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true)]
    pub rule: Option<Rule>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Parent of the run directory [env: GIBBS_TREE_OUTDIR]
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// Vertex-field dump (`vertex,t,value`)
    #[arg(long, global = true)]
    pub field: Option<PathBuf>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Vertex address, digits joined by `/`; empty for the root
    #[arg(long, global = true)]
    pub vertex: Option<String>,
    /// Field dump (`t,value`) used as the first Zachary level
    #[arg(long, global = true)]
    pub zeta0: Option<PathBuf>,
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    #[arg(long = "compat-tol", global = true)]
    pub compat_tol: Option<f64>,
}

/// What a command reports back; `exit` is nonzero when it stopped early but
/// still produced data.
struct Outcome {
    results: serde_json::Value,
    exit: i32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    kernel: &'a str,
    parameters: &'a Params,
    results: &'a serde_json::Value,
    outputs: &'a [String],
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERIC
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let params = config::resolve(&cfg, &cli.flags, cli.command.default_mode())?;
    match params.run.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(|| execute_with(cli.command, &params)),
        None => execute_with(cli.command, &params),
    }
}

fn execute_with(command: Command, params: &Params) -> Result<i32> {
    let grid = params.grid()?;
    let kern = params.kernel(&grid)?;
    let mut dir = RunDir::create(&params.run.outdir, command.name())?;
    let outcome = commands::dispatch(command, params, &kern, &mut dir);
    let (status, error, results, exit) = match &outcome {
        Ok(o) if o.exit == EXIT_OK => ("ok", None, o.results.clone(), EXIT_OK),
        Ok(o) => ("incomplete", None, o.results.clone(), o.exit),
        Err(e) => ("failed", Some(e.to_string()), serde_json::Value::Null, EXIT_NUMERIC),
    };
    let outputs = dir.outputs().to_vec();
    let manifest = Manifest {
        command: command.name(),
        version: env!("CARGO_PKG_VERSION"),
        status,
        error,
        kernel: kern.label(),
        parameters: params,
        results: &results,
        outputs: &outputs,
    };
    dir.json("manifest.json", &manifest)?;
    println!("{}", dir.path().display());
    if !results.is_null() {
        println!("{}", to_json_string(&results)?);
    }
    outcome.map(|_| exit)
}
