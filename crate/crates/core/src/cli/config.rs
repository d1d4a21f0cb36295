//! Run configuration: defaults, then the JSON config file, then flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Flags;
use crate::error::{Error, Result};
use crate::grid::{Grid, Rule};
use crate::kernel::{Kernel, Preset};
use crate::tree::Mode;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub kernel: KernelSection,
    pub grid: GridSection,
    pub tree: TreeSection,
    pub solver: SolverSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub preset: Option<Preset>,
    pub xi: Option<String>,
    #[serde(rename = "J")]
    pub coupling: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nodes: Option<usize>,
    pub rule: Option<Rule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeSection {
    pub k: Option<usize>,
    pub k0: Option<usize>,
    pub depth: Option<usize>,
    pub mode: Option<Mode>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub outdir: Option<PathBuf>,
    pub samples: Option<usize>,
    pub amplitude: Option<f64>,
    pub compat_tol: Option<f64>,
    pub field: Option<PathBuf>,
    pub vertex: Option<String>,
    pub zeta0: Option<PathBuf>,
}

/// Output directory used when neither a flag nor the config sets one.
pub const OUTDIR_ENV: &str = "GIBBS_TREE_OUTDIR";

/// Effective parameters of a run, every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub kernel: EffKernel,
    pub grid: EffGrid,
    pub tree: EffTree,
    pub solver: EffSolver,
    pub run: EffRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffKernel {
    pub preset: Option<Preset>,
    pub xi: Option<String>,
    #[serde(rename = "J")]
    pub coupling: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffGrid {
    pub nodes: usize,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffTree {
    pub k: usize,
    pub k0: usize,
    pub depth: usize,
    pub mode: Mode,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffSolver {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffRun {
    pub seed: u64,
    pub threads: Option<usize>,
    pub outdir: PathBuf,
    pub samples: usize,
    /// `None` means the sup of the band `max(|h_min|, |h_max|)`.
    pub amplitude: Option<f64>,
    pub compat_tol: f64,
    pub field: Option<PathBuf>,
    pub vertex: String,
    pub zeta0: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config `{}`: {e}", path.display())))
    }
}

/// Merges flags over the config file over defaults. `default_mode` is the
/// tree mode used when neither source sets one.
pub fn resolve(cfg: &ConfigFile, f: &Flags, default_mode: Mode) -> Result<Params> {
    let preset = f.preset.or(cfg.kernel.preset);
    let xi = f.xi.clone().or_else(|| cfg.kernel.xi.clone());
    if preset.is_some() && xi.is_some() {
        return Err(Error::Config("give either a preset or an xi expression, not both".into()));
    }
    let coupling = f.coupling.or(cfg.kernel.coupling);
    let beta = f.beta.or(cfg.kernel.beta);
    if xi.is_none() && (coupling.is_some() || beta.is_some()) {
        return Err(Error::Config("J and beta only apply to xi kernels; presets fix both to 1".into()));
    }
    let preset = if xi.is_none() { Some(preset.unwrap_or(Preset::Ehr12K2)) } else { None };
    let k = f.k.or(cfg.tree.k).unwrap_or(2);
    let params = Params {
        kernel: EffKernel {
            preset,
            xi,
            coupling: coupling.unwrap_or(1.0),
            beta: beta.unwrap_or(1.0),
        },
        grid: EffGrid {
            nodes: f.nodes.or(cfg.grid.nodes).unwrap_or(64),
            rule: f.rule.or(cfg.grid.rule).unwrap_or(Rule::GaussSplit),
        },
        tree: EffTree {
            k,
            k0: f.k0.or(cfg.tree.k0).unwrap_or(k.saturating_sub(1).max(1)),
            depth: f.depth.or(cfg.tree.depth).unwrap_or(4),
            mode: f.mode.or(cfg.tree.mode).unwrap_or(default_mode),
            r: f.r.or(cfg.tree.r).unwrap_or(0.5),
        },
        solver: EffSolver {
            tol: f.tol.or(cfg.solver.tol).unwrap_or(1e-10),
            max_iter: f.max_iter.or(cfg.solver.max_iter).unwrap_or(10_000),
            damping: cfg.solver.damping.unwrap_or(1.0),
        },
        run: EffRun {
            seed: f.seed.or(cfg.run.seed).unwrap_or(0),
            threads: f.threads.or(cfg.run.threads),
            outdir: f
                .outdir
                .clone()
                .or_else(|| cfg.run.outdir.clone())
                .or_else(|| std::env::var_os(OUTDIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("runs")),
            samples: f.samples.or(cfg.run.samples).unwrap_or(1000),
            amplitude: f.amplitude.or(cfg.run.amplitude),
            compat_tol: f.compat_tol.or(cfg.run.compat_tol).unwrap_or(1e-6),
            field: f.field.clone().or_else(|| cfg.run.field.clone()),
            vertex: f.vertex.clone().or_else(|| cfg.run.vertex.clone()).unwrap_or_default(),
            zeta0: f.zeta0.clone().or_else(|| cfg.run.zeta0.clone()),
        },
    };
    params.validate()?;
    Ok(params)
}

impl Params {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.tree.k == 0 {
            return bad("k must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.tree.r) {
            return bad("r must lie in [0, 1]");
        }
        if !(self.solver.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if !(self.run.compat_tol > 0.0) {
            return bad("compat_tol must be positive");
        }
        if matches!(self.run.amplitude, Some(a) if !(a > 0.0)) {
            return bad("amplitude must be positive");
        }
        if self.run.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.nodes, self.grid.rule)
    }

    pub fn kernel(&self, grid: &Grid) -> Result<Kernel> {
        match (&self.kernel.xi, self.kernel.preset) {
            (Some(xi), _) => Kernel::from_expression(xi, self.kernel.coupling, self.kernel.beta, grid),
            (None, Some(p)) => Kernel::preset(p, grid),
            (None, None) => unreachable!("resolve always picks a kernel"),
        }
    }
}
