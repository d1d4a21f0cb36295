//! Interaction kernels `K(t,u) = exp(J·beta·xi(t,u))` and their grid caches.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{real_root, Expr};
use crate::field::Field;
use crate::grid::Grid;

/// Kernels shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// `1 + (14/15)·(4(t-1/2)(u-1/2))^{1/5}`, two or more Gibbs measures at k = 2.
    #[serde(rename = "ehr12-k2")]
    Ehr12K2,
    /// `1 + (1/2)·(4(t-1/2)(u-1/2))^{1/7}`, the k = 3 example.
    #[serde(rename = "ehr12-k3")]
    Ehr12K3,
    /// `K ≡ 1`: no interaction.
    #[serde(rename = "constant")]
    Constant,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Ehr12K2 => "ehr12-k2",
            Preset::Ehr12K3 => "ehr12-k3",
            Preset::Constant => "constant",
        }
    }

    pub fn eval(self, t: f64, u: f64) -> f64 {
        let x = 4.0 * (t - 0.5) * (u - 0.5);
        match self {
            Preset::Ehr12K2 => 1.0 + 14.0 / 15.0 * real_root(5.0, x),
            Preset::Ehr12K3 => 1.0 + 0.5 * real_root(7.0, x),
            Preset::Constant => 1.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ehr12-k2" => Ok(Preset::Ehr12K2),
            "ehr12-k3" => Ok(Preset::Ehr12K3),
            "constant" => Ok(Preset::Constant),
            other => Err(Error::Config(format!("unknown kernel preset `{other}`"))),
        }
    }
}

/// How a kernel is specified in configuration files and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Preset {
        preset: Preset,
    },
    Xi {
        xi: String,
        #[serde(rename = "J")]
        coupling: f64,
        beta: f64,
    },
}

type EvalFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A positive kernel together with its values on a grid.
#[derive(Clone)]
pub struct Kernel {
    eval: EvalFn,
    coupling: f64,
    beta: f64,
    preset: Option<Preset>,
    label: String,
    grid: Arc<Grid>,
    // row-major K(t_i, u_j)
    matrix: Vec<f64>,
    row0: Vec<f64>,
    min: f64,
    max: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("label", &self.label)
            .field("J", &self.coupling)
            .field("beta", &self.beta)
            .field("nodes", &self.grid.len())
            .finish()
    }
}

impl Kernel {
    /// `K(t,u) = exp(J·beta·xi(t,u))`.
    pub fn from_xi<F>(xi: F, coupling: f64, beta: f64, grid: &Grid) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_xi_labeled(xi, coupling, beta, grid, "xi".into())
    }

    fn from_xi_labeled<F>(xi: F, coupling: f64, beta: f64, grid: &Grid, label: String) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if coupling == 0.0 || !coupling.is_finite() {
            return Err(Error::Config(format!("coupling J must be finite and nonzero, got {coupling}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        let check = |t: f64, u: f64| -> Result<()> {
            let v = xi(t, u);
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidKernel(format!("xi({t}, {u}) = {v} is not finite")))
            }
        };
        for &t in grid.nodes().iter().chain(std::iter::once(&0.0)) {
            for &u in grid.nodes() {
                check(t, u)?;
            }
        }
        let jb = coupling * beta;
        let eval: EvalFn = Arc::new(move |t, u| (jb * xi(t, u)).exp());
        Self::build(eval, coupling, beta, None, label, grid)
    }

    pub fn from_expression(src: &str, coupling: f64, beta: f64, grid: &Grid) -> Result<Self> {
        let expr = Expr::parse(src)?;
        Self::from_xi_labeled(move |t, u| expr.eval(t, u), coupling, beta, grid, src.to_string())
    }

    pub fn preset(preset: Preset, grid: &Grid) -> Result<Self> {
        let eval: EvalFn = Arc::new(move |t, u| preset.eval(t, u));
        Self::build(eval, 1.0, 1.0, Some(preset), preset.name().to_string(), grid)
    }

    pub fn from_spec(spec: &KernelSpec, grid: &Grid) -> Result<Self> {
        match spec {
            KernelSpec::Preset { preset } => Self::preset(*preset, grid),
            KernelSpec::Xi { xi, coupling, beta } => Self::from_expression(xi, *coupling, *beta, grid),
        }
    }

    fn build(
        eval: EvalFn,
        coupling: f64,
        beta: f64,
        preset: Option<Preset>,
        label: String,
        grid: &Grid,
    ) -> Result<Self> {
        let n = grid.len();
        let mut matrix = Vec::with_capacity(n * n);
        for &t in grid.nodes() {
            for &u in grid.nodes() {
                matrix.push(eval(t, u));
            }
        }
        let row0: Vec<f64> = grid.nodes().iter().map(|&u| eval(0.0, u)).collect();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in matrix.iter().chain(&row0) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "kernel value {v} on the grid is not finite and positive"
                )));
            }
            min = min.min(v);
            max = max.max(v);
        }
        Ok(Self {
            eval,
            coupling,
            beta,
            preset,
            label,
            grid: Arc::new(grid.clone()),
            matrix,
            row0,
            min,
            max,
        })
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        (self.eval)(t, u)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn preset_id(&self) -> Option<Preset> {
        self.preset
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Row `i` of the node matrix: `K(t_i, u_j)` for all j.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    /// `K(0, u_j)`, evaluated directly.
    pub fn row0(&self) -> &[f64] {
        &self.row0
    }

    /// Extremes of K over the node matrix and the t = 0 row.
    pub fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    /// Checks `∫(K(t,u) - K(0,u))du = 0` at every node t and at t = 0.
    pub fn check_zero_mean(&self, tol: f64) -> ZeroMeanReport {
        let g = &self.grid;
        let i0 = g.weighted_sum(&self.row0);
        let max_dev = (0..self.n())
            .map(|i| (g.weighted_sum(self.row(i)) - i0).abs())
            .fold(0.0, f64::max);
        ZeroMeanReport {
            holds: max_dev < tol,
            max_dev,
            tol,
        }
    }

    /// Pointwise a-priori band `[h_min(t), h_max(t)]` for k-fold sums of A:
    /// `h_min = k ln(min_u K(t,u) / max_u K(0,u))`, `h_max = k ln(max_u K(t,u) / min_u K(0,u))`.
    ///
    /// Extremes over u use the nodes plus u ∈ {0, 1/2, 1} evaluated directly.
    pub fn h_bounds(&self, k: usize) -> Result<(Field, Field)> {
        let extra = [0.0, 0.5, 1.0];
        let extremes = |t: f64, row: &[f64]| -> Result<(f64, f64)> {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for v in row.iter().copied().chain(extra.iter().map(|&u| self.eval(t, u))) {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "kernel value {v} at t = {t} is not finite and positive"
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
            Ok((lo, hi))
        };
        let (lo0, hi0) = extremes(0.0, &self.row0)?;
        let kf = k as f64;
        let mut hmin = Vec::with_capacity(self.n());
        let mut hmax = Vec::with_capacity(self.n());
        for (i, &t) in self.grid.nodes().iter().enumerate() {
            let (lo, hi) = extremes(t, self.row(i))?;
            hmin.push(kf * (lo / hi0).ln());
            hmax.push(kf * (hi / lo0).ln());
        }
        Ok((
            Field::new(hmin, kf * (lo0 / hi0).ln())?,
            Field::new(hmax, kf * (hi0 / lo0).ln())?,
        ))
    }

    /// `k·ln(K(t,u*)/K(0,u*))`: the image under kA of a point mass at `u*`.
    pub fn boundary_field(&self, k: usize, u_star: f64) -> Field {
        let kf = k as f64;
        let base = self.eval(0.0, u_star);
        let values = self
            .grid
            .nodes()
            .iter()
            .map(|&t| kf * (self.eval(t, u_star) / base).ln())
            .collect();
        Field::from_parts(values, 0.0)
    }

    pub fn spec(&self) -> KernelSpec {
        match self.preset {
            Some(preset) => KernelSpec::Preset { preset },
            None => KernelSpec::Xi {
                xi: self.label.clone(),
                coupling: self.coupling,
                beta: self.beta,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroMeanReport {
    pub holds: bool,
    pub max_dev: f64,
    pub tol: f64,
}

/// Default tolerance for the zero-mean check at 64 split-Gauss nodes.
pub const ZERO_MEAN_TOL: f64 = 1e-8;
