//! Quadrature grids on [0,1].
//!
//! Every function of the spin variable is stored as samples at the nodes of a
//! [`Grid`]; integrals against Lebesgue measure are weighted sums.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Gauss-Legendre applied separately on [0,1/2] and [1/2,1].
    GaussSplit,
    CompositeSimpson,
    Trapezoid,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::GaussSplit => "gauss-split",
            Rule::CompositeSimpson => "composite-simpson",
            Rule::Trapezoid => "trapezoid",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-split" => Ok(Rule::GaussSplit),
            "composite-simpson" | "simpson" => Ok(Rule::CompositeSimpson),
            "trapezoid" => Ok(Rule::Trapezoid),
            other => Err(Error::Config(format!("unknown quadrature rule `{other}`"))),
        }
    }
}

/// Quadrature nodes and weights on [0,1]; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rule: Rule,
    zero_index: Option<usize>,
}

impl Grid {
    /// Builds a grid with `n_nodes` points.
    ///
    /// Minimum sizes: trapezoid 2, composite Simpson 3 (odd counts only),
    /// gauss-split 4 (even counts only, so the halves mirror each other).
    pub fn new(n_nodes: usize, rule: Rule) -> Result<Self> {
        let (nodes, weights) = match rule {
            Rule::Trapezoid => {
                if n_nodes < 2 {
                    return Err(Error::Config(format!(
                        "trapezoid rule needs at least 2 nodes, got {n_nodes}"
                    )));
                }
                let h = 1.0 / (n_nodes - 1) as f64;
                let nodes = equispaced(n_nodes);
                let mut weights = vec![h; n_nodes];
                weights[0] = 0.5 * h;
                weights[n_nodes - 1] = 0.5 * h;
                (nodes, weights)
            }
            Rule::CompositeSimpson => {
                if n_nodes < 3 || n_nodes.is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "composite Simpson needs an odd node count >= 3, got {n_nodes}"
                    )));
                }
                let h = 1.0 / (n_nodes - 1) as f64;
                let nodes = equispaced(n_nodes);
                let weights = (0..n_nodes)
                    .map(|i| {
                        let c = if i == 0 || i == n_nodes - 1 {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * h / 3.0
                    })
                    .collect();
                (nodes, weights)
            }
            Rule::GaussSplit => {
                if n_nodes < 4 || n_nodes % 2 == 1 {
                    return Err(Error::Config(format!(
                        "gauss-split needs an even node count >= 4, got {n_nodes}"
                    )));
                }
                let half = n_nodes / 2;
                let (x, w) = gauss_legendre(half);
                let mut nodes = Vec::with_capacity(n_nodes);
                let mut weights = Vec::with_capacity(n_nodes);
                // [0,1/2] then its mirror image on [1/2,1]
                for i in 0..half {
                    nodes.push(0.25 + 0.25 * x[i]);
                    weights.push(0.25 * w[i]);
                }
                for i in (0..half).rev() {
                    nodes.push(1.0 - (0.25 + 0.25 * x[i]));
                    weights.push(0.25 * w[i]);
                }
                (nodes, weights)
            }
        };
        let zero_index = nodes.iter().position(|&t| t == 0.0);
        Ok(Self {
            nodes,
            weights,
            rule,
            zero_index,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node at t = 0, if the rule includes it.
    pub fn zero_index(&self) -> Option<usize> {
        self.zero_index
    }

    /// Mirror index of node `i` under t -> 1 - t. All rules produce symmetric grids.
    pub fn mirror(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::Contract(format!(
                "integrand has {} samples, grid has {} nodes",
                values.len(),
                self.len()
            )));
        }
        Ok(self.weighted_sum(values))
    }

    pub(crate) fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Cell boundaries `b_0 = 0 < b_1 < ... < b_n = 1` with `b_{j+1} - b_j = w_j`.
    ///
    /// Node `j` lies in cell `[b_j, b_{j+1}]` for all supported rules; these
    /// cells carry the piecewise-linear CDF used for sampling.
    pub fn cell_bounds(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for w in &self.weights {
            acc += w;
            out.push(acc);
        }
        *out.last_mut().unwrap() = 1.0;
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["node", "weight"])?;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            wtr.write_record([format_f64(*t), format_f64(*w)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn equispaced(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    nodes[n - 1] = 1.0;
    nodes
}

/// Gauss-Legendre nodes (ascending) and weights on [-1,1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}
