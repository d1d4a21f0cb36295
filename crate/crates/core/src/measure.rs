//! Finite-volume measures defined by a vertex field.
//!
//! On `V_n` the density with respect to Lebesgue measure on `[0,1]^{V_n}` is
//!
//! ```text
//! mu_n(sigma) = Z_n^{-1} Π_{<x,y>} K(sigma(x), sigma(y)) · Π_{x ∈ W_n} exp(h(sigma(x), x))
//! ```
//!
//! with edges oriented from parent to child. Everything is evaluated by one
//! bottom-up pass of partial partition functions.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::{residual, VertexField};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::format_f64;
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::tree::{TreeShape, VertexAddr};

/// One spin per vertex of `V_n`, in the vertex order of [`TreeShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    shape: TreeShape,
    spins: Vec<f64>,
}

impl Configuration {
    pub fn new(shape: TreeShape, spins: Vec<f64>) -> Result<Self> {
        if spins.len() != shape.len() {
            return Err(Error::Contract(format!(
                "{} spins for a tree with {} vertices",
                spins.len(),
                shape.len()
            )));
        }
        if let Some(s) = spins.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Contract(format!("spin {s} outside [0, 1]")));
        }
        Ok(Self { shape, spins })
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn spins(&self) -> &[f64] {
        &self.spins
    }

    pub fn get(&self, x: &VertexAddr) -> Option<f64> {
        self.shape.index_of(x).map(|i| self.spins[i])
    }

    pub fn root(&self) -> f64 {
        self.spins[0]
    }

    /// CSV with header `vertex,spin`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["vertex", "spin"])?;
        for (i, (m, p)) in self.shape.positions().enumerate() {
            wtr.write_record([self.shape.addr(m, p).to_string(), format_f64(self.spins[i])])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Partial partition functions `z(t,x) = scaled(t,x) · exp(log_scale(x))`.
///
/// `z(t,x) = exp(h(t,x))` on `W_n`, and `Π_{y ∈ S(x)} ∫ K(t,u) z(u,y) du` inside.
#[derive(Debug, Clone)]
pub struct MessageSet {
    shape: TreeShape,
    scaled: Vec<Vec<f64>>,
    scaled_at_zero: Vec<f64>,
    log_scale: Vec<f64>,
}

impl MessageSet {
    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    /// Node values of `z(·,x)` divided by `exp(log_scale(x))`; their maximum is 1.
    pub fn scaled(&self, x: usize) -> &[f64] {
        &self.scaled[x]
    }

    pub fn scaled_at_zero(&self, x: usize) -> f64 {
        self.scaled_at_zero[x]
    }

    pub fn log_scale(&self, x: usize) -> f64 {
        self.log_scale[x]
    }

    /// `ln z(t_i, x)` at node `i`.
    pub fn log_z(&self, x: usize, i: usize) -> f64 {
        self.scaled[x][i].ln() + self.log_scale[x]
    }
}

fn check_grid(kern: &Kernel, vf: &VertexField) -> Result<()> {
    if vf.n_nodes() != kern.n() {
        return Err(Error::Contract("vertex field and kernel use different grids".into()));
    }
    Ok(())
}

/// Rescales log-values so their maximum is 0; returns the shift.
fn normalize_logs(logs: &mut [f64], log0: &mut f64) -> Result<f64> {
    let s = logs.iter().copied().fold(*log0, f64::max);
    if !s.is_finite() {
        return Err(Error::Numeric("partial partition function is not finite".into()));
    }
    for v in logs.iter_mut() {
        *v -= s;
    }
    *log0 -= s;
    Ok(s)
}

/// `ln ∫ K(t,u) z(u,y) du` at every node t and at t = 0, up to `log_scale(y)`.
fn log_child_integrals(kern: &Kernel, wz: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = kern.n();
    let dot = |row: &[f64]| row.iter().zip(wz).map(|(k, v)| k * v).sum::<f64>();
    let logs: Vec<f64> = (0..n).map(|i| dot(kern.row(i)).ln()).collect();
    let log0 = dot(kern.row0()).ln();
    if logs.iter().chain([&log0]).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("message integral underflowed".into()));
    }
    Ok((logs, log0))
}

pub fn messages(kern: &Kernel, vf: &VertexField) -> Result<MessageSet> {
    check_grid(kern, vf)?;
    let shape = vf.shape();
    let n = kern.n();
    let w = kern.grid().weights();
    let len = shape.len();
    let mut scaled = vec![Vec::new(); len];
    let mut scaled_at_zero = vec![0.0; len];
    let mut log_scale = vec![0.0; len];

    let leaf_off = shape.level_offset(shape.depth);
    let leaves: Vec<(Vec<f64>, f64, f64)> = vf
        .level(shape.depth)
        .par_iter()
        .map(|h| {
            let mut logs = h.values().to_vec();
            let mut log0 = h.value_at_zero();
            let s = normalize_logs(&mut logs, &mut log0)?;
            Ok((logs.iter().map(|v| v.exp()).collect(), log0.exp(), s))
        })
        .collect::<Result<_>>()?;
    for (p, (v, v0, s)) in leaves.into_iter().enumerate() {
        scaled[leaf_off + p] = v;
        scaled_at_zero[leaf_off + p] = v0;
        log_scale[leaf_off + p] = s;
    }

    for m in (0..shape.depth).rev() {
        let off = shape.level_offset(m);
        let child_off = shape.level_offset(m + 1);
        let b = shape.branching(m);
        let level: Vec<(Vec<f64>, f64, f64)> = (0..shape.level_size(m))
            .into_par_iter()
            .map(|p| {
                let mut logs = vec![0.0; n];
                let mut log0 = 0.0;
                let mut s = 0.0;
                for c in 0..b {
                    let y = child_off + shape.child_pos(m, p, c);
                    let wz: Vec<f64> = w.iter().zip(&scaled[y]).map(|(a, z)| a * z).collect();
                    let (l, l0) = log_child_integrals(kern, &wz)?;
                    for (acc, v) in logs.iter_mut().zip(&l) {
                        *acc += v;
                    }
                    log0 += l0;
                    s += log_scale[y];
                }
                s += normalize_logs(&mut logs, &mut log0)?;
                Ok((logs.iter().map(|v| v.exp()).collect(), log0.exp(), s))
            })
            .collect::<Result<_>>()?;
        for (p, (v, v0, s)) in level.into_iter().enumerate() {
            scaled[off + p] = v;
            scaled_at_zero[off + p] = v0;
            log_scale[off + p] = s;
        }
    }
    Ok(MessageSet {
        shape,
        scaled,
        scaled_at_zero,
        log_scale,
    })
}

/// `ln Z_n = ln ∫ z(t, root) dt`.
pub fn log_partition(kern: &Kernel, vf: &VertexField) -> Result<f64> {
    let msgs = messages(kern, vf)?;
    Ok(log_partition_of(kern.grid(), &msgs))
}

fn log_partition_of(grid: &Grid, msgs: &MessageSet) -> f64 {
    grid.weighted_sum(msgs.scaled(0)).ln() + msgs.log_scale(0)
}

fn normalized_density(grid: &Grid, values: &[f64], at_zero: f64) -> Field {
    let mass = grid.weighted_sum(values);
    Field::from_parts(values.iter().map(|v| v / mass).collect(), at_zero / mass)
}

/// Density of the root spin; integrates to 1 on the grid.
pub fn root_marginal(kern: &Kernel, vf: &VertexField) -> Result<Field> {
    let msgs = messages(kern, vf)?;
    Ok(normalized_density(kern.grid(), msgs.scaled(0), msgs.scaled_at_zero(0)))
}

/// `ln mu_n(sigma)`; leaf fields are interpolated off the grid and the kernel
/// is evaluated directly.
pub fn log_density(kern: &Kernel, vf: &VertexField, sigma: &Configuration) -> Result<f64> {
    let shape = vf.shape();
    if sigma.shape != shape {
        return Err(Error::Contract("configuration and vertex field live on different trees".into()));
    }
    let log_z = log_partition(kern, vf)?;
    let grid = kern.grid();
    let mut total = -log_z;
    for m in 0..shape.depth {
        let off = shape.level_offset(m);
        let child_off = shape.level_offset(m + 1);
        for p in 0..shape.level_size(m) {
            let t = sigma.spins[off + p];
            for c in 0..shape.branching(m) {
                let u = sigma.spins[child_off + shape.child_pos(m, p, c)];
                total += kern.eval(t, u).ln();
            }
        }
    }
    let leaf_off = shape.level_offset(shape.depth);
    for (p, h) in vf.level(shape.depth).iter().enumerate() {
        total += h.interpolate(grid, sigma.spins[leaf_off + p]);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub n_samples: usize,
    pub max_rel_err: f64,
    pub pass: bool,
    pub residual: f64,
}

/// Compares `∫ mu_n(sigma ∨ omega) d omega` over the leaf spins `omega` with
/// `mu_{n-1}(sigma)` for random `sigma` on `V_{n-1}` with spins at grid nodes.
///
/// The leaf integral factorizes into one quadrature per leaf, so no sampling
/// error enters. Edge weights inside `V_{n-1}` are common to both sides.
pub fn check_compatibility(
    kern: &Kernel,
    vf: &VertexField,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CompatibilityReport> {
    check_grid(kern, vf)?;
    let shape = vf.shape();
    if shape.depth == 0 {
        return Err(Error::Contract("compatibility needs a tree of depth at least 1".into()));
    }
    let res = residual(kern, vf)?.max_res;
    let n = kern.n();
    let w = kern.grid().weights();
    let log_z_n = log_partition(kern, vf)?;
    let log_z_prev = log_partition(kern, &vf.truncate(shape.depth - 1))?;

    // ln ∫ K(t_i,u) exp(h(u,y)) du for every leaf y and node i
    let leaf_logs: Vec<Vec<f64>> = vf
        .level(shape.depth)
        .par_iter()
        .map(|h| {
            let s = h.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let wz: Vec<f64> = w.iter().zip(h.values()).map(|(a, v)| a * (v - s).exp()).collect();
            let (l, _) = log_child_integrals(kern, &wz)?;
            Ok(l.into_iter().map(|v| v + s).collect())
        })
        .collect::<Result<_>>()?;

    let m = shape.depth - 1;
    let parents = vf.level(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err = 0.0_f64;
    for _ in 0..n_samples {
        // interior spins only enter through edge weights shared by both sides,
        // but are drawn so the sample is a full configuration on V_{n-1}
        let spins: Vec<usize> = (0..shape.level_offset(m + 1)).map(|_| rng.random_range(0..n)).collect();
        let boundary = &spins[shape.level_offset(m)..];
        let mut lhs = -log_z_n;
        let mut rhs = -log_z_prev;
        for (p, &i) in boundary.iter().enumerate() {
            for c in 0..shape.branching(m) {
                lhs += leaf_logs[shape.child_pos(m, p, c)][i];
            }
            rhs += parents[p].values()[i];
        }
        max_rel_err = max_rel_err.max((lhs - rhs).exp_m1().abs());
    }
    Ok(CompatibilityReport {
        n_samples,
        max_rel_err,
        pass: max_rel_err < tol && res < tol,
        residual: res,
    })
}

/// Draws from discrete weights over grid cells, then uniformly within the cell,
/// i.e. inverts the piecewise-linear CDF through the cell boundaries.
fn draw_cell(bounds: &[f64], weights: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut j = weights.len() - 1;
    for (i, &p) in weights.iter().enumerate() {
        acc += p;
        if target < acc {
            j = i;
            break;
        }
    }
    let lo = bounds[j];
    let hi = bounds[j + 1];
    (lo + rng.random::<f64>() * (hi - lo)).clamp(0.0, 1.0)
}

/// Top-down sampler sharing one message pass across draws.
pub struct Sampler<'a> {
    kern: &'a Kernel,
    msgs: MessageSet,
    bounds: Vec<f64>,
    /// `w_j z(u_j, x)` up to scale.
    weighted: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    pub fn new(kern: &'a Kernel, vf: &VertexField) -> Result<Self> {
        let msgs = messages(kern, vf)?;
        let w = kern.grid().weights();
        let weighted = msgs
            .scaled
            .iter()
            .map(|z| z.iter().zip(w).map(|(a, b)| a * b).collect())
            .collect();
        Ok(Self {
            kern,
            msgs,
            bounds: kern.grid().cell_bounds(),
            weighted,
        })
    }

    pub fn sample(&self, seed: u64) -> Configuration {
        let shape = self.msgs.shape;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spins = vec![0.0; shape.len()];
        spins[0] = draw_cell(&self.bounds, &self.weighted[0], &mut rng);
        let nodes = self.kern.grid().nodes();
        let mut cond = vec![0.0; nodes.len()];
        for m in 0..shape.depth {
            let off = shape.level_offset(m);
            let child_off = shape.level_offset(m + 1);
            for p in 0..shape.level_size(m) {
                let t = spins[off + p];
                for c in 0..shape.branching(m) {
                    let y = child_off + shape.child_pos(m, p, c);
                    for ((out, &u), &wz) in cond.iter_mut().zip(nodes).zip(&self.weighted[y]) {
                        *out = self.kern.eval(t, u) * wz;
                    }
                    spins[y] = draw_cell(&self.bounds, &cond, &mut rng);
                }
            }
        }
        Configuration { shape, spins }
    }

    /// Configuration `i` uses seed `seed + i`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<Configuration> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(seed.wrapping_add(i as u64)))
            .collect()
    }
}

pub fn sample_configuration(kern: &Kernel, vf: &VertexField, seed: u64) -> Result<Configuration> {
    Ok(Sampler::new(kern, vf)?.sample(seed))
}

pub fn sample_many(kern: &Kernel, vf: &VertexField, count: usize, seed: u64) -> Result<Vec<Configuration>> {
    Ok(Sampler::new(kern, vf)?.sample_many(count, seed))
}

/// Density of the spin at `x`: the downward message at `x` times the message
/// reaching `x` from the rest of the tree.
pub fn marginal_at(kern: &Kernel, vf: &VertexField, x: &VertexAddr) -> Result<Field> {
    let shape = vf.shape();
    shape
        .index_of(x)
        .ok_or_else(|| Error::Contract(format!("vertex `{x}` is not in the tree")))?;
    if x.depth() == 0 {
        return root_marginal(kern, vf);
    }
    let msgs = messages(kern, vf)?;
    let grid = kern.grid();
    let nodes = grid.nodes();
    let w = grid.weights();
    let n = kern.n();

    let mut outside = vec![1.0; n];
    let mut pos = 0;
    for (m, &d) in x.digits().iter().enumerate() {
        let child_off = shape.level_offset(m + 1);
        // g(t) = outside(t) · Π_{siblings} ∫ K(t,u) z(u,c) du, weighted for quadrature in t
        let mut g: Vec<f64> = outside.iter().zip(w).map(|(o, a)| o * a).collect();
        for c in 0..shape.branching(m) {
            if c == d as usize {
                continue;
            }
            let wz: Vec<f64> = msgs.scaled(child_off + shape.child_pos(m, pos, c)).iter().zip(w).map(|(z, a)| z * a).collect();
            for (i, gi) in g.iter_mut().enumerate() {
                *gi *= kern.row(i).iter().zip(&wz).map(|(k, v)| k * v).sum::<f64>();
            }
        }
        let mut next: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[j] * kern.at(j, i)).sum()).collect();
        let peak = next.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Numeric(format!("outside message at `{x}` degenerated")));
        }
        next.iter_mut().for_each(|v| *v /= peak);
        if m + 1 == x.depth() {
            let g0: f64 = (0..n).map(|j| g[j] * kern.eval(nodes[j], 0.0)).sum::<f64>() / peak;
            let xi = child_off + shape.child_pos(m, pos, d as usize);
            let dens: Vec<f64> = next.iter().zip(msgs.scaled(xi)).map(|(o, z)| o * z).collect();
            return Ok(normalized_density(grid, &dens, g0 * msgs.scaled_at_zero(xi)));
        }
        outside = next;
        pos = shape.child_pos(m, pos, d as usize);
    }
    unreachable!("loop returns at the last digit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rule;
    use crate::kernel::Preset;
    use crate::ti_solver::find_ti_standard;
    use crate::tree::Mode;

    fn grid() -> Grid {
        Grid::new(32, Rule::GaussSplit).unwrap()
    }

    fn zeros(g: &Grid, k: usize, depth: usize, mode: Mode) -> VertexField {
        VertexField::zeros(g.len(), TreeShape::new(k, depth, mode).unwrap()).unwrap()
    }

    #[test]
    fn root_only_tree() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let h = Field::from_fn(&g, |t| (3.0 * t).sin()).unwrap();
        let vf = VertexField::translation_invariant(&h, TreeShape::new(2, 0, Mode::Half).unwrap()).unwrap();
        let msgs = messages(&kern, &vf).unwrap();
        for i in 0..g.len() {
            assert!((msgs.log_z(0, i) - h.values()[i]).abs() < 1e-14);
        }
        let mass = g.integrate_fn(|t| (3.0 * t).sin().exp());
        let dens = root_marginal(&kern, &vf).unwrap();
        for (i, &t) in g.nodes().iter().enumerate() {
            assert!((dens.values()[i] - (3.0 * t).sin().exp() / mass).abs() < 1e-13);
        }
        let sigma = Configuration::new(vf.shape(), vec![0.3]).unwrap();
        let ld = log_density(&kern, &vf, &sigma).unwrap();
        assert!((ld - (h.interpolate(&g, 0.3) - mass.ln())).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_zero_field_is_uniform() {
        let g = grid();
        let kern = Kernel::preset(Preset::Constant, &g).unwrap();
        let vf = zeros(&g, 2, 3, Mode::Full);
        assert!(log_partition(&kern, &vf).unwrap().abs() < 1e-12);
        let dens = root_marginal(&kern, &vf).unwrap();
        assert!(dens.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let x: VertexAddr = "2/1".parse().unwrap();
        let mx = marginal_at(&kern, &vf, &x).unwrap();
        assert!(mx.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let sigma = sample_configuration(&kern, &vf, 3).unwrap();
        assert!(log_density(&kern, &vf, &sigma).unwrap().abs() < 1e-12);
    }

    #[test]
    fn chain_single_child() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let vf = zeros(&g, 1, 1, Mode::Half);
        let msgs = messages(&kern, &vf).unwrap();
        for i in 0..g.len() {
            let direct: f64 = g.weighted_sum(kern.row(i));
            assert!((msgs.log_z(0, i) - direct.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn shifting_leaves_changes_only_partition() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K3, &g).unwrap();
        let shape = TreeShape::new(2, 2, Mode::Full).unwrap();
        let h = Field::from_fn(&g, |t| t * (1.0 - t)).unwrap();
        let vf = VertexField::translation_invariant(&h, shape).unwrap();
        let c = 0.7;
        let shifted = vf
            .map_level(2, |f| Field::from_parts(f.values().iter().map(|v| v + c).collect(), f.value_at_zero()))
            .unwrap();
        let dz = log_partition(&kern, &shifted).unwrap() - log_partition(&kern, &vf).unwrap();
        assert!((dz - shape.level_size(2) as f64 * c).abs() < 1e-11);
        let spins = (0..shape.len()).map(|i| g.nodes()[(7 * i) % g.len()]).collect();
        let sigma = Configuration::new(shape, spins).unwrap();
        let a = log_density(&kern, &vf, &sigma).unwrap();
        let b = log_density(&kern, &shifted, &sigma).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn log_density_normalizes_on_small_tree() {
        // k = 1, depth 1: two spins, integrate the density over the grid
        let g = grid();
        let kern = Kernel::from_xi(|t, u| t * u, 1.0, 1.0, &g).unwrap();
        let h = Field::from_fn(&g, |t| t).unwrap().with_value_at_zero(0.0);
        let shape = TreeShape::new(1, 1, Mode::Half).unwrap();
        let vf = VertexField::new(shape, vec![Field::zeros(g.len()), h], crate::constructions::Provenance::Manual).unwrap();
        let mut total = 0.0;
        for (i, &t) in g.nodes().iter().enumerate() {
            for (j, &u) in g.nodes().iter().enumerate() {
                let s = Configuration::new(shape, vec![t, u]).unwrap();
                total += g.weights()[i] * g.weights()[j] * log_density(&kern, &vf, &s).unwrap().exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compatibility_tracks_the_equation() {
        let g = grid();
        let k2 = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let rep = check_compatibility(&k2, &zeros(&g, 2, 3, Mode::Full), 50, 1, 1e-8).unwrap();
        assert!(rep.pass && rep.max_rel_err < 1e-8, "{rep:?}");

        let prod = Kernel::from_xi(|t, u| t * u, 1.0, 1.0, &g).unwrap();
        let rep = check_compatibility(&prod, &zeros(&g, 2, 3, Mode::Full), 50, 1, 1e-6).unwrap();
        assert!(!rep.pass && rep.max_rel_err > 1e-2, "{rep:?}");

        let fps = find_ti_standard(&k2, 2).unwrap();
        let vf = VertexField::translation_invariant(fps.last().unwrap(), TreeShape::new(2, 4, Mode::Full).unwrap()).unwrap();
        let rep = check_compatibility(&k2, &vf, 50, 2, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn marginals_agree_at_root_and_normalize() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let fps = find_ti_standard(&kern, 2).unwrap();
        let vf = VertexField::translation_invariant(fps.last().unwrap(), TreeShape::new(2, 3, Mode::Full).unwrap()).unwrap();
        let root = root_marginal(&kern, &vf).unwrap();
        assert_eq!(marginal_at(&kern, &vf, &VertexAddr::root()).unwrap(), root);
        for a in ["0", "2/1", "1/0/1"] {
            let d = marginal_at(&kern, &vf, &a.parse().unwrap()).unwrap();
            assert!((g.integrate(d.values()).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(marginal_at(&kern, &vf, &"3".parse().unwrap()).is_err());
    }

    #[test]
    fn marginal_matches_brute_force_on_a_chain() {
        // k = 1, depth 2: p(sigma_1) = ∫∫ K(a,b) K(b,c) e^{h(c)} da dc / Z
        let g = Grid::new(16, Rule::GaussSplit).unwrap();
        let kern = Kernel::from_xi(|t, u| (t - u).powi(2), 1.0, 0.8, &g).unwrap();
        let h = Field::from_fn(&g, |t| 2.0 * t).unwrap().with_value_at_zero(0.0);
        let shape = TreeShape::new(1, 2, Mode::Half).unwrap();
        let vf = VertexField::translation_invariant(&h, shape).unwrap();
        let d = marginal_at(&kern, &vf, &"0".parse().unwrap()).unwrap();
        let n = g.len();
        let w = g.weights();
        let mut p = vec![0.0; n];
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    p[b] += w[a] * w[c] * kern.at(a, b) * kern.at(b, c) * h.values()[c].exp();
                }
            }
        }
        let z = g.weighted_sum(&p);
        for b in 0..n {
            assert!((d.values()[b] - p[b] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_range() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let vf = zeros(&g, 2, 3, Mode::Full);
        let a = sample_many(&kern, &vf, 20, 9).unwrap();
        let b = sample_many(&kern, &vf, 20, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[3], sample_configuration(&kern, &vf, 12).unwrap());
        assert!(a.iter().flat_map(|c| c.spins()).all(|s| (0.0..=1.0).contains(s)));
    }
}
