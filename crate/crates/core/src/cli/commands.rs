use std::fs::File;
use std::io::BufReader;

use serde_json::{json, Value};

use super::config::Params;
use super::output::RunDir;
use super::{Command, Outcome, EXIT_NUMERIC, EXIT_OK};
use crate::constructions::{art_lift, residual, zachary_levels, BgSetup, VertexField};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::format_f64;
use crate::kernel::{Kernel, ZERO_MEAN_TOL};
use crate::measure::{check_compatibility, marginal_at, root_marginal, Sampler};
use crate::operator::{apply_ka, estimate_contraction};
use crate::ti_solver::{find_ti_multi, standard_inits, SolveOptions, DISTINCT_EPS};
use crate::tree::{Path, TreeShape, VertexAddr};

/// Residual below which an input counts as a solution of the equation.
const ACCEPT_RESIDUAL: f64 = 1e-8;

/// Margin added to alpha_hat when judging per-level decay.
const DECAY_MARGIN: f64 = 0.05;

pub(super) fn dispatch(command: Command, p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Outcome> {
    let results = match command {
        Command::KernelCheck => kernel_check(p, kern, dir)?,
        Command::SolveTi => solve_ti(p, kern, dir)?,
        Command::Contraction => contraction(p, kern)?,
        Command::Art => art(p, kern, dir)?,
        Command::Bg => bg(p, kern, dir)?,
        Command::Zachary => return zachary(p, kern, dir),
        Command::Verify => verify(p, kern)?,
        Command::Sample => sample(p, kern, dir)?,
        Command::Marginal => marginal(p, kern, dir)?,
    };
    Ok(Outcome {
        results,
        exit: EXIT_OK,
    })
}

fn options(p: &Params) -> SolveOptions {
    SolveOptions {
        tol: p.solver.tol,
        max_iter: p.solver.max_iter,
        damping: p.solver.damping,
    }
}

fn open(path: &std::path::Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Config(format!("cannot open `{}`: {e}", path.display())))
}

fn fixed_points(p: &Params, kern: &Kernel, k: usize) -> Result<Vec<Field>> {
    let inits = standard_inits(kern, k)?;
    find_ti_multi(kern, k, &inits, &options(p), DISTINCT_EPS)
}

/// The vertex field given by `--field`, or the translation-invariant field of
/// the fixed point with the largest sup norm.
fn input_field(p: &Params, kern: &Kernel, k: usize) -> Result<VertexField> {
    match &p.run.field {
        Some(path) => VertexField::read_csv(kern.grid(), k, p.tree.mode, open(path)?),
        None => {
            let fps = fixed_points(p, kern, k)?;
            let h = fps.last().expect("find_ti_multi returns at least one fixed point");
            VertexField::translation_invariant(h, TreeShape::new(k, p.tree.depth, p.tree.mode)?)
        }
    }
}

fn amplitude(p: &Params, kern: &Kernel) -> Result<f64> {
    match p.run.amplitude {
        Some(a) => Ok(a),
        None => {
            let (lo, hi) = kern.h_bounds(p.tree.k)?;
            Ok(lo.sup_norm().max(hi.sup_norm()))
        }
    }
}

fn kernel_check(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let zm = kern.check_zero_mean(ZERO_MEAN_TOL);
    let (lo, hi) = kern.h_bounds(p.tree.k)?;
    let mut w = csv::Writer::from_writer(dir.file("h_bounds.csv")?);
    w.write_record(["t", "h_min", "h_max"])?;
    for ((t, a), (_, b)) in lo.rows(kern.grid()).into_iter().zip(hi.rows(kern.grid())) {
        w.write_record([format_f64(t), format_f64(a), format_f64(b)])?;
    }
    w.flush()?;
    let (kmin, kmax) = kern.bounds();
    Ok(json!({
        "zero_mean": zm,
        "kernel_min": kmin,
        "kernel_max": kmax,
        "h_min_sup": lo.sup_norm(),
        "h_max_sup": hi.sup_norm(),
    }))
}

fn solve_ti(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let k = p.tree.k;
    let fps = fixed_points(p, kern, k)?;
    let mut rows = Vec::new();
    for (i, h) in fps.iter().enumerate() {
        let name = format!("fixed_point_{i}.csv");
        h.write_csv(kern.grid(), dir.file(&name)?)?;
        rows.push(json!({
            "index": i,
            "file": name,
            "sup_norm": h.sup_norm(),
            "residual": h.sup_dist(&apply_ka(kern, k, h)?),
        }));
    }
    Ok(json!({ "count": fps.len(), "fixed_points": rows }))
}

fn contraction(p: &Params, kern: &Kernel) -> Result<Value> {
    let est = estimate_contraction(kern, p.run.samples, amplitude(p, kern)?, p.run.seed)?;
    Ok(serde_json::to_value(est)?)
}

fn art(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let src = input_field(p, kern, p.tree.k0)?;
    let lifted = art_lift(kern, &src, p.tree.k, p.tree.depth, ACCEPT_RESIDUAL)?;
    lifted.write_csv(kern.grid(), dir.file("vertex_field.csv")?)?;
    let res = residual(kern, &lifted)?;
    let non_constant_w1 = lifted.level(1.min(lifted.depth())).windows(2).any(|w| w[0] != w[1]);
    Ok(json!({
        "k0": src.k(),
        "k": lifted.k(),
        "depth": lifted.depth(),
        "provenance": lifted.provenance(),
        "residual": res,
        "non_constant_w1": non_constant_w1,
    }))
}

fn bg(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let k = p.tree.k;
    let n = p.tree.depth;
    let fps = fixed_points(p, kern, k)?;
    let (h, eta) = match fps.len() {
        1 => (fps[0].clone(), fps[0].clone()),
        m => (fps[m - 2].clone(), fps[m - 1].clone()),
    };
    let setup = BgSetup::new(kern, k, h, eta, ACCEPT_RESIDUAL)?;
    let path = Path::from_r(p.tree.r, k, n)?;
    let seed = setup.default_seed();
    let vf = setup.field(&path, n, &seed)?;
    vf.write_csv(kern.grid(), dir.file("vertex_field.csv")?)?;
    setup.h().write_csv(kern.grid(), dir.file("h.csv")?)?;
    setup.eta().write_csv(kern.grid(), dir.file("eta.csv")?)?;
    let res = if n > 0 { Some(residual(kern, &vf)?) } else { None };

    let alpha = estimate_contraction(kern, p.run.samples, amplitude(p, kern)?, p.run.seed)?;
    let other = setup.h().combine(0.75, setup.eta(), 0.25);
    let sens = setup.seed_sensitivity(&path, n, &seed, &other, alpha.alpha_hat, DECAY_MARGIN)?;
    Ok(json!({
        "r": p.tree.r,
        "digits": path.digits(),
        "h_eta_distance": setup.h().sup_dist(setup.eta()),
        "provenance": vf.provenance(),
        "residual": res,
        "contraction": alpha,
        "sensitivity": sens,
    }))
}

fn zachary(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Outcome> {
    let k = p.tree.k;
    let zeta0 = match &p.run.zeta0 {
        Some(path) => Field::read_csv(kern.grid(), open(path)?)?,
        None => apply_ka(kern, k, &kern.boundary_field(k, 1.0).scale(0.5))?,
    };
    let run = zachary_levels(kern, k, &zeta0, p.tree.depth, p.solver.tol, p.solver.max_iter)?;
    let mut w = csv::Writer::from_writer(dir.file("levels.csv")?);
    w.write_record(["level", "t", "value"])?;
    for (m, f) in run.levels.iter().enumerate() {
        for (t, v) in f.rows(kern.grid()) {
            w.write_record([m.to_string(), format_f64(t), format_f64(v)])?;
        }
    }
    w.flush()?;
    let vf = run.vertex_field(k)?;
    vf.write_csv(kern.grid(), dir.file("vertex_field.csv")?)?;
    let res = if vf.depth() > 0 { Some(residual(kern, &vf)?) } else { None };
    let results = json!({
        "complete": run.is_complete(),
        "levels": run.levels.len(),
        "failure": run.failure,
        "provenance": vf.provenance(),
        "residual": res,
    });
    let exit = if run.is_complete() { EXIT_OK } else { EXIT_NUMERIC };
    Ok(Outcome { results, exit })
}

fn verify(p: &Params, kern: &Kernel) -> Result<Value> {
    let path = p
        .run
        .field
        .as_ref()
        .ok_or_else(|| Error::Config("verify needs --field".into()))?;
    let vf = VertexField::read_csv(kern.grid(), p.tree.k, p.tree.mode, open(path)?)?;
    let res = residual(kern, &vf)?;
    let compat = check_compatibility(kern, &vf, p.run.samples, p.run.seed, p.run.compat_tol)?;
    Ok(json!({
        "depth": vf.depth(),
        "residual": res,
        "compatibility": compat,
    }))
}

fn sample(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let vf = input_field(p, kern, p.tree.k)?;
    let sampler = Sampler::new(kern, &vf)?;
    let configs = sampler.sample_many(p.run.samples, p.run.seed);
    let mut w = csv::Writer::from_writer(dir.file("samples.csv")?);
    w.write_record(["sample", "vertex", "spin"])?;
    let shape = vf.shape();
    let addrs: Vec<String> = shape.positions().map(|(m, q)| shape.addr(m, q).to_string()).collect();
    for (i, c) in configs.iter().enumerate() {
        for (a, s) in addrs.iter().zip(c.spins()) {
            w.write_record([i.to_string(), a.clone(), format_f64(*s)])?;
        }
    }
    w.flush()?;
    let root_mean = configs.iter().map(|c| c.root()).sum::<f64>() / configs.len().max(1) as f64;
    let density = root_marginal(kern, &vf)?;
    let first_moment: Vec<f64> = kern.grid().nodes().iter().zip(density.values()).map(|(t, d)| t * d).collect();
    let marginal_mean = kern.grid().integrate(&first_moment)?;
    Ok(json!({
        "n_samples": configs.len(),
        "vertices": shape.len(),
        "root_mean": root_mean,
        "root_marginal_mean": marginal_mean,
    }))
}

fn marginal(p: &Params, kern: &Kernel, dir: &mut RunDir) -> Result<Value> {
    let vf = input_field(p, kern, p.tree.k)?;
    let x: VertexAddr = p.run.vertex.parse()?;
    let density = marginal_at(kern, &vf, &x)?;
    density.write_csv(kern.grid(), dir.file("marginal.csv")?)?;
    Ok(json!({
        "vertex": x.to_string(),
        "mass": kern.grid().integrate(density.values())?,
        "max_density": density.max_value(),
    }))
}
