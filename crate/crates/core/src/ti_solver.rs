//! Translation-invariant solutions: fixed points of `h = kA h`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::operator::apply_ka;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial relaxation weight in (0, 1]; halved whenever the residual grows.
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 1.0,
        }
    }
}

/// Default sup-distance below which two fixed points count as the same.
pub const DISTINCT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TiSolution {
    pub h_star: Field,
    /// `sup|h_star - kA(h_star)|`
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `sup|h_j - h_{j-2}|` at the last iteration; small values with a large
    /// residual indicate a period-2 cycle.
    pub period2_gap: Option<f64>,
}

/// Damped Picard iteration `h <- (1-d)h + d·kA(h)` from `h0`.
///
/// Hitting `max_iter` is not an error: the best iterate is returned with
/// `converged = false`.
pub fn solve_ti(kern: &Kernel, k: usize, h0: &Field, opts: &SolveOptions) -> Result<TiSolution> {
    if h0.value_at_zero() != 0.0 {
        return Err(Error::Contract(format!(
            "initial field must vanish at t = 0, got {}",
            h0.value_at_zero()
        )));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let (hmin, hmax) = kern.h_bounds(k)?;
    let blowup = 10.0 * hmin.sup_norm().max(hmax.sup_norm()).max(1.0);

    let mut damping = opts.damping;
    let mut h = h0.clone();
    let mut prev: Option<Field> = None;
    let mut prev2: Option<Field> = None;
    let mut best: Option<(Field, f64)> = None;
    let mut last_res = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let image = apply_ka(kern, k, &h)?;
        let res = h.sup_dist(&image);
        if best.as_ref().is_none_or(|(_, r)| res < *r) {
            best = Some((h.clone(), res));
        }
        if res < opts.tol {
            return Ok(TiSolution {
                h_star: h,
                residual: res,
                iterations: it,
                converged: true,
                period2_gap: None,
            });
        }
        if it >= 1 && res > blowup {
            return Err(Error::Divergence {
                iterations: it,
                residual: res,
            });
        }
        if it == opts.max_iter {
            break;
        }
        if res > last_res && damping > 1.0 / 64.0 {
            damping *= 0.5;
        }
        last_res = res;
        prev2 = prev.take();
        prev = Some(h.clone());
        h = h.combine(1.0 - damping, &image, damping).with_value_at_zero(0.0);
    }
    let (h_star, residual) = best.expect("at least one iterate");
    let period2_gap = prev2.map(|p2| p2.sup_dist(&h));
    Ok(TiSolution {
        h_star,
        residual,
        iterations: opts.max_iter,
        converged: false,
        period2_gap,
    })
}

/// Initial fields for a fixed-point search.
///
/// Scalings `{0, ±1/4, ±1/2, ±0.9}` of the upper band `h_max`, plus the
/// boundary-pinned fields `k·ln(K(t,u*)/K(0,u*))` for `u* ∈ {0, 1}`. The
/// latter break the t <-> 1-t symmetry that every scaling of `h_max` shares.
pub fn standard_inits(kern: &Kernel, k: usize) -> Result<Vec<Field>> {
    let (_, hmax) = kern.h_bounds(k)?;
    let mut inits = vec![Field::zeros(kern.n())];
    for s in [0.25, 0.5, 0.9] {
        inits.push(hmax.scale(s).with_value_at_zero(0.0));
        inits.push(hmax.scale(-s).with_value_at_zero(0.0));
    }
    inits.push(kern.boundary_field(k, 0.0));
    inits.push(kern.boundary_field(k, 1.0));
    Ok(inits)
}

/// Runs [`solve_ti`] from every init and returns the distinct converged fixed
/// points, sorted by sup norm (ties broken by node values).
///
/// Each kept field is re-checked against a fresh application of kA.
pub fn find_ti_multi(
    kern: &Kernel,
    k: usize,
    inits: &[Field],
    opts: &SolveOptions,
    distinct_eps: f64,
) -> Result<Vec<Field>> {
    if inits.is_empty() {
        return Err(Error::Contract("at least one initial field is required".into()));
    }
    let solved: Vec<Result<TiSolution>> = inits.par_iter().map(|h0| solve_ti(kern, k, h0, opts)).collect();
    let mut found: Vec<Field> = Vec::new();
    for sol in solved {
        let sol = match sol {
            Ok(s) if s.converged => s,
            Ok(_) | Err(Error::Divergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        let recheck = sol.h_star.sup_dist(&apply_ka(kern, k, &sol.h_star)?);
        if recheck >= opts.tol {
            continue;
        }
        if found.iter().all(|f| f.sup_dist(&sol.h_star) >= distinct_eps) {
            found.push(sol.h_star);
        }
    }
    found.sort_by(|a, b| {
        a.sup_norm()
            .total_cmp(&b.sup_norm())
            .then_with(|| {
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    Ok(found)
}

/// Convenience: fixed points from [`standard_inits`] with default options.
pub fn find_ti_standard(kern: &Kernel, k: usize) -> Result<Vec<Field>> {
    find_ti_multi(kern, k, &standard_inits(kern, k)?, &SolveOptions::default(), DISTINCT_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Rule};
    use crate::kernel::Preset;
    use crate::operator::apply_a;

    fn grid() -> Grid {
        Grid::new(64, Rule::GaussSplit).unwrap()
    }

    #[test]
    fn zero_is_immediate_under_zero_mean() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let s = solve_ti(&kern, 2, &Field::zeros(g.len()), &SolveOptions::default()).unwrap();
        assert!(s.converged);
        assert!(s.iterations <= 1);
        assert!(s.h_star.sup_norm() < 1e-14);
    }

    #[test]
    fn constant_kernel_one_step() {
        let g = grid();
        let kern = Kernel::preset(Preset::Constant, &g).unwrap();
        let h0 = Field::from_fn(&g, |t| 3.0 * t).unwrap();
        let s = solve_ti(&kern, 2, &h0, &SolveOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 1);
        assert_eq!(s.h_star.sup_norm(), 0.0);
        let all = find_ti_multi(
            &kern,
            2,
            &[Field::zeros(g.len()), Field::constant(g.len(), 1.0).with_value_at_zero(0.0),
              Field::constant(g.len(), -1.0).with_value_at_zero(0.0)],
            &SolveOptions::default(),
            DISTINCT_EPS,
        )
        .unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].sup_norm(), 0.0);
    }

    #[test]
    fn rejects_unpinned_init() {
        let g = grid();
        let kern = Kernel::preset(Preset::Constant, &g).unwrap();
        assert!(matches!(
            solve_ti(&kern, 2, &Field::constant(g.len(), 1.0), &SolveOptions::default()),
            Err(Error::Contract(_))
        ));
        assert!(find_ti_multi(&kern, 2, &[], &SolveOptions::default(), 1e-3).is_err());
    }

    #[test]
    fn preset_has_nonzero_fixed_points() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let (hmin, hmax) = kern.h_bounds(2).unwrap();
        let fps = find_ti_standard(&kern, 2).unwrap();
        assert_eq!(fps.len(), 3, "expected 0 and a ± pair");
        assert!(fps[0].sup_norm() < 1e-12);
        for fp in &fps {
            assert_eq!(fp.value_at_zero(), 0.0);
            assert!(fp.sup_dist(&apply_ka(&kern, 2, fp).unwrap()) < 1e-10);
            for i in 0..g.len() {
                assert!(hmin.values()[i] <= fp.values()[i] && fp.values()[i] <= hmax.values()[i]);
            }
        }
    }

    #[test]
    fn nonzero_fixed_point_matches_moment_oracle() {
        // K = 1 + c a(t) a(u) with a(t) = root5(2t - 1). Fixed points have the form
        // h = 2 ln((1 + c a(t) m)/(1 - c m)) where m = ∫a e^h / ∫e^h. Solve the scalar
        // moment equation by bisection on the same quadrature, independent of A.
        let g = grid();
        let c = 14.0 / 15.0;
        let a = |t: f64| crate::expr::real_root(5.0, 2.0 * t - 1.0);
        let moment_map = |m: f64| {
            let e: Vec<f64> = g.nodes().iter().map(|&u| (1.0 + c * a(u) * m).powi(2)).collect();
            let num: f64 = g.nodes().iter().zip(&e).zip(g.weights()).map(|((&u, e), w)| w * a(u) * e).sum();
            let den: f64 = e.iter().zip(g.weights()).map(|(e, w)| w * e).sum();
            num / den - m
        };
        let (mut lo, mut hi) = (0.3, 1.0 / c - 1e-9);
        assert!(moment_map(lo) > 0.0 && moment_map(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if moment_map(mid) > 0.0 { lo = mid } else { hi = mid }
        }
        let m = 0.5 * (lo + hi);
        let oracle = Field::from_fn(&g, |t| 2.0 * ((1.0 + c * a(t) * m) / (1.0 - c * m)).ln()).unwrap();
        assert!(oracle.value_at_zero().abs() < 1e-15);

        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let s = solve_ti(&kern, 2, &kern.boundary_field(2, 1.0), &SolveOptions { tol: 1e-12, ..Default::default() }).unwrap();
        assert!(s.converged);
        assert!(s.h_star.sup_dist(&oracle) < 1e-9, "{}", s.h_star.sup_dist(&oracle));
    }

    #[test]
    fn mirror_symmetry_commutes_with_iteration() {
        // K(1-t,1-u) = K(t,u): mirroring node values commutes with A up to a constant
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let mirror = |f: &Field| {
            Field::new((0..g.len()).map(|i| f.values()[g.mirror(i)]).collect(), 0.0).unwrap()
        };
        let mut h = Field::from_fn(&g, |t| (5.0 * t).sin() + t).unwrap().with_value_at_zero(0.0);
        let mut hm = mirror(&h);
        for _ in 0..6 {
            let next = apply_ka(&kern, 2, &h).unwrap();
            let next_m = apply_ka(&kern, 2, &hm).unwrap();
            let diff: Vec<f64> = mirror(&next).values().iter().zip(next_m.values()).map(|(a, b)| a - b).collect();
            let spread = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - diff.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(spread < 1e-10, "spread {spread}");
            h = next;
            hm = next_m;
        }
        // even inits collapse to zero at the first iterate
        let even = Field::from_fn(&g, |t| (t - 0.5).powi(2)).unwrap().with_value_at_zero(0.0);
        assert!(apply_a(&kern, &even).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let s = solve_ti(&kern, 2, &kern.boundary_field(2, 1.0), &SolveOptions { tol: 1e-30, max_iter: 5, damping: 1.0 }).unwrap();
        assert!(!s.converged);
        assert!(s.period2_gap.is_some());
        assert_eq!(s.iterations, 5);
    }
}
