//! The nonlinear operator
//!
//! ```text
//! (A h)(t) = ln( ∫K(t,u) e^{h(u)} du / ∫K(0,u) e^{h(u)} du )
//! ```
//!
//! its k-fold multiple, analytic Jacobian, numerical inverse and an empirical
//! Lipschitz estimate.
//!
//! A ignores additive constants in h, and every output vanishes at t = 0.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;

struct Normalizers {
    // w_j e^{h_j - max h}
    mass: Vec<f64>,
    per_node: Vec<f64>,
    at_zero: f64,
}

fn check_len(kern: &Kernel, h: &Field) -> Result<()> {
    if h.len() != kern.n() {
        return Err(Error::Contract(format!(
            "field has {} values, kernel grid has {} nodes",
            h.len(),
            kern.n()
        )));
    }
    Ok(())
}

fn normalizers(kern: &Kernel, h: &Field) -> Normalizers {
    let shift = h.max_value();
    let mass: Vec<f64> = kern
        .grid()
        .weights()
        .iter()
        .zip(h.values())
        .map(|(w, v)| w * (v - shift).exp())
        .collect();
    let per_node = (0..kern.n()).map(|i| dot(kern.row(i), &mass)).collect();
    let at_zero = dot(kern.row0(), &mass);
    Normalizers {
        mass,
        per_node,
        at_zero,
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn apply_a(kern: &Kernel, h: &Field) -> Result<Field> {
    check_len(kern, h)?;
    let nz = normalizers(kern, h);
    let values: Vec<f64> = nz.per_node.iter().map(|&n| (n / nz.at_zero).ln()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("A produced a non-finite value".into()));
    }
    Ok(Field::from_parts(values, 0.0))
}

pub fn apply_ka(kern: &Kernel, k: usize, h: &Field) -> Result<Field> {
    Ok(apply_a(kern, h)?.scale(k as f64))
}

/// `∂(Ah)(t_i)/∂h(u_j) = w_j e^{h_j} [K(t_i,u_j)/N(t_i) - K(0,u_j)/N(0)]`
/// with `N(t) = ∫K(t,u)e^{h(u)}du`.
pub fn jacobian_a(kern: &Kernel, h: &Field) -> Result<DMatrix<f64>> {
    check_len(kern, h)?;
    let n = kern.n();
    let nz = normalizers(kern, h);
    let row0 = kern.row0();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        nz.mass[j] * (kern.at(i, j) / nz.per_node[i] - row0[j] / nz.at_zero)
    }))
}

/// Damped Gauss-Newton for `F(x) = 0` in the sup norm.
///
/// Steps are minimum-norm least-squares solutions of `J dx = -F` (SVD pseudo-inverse),
/// which is plain Newton whenever J is invertible. Each step is halved until the
/// residual decreases; failure to decrease counts as stagnation.
pub(crate) fn gauss_newton<F>(
    what: &str,
    mut eval: F,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>)>,
{
    let sup = |r: &[f64]| r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut x = x0;
    let (mut r, _) = eval(&x, false)?;
    let mut res = sup(&r);
    for it in 0..max_iter {
        if res < tol {
            return Ok(x);
        }
        let (_, jac) = eval(&x, true)?;
        let jac = jac.expect("jacobian requested");
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            break;
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let step = svd
            .solve(&rhs, smax * 1e-13)
            .map_err(|e| Error::Numeric(format!("{what}: least-squares solve failed: {e}")))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok((rt, _)) = eval(&trial, false) {
                let rest = sup(&rt);
                if rest < res {
                    x = trial;
                    r = rt;
                    res = rest;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                what: format!("{what} (stagnated)"),
                iterations: it + 1,
                residual: res,
            });
        }
    }
    if res < tol {
        return Ok(x);
    }
    Err(Error::NoConvergence {
        what: what.to_string(),
        iterations: max_iter,
        residual: res,
    })
}

fn check_pinned(target: &Field) -> Result<()> {
    if target.value_at_zero().abs() > 1e-12 {
        return Err(Error::Contract(format!(
            "target must vanish at t = 0 (every kA output does), got {}",
            target.value_at_zero()
        )));
    }
    Ok(())
}

/// Finds h with `h(0) = 0` and `sup|kA(h) - target| < tol`.
///
/// The initial guess is `target/k`. For kernels where kA is not surjective
/// (e.g. finite-rank kernels) only targets in its range can be reached; others
/// end in [`Error::NoConvergence`].
pub fn invert_ka(kern: &Kernel, k: usize, target: &Field, tol: f64, max_iter: usize) -> Result<Field> {
    check_len(kern, target)?;
    check_pinned(target)?;
    let kf = k as f64;
    let x0 = target.values().iter().map(|v| v / kf).collect();
    let out = gauss_newton(
        "kA inversion",
        |x, want_jac| {
            let h = Field::new(x.to_vec(), 0.0)?;
            let img = apply_ka(kern, k, &h)?;
            let r = img.values().iter().zip(target.values()).map(|(a, b)| a - b).collect();
            let jac = if want_jac { Some(jacobian_a(kern, &h)? * kf) } else { None };
            Ok((r, jac))
        },
        x0,
        tol,
        max_iter,
    )?;
    Field::new(out, 0.0)
}

/// Finds `zeta = kA(psi)` with `sup|kA(zeta) - target| < tol`, i.e. a preimage
/// of `target` that itself lies in the range of kA.
///
/// Repeated backward steps need this when kA is not onto: a plain preimage
/// generally has no preimage of its own.
pub fn invert_ka_in_range(
    kern: &Kernel,
    k: usize,
    target: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<Field> {
    check_len(kern, target)?;
    check_pinned(target)?;
    let kf = k as f64;
    let x0 = target.values().iter().map(|v| v / kf).collect();
    let out = gauss_newton(
        "kA inversion within range",
        |x, want_jac| {
            let psi = Field::new(x.to_vec(), 0.0)?;
            let zeta = apply_ka(kern, k, &psi)?;
            let img = apply_ka(kern, k, &zeta)?;
            let r = img.values().iter().zip(target.values()).map(|(a, b)| a - b).collect();
            let jac = if want_jac {
                Some((jacobian_a(kern, &zeta)? * kf) * (jacobian_a(kern, &psi)? * kf))
            } else {
                None
            };
            Ok((r, jac))
        },
        x0,
        tol,
        max_iter,
    )?;
    apply_ka(kern, k, &Field::new(out, 0.0)?)
}

/// Empirical Lipschitz constants of A from random field pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionEstimate {
    /// `max sup_t|Af - Ag| / sup_t|f - g|`
    pub alpha_hat: f64,
    /// `max |Af(t) - Ag(t)| / |f(t) - g(t)|` over nodes with `|f(t) - g(t)| > 1e-6`
    pub pointwise: f64,
    pub n_samples: usize,
    pub amplitude: f64,
    pub seed: u64,
}

/// Draws `n_samples` pairs of fields with node values uniform in
/// `[-amplitude, amplitude]` (pinned to 0 at t = 0) and records the largest
/// observed ratios. This is an estimate, not a certified bound.
pub fn estimate_contraction(
    kern: &Kernel,
    n_samples: usize,
    amplitude: f64,
    seed: u64,
) -> Result<ContractionEstimate> {
    if n_samples == 0 {
        return Err(Error::Contract("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = kern.n();
    let draw = |rng: &mut ChaCha8Rng| {
        let v = (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect();
        Field::from_parts(v, 0.0)
    };
    let mut alpha_hat = 0.0_f64;
    let mut pointwise = 0.0_f64;
    for _ in 0..n_samples {
        let f = draw(&mut rng);
        let g = draw(&mut rng);
        let (sup, pw) = contraction_ratio(kern, &f, &g)?;
        alpha_hat = alpha_hat.max(sup);
        pointwise = pointwise.max(pw);
    }
    Ok(ContractionEstimate {
        alpha_hat,
        pointwise,
        n_samples,
        amplitude,
        seed,
    })
}

/// Sup-norm and pointwise ratios for one pair; `(0, 0)` when `f = g`.
pub fn contraction_ratio(kern: &Kernel, f: &Field, g: &Field) -> Result<(f64, f64)> {
    let denom = f.sup_dist(g);
    if denom == 0.0 {
        return Ok((0.0, 0.0));
    }
    let af = apply_a(kern, f)?;
    let ag = apply_a(kern, g)?;
    let sup = af.sup_dist(&ag) / denom;
    let pw = f
        .values()
        .iter()
        .zip(g.values())
        .zip(af.values().iter().zip(ag.values()))
        .filter(|((a, b), _)| (*a - *b).abs() > 1e-6)
        .map(|((a, b), (x, y))| (x - y).abs() / (a - b).abs())
        .fold(0.0, f64::max);
    Ok((sup, pw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Rule};
    use crate::kernel::Preset;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(32, Rule::GaussSplit).unwrap()
    }

    fn smooth(g: &Grid, a: f64, b: f64) -> Field {
        Field::from_fn(g, |t| a * (3.0 * t).sin() + b * t * t).unwrap().with_value_at_zero(0.0)
    }

    #[test]
    fn zero_mean_kernel_fixes_zero() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let a0 = apply_a(&kern, &Field::zeros(g.len())).unwrap();
        assert!(a0.sup_norm() < 1e-14);
        assert_eq!(a0.value_at_zero(), 0.0);
        assert!(apply_ka(&kern, 2, &Field::zeros(g.len())).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn constants_cancel() {
        let g = grid();
        let kern = Kernel::from_xi(|t, u| (t - u).powi(2), 1.5, 1.0, &g).unwrap();
        let a0 = apply_a(&kern, &Field::zeros(g.len())).unwrap();
        for c in [-5.0, -0.3, 2.0, 5.0] {
            let ac = apply_a(&kern, &Field::constant(g.len(), c)).unwrap();
            assert!(ac.sup_dist(&a0) < 1e-12);
        }
    }

    #[test]
    fn constant_kernel_annihilates_everything() {
        let g = grid();
        let kern = Kernel::preset(Preset::Constant, &g).unwrap();
        let h = smooth(&g, 3.0, -2.0);
        assert_eq!(apply_a(&kern, &h).unwrap().sup_norm(), 0.0);
        assert_eq!(jacobian_a(&kern, &h).unwrap().amax(), 0.0);
        assert_eq!(jacobian_a(&kern, &Field::zeros(g.len())).unwrap().amax(), 0.0);
    }

    #[test]
    fn ka_is_k_times_a() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K3, &g).unwrap();
        let h = smooth(&g, 1.0, 0.5);
        let a = apply_a(&kern, &h).unwrap();
        assert_eq!(apply_ka(&kern, 1, &h).unwrap(), a);
        assert_eq!(apply_ka(&kern, 3, &h).unwrap(), a.scale(3.0));
    }

    #[test]
    fn length_mismatch() {
        let kern = Kernel::preset(Preset::Constant, &grid()).unwrap();
        assert!(matches!(apply_a(&kern, &Field::zeros(5)), Err(Error::Contract(_))));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let h = smooth(&g, 1.2, -0.7);
        let jac = jacobian_a(&kern, &h).unwrap();
        let dir: Vec<f64> = (0..g.len()).map(|j| ((j * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let step = 1e-5;
        let plus = Field::new(h.values().iter().zip(&dir).map(|(a, d)| a + step * d).collect(), 0.0).unwrap();
        let minus = Field::new(h.values().iter().zip(&dir).map(|(a, d)| a - step * d).collect(), 0.0).unwrap();
        let ap = apply_a(&kern, &plus).unwrap();
        let am = apply_a(&kern, &minus).unwrap();
        let analytic = &jac * DVector::from_vec(dir);
        for i in 0..g.len() {
            let fd = (ap.values()[i] - am.values()[i]) / (2.0 * step);
            assert_abs_diff_eq!(analytic[i], fd, epsilon = 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn jacobian_column_tracks_recomputed_weights() {
        // raising h(u_j) by d scales column j by e^d once N is recomputed
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let h = smooth(&g, 0.4, 0.4);
        let j = 5;
        let d = 0.3;
        let mut bumped = h.values().to_vec();
        bumped[j] += d;
        let hb = Field::new(bumped, 0.0).unwrap();
        let jac_b = jacobian_a(&kern, &hb).unwrap();
        let nz = normalizers(&kern, &hb);
        // recompute oracle: w_j e^{h_j + d}[K/N - K0/N0] with the bumped normalizers
        let shift = hb.max_value();
        for i in 0..g.len() {
            let expect = g.weights()[j] * (h.values()[j] + d - shift).exp()
                * (kern.at(i, j) / nz.per_node[i] - kern.row0()[j] / nz.at_zero);
            assert_abs_diff_eq!(jac_b[(i, j)], expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn inversion_roundtrip_and_errors() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let h = smooth(&g, 0.8, -0.5);
        let target = apply_ka(&kern, 2, &h).unwrap();
        let back = invert_ka(&kern, 2, &target, 1e-10, 100).unwrap();
        assert_eq!(back.value_at_zero(), 0.0);
        assert!(apply_ka(&kern, 2, &back).unwrap().sup_dist(&target) < 1e-10);

        let zero = invert_ka(&kern, 2, &Field::zeros(g.len()), 1e-10, 100).unwrap();
        assert_eq!(zero, Field::zeros(g.len()));

        let shifted = target.clone().with_value_at_zero(0.1);
        assert!(matches!(invert_ka(&kern, 2, &shifted, 1e-10, 100), Err(Error::Contract(_))));

        let flat = Kernel::preset(Preset::Constant, &g).unwrap();
        let err = invert_ka(&flat, 2, &smooth(&g, 1.0, 0.0), 1e-10, 100).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }), "{err}");
    }

    #[test]
    fn range_preserving_inversion() {
        let g = grid();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let target = apply_ka(&kern, 2, &smooth(&g, 0.5, 0.2)).unwrap();
        let zeta = invert_ka_in_range(&kern, 2, &target, 1e-10, 200).unwrap();
        assert!(apply_ka(&kern, 2, &zeta).unwrap().sup_dist(&target) < 1e-10);
        // zeta itself is reachable again
        let next = invert_ka(&kern, 2, &zeta, 1e-10, 200).unwrap();
        assert!(apply_ka(&kern, 2, &next).unwrap().sup_dist(&zeta) < 1e-10);
    }

    #[test]
    fn contraction_estimates() {
        let g = grid();
        let flat = Kernel::preset(Preset::Constant, &g).unwrap();
        let est = estimate_contraction(&flat, 20, 3.0, 1).unwrap();
        assert_eq!(est.alpha_hat, 0.0);
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let f = smooth(&g, 1.0, 1.0);
        let (sup, pw) = contraction_ratio(&kern, &f, &f.shift(0.25).with_value_at_zero(0.0)).unwrap();
        assert!(sup < 1e-12 && pw < 1e-12);
        let a = estimate_contraction(&kern, 50, 2.0, 3).unwrap();
        let b = estimate_contraction(&kern, 50, 2.0, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.alpha_hat > 0.0 && a.alpha_hat.is_finite());
        assert!(estimate_contraction(&kern, 0, 1.0, 0).is_err());
    }
}
