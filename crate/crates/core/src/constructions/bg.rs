//! Fields glued from two translation-invariant solutions along a path.
//!
//! On the half-tree truncated at depth n, vertices of `W_n` left of the path
//! carry `h`, vertices right of it carry `eta`, and the path vertex `x_n` carries
//! a free seed. The interior is filled by the backward recursion. A vertex off
//! the path only has off-path successors on its own side, so each level has
//! just three distinct fields: left, on-path and right.

use serde::Serialize;

use super::{Provenance, VertexField};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::operator::{apply_a, apply_ka};
use crate::tree::{compare_to_path, Mode, Path, Side, TreeShape};

/// Margin for the open band `(h_min, h_max)` that seeds must lie in.
pub const SEED_MARGIN: f64 = 1e-9;

/// Differences below this are rounding noise and carry no decay ratio.
pub const RATIO_FLOOR: f64 = 1e-13;

/// Validated inputs: two fixed points of kA and the band they live in.
#[derive(Debug, Clone)]
pub struct BgSetup<'a> {
    kern: &'a Kernel,
    k: usize,
    h: Field,
    eta: Field,
    h_min: Field,
    h_max: Field,
}

/// The three distinct fields of each level `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BgLevels {
    pub left: Vec<Field>,
    pub on: Vec<Field>,
    pub right: Vec<Field>,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub level: usize,
    /// `sup_t |h̃(·,x_m) - h̄(·,x_m)|`
    pub sup_diff: f64,
    /// `alpha_hat^{n-m} · sup_diff_at_n`
    pub bound: f64,
    /// `sup_diff_m / sup_diff_{m+1}`; absent at level n and once differences reach rounding noise
    pub ratio: Option<f64>,
    pub violates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub alpha_hat: f64,
    pub margin: f64,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    pub fn any_violation(&self) -> bool {
        self.rows.iter().any(|r| r.violates)
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }
}

impl<'a> BgSetup<'a> {
    /// Checks that `h` and `eta` are fixed points of kA to within `tol`.
    pub fn new(kern: &'a Kernel, k: usize, h: Field, eta: Field, tol: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config("path constructions need k >= 2".into()));
        }
        for (name, f) in [("h", &h), ("eta", &eta)] {
            let res = f.sup_dist(&apply_ka(kern, k, f)?);
            if res >= tol {
                return Err(Error::Precondition(format!(
                    "{name} is not a fixed point of kA (residual {res:e})"
                )));
            }
        }
        let (h_min, h_max) = kern.h_bounds(k)?;
        Ok(Self {
            kern,
            k,
            h,
            eta,
            h_min,
            h_max,
        })
    }

    pub fn h(&self) -> &Field {
        &self.h
    }

    pub fn eta(&self) -> &Field {
        &self.eta
    }

    /// `(h + eta)/2`.
    pub fn default_seed(&self) -> Field {
        self.h.combine(0.5, &self.eta, 0.5)
    }

    /// Seeds vanish at t = 0 and lie strictly inside the band at every node
    /// where the band is non-degenerate.
    pub fn check_seed(&self, seed: &Field) -> Result<()> {
        check_in_band(seed, &self.h_min, &self.h_max, "seed")
    }

    /// Backward recursion from depth `n` along `path`.
    pub fn levels(&self, path: &Path, n: usize, seed: &Field) -> Result<BgLevels> {
        self.check_seed(seed)?;
        if path.k() != self.k || path.depth() < n {
            return Err(Error::Contract(format!(
                "path must have order {} and depth at least {n}",
                self.k
            )));
        }
        let mut left = vec![self.h.clone()];
        let mut on = vec![seed.clone()];
        let mut right = vec![self.eta.clone()];
        for m in (0..n).rev() {
            let a_left = apply_a(self.kern, left.last().unwrap())?;
            let a_on = apply_a(self.kern, on.last().unwrap())?;
            let a_right = apply_a(self.kern, right.last().unwrap())?;
            let next_digit = path.digits()[m] as usize;
            let mut sum = Field::zeros(self.kern.n());
            for c in 0..self.k {
                let term = match c.cmp(&next_digit) {
                    std::cmp::Ordering::Less => &a_left,
                    std::cmp::Ordering::Equal => &a_on,
                    std::cmp::Ordering::Greater => &a_right,
                };
                sum = sum.combine(1.0, term, 1.0);
            }
            left.push(a_left.scale(self.k as f64));
            on.push(sum);
            right.push(a_right.scale(self.k as f64));
        }
        left.reverse();
        on.reverse();
        right.reverse();
        Ok(BgLevels {
            left,
            on,
            right,
            path: path.clone(),
        })
    }

    /// The glued field on the half-tree of depth `n`.
    pub fn field(&self, path: &Path, n: usize, seed: &Field) -> Result<VertexField> {
        let lv = self.levels(path, n, seed)?;
        lv.materialize(self.k, n)
    }

    /// Runs the recursion from two seeds and tabulates how the path-vertex
    /// difference shrinks towards the root.
    pub fn seed_sensitivity(
        &self,
        path: &Path,
        n: usize,
        seed_a: &Field,
        seed_b: &Field,
        alpha_hat: f64,
        margin: f64,
    ) -> Result<SensitivityReport> {
        let a = self.levels(path, n, seed_a)?;
        let b = self.levels(path, n, seed_b)?;
        let diffs: Vec<f64> = (0..=n).map(|m| a.on[m].sup_dist(&b.on[m])).collect();
        let d_n = diffs[n];
        let rows = (0..=n)
            .rev()
            .map(|m| {
                let steps = (n - m) as i32;
                let ratio = (m < n && diffs[m + 1] > RATIO_FLOOR && diffs[m] > RATIO_FLOOR)
                    .then(|| diffs[m] / diffs[m + 1]);
                let allowed = (alpha_hat + margin).powi(steps) * d_n;
                SensitivityRow {
                    level: m,
                    sup_diff: diffs[m],
                    bound: alpha_hat.powi(steps) * d_n,
                    ratio,
                    violates: diffs[m] > allowed.max(RATIO_FLOOR),
                }
            })
            .collect();
        Ok(SensitivityReport {
            alpha_hat,
            margin,
            rows,
        })
    }

    /// The limit of the path-vertex field at `x_{depth_m}` as the boundary depth
    /// grows, stopping once successive depths agree within `tol`.
    pub fn limit_field(&self, r: f64, depth_m: usize, tol: f64, seed: &Field) -> Result<Field> {
        let mut prev: Option<Field> = None;
        let mut last_gap = f64::INFINITY;
        let mut n = depth_m + 1;
        // the class recursion never enumerates vertices, but the materialized
        // tree must stay within the enumeration cap
        while TreeShape::new(self.k, n, Mode::Half).is_ok() {
            let path = Path::from_r(r, self.k, n)?;
            let lv = self.levels(&path, n, seed)?;
            let cur = lv.on[depth_m].clone();
            if let Some(p) = &prev {
                last_gap = p.sup_dist(&cur);
                if last_gap < tol {
                    return Ok(cur);
                }
            }
            prev = Some(cur);
            n += 1;
        }
        Err(Error::NoConvergence {
            what: format!("path limit at depth {depth_m}"),
            iterations: n - depth_m - 1,
            residual: last_gap,
        })
    }
}

impl BgLevels {
    pub fn materialize(&self, k: usize, n: usize) -> Result<VertexField> {
        let shape = TreeShape::new(k, n, Mode::Half)?;
        let fields = shape
            .positions()
            .map(|(m, p)| {
                let x = shape.addr(m, p);
                Ok(match compare_to_path(&x, &self.path)? {
                    Side::Left => self.left[m].clone(),
                    Side::On => self.on[m].clone(),
                    Side::Right => self.right[m].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        VertexField::new(shape, fields, Provenance::Bg)
    }
}

pub(crate) fn check_in_band(f: &Field, lo: &Field, hi: &Field, what: &str) -> Result<()> {
    if f.value_at_zero().abs() > 1e-12 {
        return Err(Error::Precondition(format!("{what} must vanish at t = 0")));
    }
    for (i, ((&v, &l), &u)) in f.values().iter().zip(lo.values()).zip(hi.values()).enumerate() {
        // a degenerate band has no interior; nothing to check there
        if u - l <= 2.0 * SEED_MARGIN {
            continue;
        }
        if !(l + SEED_MARGIN < v && v < u - SEED_MARGIN) {
            return Err(Error::Precondition(format!(
                "{what} leaves the open band (h_min, h_max) at node {i}: {v} not in ({l}, {u})"
            )));
        }
    }
    Ok(())
}
