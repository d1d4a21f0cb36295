//! Level sequences `zeta_n = kA(zeta_{n+1})` built by backward inversion.

use serde::Serialize;

use super::bg::check_in_band;
use super::{Provenance, VertexField};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::Kernel;
use crate::operator::invert_ka_in_range;
use crate::tree::{Mode, TreeShape};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZacharyFailure {
    /// The level that could not be produced.
    pub level: usize,
    pub reason: String,
}

/// Levels `zeta_0..` that were produced, and why the run stopped early if it did.
#[derive(Debug, Clone, PartialEq)]
pub struct ZacharyRun {
    pub levels: Vec<Field>,
    pub failure: Option<ZacharyFailure>,
}

impl ZacharyRun {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    /// Level-homogeneous field on the half-tree over the levels produced so far.
    pub fn vertex_field(&self, k: usize) -> Result<VertexField> {
        let depth = self.levels.len() - 1;
        let shape = TreeShape::new(k, depth, Mode::Half)?;
        VertexField::from_levels(&self.levels, shape, Provenance::Zachary)
    }
}

/// Computes `zeta_1..zeta_{n_levels}` from `zeta0`.
///
/// Each new level is a preimage of the previous one that itself lies in the
/// range of kA, so that the next inversion can succeed. A failed inversion or a
/// level leaving the band stops the run; the levels obtained so far are kept.
pub fn zachary_levels(
    kern: &Kernel,
    k: usize,
    zeta0: &Field,
    n_levels: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ZacharyRun> {
    if zeta0.len() != kern.n() {
        return Err(Error::Contract("zeta0 does not match the grid".into()));
    }
    let (lo, hi) = kern.h_bounds(k)?;
    check_in_band(zeta0, &lo, &hi, "zeta0")?;
    let mut levels = vec![zeta0.clone()];
    for level in 1..=n_levels {
        let prev = levels.last().unwrap();
        let next = match invert_ka_in_range(kern, k, prev, tol, max_iter) {
            Ok(f) => f,
            Err(e @ (Error::NoConvergence { .. } | Error::Numeric(_))) => {
                return Ok(ZacharyRun {
                    levels,
                    failure: Some(ZacharyFailure {
                        level,
                        reason: e.to_string(),
                    }),
                });
            }
            Err(e) => return Err(e),
        };
        if let Err(e) = check_in_band(&next, &lo, &hi, "level") {
            return Ok(ZacharyRun {
                levels,
                failure: Some(ZacharyFailure {
                    level,
                    reason: e.to_string(),
                }),
            });
        }
        levels.push(next);
    }
    Ok(ZacharyRun {
        levels,
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::residual;
    use crate::grid::{Grid, Rule};
    use crate::kernel::Preset;
    use crate::operator::apply_ka;
    use crate::ti_solver::find_ti_standard;

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(32, Rule::GaussSplit).unwrap();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let run = zachary_levels(&kern, 2, &Field::zeros(32), 4, 1e-11, 100).unwrap();
        assert!(run.is_complete());
        assert!(run.levels.iter().all(|f| f.sup_norm() < 1e-11));
    }

    #[test]
    fn fixed_point_is_a_constant_sequence() {
        let g = Grid::new(32, Rule::GaussSplit).unwrap();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let fps = find_ti_standard(&kern, 2).unwrap();
        let h = fps.last().unwrap();
        let run = zachary_levels(&kern, 2, h, 3, 1e-11, 100).unwrap();
        assert!(run.is_complete());
        for f in &run.levels {
            assert!(f.sup_dist(h) < 1e-8);
        }
    }

    #[test]
    fn levels_satisfy_the_recursion() {
        let g = Grid::new(32, Rule::GaussSplit).unwrap();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let b = kern.boundary_field(2, 1.0).scale(0.5);
        let zeta0 = apply_ka(&kern, 2, &b).unwrap();
        let run = zachary_levels(&kern, 2, &zeta0, 5, 1e-11, 200).unwrap();
        assert!(run.is_complete(), "{:?}", run.failure);
        for w in run.levels.windows(2) {
            assert!(apply_ka(&kern, 2, &w[1]).unwrap().sup_dist(&w[0]) < 1e-10);
        }
        let vf = run.vertex_field(2).unwrap();
        assert_eq!(vf.provenance(), Provenance::Zachary);
        assert!(residual(&kern, &vf).unwrap().max_res < 1e-9);
    }

    #[test]
    fn constant_kernel_fails_at_level_one() {
        let g = Grid::new(16, Rule::GaussSplit).unwrap();
        let kern = Kernel::preset(Preset::Constant, &g).unwrap();
        let zeta0 = Field::from_fn(&g, |t| 0.1 * t).unwrap().with_value_at_zero(0.0);
        let run = zachary_levels(&kern, 2, &zeta0, 3, 1e-10, 50).unwrap();
        assert_eq!(run.levels.len(), 1);
        assert_eq!(run.failure.unwrap().level, 1);
    }

    #[test]
    fn seed_outside_band_is_rejected() {
        let g = Grid::new(16, Rule::GaussSplit).unwrap();
        let kern = Kernel::preset(Preset::Ehr12K2, &g).unwrap();
        let (_, hi) = kern.h_bounds(2).unwrap();
        let z = hi.scale(2.0).with_value_at_zero(0.0);
        assert!(matches!(
            zachary_levels(&kern, 2, &z, 2, 1e-10, 50),
            Err(Error::Precondition(_))
        ));
    }
}
