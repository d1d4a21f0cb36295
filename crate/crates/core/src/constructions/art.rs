use super::{residual, Provenance, VertexField};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::{Kernel, ZERO_MEAN_TOL};
use crate::tree::{branching, TreeShape};

/// Extends a solution on the order-`k0` tree to the order-`k` tree (`k > k0`).
///
/// The order-`k0` tree sits inside the order-`k` tree as the addresses whose
/// digits all index a `k0`-branching, so `S_k(x) ∩ V^{k0} = S_{k0}(x)`. Those
/// vertices keep their field; every other vertex gets the free field 0
/// (`f ≡ 1`). This is a solution only if `∫(K(t,u) - K(0,u))du = 0` for every t.
pub fn art_lift(kern: &Kernel, f_mu: &VertexField, k: usize, depth: usize, tol: f64) -> Result<VertexField> {
    let k0 = f_mu.k();
    if k <= k0 {
        return Err(Error::Config(format!("target order k = {k} must exceed k0 = {k0}")));
    }
    if depth > f_mu.depth() {
        return Err(Error::Contract(format!(
            "lift depth {depth} exceeds the source field depth {}",
            f_mu.depth()
        )));
    }
    let zm = kern.check_zero_mean(ZERO_MEAN_TOL);
    if !zm.holds {
        return Err(Error::Precondition(format!(
            "kernel fails the zero-mean condition (max deviation {:e}); the free field is not a solution",
            zm.max_dev
        )));
    }
    if f_mu.depth() >= 1 {
        let r = residual(kern, f_mu)?;
        if r.max_res >= tol {
            return Err(Error::Precondition(format!(
                "source field is not a solution on its own tree (residual {:e} at `{}`)",
                r.max_res, r.worst_vertex
            )));
        }
    }

    let mode = f_mu.mode();
    let shape = TreeShape::new(k, depth, mode)?;
    let zero = Field::zeros(f_mu.n_nodes());
    let fields = shape
        .positions()
        .map(|(m, p)| {
            let x = shape.addr(m, p);
            let embedded = x
                .digits()
                .iter()
                .enumerate()
                .all(|(i, &d)| (d as usize) < branching(k0, mode, i));
            if embedded {
                f_mu.get(&x).expect("embedded vertex exists in the source tree").clone()
            } else {
                zero.clone()
            }
        })
        .collect();
    VertexField::new(shape, fields, Provenance::Art)
}
