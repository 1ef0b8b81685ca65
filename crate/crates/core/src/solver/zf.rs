//! Zero-forcing precoding on the stacked equivalent channel.

use nalgebra::DMatrix;

use crate::channel::{ChannelSet, C64};
use crate::error::{Error, Result};
use crate::rate::equivalent_channels;

/// Largest condition number of `H` accepted before a solve is aborted.
pub const MAX_CONDITION: f64 = 1e6;

/// Unnormalized ZF directions `H^H (H H^H)^-1` and their squared column norms.
#[derive(Debug, Clone)]
pub struct ZfDirections {
    pub w_tilde: DMatrix<C64>,
    pub c: Vec<f64>,
}

impl ZfDirections {
    /// Builds `W = W_tilde diag(sqrt(p))`.
    pub fn assemble(&self, p: &[f64]) -> DMatrix<C64> {
        let mut w = self.w_tilde.clone();
        for (j, &pj) in p.iter().enumerate() {
            w.column_mut(j).scale_mut(pj.max(0.0).sqrt());
        }
        w
    }
}

pub fn condition_number(h: &DMatrix<C64>) -> f64 {
    let sv = h.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// ZF directions for stacked channels `h` (`M x N_B`).
pub fn zf_directions(h: &DMatrix<C64>) -> Result<ZfDirections> {
    let (m, n) = h.shape();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "zero forcing needs 1 <= M <= N_B, got M={m}, N_B={n}"
        )));
    }
    let condition = condition_number(h);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular {
            condition,
            threshold: MAX_CONDITION,
        });
    }
    let gram = h * h.adjoint();
    let inv = gram
        .cholesky()
        .ok_or(Error::Singular {
            condition,
            threshold: MAX_CONDITION,
        })?
        .inverse();
    let w_tilde = h.adjoint() * inv;
    let c = w_tilde.column_iter().map(|col| col.norm_squared()).collect();
    Ok(ZfDirections { w_tilde, c })
}

/// `diag((H H^H)^-1)` without the conditioning check; `None` when the Gram
/// matrix is not positive definite. Used in the inner loop of the phase search.
pub fn zf_weights_fast(h: &DMatrix<C64>) -> Option<Vec<f64>> {
    let gram = h * h.adjoint();
    let inv = gram.cholesky()?.inverse();
    let c: Vec<f64> = (0..inv.nrows()).map(|i| inv[(i, i)].re).collect();
    c.iter().all(|x| x.is_finite() && *x > 0.0).then_some(c)
}

/// `W = H^H (H H^H)^-1 diag(sqrt(p))` for the channels under `theta`.
pub fn zf_beamformer(ch: &ChannelSet, theta: &[f64], p: &[f64]) -> Result<DMatrix<C64>> {
    if p.len() != ch.num_users() {
        return Err(Error::InvalidArgument(format!(
            "power vector has {} entries for {} users",
            p.len(),
            ch.num_users()
        )));
    }
    let dirs = zf_directions(&equivalent_channels(ch, theta))?;
    Ok(dirs.assemble(p))
}
