//! Lagrange-dual power allocation over ZF directions.
//!
//! With the dispersion penalty held at its high-SINR constant, the allocator
//! maximizes `sum log2(p_m / sigma2)` subject to `sum p_m c_m <= P_max`, which
//! gives `p_m = [1 / (mu c_m ln 2)]+` at the multiplier `mu`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size rule for the projected subgradient update of `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `omega_t = min(mu / consumed, 0.5 mu / |residual|)`: a Newton step on
    /// the residual, capped so `mu` never moves by more than half per update.
    Curvature,
    /// `omega_t = omega0 / sqrt(t + 1)`, with `omega0` set so the first update
    /// moves `mu` by half.
    Diminishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `P_max - sum p_m c_m` at the returned `mu`.
    pub residual: f64,
}

impl Allocation {
    pub fn consumed(&self, c: &[f64]) -> f64 {
        self.p.iter().zip(c).map(|(p, c)| p * c).sum()
    }
}

/// `[1 / (mu c_m ln 2)]+`.
pub fn powers_at(mu: f64, c: &[f64]) -> Vec<f64> {
    c.iter().map(|&cm| (1.0 / (mu * cm * LN_2)).max(0.0)).collect()
}

fn consumed_at(mu: f64, c: &[f64]) -> f64 {
    powers_at(mu, c).iter().zip(c).map(|(p, c)| p * c).sum()
}

fn check_inputs(c: &[f64], p_max: f64) -> Result<()> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("no users to allocate power to".into()));
    }
    if let Some(bad) = c.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "ZF column weight must be positive, got {bad}"
        )));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "power budget must be positive, got {p_max}"
        )));
    }
    Ok(())
}

/// Default starting multiplier `1 / (P_max ln 2)`, below the optimum for M >= 1.
pub fn default_mu0(p_max: f64) -> f64 {
    1.0 / (p_max * LN_2)
}

/// Projected subgradient iteration on the dual; stops when `|delta mu| < eps_p`
/// or after `t1_max` updates.
pub fn allocate(
    c: &[f64],
    p_max: f64,
    mu0: f64,
    eps_p: f64,
    t1_max: usize,
    rule: StepRule,
) -> Result<Allocation> {
    check_inputs(c, p_max)?;
    if !(mu0 > 0.0 && mu0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "initial multiplier must be positive, got {mu0}"
        )));
    }
    let mut mu = mu0;
    let mut omega0 = None;
    let mut iterations = 0;
    let mut converged = false;
    for t in 0..t1_max {
        let consumed = consumed_at(mu, c);
        let residual = p_max - consumed;
        if residual == 0.0 {
            converged = true;
            break;
        }
        let omega = match rule {
            StepRule::Curvature => (mu / consumed).min(0.5 * mu / residual.abs()),
            StepRule::Diminishing => {
                let w0 = *omega0.get_or_insert(0.5 * mu / residual.abs());
                w0 / ((t + 1) as f64).sqrt()
            }
        };
        let next = (mu - omega * residual).max(f64::MIN_POSITIVE);
        if !next.is_finite() {
            // best effort: keep the last finite multiplier
            break;
        }
        let delta = (next - mu).abs();
        mu = next;
        iterations += 1;
        if delta < eps_p {
            converged = true;
            break;
        }
    }
    let p = powers_at(mu, c);
    let residual = p_max - p.iter().zip(c).map(|(p, c)| p * c).sum::<f64>();
    Ok(Allocation {
        p,
        mu,
        iterations,
        converged,
        residual,
    })
}

/// Bracketing bisection on `mu`: expands from `mu0` by doubling/halving
/// (at most `MAX_DOUBLINGS` times) then bisects geometrically until the
/// relative residual or relative bracket width is below `tol`. The returned
/// point lies on the feasible side.
pub fn allocate_bisection(c: &[f64], p_max: f64, mu0: f64, tol: f64) -> Result<Allocation> {
    const MAX_DOUBLINGS: u32 = 60;
    check_inputs(c, p_max)?;
    let excess = |mu: f64| consumed_at(mu, c) - p_max;

    // lo: infeasible (excess > 0), hi: feasible.
    let (mut lo, mut hi);
    let mut steps = 0;
    if excess(mu0) > 0.0 {
        lo = mu0;
        hi = mu0 * 2.0;
        while excess(hi) > 0.0 {
            steps += 1;
            if steps > MAX_DOUBLINGS {
                return Err(Error::Bracket {
                    doublings: MAX_DOUBLINGS,
                });
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        hi = mu0;
        lo = mu0 * 0.5;
        while excess(lo) <= 0.0 {
            steps += 1;
            if steps > MAX_DOUBLINGS {
                return Err(Error::Bracket {
                    doublings: MAX_DOUBLINGS,
                });
            }
            hi = lo;
            lo *= 0.5;
        }
    }

    let mut iterations = steps as usize;
    while (hi - lo) / hi > tol && (excess(hi) / p_max).abs() > tol {
        let mid = (lo * hi).sqrt();
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p = powers_at(hi, c);
    Ok(Allocation {
        residual: -excess(hi),
        p,
        mu: hi,
        iterations,
        converged: true,
    })
}
