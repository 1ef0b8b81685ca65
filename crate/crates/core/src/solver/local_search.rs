//! Single-pass coordinate search over quantized RIS phases.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, RowDVector};

use super::zf::zf_weights_fast;
use crate::channel::{ChannelSet, C64};
use crate::error::{Error, Result};
use crate::rate::{equivalent_channels, fbl_rate_q, sinr_from_channels, PhaseConfig, RateMode};

/// Sum-rate objective evaluated on stacked equivalent channels `H` (`M x N_B`).
pub trait PhaseObjective {
    fn value(&self, h: &DMatrix<C64>) -> f64;
}

/// Per-user rate settings shared by the objectives.
#[derive(Debug, Clone)]
pub struct RateContext {
    pub sigma2: f64,
    pub blocklength: f64,
    pub q_inv: Vec<f64>,
    pub mode: RateMode,
}

impl RateContext {
    fn sum_rate(&self, sinrs: impl Iterator<Item = f64>) -> f64 {
        sinrs
            .zip(&self.q_inv)
            .map(|(g, &q)| fbl_rate_q(g, self.blocklength, q, self.mode).max(0.0))
            .sum()
    }
}

/// Re-derives ZF and the multiplier's powers `1 / (mu c_m ln 2)` for every
/// candidate, so interference stays nulled and `gamma_m = p_m / sigma2`.
#[derive(Debug, Clone)]
pub struct ZfAdaptive {
    pub mu: f64,
    pub rates: RateContext,
}

impl PhaseObjective for ZfAdaptive {
    fn value(&self, h: &DMatrix<C64>) -> f64 {
        match zf_weights_fast(h) {
            Some(c) => self.rates.sum_rate(
                c.iter()
                    .map(|cm| (1.0 / (self.mu * cm * LN_2)).max(0.0) / self.rates.sigma2),
            ),
            None => f64::NEG_INFINITY,
        }
    }
}

/// Holds the beamformer fixed while phases move.
#[derive(Debug, Clone)]
pub struct FixedBeamformer {
    pub w: DMatrix<C64>,
    pub rates: RateContext,
}

impl PhaseObjective for FixedBeamformer {
    fn value(&self, h: &DMatrix<C64>) -> f64 {
        let m = h.nrows();
        self.rates
            .sum_rate((0..m).map(|u| sinr_from_channels(h, &self.w, u, self.rates.sigma2)))
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub phases: PhaseConfig,
    pub value: f64,
    /// Objective evaluations, always `F * E`.
    pub evaluations: u64,
    /// Best value after each coordinate.
    pub trace: Vec<f64>,
}

/// Per-element contribution `h_{R,m}^* [H_BR]_f` for all users, as the outer
/// product `a_f b_f` with `a_f` a column over users and `b_f` the H_BR row.
struct RankOne {
    user_coef: Vec<Vec<C64>>,
}

impl RankOne {
    fn new(ch: &ChannelSet) -> Self {
        let f = ch.num_elements();
        let user_coef = (0..f)
            .map(|e| ch.h_r.iter().map(|hr| hr[e].conj()).collect())
            .collect();
        Self { user_coef }
    }

    fn apply(&self, h: &mut DMatrix<C64>, row: &RowDVector<C64>, f: usize, delta: C64) {
        for (m, a) in self.user_coef[f].iter().enumerate() {
            let s = a * delta;
            for j in 0..h.ncols() {
                h[(m, j)] += row[j] * s;
            }
        }
    }
}

/// One pass over `f = 1..F`: every grid value is tried for `theta_f` with the
/// rest fixed and the maximizer is kept before moving on. Exact ties keep the
/// incumbent, otherwise the lowest grid index wins.
pub fn phase_local_search(
    ch: &ChannelSet,
    phase0: &PhaseConfig,
    objective: &dyn PhaseObjective,
) -> Result<SearchOutcome> {
    let grid = phase0
        .grid
        .ok_or_else(|| Error::InvalidArgument("local search needs a quantized phase grid".into()))?;
    phase0.validate()?;
    if phase0.len() != ch.num_elements() {
        return Err(Error::InvalidArgument(format!(
            "{} phases for {} RIS elements",
            phase0.len(),
            ch.num_elements()
        )));
    }

    let levels: Vec<f64> = grid.values().collect();
    let rotors: Vec<C64> = levels.iter().map(|&t| C64::from_polar(1.0, t)).collect();
    let rank_one = RankOne::new(ch);
    let mut theta = phase0.theta.clone();
    let mut h = equivalent_channels(ch, &theta);
    let mut evaluations = 0u64;
    let mut trace = Vec::with_capacity(theta.len());
    let mut values = vec![0.0; levels.len()];
    let mut best_value = None;

    // f indexes theta, the rows of H_BR and the rank-one update together
    #[allow(clippy::needless_range_loop)]
    for f in 0..theta.len() {
        let row = ch.h_br.row(f).clone_owned();
        let incumbent = grid.index_of(theta[f]).expect("validated on grid");
        let current = rotors[incumbent];
        for (k, v) in values.iter_mut().enumerate() {
            if k == incumbent {
                *v = objective.value(&h);
            } else {
                let mut cand = h.clone();
                rank_one.apply(&mut cand, &row, f, rotors[k] - current);
                *v = objective.value(&cand);
            }
            evaluations += 1;
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let chosen = if values[incumbent] >= max {
            incumbent
        } else {
            values.iter().position(|v| *v == max).unwrap_or(incumbent)
        };
        if chosen != incumbent {
            rank_one.apply(&mut h, &row, f, rotors[chosen] - current);
            theta[f] = levels[chosen];
        }
        best_value = Some(values[chosen]);
        trace.push(values[chosen]);
    }

    let value = match best_value {
        Some(v) => v,
        None => objective.value(&h),
    };
    Ok(SearchOutcome {
        phases: PhaseConfig {
            theta,
            grid: Some(grid),
        },
        value,
        evaluations,
        trace,
    })
}

/// Best configuration over all `E^F` phase vectors; ties go to the first in
/// lexicographic index order. Exponential, for validation on small `F` only.
pub fn exhaustive_search(
    ch: &ChannelSet,
    grid: crate::rate::PhaseGrid,
    objective: &dyn PhaseObjective,
) -> (PhaseConfig, f64) {
    let f = ch.num_elements();
    let e = grid.levels();
    let mut idx = vec![0usize; f];
    let mut best = (vec![0.0; f], f64::NEG_INFINITY);
    loop {
        let theta: Vec<f64> = idx.iter().map(|&k| grid.value(k)).collect();
        let v = objective.value(&equivalent_channels(ch, &theta));
        if v > best.1 {
            best = (theta, v);
        }
        let mut pos = 0;
        loop {
            if pos == f {
                return (
                    PhaseConfig {
                        theta: best.0,
                        grid: Some(grid),
                    },
                    best.1,
                );
            }
            idx[pos] += 1;
            if idx[pos] < e {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
