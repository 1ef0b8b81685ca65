//! Alternating optimization of the ZF beamformer, the power split and the
//! quantized RIS phases.

mod local_search;
mod power;
mod zf;

use nalgebra::DMatrix;
use rand::RngExt;
use serde::{Deserialize, Serialize};

pub use local_search::{
    exhaustive_search, phase_local_search, FixedBeamformer, PhaseObjective, RateContext,
    SearchOutcome, ZfAdaptive,
};
pub use power::{allocate, allocate_bisection, default_mu0, powers_at, Allocation, StepRule};
pub use zf::{
    condition_number, zf_beamformer, zf_directions, zf_weights_fast, ZfDirections, MAX_CONDITION,
};

use crate::channel::{substream, Block, ChannelSet, C64};
use crate::error::{Error, Result};
use crate::rate::{
    equivalent_channels, sinr_from_channels, PhaseConfig, PhaseGrid, RateMode, RateParams, SumRate,
};

/// How the phase block is scored during the coordinate search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseObjectiveKind {
    /// Re-run ZF and the multiplier's power split for every candidate.
    #[default]
    ZfAdaptive,
    /// Keep the previous beamformer fixed.
    FixedBeamformer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Maximum inner (multiplier) iterations per allocation.
    pub t1_max: usize,
    pub eps_p: f64,
    pub xi: f64,
    pub step: StepRule,
    /// Starting multiplier; `None` uses `1 / (P_max ln 2)`.
    pub mu0: Option<f64>,
    /// Total transmit power (W).
    pub p_max: f64,
    pub outer_max: usize,
    pub phase_objective: PhaseObjectiveKind,
    /// Relative stopping tolerance of the bisection allocator.
    pub bisection_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t1_max: 500,
            eps_p: 1e-5,
            xi: 1e-5,
            step: StepRule::Curvature,
            mu0: None,
            p_max: 1.0,
            outer_max: 50,
            phase_objective: PhaseObjectiveKind::ZfAdaptive,
            bisection_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_p", self.eps_p),
            ("xi", self.xi),
            ("p_max", self.p_max),
            ("bisection_tol", self.bisection_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(mu) = self.mu0 {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidArgument(format!("mu0 must be positive, got {mu}")));
            }
        }
        if self.t1_max == 0 || self.outer_max == 0 {
            return Err(Error::InvalidArgument(
                "iteration limits must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn mu_start(&self) -> f64 {
        self.mu0.unwrap_or_else(|| default_mu0(self.p_max))
    }
}

/// Random starting phases on `grid`, from the trial's own sub-stream so the
/// first `F` draws are shared across RIS sizes.
pub fn initial_phases(f: usize, grid: PhaseGrid, seed: u64) -> PhaseConfig {
    let mut rng = substream(seed, Block::InitialPhase, 0);
    let theta = (0..f).map(|_| grid.from_unit(rng.random::<f64>())).collect();
    PhaseConfig {
        theta,
        grid: Some(grid),
    }
}

/// Per-user PEPs: every user runs at the maximum allowed error probability,
/// since the rate is strictly increasing in it.
pub fn fix_pep(eps_max: f64, users: usize) -> Result<Vec<f64>> {
    if !(eps_max > 0.0 && eps_max < 1.0) {
        return Err(Error::Domain {
            what: "maximum packet error probability",
            value: eps_max,
        });
    }
    Ok(vec![eps_max; users])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocator {
    /// Projected subgradient on the multiplier.
    Dual,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseUpdate {
    LocalSearch,
    /// Continuous co-phasing towards the strongest direct-link user.
    IdealPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub allocator: Allocator,
    pub phase_update: PhaseUpdate,
    pub mode: RateMode,
}

impl LoopSpec {
    pub const PROPOSED: Self = Self {
        allocator: Allocator::Dual,
        phase_update: PhaseUpdate::LocalSearch,
        mode: RateMode::Fbl,
    };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub inner_iterations: u64,
    /// Largest inner iteration count of a single allocation.
    pub max_inner_per_call: u64,
    pub allocations: u64,
    pub phase_evaluations: u64,
    pub outer_iterations: u64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub w: DMatrix<C64>,
    pub p: Vec<f64>,
    pub mu: f64,
    pub theta: PhaseConfig,
    pub eps: Vec<f64>,
    /// Sum rate after the initial allocation, then after each outer iteration.
    pub trace: Vec<f64>,
    pub op_counts: OpCounts,
    pub converged: bool,
    /// Every allocation met its multiplier tolerance.
    pub allocation_converged: bool,
    pub rate: SumRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub outer_iterations: u64,
    pub inner_iterations: u64,
    pub max_inner_per_call: u64,
    pub phase_evaluations: u64,
    /// `outer_iterations * F * E` for the coordinate search.
    pub expected_phase_evaluations: u64,
}

pub fn complexity_counters(state: &SolverState) -> ComplexityReport {
    let c = state.op_counts;
    let per_pass = match state.theta.grid {
        Some(g) => (state.theta.len() * g.levels()) as u64,
        None => 0,
    };
    ComplexityReport {
        outer_iterations: c.outer_iterations,
        inner_iterations: c.inner_iterations,
        max_inner_per_call: c.max_inner_per_call,
        phase_evaluations: c.phase_evaluations,
        expected_phase_evaluations: c.outer_iterations * per_pass,
    }
}

/// ZF directions at `theta` and the dual power split over them.
pub fn power_allocation(
    ch: &ChannelSet,
    theta: &[f64],
    cfg: &SolverConfig,
) -> Result<(Allocation, ZfDirections)> {
    let dirs = zf_directions(&equivalent_channels(ch, theta))?;
    let alloc = allocate(&dirs.c, cfg.p_max, cfg.mu_start(), cfg.eps_p, cfg.t1_max, cfg.step)?;
    Ok((alloc, dirs))
}

/// Same as [`power_allocation`] but bisecting on the multiplier.
pub fn binary_search_allocation(
    ch: &ChannelSet,
    theta: &[f64],
    cfg: &SolverConfig,
) -> Result<(Allocation, ZfDirections)> {
    let dirs = zf_directions(&equivalent_channels(ch, theta))?;
    let alloc = allocate_bisection(&dirs.c, cfg.p_max, cfg.mu_start(), cfg.bisection_tol)?;
    Ok((alloc, dirs))
}

/// Beamformer, allocation and reported sum rate at fixed phases.
#[derive(Debug, Clone)]
pub struct Operating {
    pub w: DMatrix<C64>,
    pub alloc: Allocation,
    pub rate: SumRate,
}

pub fn operate(
    ch: &ChannelSet,
    theta: &[f64],
    cfg: &SolverConfig,
    params: &RateParams,
    allocator: Allocator,
    mode: RateMode,
) -> Result<Operating> {
    let (alloc, dirs) = match allocator {
        Allocator::Dual => power_allocation(ch, theta, cfg)?,
        Allocator::Bisection => binary_search_allocation(ch, theta, cfg)?,
    };
    let w = dirs.assemble(&alloc.p);
    let h = equivalent_channels(ch, theta);
    let sinrs: Vec<f64> = (0..ch.num_users())
        .map(|m| sinr_from_channels(&h, &w, m, params.sigma2))
        .collect();
    let rate = SumRate::from_sinrs(&sinrs, params.blocklength, &params.q_inv_per_user()?, mode);
    Ok(Operating { w, alloc, rate })
}

/// The alternating loop of the proposed scheme.
pub fn alternating_optimize(
    ch: &ChannelSet,
    theta0: &PhaseConfig,
    cfg: &SolverConfig,
    params: &RateParams,
) -> Result<SolverState> {
    run_loop(ch, theta0, cfg, params, LoopSpec::PROPOSED)
}

/// Alternates (a) ZF plus power allocation at the current phases and
/// (b) a phase update at the current beamformer, until successive sum rates
/// differ by less than `xi` or `outer_max` passes have run.
pub fn run_loop(
    ch: &ChannelSet,
    theta0: &PhaseConfig,
    cfg: &SolverConfig,
    params: &RateParams,
    spec: LoopSpec,
) -> Result<SolverState> {
    cfg.validate()?;
    params.validate()?;
    ch.validate()?;
    if params.eps.len() != ch.num_users() {
        return Err(Error::InvalidArgument(format!(
            "{} PEPs for {} users",
            params.eps.len(),
            ch.num_users()
        )));
    }
    if theta0.len() != ch.num_elements() {
        return Err(Error::InvalidArgument(format!(
            "{} phases for {} RIS elements",
            theta0.len(),
            ch.num_elements()
        )));
    }

    let mut counts = OpCounts::default();
    let mut allocation_converged = true;
    let mut step = |theta: &[f64], counts: &mut OpCounts| -> Result<Operating> {
        let op = operate(ch, theta, cfg, params, spec.allocator, spec.mode)?;
        counts.inner_iterations += op.alloc.iterations as u64;
        counts.max_inner_per_call = counts.max_inner_per_call.max(op.alloc.iterations as u64);
        counts.allocations += 1;
        allocation_converged &= op.alloc.converged;
        Ok(op)
    };

    let rates = RateContext {
        sigma2: params.sigma2,
        blocklength: params.blocklength,
        q_inv: params.q_inv_per_user()?,
        mode: spec.mode,
    };
    let mut theta = theta0.clone();
    let mut op = step(&theta.theta, &mut counts)?;
    let mut trace = vec![op.rate.total];
    let mut converged = false;

    for _ in 0..cfg.outer_max {
        theta = match spec.phase_update {
            PhaseUpdate::LocalSearch => {
                let outcome = match cfg.phase_objective {
                    PhaseObjectiveKind::ZfAdaptive => {
                        let obj = ZfAdaptive {
                            mu: op.alloc.mu,
                            rates: rates.clone(),
                        };
                        phase_local_search(ch, &theta, &obj)?
                    }
                    PhaseObjectiveKind::FixedBeamformer => {
                        let obj = FixedBeamformer {
                            w: op.w.clone(),
                            rates: rates.clone(),
                        };
                        phase_local_search(ch, &theta, &obj)?
                    }
                };
                counts.phase_evaluations += outcome.evaluations;
                outcome.phases
            }
            PhaseUpdate::IdealPhase => {
                let reference = crate::baselines::reference_user(ch);
                PhaseConfig::continuous(crate::baselines::ideal_phase(ch, &op.w, reference))
            }
        };
        op = step(&theta.theta, &mut counts)?;
        counts.outer_iterations += 1;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(op.rate.total);
        if (op.rate.total - prev).abs() < cfg.xi {
            converged = true;
            break;
        }
    }

    Ok(SolverState {
        w: op.w,
        p: op.alloc.p,
        mu: op.alloc.mu,
        theta,
        eps: params.eps.clone(),
        trace,
        op_counts: counts,
        converged,
        allocation_converged,
        rate: op.rate,
    })
}
