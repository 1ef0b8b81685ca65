//! Comparison schemes run on the same channel realization as the proposed solver.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::channel::{substream, Block, ChannelSet, C64};
use crate::error::{Error, Result};
use crate::rate::{PhaseConfig, RateMode, RateParams};
use crate::solver::{operate, run_loop, Allocator, LoopSpec, OpCounts, PhaseUpdate, SolverConfig, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    Proposed,
    IdealPhase,
    ShannonRate,
    ShannonIdealPhase,
    BinarySearch,
    RandomPhase,
    WithoutRis,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::Proposed,
        SchemeId::IdealPhase,
        SchemeId::ShannonRate,
        SchemeId::ShannonIdealPhase,
        SchemeId::BinarySearch,
        SchemeId::RandomPhase,
        SchemeId::WithoutRis,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::IdealPhase => "ideal_phase",
            SchemeId::ShannonRate => "shannon_rate",
            SchemeId::ShannonIdealPhase => "shannon_ideal_phase",
            SchemeId::BinarySearch => "binary_search",
            SchemeId::RandomPhase => "random_phase",
            SchemeId::WithoutRis => "without_ris",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.label() == s)
            .ok_or_else(|| {
                let known: Vec<_> = SchemeId::ALL.iter().map(|id| id.label()).collect();
                Error::Config(format!("unknown scheme '{s}', expected one of {}", known.join(", ")))
            })
    }
}

/// User with the strongest direct channel; ties go to the lower index.
pub fn reference_user(ch: &ChannelSet) -> usize {
    let mut best = 0;
    let mut gain = f64::NEG_INFINITY;
    for (m, h) in ch.h_d.iter().enumerate() {
        let g = h.norm_squared();
        if g > gain {
            gain = g;
            best = m;
        }
    }
    best
}

/// Wraps an angle into (-pi, pi].
fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t > PI {
        t - TAU
    } else {
        t
    }
}

/// Continuous phases co-phasing every RIS term of user `m` with its direct
/// term: `theta_f = arg(h_d^H w_m) - arg([h_R^H]_f) - arg([H_BR]_f w_m)`.
/// Zero-magnitude factors contribute phase 0 and an element with `h_R = 0`
/// gets phase 0.
pub fn ideal_phase(ch: &ChannelSet, w: &DMatrix<C64>, m: usize) -> Vec<f64> {
    let w_m = w.column(m);
    let direct = (ch.h_d[m].adjoint() * w_m)[0];
    let cascade = &ch.h_br * w_m;
    (0..ch.num_elements())
        .map(|f| {
            let hr = ch.h_r[m][f].conj();
            if hr == C64::from(0.0) {
                0.0
            } else {
                wrap(direct.arg() - hr.arg() - cascade[f].arg())
            }
        })
        .collect()
}

/// I.i.d. continuous phases in [0, 2pi).
pub fn random_phase<R: rand::Rng + ?Sized>(f: usize, rng: &mut R) -> PhaseConfig {
    let theta = (0..f)
        .map(|_| {
            let t = rng.random::<f64>() * TAU;
            if t < TAU {
                t
            } else {
                0.0
            }
        })
        .collect();
    PhaseConfig::continuous(theta)
}

/// Runs `scheme` on `ch`. `theta0` is the shared quantized starting point and
/// `seed` feeds the random-phase draw.
pub fn run_scheme(
    scheme: SchemeId,
    ch: &ChannelSet,
    theta0: &PhaseConfig,
    cfg: &SolverConfig,
    params: &RateParams,
    seed: u64,
) -> Result<SolverState> {
    let spec = |allocator, phase_update, mode| LoopSpec {
        allocator,
        phase_update,
        mode,
    };
    match scheme {
        SchemeId::Proposed => run_loop(ch, theta0, cfg, params, LoopSpec::PROPOSED),
        SchemeId::BinarySearch => run_loop(
            ch,
            theta0,
            cfg,
            params,
            spec(Allocator::Bisection, PhaseUpdate::LocalSearch, RateMode::Fbl),
        ),
        SchemeId::ShannonRate => run_loop(
            ch,
            theta0,
            cfg,
            params,
            spec(Allocator::Dual, PhaseUpdate::LocalSearch, RateMode::Shannon),
        ),
        SchemeId::IdealPhase => run_loop(
            ch,
            theta0,
            cfg,
            params,
            spec(Allocator::Dual, PhaseUpdate::IdealPhase, RateMode::Fbl),
        ),
        SchemeId::ShannonIdealPhase => run_loop(
            ch,
            theta0,
            cfg,
            params,
            spec(Allocator::Dual, PhaseUpdate::IdealPhase, RateMode::Shannon),
        ),
        SchemeId::WithoutRis => {
            let direct = ch.without_ris();
            let none = PhaseConfig::zeros(0, theta0.grid);
            run_loop(&direct, &none, cfg, params, LoopSpec::PROPOSED)
        }
        SchemeId::RandomPhase => {
            let mut rng = substream(seed, Block::RandomPhase, 0);
            let theta = random_phase(ch.num_elements(), &mut rng);
            let op = operate(ch, &theta.theta, cfg, params, Allocator::Dual, RateMode::Fbl)?;
            let iters = op.alloc.iterations as u64;
            Ok(SolverState {
                w: op.w,
                p: op.alloc.p,
                mu: op.alloc.mu,
                theta,
                eps: params.eps.clone(),
                trace: vec![op.rate.total],
                op_counts: OpCounts {
                    inner_iterations: iters,
                    max_inner_per_call: iters,
                    allocations: 1,
                    ..OpCounts::default()
                },
                converged: true,
                allocation_converged: op.alloc.converged,
                rate: op.rate,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    use crate::channel::complex_gaussian;
    use crate::rate::{equivalent_channel, PhaseGrid};
    use crate::solver::initial_phases;

    fn random_channels(m: usize, n: usize, f: usize, seed: u64) -> ChannelSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |r, c, s: f64| DMatrix::from_fn(r, c, |_, _| complex_gaussian(&mut rng, s));
        let h_d = (0..m).map(|_| DVector::from_column_slice(g(n, 1, 1.0).as_slice())).collect();
        let h_br = g(f, n, 0.1);
        let h_r = (0..m).map(|_| DVector::from_column_slice(g(f, 1, 1.0).as_slice())).collect();
        ChannelSet { h_d, h_br, h_r }
    }

    fn scalar(h_d: C64, h_r: C64, h_br: C64) -> ChannelSet {
        ChannelSet {
            h_d: vec![DVector::from_element(1, h_d)],
            h_br: DMatrix::from_element(1, 1, h_br),
            h_r: vec![DVector::from_element(1, h_r)],
        }
    }

    #[test]
    fn scalar_co_phasing_doubles_amplitude() {
        // h_R^H = e^{j pi/4}
        let ch = scalar(C64::from(1.0), C64::from_polar(1.0, -FRAC_PI_4), C64::from(1.0));
        let w = DMatrix::from_element(1, 1, C64::from(1.0));
        let theta = ideal_phase(&ch, &w, 0);
        assert!((theta[0] + FRAC_PI_4).abs() < 1e-15);
        let h = equivalent_channel(&ch, &theta, 0);
        assert!(((h * &w)[0].norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_ris_link_gives_zero_phases() {
        let mut ch = random_channels(2, 3, 5, 1);
        ch.h_r[1].fill(C64::from(0.0));
        let w = DMatrix::from_element(3, 2, C64::new(0.2, 0.1));
        assert_eq!(ideal_phase(&ch, &w, 1), vec![0.0; 5]);
    }

    #[test]
    fn ideal_phase_dominates_quantized_choices() {
        let grid = PhaseGrid::new(2).unwrap();
        for seed in 0..20 {
            let ch = random_channels(3, 4, 4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let w = DMatrix::from_fn(4, 3, |_, _| complex_gaussian(&mut rng, 1.0));
            let m = reference_user(&ch);
            let ideal = (equivalent_channel(&ch, &ideal_phase(&ch, &w, m), m) * w.column(m))[0].norm();
            for code in 0..256usize {
                let th: Vec<f64> = (0..4).map(|f| grid.value(code >> (2 * f) & 3)).collect();
                let q = (equivalent_channel(&ch, &th, m) * w.column(m))[0].norm();
                assert!(ideal >= q - 1e-12);
            }
        }
    }

    #[test]
    fn random_phase_range_and_determinism() {
        let a = random_phase(50, &mut substream(9, Block::RandomPhase, 0));
        let b = random_phase(50, &mut substream(9, Block::RandomPhase, 0));
        assert_eq!(a, b);
        assert!(a.theta.iter().all(|t| (0.0..TAU).contains(t)));
        assert!(a.grid.is_none());
    }

    #[test]
    fn reference_user_is_strongest_direct_link() {
        let mut ch = random_channels(3, 2, 1, 0);
        ch.h_d[2] *= C64::from(10.0);
        assert_eq!(reference_user(&ch), 2);
    }

    #[test]
    fn scheme_labels_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.label().parse::<SchemeId>().unwrap(), id);
        }
        assert!("nope".parse::<SchemeId>().is_err());
    }

    #[test]
    fn all_schemes_run_and_shannon_dominates() {
        let grid = PhaseGrid::new(2).unwrap();
        let params = RateParams::new(100.0, vec![1e-4; 3], 1e-4, 0.01).unwrap();
        let cfg = SolverConfig::default();
        for seed in 0..5 {
            let ch = random_channels(3, 4, 8, seed);
            let theta0 = initial_phases(8, grid, seed);
            let run = |s| run_scheme(s, &ch, &theta0, &cfg, &params, seed).unwrap();
            let proposed = run(SchemeId::Proposed);
            let shannon = run(SchemeId::ShannonRate);
            let bisect = run(SchemeId::BinarySearch);
            assert!(shannon.rate.total >= proposed.rate.total);
            assert!((bisect.rate.total - proposed.rate.total).abs() <= 1e-5 * proposed.rate.total);
            for s in [SchemeId::IdealPhase, SchemeId::ShannonIdealPhase, SchemeId::RandomPhase] {
                assert!(run(s).rate.total.is_finite());
            }
            let without = run(SchemeId::WithoutRis);
            let zeroed = ChannelSet {
                h_br: DMatrix::zeros(8, 4),
                ..ch.clone()
            };
            let reference = run_scheme(SchemeId::Proposed, &zeroed, &theta0, &cfg, &params, seed).unwrap();
            assert!((without.rate.total - reference.rate.total).abs() < 1e-9);
        }
    }
}
